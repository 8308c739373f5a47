#include "masim/harness.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <limits>
#include <ostream>
#include <sstream>
#include <thread>

#include "masim/initpoint.hpp"

namespace masim {

void ExperimentConfig::validate() const {
    if (num_users < 1 || num_antennas < 1)
        throw ConfigError("experiment: K >= 1 and M >= 1 required");
    if (snr_grid_db.empty()) throw ConfigError("experiment: empty SNR grid");
    if (n_realizations < 1) throw ConfigError("experiment: n_realizations >= 1");
    if (strategies.empty()) throw ConfigError("experiment: no strategies");
    for (const auto& s : strategies) s.validate(num_users);
    if (imperfect_csit && n_saa_samples < 1)
        throw ConfigError("experiment: n_saa_samples >= 1 under imperfect CSIT");
    const Rational a = alpha_rational();
    if (a < Rational(0) || Rational(1) < a)
        throw ConfigError("experiment: alpha must be in [0, 1]");
}

std::vector<StrategyConfig> parse_strategies(const std::string& spec) {
    std::vector<StrategyConfig> out;
    std::stringstream ss(spec);
    std::string item;
    while (std::getline(ss, item, ',')) {
        if (item.empty()) continue;
        StrategyConfig cfg;
        const auto colon = item.find(':');
        if (colon != std::string::npos) {
            cfg.kind = strategy_from_string(item.substr(0, colon));
            cfg.num_groups = std::stoi(item.substr(colon + 1));
        } else {
            cfg.kind = strategy_from_string(item);
        }
        out.push_back(cfg);
    }
    if (out.empty()) throw ConfigError("no strategies in: " + spec);
    return out;
}

std::vector<double> parse_snr_grid(const std::string& spec) {
    std::vector<double> grid;
    if (spec.find(':') != std::string::npos) {
        double start = 0, step = 0, stop = 0;
        if (std::sscanf(spec.c_str(), "%lf:%lf:%lf", &start, &step, &stop) != 3 ||
            step <= 0)
            throw ConfigError("bad SNR range: " + spec);
        for (double v = start; v <= stop + 1e-9; v += step) grid.push_back(v);
    } else {
        std::stringstream ss(spec);
        std::string item;
        while (std::getline(ss, item, ','))
            if (!item.empty()) grid.push_back(std::stod(item));
    }
    if (grid.empty()) throw ConfigError("empty SNR grid: " + spec);
    return grid;
}

const SummaryRow& ResultTable::summary(const std::string& strategy,
                                       double snr_db) const {
    for (const auto& s : summaries)
        if (s.strategy == strategy && std::abs(s.snr_db - snr_db) < 1e-9) return s;
    throw UsageError("no summary for " + strategy + " at " + std::to_string(snr_db));
}

namespace {

constexpr std::uint64_t kVarTag = 0x7a12c0ffULL;
constexpr std::uint64_t kChanTag = 0xc4a77e1ULL;
constexpr std::uint64_t kCsitTag = 0xe5717a9ULL;

std::uint64_t cell_seed(const ExperimentConfig& cfg, int realization,
                        int snr_index) {
    return mix_seed(cfg.seed, static_cast<std::uint64_t>(realization),
                    static_cast<std::uint64_t>(snr_index));
}

// Greedy zero-forcing user selection: add the user whose ZF + water-filled
// powers raise the estimated sum value the most, stop when adding hurts.
// Returns empty when nothing is feasible.
PrecoderSet greedy_zf_init(const ChannelSet& cs, const StreamLayout& layout,
                           const std::vector<int>& candidates, double power) {
    const int M = cs.num_antennas;
    struct Eval {
        double value = -1.0;
        std::vector<Cvec> dirs;
        std::vector<double> powers;
    };
    const auto evaluate = [&](const std::vector<int>& serve) {
        Eval ev;
        ev.dirs.resize(serve.size());
        std::vector<double> gains(serve.size());
        for (std::size_t i = 0; i < serve.size(); ++i) {
            std::vector<int> nulls;
            for (int u : serve)
                if (u != serve[i]) nulls.push_back(u);
            ev.dirs[i] = zfbf_direction(cs, serve[i], nulls);
            gains[i] = std::norm(cs.estimates[serve[i]].dot(ev.dirs[i]));
        }
        double lo = 0.0, hi = power + 1.0;
        for (int it = 0; it < 200; ++it) {
            const double level = 0.5 * (lo + hi);
            double used = 0.0;
            for (double g : gains) used += std::max(0.0, level - 1.0 / g);
            (used > power ? hi : lo) = level;
        }
        ev.powers.resize(serve.size());
        ev.value = 0.0;
        for (std::size_t i = 0; i < serve.size(); ++i) {
            ev.powers[i] = std::max(0.0, 0.5 * (lo + hi) - 1.0 / gains[i]);
            ev.value += std::log2(1.0 + ev.powers[i] * gains[i]);
        }
        return ev;
    };

    std::vector<int> serve;
    Eval best;
    while (static_cast<int>(serve.size()) < std::min<int>(M, candidates.size())) {
        Eval round_best;
        int pick = -1;
        for (int c : candidates) {
            if (std::find(serve.begin(), serve.end(), c) != serve.end()) continue;
            std::vector<int> trial = serve;
            trial.push_back(c);
            try {
                const Eval ev = evaluate(trial);
                if (ev.value > round_best.value) {
                    round_best = ev;
                    pick = c;
                }
            } catch (const std::exception&) {
            }
        }
        if (pick < 0 || round_best.value <= best.value + 1e-12) break;
        serve.push_back(pick);
        best = std::move(round_best);
    }
    PrecoderSet ps;
    ps.power_budget = power;
    if (serve.empty()) return ps;
    ps.private_precoders.assign(layout.num_users, Cvec::Zero(M));
    for (std::size_t i = 0; i < serve.size(); ++i)
        ps.private_precoders[serve[i]] = std::sqrt(best.powers[i]) * best.dirs[i];
    if (layout.has_common()) ps.common_precoder = Cvec::Zero(M);
    return ps;
}

// Initialization portfolio: MRT+SVD plus the multiplexing-gain achievability
// construction for the strategy/objective at hand (ZFBF directions with the
// proofs' power cascades), plus greedy ZF user selection for sum objectives.
// The AO keeps whichever start ends higher.
std::vector<PrecoderSet> initial_points(const ChannelSet& cs_slot,
                                        const StreamLayout& layout,
                                        const StrategyConfig& strategy,
                                        const ExperimentConfig& cfg, double power,
                                        std::uint64_t seed) {
    std::vector<PrecoderSet> inits;
    inits.push_back(mrt_svd_init(cs_slot, layout, power));
    const Metric metric =
        cfg.objective == Objective::sum ? Metric::sum : Metric::mmf;
    const double alpha = cfg.imperfect_csit ? cfg.alpha_rational().value() : 1.0;
    try {
        const AchievabilityPlan plan =
            achievability_schedule(strategy.kind, metric, cfg.num_antennas,
                                   cfg.num_users, strategy.num_groups, alpha);
        inits.push_back(realize_schedule(plan, cs_slot, power, mix_seed(seed, 0xd0f)));
    } catch (const std::exception&) {
        // Constructions outside their regime are simply not offered.
    }
    if (cfg.objective == Objective::sum) {
        std::vector<int> candidates;
        if (strategy.kind == StrategyKind::noma) {
            const int g = cfg.num_users / strategy.num_groups;
            for (int i = 0; i < strategy.num_groups; ++i) candidates.push_back(i * g);
        } else {
            for (int k = 0; k < cfg.num_users; ++k) candidates.push_back(k);
        }
        PrecoderSet greedy = greedy_zf_init(cs_slot, layout, candidates, power);
        if (!greedy.private_precoders.empty()) inits.push_back(std::move(greedy));
    }
    return inits;
}

std::vector<double> cell_variances(const ExperimentConfig& cfg,
                                   std::uint64_t seed) {
    std::vector<double> variances(cfg.num_users, 1.0);
    if (cfg.variance_mode == ExperimentConfig::VarianceMode::uniform_range) {
        Pcg32 rng(mix_seed(seed, kVarTag));
        for (double& v : variances) v = 0.1 + 0.9 * rng.uniform();
    }
    return variances;
}

CellResult run_cell(const ExperimentConfig& cfg, const StrategyConfig& strategy,
                    int realization, int snr_index) {
    CellResult cell;
    cell.strategy = strategy.name();
    cell.realization = realization;
    cell.snr_db = cfg.snr_grid_db[snr_index];
    cell.cell_seed = cell_seed(cfg, realization, snr_index);
    const double power = db_to_linear(cell.snr_db);

    try {
        ChannelSet cs = experiment_channels(cfg, realization, snr_index);
        CsitModel model{cfg.alpha_rational().value(), power, {}};
        if (cfg.imperfect_csit)
            cs = apply_csit_error(cs, model, mix_seed(cell.cell_seed, kCsitTag));

        SolveOptions opts = cfg.solver;
        opts.seed = cell.cell_seed;

        if (strategy.kind == StrategyKind::oma) {
            if (!cfg.imperfect_csit) {
                cell.report = oma_rates(cs, power);
            } else {
                const auto samples = sample_conditional(
                    cs, model, cfg.n_saa_samples, mix_seed(opts.seed, 0x5aa5aa5aULL));
                const PrecoderSet ps = oma_precoders(cs, power);
                const StrategyConfig oma_cfg{StrategyKind::oma, 1};
                cell.report = ergodic_rates(samples, ps,
                                            stream_layout(oma_cfg, cfg.num_users));
            }
            return cell;
        }

        // Slot ordering: NOMA re-indexes each group by descending estimated
        // channel norm (the transmitter only knows the estimates).
        std::vector<int> slots(cfg.num_users);
        for (int i = 0; i < cfg.num_users; ++i) slots[i] = i;
        if (strategy.kind == StrategyKind::noma) {
            const Grouping grouping = build_grouping(cfg.num_users, strategy.num_groups);
            slots = flatten_order(decoding_order(cs, grouping, true));
        }
        const ChannelSet cs_slot = reindex_users(cs, slots);
        const StreamLayout layout = stream_layout(strategy, cfg.num_users);

        const auto best_solve = [&](const StreamLayout& lay,
                                    const std::vector<PrecoderSet>& inits) {
            SolveResult best;
            bool have = false;
            for (const PrecoderSet& init : inits) {
                SolveResult r;
                if (!cfg.imperfect_csit)
                    r = ao_solve(cs_slot, lay, cfg.objective, init, opts);
                else
                    r = saa_solve(cs_slot, model, cfg.n_saa_samples, lay,
                                  cfg.objective, init, opts);
                const double obj = cfg.objective == Objective::sum
                                       ? r.report.sum_rate
                                       : r.report.mmf_rate;
                const double cur = cfg.objective == Objective::sum
                                       ? best.report.sum_rate
                                       : best.report.mmf_rate;
                if (!have || obj > cur) {
                    best = std::move(r);
                    have = true;
                }
            }
            return best;
        };

        std::vector<PrecoderSet> inits =
            initial_points(cs_slot, layout, strategy, cfg, power, cell.cell_seed);
        if (strategy.kind == StrategyKind::rs1) {
            // MU-LP is a subscheme of 1-layer RS: seeding RS from the solved
            // MU-LP precoders with the common stream off guarantees the
            // superset property cell by cell.
            const StrategyConfig mulp_cfg{StrategyKind::mulp, 1};
            const StreamLayout mulp_layout = stream_layout(mulp_cfg, cfg.num_users);
            const SolveResult mulp = best_solve(
                mulp_layout, initial_points(cs_slot, mulp_layout, mulp_cfg, cfg,
                                            power, cell.cell_seed));
            PrecoderSet seeded = mulp.precoders;
            seeded.common_precoder = Cvec::Zero(cfg.num_antennas);
            inits.push_back(std::move(seeded));
        }
        const SolveResult result = best_solve(layout, inits);

        // Map per-user rates back to the original user indexing.
        cell.report = result.report;
        for (int i = 0; i < cfg.num_users; ++i) {
            cell.report.per_user[slots[i]] = result.report.per_user[i];
            if (!result.report.common_alloc.empty())
                cell.report.common_alloc[slots[i]] = result.report.common_alloc[i];
        }
    } catch (const std::exception& e) {
        cell.error = e.what();
        cell.report = RateReport{};
        cell.report.per_user.assign(cfg.num_users,
                                    std::numeric_limits<double>::quiet_NaN());
        cell.report.sum_rate = cell.report.mmf_rate =
            std::numeric_limits<double>::quiet_NaN();
        cell.report.converged = false;
    }
    return cell;
}

int thread_count(const ExperimentConfig& cfg, std::size_t cells) {
    int n = cfg.threads;
    if (n <= 0) {
        if (const char* env = std::getenv("MASIM_THREADS")) n = std::atoi(env);
        if (n <= 0) n = static_cast<int>(std::thread::hardware_concurrency());
        if (n <= 0) n = 1;
    }
    return std::min<int>(n, static_cast<int>(cells));
}

}  // namespace

ChannelSet experiment_channels(const ExperimentConfig& cfg, int realization,
                               int snr_index) {
    // Channels are fixed per realization and swept over SNR (the figures'
    // protocol); only CSIT errors and solver randomness vary with the SNR
    // index through the per-cell seed.
    (void)snr_index;
    const std::uint64_t seed =
        mix_seed(cfg.seed, static_cast<std::uint64_t>(realization));
    return sample_channels(cfg.num_users, cfg.num_antennas,
                           cell_variances(cfg, seed), mix_seed(seed, kChanTag));
}

ResultTable run_experiment(const ExperimentConfig& cfg) {
    cfg.validate();
    ResultTable table;
    table.num_users = cfg.num_users;
    table.alpha = cfg.imperfect_csit ? cfg.alpha : "1";

    struct Cell {
        int realization, snr_index, strategy_index;
    };
    std::vector<Cell> cells;
    for (int r = 0; r < cfg.n_realizations; ++r)
        for (std::size_t si = 0; si < cfg.snr_grid_db.size(); ++si)
            for (std::size_t st = 0; st < cfg.strategies.size(); ++st)
                cells.push_back({r, static_cast<int>(si), static_cast<int>(st)});
    table.rows.resize(cells.size());

    const int workers = thread_count(cfg, cells.size());
    std::atomic<std::size_t> next{0};
    const auto work = [&] {
        for (std::size_t i = next.fetch_add(1); i < cells.size();
             i = next.fetch_add(1)) {
            const Cell& c = cells[i];
            table.rows[i] =
                run_cell(cfg, cfg.strategies[c.strategy_index], c.realization,
                         c.snr_index);
        }
    };
    if (workers <= 1) {
        work();
    } else {
        std::vector<std::thread> pool;
        for (int t = 0; t < workers; ++t) pool.emplace_back(work);
        for (auto& t : pool) t.join();
    }

    for (std::size_t si = 0; si < cfg.snr_grid_db.size(); ++si) {
        for (const auto& strategy : cfg.strategies) {
            SummaryRow s;
            s.strategy = strategy.name();
            s.snr_db = cfg.snr_grid_db[si];
            std::vector<double> sums, mmfs;
            for (const auto& row : table.rows) {
                if (row.strategy != s.strategy || row.snr_db != s.snr_db) continue;
                if (!row.error.empty()) continue;
                sums.push_back(row.report.sum_rate);
                mmfs.push_back(row.report.mmf_rate);
            }
            s.n = static_cast<int>(sums.size());
            const auto mean_stderr = [](const std::vector<double>& v, double& mean,
                                        double& se) {
                mean = 0.0;
                for (double x : v) mean += x;
                mean /= v.empty() ? 1.0 : v.size();
                double var = 0.0;
                for (double x : v) var += (x - mean) * (x - mean);
                se = v.size() > 1 ? std::sqrt(var / (v.size() - 1) / v.size()) : 0.0;
            };
            if (s.n > 0) {
                mean_stderr(sums, s.mean_sum, s.stderr_sum);
                mean_stderr(mmfs, s.mean_mmf, s.stderr_mmf);
            }
            table.summaries.push_back(std::move(s));
        }
    }
    return table;
}

void write_results_csv(std::ostream& os, const ResultTable& table) {
    os << "strategy,seed,snr_db,alpha";
    for (int k = 1; k <= table.num_users; ++k) os << ",R_" << k;
    os << ",R_c,sum,mmf,iterations,converged\n";
    char buf[192];
    for (const auto& row : table.rows) {
        os << row.strategy << ',' << row.cell_seed << ',' << row.snr_db << ','
           << table.alpha;
        for (double r : row.report.per_user) {
            std::snprintf(buf, sizeof(buf), ",%.10g", r);
            os << buf;
        }
        std::snprintf(buf, sizeof(buf), ",%.10g,%.10g,%.10g,%d,%d",
                      row.report.common_rate, row.report.sum_rate,
                      row.report.mmf_rate, row.report.iterations,
                      row.report.converged ? 1 : 0);
        os << buf << '\n';
    }
    for (const auto& s : table.summaries) {
        std::snprintf(buf, sizeof(buf), "summary,%s,%g,%.10g,%.4g,%.10g,%.4g,%d",
                      s.strategy.c_str(), s.snr_db, s.mean_sum, s.stderr_sum,
                      s.mean_mmf, s.stderr_mmf, s.n);
        os << buf << '\n';
    }
    for (const auto& row : table.rows)
        if (!row.error.empty())
            os << "# error," << row.strategy << ',' << row.snr_db << ','
               << row.realization << ',' << row.error << '\n';
}

SlopeTable slope_campaign(const ExperimentConfig& cfg, ResultTable* raw) {
    cfg.validate();
    const double span = *std::max_element(cfg.snr_grid_db.begin(), cfg.snr_grid_db.end()) -
                        *std::min_element(cfg.snr_grid_db.begin(), cfg.snr_grid_db.end());
    if (span < 15.0)
        throw ConfigError("slope campaign: SNR grid must span >= 15 dB");

    const ResultTable table = run_experiment(cfg);
    SlopeTable out;
    out.objective = cfg.objective;
    const Metric metric = cfg.objective == Objective::sum ? Metric::sum : Metric::mmf;
    const Rational alpha = cfg.imperfect_csit ? cfg.alpha_rational() : Rational(1);

    for (const auto& strategy : cfg.strategies) {
        std::vector<double> snrs, rates;
        for (double snr : cfg.snr_grid_db) {
            const SummaryRow& s = table.summary(strategy.name(), snr);
            if (s.n == 0) continue;
            snrs.push_back(snr);
            rates.push_back(cfg.objective == Objective::sum ? s.mean_sum : s.mean_mmf);
        }
        const SlopeFit fit = fit_slope(snrs, rates);
        const Rational predicted =
            closed_form_dof(strategy.kind, cfg.num_antennas, cfg.num_users,
                            strategy.num_groups, alpha, metric);
        SlopeRow row;
        row.strategy = strategy.name();
        row.fitted = fit.slope;
        row.stderr_ = fit.stderr_;
        row.predicted = predicted.str();
        row.abs_delta = std::abs(fit.slope - predicted.value());
        out.rows.push_back(std::move(row));
    }
    if (raw) *raw = table;
    return out;
}

void write_slopes_csv(std::ostream& os, const SlopeTable& table) {
    os << "strategy,fitted_slope,stderr,predicted_dof,abs_delta\n";
    char buf[96];
    for (const auto& r : table.rows) {
        std::snprintf(buf, sizeof(buf), "%s,%.6g,%.3g,%s,%.6g\n", r.strategy.c_str(),
                      r.fitted, r.stderr_, r.predicted.c_str(), r.abs_delta);
        os << buf;
    }
}

}  // namespace masim
