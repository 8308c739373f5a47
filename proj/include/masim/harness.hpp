#pragma once

#include <iosfwd>
#include <string>
#include <vector>

#include "masim/channel.hpp"
#include "masim/common.hpp"
#include "masim/dof.hpp"
#include "masim/rate.hpp"
#include "masim/strategy.hpp"
#include "masim/wmmse.hpp"

namespace masim {

/// Monte-Carlo campaign description. Desk-scale defaults (10 realizations,
/// 200 SAA samples); raise to 100 / 1000 for full-scale runs.
struct ExperimentConfig {
    int num_users = 6;
    int num_antennas = 3;
    std::vector<StrategyConfig> strategies;
    std::vector<double> snr_grid_db;
    int n_realizations = 10;
    bool imperfect_csit = false;
    std::string alpha = "1";  // kept as text so predictions stay exact rationals
    enum class VarianceMode { equal, uniform_range };
    VarianceMode variance_mode = VarianceMode::equal;
    int n_saa_samples = 200;
    Objective objective = Objective::sum;
    std::uint64_t seed = 1;
    std::string output_path;
    int threads = 0;  // 0: MASIM_THREADS env var, then hardware concurrency
    SolveOptions solver;

    void validate() const;
    Rational alpha_rational() const { return Rational::parse(alpha); }
};

/// "rs1,mulp,noma:1,noma:3,oma" -> configs.
std::vector<StrategyConfig> parse_strategies(const std::string& spec);
/// "25,30,35,40" or "5:5:35" -> dB grid.
std::vector<double> parse_snr_grid(const std::string& spec);

struct CellResult {
    std::string strategy;
    int realization = 0;
    double snr_db = 0.0;
    std::uint64_t cell_seed = 0;
    RateReport report;   // per_user in original user indexing
    std::string error;   // nonempty when the solver failed; campaign continues
};

struct SummaryRow {
    std::string strategy;
    double snr_db = 0.0;
    double mean_sum = 0.0, stderr_sum = 0.0;
    double mean_mmf = 0.0, stderr_mmf = 0.0;
    int n = 0;
};

struct ResultTable {
    int num_users = 0;
    std::string alpha;
    std::vector<CellResult> rows;       // ordered (realization, snr, strategy)
    std::vector<SummaryRow> summaries;  // one per (snr, strategy)

    const SummaryRow& summary(const std::string& strategy, double snr_db) const;
};

/// Runs the campaign: per cell (realization x SNR x strategy) build channels,
/// apply the CSIT model, initialize, optimize, evaluate. Cell seeds derive as
/// hash(master, realization, snr_index) so channels are shared across the
/// strategies of a cell and campaigns are reproducible under parallelism.
ResultTable run_experiment(const ExperimentConfig& cfg);

/// The exact channel set a campaign cell sees (before any CSIT error),
/// reconstructable from the config for oracle checks.
ChannelSet experiment_channels(const ExperimentConfig& cfg, int realization,
                               int snr_index);

void write_results_csv(std::ostream& os, const ResultTable& table);

struct SlopeRow {
    std::string strategy;
    double fitted = 0.0;
    double stderr_ = 0.0;
    std::string predicted;  // exact rational
    double abs_delta = 0.0;
};

struct SlopeTable {
    Objective objective = Objective::sum;
    std::vector<SlopeRow> rows;
};

/// run_experiment + per-strategy OLS slope of the mean rate curve against
/// log2(P), paired with the closed-form multiplexing gain.
SlopeTable slope_campaign(const ExperimentConfig& cfg, ResultTable* raw = nullptr);
void write_slopes_csv(std::ostream& os, const SlopeTable& table);

/// Quick invariant suites (identity sweep, ZFBF residuals, rate bounds,
/// RS/MU-LP equivalence, determinism). Prints one line per suite; returns
/// the number of failed suites.
int run_selftest(std::ostream& os, bool full);

}  // namespace masim
