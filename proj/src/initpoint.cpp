#include "masim/initpoint.hpp"

#include <Eigen/QR>
#include <Eigen/SVD>
#include <algorithm>
#include <cmath>
#include <numeric>

namespace masim {

namespace {

Cvec svd_direction(const ChannelSet& cs, const std::vector<int>& decoders) {
    Cmat stacked(cs.num_antennas, static_cast<int>(decoders.size()));
    for (std::size_t i = 0; i < decoders.size(); ++i)
        stacked.col(static_cast<int>(i)) = cs.estimates[decoders[i]];
    Eigen::JacobiSVD<Cmat> svd(stacked, Eigen::ComputeThinU);
    return svd.matrixU().col(0);
}

}  // namespace

PrecoderSet mrt_svd_init(const ChannelSet& cs, const StreamLayout& layout,
                         double power, const std::vector<double>* power_split) {
    cs.validate();
    if (!(power > 0.0)) throw ConfigError("mrt_svd_init: power must be positive");
    const int S = layout.num_streams();

    std::vector<double> split;
    if (power_split) {
        if (static_cast<int>(power_split->size()) != S)
            throw ConfigError("mrt_svd_init: power_split size mismatch");
        split = *power_split;
    } else if (layout.has_common()) {
        // Common stream starts with half the budget.
        split.assign(S, 0.5 / layout.num_users);
        split[layout.common_stream()] = 0.5;
    } else {
        split.assign(S, 1.0 / S);
    }
    double total = std::accumulate(split.begin(), split.end(), 0.0);
    if (!(total > 0.0)) throw ConfigError("mrt_svd_init: empty power split");

    PrecoderSet ps;
    ps.power_budget = power;
    ps.private_precoders.assign(layout.num_users, Cvec::Zero(cs.num_antennas));
    for (int s = 0; s < S; ++s) {
        const auto& dec = layout.streams[s].decoders;
        Cvec dir;
        if (dec.size() == 1) {
            const Cvec& hhat = cs.estimates[dec[0]];
            const double n = hhat.norm();
            if (!(n > 0.0)) throw ConfigError("mrt_svd_init: zero channel estimate");
            dir = hhat / n;
        } else {
            dir = svd_direction(cs, dec);
            if (!(dir.norm() > 0.0))
                throw ConfigError("mrt_svd_init: degenerate decode-set stack");
        }
        const Cvec p = std::sqrt(power * split[s] / total) * dir;
        if (layout.streams[s].common)
            ps.common_precoder = p;
        else
            ps.private_precoders[layout.streams[s].owner] = p;
    }
    return ps;
}

Cvec zfbf_direction(const ChannelSet& cs, int served,
                    const std::vector<int>& null_set) {
    const int M = cs.num_antennas;
    if (static_cast<int>(null_set.size()) >= M)
        throw ConfigError("zfbf: null set of size " + std::to_string(null_set.size()) +
                          " leaves no null space with M = " + std::to_string(M));
    const Cvec& h = cs.estimates[served];
    if (!(h.norm() > 0.0)) throw ConfigError("zfbf: zero channel estimate");
    if (null_set.empty()) return h / h.norm();

    Cmat nulled(M, static_cast<int>(null_set.size()));
    for (std::size_t i = 0; i < null_set.size(); ++i)
        nulled.col(static_cast<int>(i)) = cs.estimates[null_set[i]];
    Eigen::ColPivHouseholderQR<Cmat> qr(nulled);
    const int rank = static_cast<int>(qr.rank());
    if (rank >= M) throw ConfigError("zfbf: null-set channels span the whole space");
    Cmat q = qr.householderQ() * Cmat::Identity(M, rank);
    Cvec d = h - q * (q.adjoint() * h);
    const double n = d.norm();
    if (!(n > 1e-12 * h.norm()))
        throw ConfigError("zfbf: served channel lies in the nulled span");
    return d / n;
}

PowerSchedule AchievabilityPlan::schedule() const {
    PowerSchedule sched;
    for (const auto& e : entries) sched.exponents.push_back(e.exponent);
    return sched;
}

AchievabilityPlan achievability_schedule(StrategyKind scheme, Metric metric,
                                         int M, int K, int G, double alpha) {
    if (M < 1 || K < 1) throw ConfigError("achievability: M >= 1, K >= 1 required");
    if (!(alpha >= 0.0 && alpha <= 1.0))
        throw ConfigError("achievability: alpha in [0, 1] required");
    AchievabilityPlan plan;
    plan.scheme = scheme;
    plan.metric = metric;
    plan.M = M;
    plan.K = K;
    plan.G = G;
    plan.alpha = alpha;
    using Entry = AchievabilityPlan::Entry;

    const auto zf_streams = [&](int count, double exponent, double sinr_exp) {
        // `count` interference-free streams via ZFBF across the chosen users.
        std::vector<int> served(count);
        for (int i = 0; i < count; ++i) served[i] = i;
        for (int i = 0; i < count; ++i) {
            Entry e;
            e.owner = served[i];
            e.exponent = exponent;
            e.sinr_exponent = sinr_exp;
            for (int j : served)
                if (j != i) e.null_set.push_back(j);
            plan.entries.push_back(std::move(e));
        }
    };

    switch (scheme) {
        case StrategyKind::noma: {
            StrategyConfig cfg{StrategyKind::noma, G};
            cfg.validate(K);
            const int g = K / G;
            if (metric == Metric::sum) {
                const int n = std::min(M, G);
                if (n * alpha < 1.0) {
                    Entry e;  // single-stream fallback
                    e.owner = 0;
                    e.exponent = 1.0;
                    e.sinr_exponent = 1.0;
                    plan.entries.push_back(std::move(e));
                } else {
                    // ZFBF across the strong users of the first n groups.
                    std::vector<int> strong;
                    for (int i = 0; i < n; ++i) strong.push_back(i * g);
                    for (int i = 0; i < n; ++i) {
                        Entry e;
                        e.owner = strong[i];
                        e.exponent = alpha;
                        e.sinr_exponent = alpha;
                        for (int j : strong)
                            if (j != strong[i]) e.null_set.push_back(j);
                        plan.entries.push_back(std::move(e));
                    }
                }
            } else if (G == 1) {
                // Power cascade O(P^{k/K}); every SINR grows as P^{1/K}.
                for (int k = 0; k < K; ++k) {
                    Entry e;
                    e.owner = k;
                    e.exponent = static_cast<double>(k + 1) / K;
                    e.sinr_exponent = 1.0 / K;
                    plan.entries.push_back(std::move(e));
                }
            } else if (M >= K - g + 1) {
                // Per group: ZFBF against all other groups, cascade
                // O(P^{1 - (g-p) alpha / g}); SINRs grow as P^{alpha/g}.
                for (int i = 0; i < G; ++i) {
                    for (int p = 1; p <= g; ++p) {
                        Entry e;
                        e.owner = i * g + (p - 1);
                        e.exponent = 1.0 - (g - p) * alpha / g;
                        e.sinr_exponent = alpha / g;
                        for (int j = 0; j < K; ++j)
                            if (j / g != i) e.null_set.push_back(j);
                        plan.entries.push_back(std::move(e));
                    }
                }
            } else {
                plan.zero_gain = true;
                for (int k = 0; k < K; ++k) {
                    Entry e;
                    e.owner = k;
                    e.exponent = 1.0;
                    e.sinr_exponent = 0.0;
                    plan.entries.push_back(std::move(e));
                }
            }
            break;
        }
        case StrategyKind::mulp: {
            if (metric == Metric::sum) {
                const int n = std::min(M, K);
                if (n * alpha < 1.0) {
                    Entry e;
                    e.owner = 0;
                    e.exponent = 1.0;
                    e.sinr_exponent = 1.0;
                    plan.entries.push_back(std::move(e));
                } else {
                    zf_streams(n, alpha, alpha);
                }
            } else if (M >= K) {
                zf_streams(K, alpha, alpha);
            } else {
                plan.zero_gain = true;
                for (int k = 0; k < K; ++k) {
                    Entry e;
                    e.owner = k;
                    e.exponent = 1.0;
                    e.sinr_exponent = 0.0;
                    plan.entries.push_back(std::move(e));
                }
            }
            break;
        }
        case StrategyKind::rs1: {
            Entry common;
            common.common = true;
            common.random_direction = true;
            common.exponent = 1.0;
            if (metric == Metric::sum) {
                const int n = std::min(M, K);
                common.sinr_exponent = 1.0 - alpha;
                plan.entries.push_back(std::move(common));
                zf_streams(n, alpha, alpha);
                plan.beta = alpha;
                plan.z = 1.0;
            } else if (M >= K) {
                common.sinr_exponent = 1.0 - alpha;
                plan.entries.push_back(std::move(common));
                zf_streams(K, alpha, alpha);
                plan.beta = alpha;
                plan.z = 1.0;
            } else {
                const double threshold = 1.0 / (1.0 + K - M);
                plan.beta = std::min(alpha, threshold);
                plan.z = alpha > threshold
                             ? 0.0
                             : (1.0 - alpha - alpha * K + alpha * M) * M /
                                   ((1.0 - alpha) * K);
                common.sinr_exponent = 1.0 - plan.beta;
                plan.entries.push_back(std::move(common));
                // M private streams for the served subset (resolved to the M
                // largest estimated norms when the plan is realized).
                zf_streams(M, plan.beta, plan.beta);
            }
            break;
        }
        case StrategyKind::oma: {
            Entry e;
            e.owner = 0;
            e.exponent = 1.0;
            e.sinr_exponent = 1.0;
            plan.entries.push_back(std::move(e));
            break;
        }
    }
    for (const auto& e : plan.entries)
        if (e.exponent < 0.0 || e.exponent > 1.0)
            throw InvariantError("achievability: exponent outside [0, 1]");
    return plan;
}

PrecoderSet realize_schedule(const AchievabilityPlan& plan, const ChannelSet& cs,
                             double power, std::uint64_t seed,
                             std::vector<int>* entry_streams) {
    cs.validate();
    if (cs.num_antennas != plan.M || cs.num_users != plan.K)
        throw ConfigError("realize_schedule: channel dimensions do not match plan");
    if (entry_streams) entry_streams->clear();

    // RS MMF with M < K serves the M users with the largest estimated norms.
    std::vector<int> slot_of(plan.K);
    std::iota(slot_of.begin(), slot_of.end(), 0);
    const bool rank_served = plan.scheme == StrategyKind::rs1 &&
                             plan.metric == Metric::mmf && plan.M < plan.K;
    if (rank_served) {
        std::stable_sort(slot_of.begin(), slot_of.end(), [&](int a, int b) {
            return cs.estimates[a].norm() > cs.estimates[b].norm();
        });
    }

    Pcg32 rng(seed);
    PrecoderSet ps;
    ps.power_budget = power;
    ps.private_precoders.assign(plan.K, Cvec::Zero(plan.M));

    double weight_total = 0.0;
    for (const auto& e : plan.entries) weight_total += std::pow(power, e.exponent);
    const double scale = power / weight_total;

    for (const auto& e : plan.entries) {
        Cvec dir;
        if (e.random_direction) {
            dir = rng.complex_normal_vector(plan.M, 1.0);
            dir /= dir.norm();
        } else {
            std::vector<int> nulls;
            for (int j : e.null_set) nulls.push_back(slot_of[j]);
            dir = zfbf_direction(cs, slot_of[e.owner], nulls);
        }
        const Cvec p = std::sqrt(scale * std::pow(power, e.exponent)) * dir;
        if (e.common) {
            ps.common_precoder = p;
            if (entry_streams) entry_streams->push_back(plan.K);
        } else {
            ps.private_precoders[slot_of[e.owner]] = p;
            if (entry_streams) entry_streams->push_back(slot_of[e.owner]);
        }
    }
    if (plan.scheme == StrategyKind::rs1 && !ps.common_precoder)
        ps.common_precoder = Cvec::Zero(plan.M);
    return ps;
}

}  // namespace masim
