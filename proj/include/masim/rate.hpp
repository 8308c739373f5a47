#pragma once

#include <map>
#include <optional>
#include <span>
#include <vector>

#include "masim/channel.hpp"
#include "masim/common.hpp"
#include "masim/strategy.hpp"

namespace masim {

/// Linear precoders under a total power budget. private_precoders[k] carries
/// stream k; common_precoder is present for 1-layer RS only.
struct PrecoderSet {
    std::vector<Cvec> private_precoders;
    std::optional<Cvec> common_precoder;
    double power_budget = 1.0;

    double total_power() const;
    /// tr(PP^H) <= P within 1e-8 * P.
    void validate() const;
    const Cvec& stream(int s) const {
        return s < static_cast<int>(private_precoders.size()) ? private_precoders[s]
                                                              : *common_precoder;
    }
    int num_streams() const {
        return static_cast<int>(private_precoders.size()) + (common_precoder ? 1 : 0);
    }
    PrecoderSet scaled(double factor) const;
};

/// Per-user achievable rates plus per-link decodability rates.
struct RateReport {
    std::vector<double> per_user;       // R_k (+ common share C_k for RS)
    double common_rate = 0.0;           // R_c (0 when no common stream)
    std::vector<double> common_alloc;   // C_k, sums to R_c (empty when no common)
    double sum_rate = 0.0;              // sum of per_user
    double mmf_rate = 0.0;              // min of per_user
    std::map<std::pair<int, int>, double> per_link;  // (decoder j, stream s) -> R_{j,s}
    int iterations = 0;                 // filled by solvers
    bool converged = true;
};

enum class CommonAllocPolicy { equal, mmf_equalizing, explicit_alloc };

/// SINR of stream s at decoder j under the layout's SIC structure,
/// evaluated on the true channels: |h_j^H p_s|^2 / (1 + sum interferers).
double link_sinr(const ChannelSet& cs, const PrecoderSet& ps,
                 const StreamLayout& layout, int decoder, int stream);
double link_rate(const ChannelSet& cs, const PrecoderSet& ps,
                 const StreamLayout& layout, int decoder, int stream);

/// NOMA link rate R_{j,k}; requires j in the decode set of k.
double noma_link_rate(const ChannelSet& cs, const PrecoderSet& ps,
                      const StreamLayout& layout, int decoder, int stream);

/// Splits rc across users so per-user totals private_rates[k] + C_k are
/// equalized at the water-fill level (1-D bisection).
std::vector<double> mmf_equalizing_alloc(const std::vector<double>& private_rates,
                                         double rc);

/// Generic evaluator covering every layout; the strategy-named wrappers
/// below all route through it so shared fields agree bit-for-bit.
RateReport evaluate_rates(const ChannelSet& cs, const PrecoderSet& ps,
                          const StreamLayout& layout,
                          CommonAllocPolicy policy = CommonAllocPolicy::equal,
                          const std::vector<double>* explicit_alloc = nullptr);

RateReport noma_rates(const ChannelSet& cs, const PrecoderSet& ps,
                      const StrategyConfig& config);
RateReport mulp_rates(const ChannelSet& cs, const PrecoderSet& ps);
RateReport rs_rates(const ChannelSet& cs, const PrecoderSet& ps,
                    CommonAllocPolicy policy,
                    const std::vector<double>* explicit_alloc = nullptr);

/// OMA: only the strongest user (by estimate norm; equals true norm under
/// perfect CSIT) is served, with a matched full-power precoder.
PrecoderSet oma_precoders(const ChannelSet& cs, double power);
RateReport oma_rates(const ChannelSet& cs, double power);

/// Arithmetic mean of per-sample reports: rates averaged per user, then
/// sum / min aggregation (ergodic MMF is average-then-min).
RateReport ergodic_rates(std::span<const ChannelSet> samples, const PrecoderSet& ps,
                         const StreamLayout& layout,
                         CommonAllocPolicy policy = CommonAllocPolicy::equal);

/// Random feasible precoders with total power exactly `fraction * power`
/// (probing utility for bounds and optimality tests).
PrecoderSet random_precoders(Pcg32& rng, int num_users, int num_antennas,
                             double power, bool with_common,
                             double fraction = 1.0);

}  // namespace masim
