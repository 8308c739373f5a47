#pragma once

#include <vector>

#include "masim/channel.hpp"
#include "masim/common.hpp"
#include "masim/dof.hpp"
#include "masim/rate.hpp"
#include "masim/strategy.hpp"

namespace masim {

/// MRT + SVD precoder initialization on the transmitter-side estimates:
/// streams decoded by a single user get the matched direction hhat/||hhat||,
/// streams decoded by several users get the leading left singular vector of
/// the stacked decode-set estimates. power_split (per stream, common last)
/// defaults to uniform, except the RS common stream which takes half the
/// budget. Total power equals the budget exactly.
PrecoderSet mrt_svd_init(const ChannelSet& cs, const StreamLayout& layout,
                         double power,
                         const std::vector<double>* power_split = nullptr);

/// Unit-norm direction for `served` lying in the null space of the
/// null_set users' estimates. Throws ConfigError when the null space is
/// empty (|null_set| >= M or degenerate projection).
Cvec zfbf_direction(const ChannelSet& cs, int served,
                    const std::vector<int>& null_set);

/// Per-stream power exponents e (power scales as P^e, e in [0,1]); the
/// realized powers are normalized so the total is exactly P.
struct PowerSchedule {
    std::vector<double> exponents;
};

/// Closed-form achievability construction from the multiplexing-gain
/// proofs: which streams are active, their ZFBF null sets, power exponents,
/// and the SINR exponent each stream is predicted to realize.
struct AchievabilityPlan {
    StrategyKind scheme = StrategyKind::noma;
    Metric metric = Metric::sum;
    int M = 1, K = 1, G = 1;
    double alpha = 1.0;
    bool zero_gain = false;  // regime where the gain collapses to 0

    struct Entry {
        int owner = -1;              // user slot (-1 for the RS common stream)
        bool common = false;
        bool random_direction = false;  // random precoding (RS common stream)
        std::vector<int> null_set;      // user slots whose estimates are nulled
        double exponent = 1.0;          // power exponent
        double sinr_exponent = 0.0;     // predicted SINR growth exponent
    };
    std::vector<Entry> entries;
    double z = 0.0;     // RS MMF common-rate fraction for the served subset
    double beta = 0.0;  // RS MMF private power exponent

    PowerSchedule schedule() const;
};

AchievabilityPlan achievability_schedule(StrategyKind scheme, Metric metric,
                                         int M, int K, int G, double alpha);

/// Instantiates a plan against a channel estimate at transmit power P.
/// served-order convention: for RS MMF with M < K the plan's served subset
/// is resolved here as the M largest estimated norms. entry_streams, when
/// given, receives the stream index each plan entry was realized as
/// (private stream = owning slot, common stream = K).
PrecoderSet realize_schedule(const AchievabilityPlan& plan, const ChannelSet& cs,
                             double power, std::uint64_t seed,
                             std::vector<int>* entry_streams = nullptr);

}  // namespace masim
