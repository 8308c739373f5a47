#pragma once

#include <iosfwd>
#include <optional>
#include <vector>

#include "masim/common.hpp"

namespace masim {

/// Channels for K single-antenna users served by an M-antenna transmitter.
/// The additive decomposition h_k = hhat_k + htilde_k holds exactly
/// (true_channels is constructed as the sum).
struct ChannelSet {
    int num_users = 0;
    int num_antennas = 0;
    std::vector<Cvec> true_channels;  // h_k
    std::vector<Cvec> estimates;      // hhat_k (transmitter-side)
    std::vector<Cvec> errors;         // htilde_k
    std::vector<double> variances;    // sigma2_k > 0

    void validate() const;  // throws ConfigError / InvariantError
};

/// Scaled CSIT error model: sigma_e2_k = sigma2_k * P^(-alpha). When
/// fixed_error_variance is set the scaled model is inactive and that value
/// is used for every user (zero expresses the perfect-CSIT point mass).
struct CsitModel {
    double alpha = 1.0;      // CSIT quality exponent, in [0, 1]
    double snr_power = 1.0;  // linear transmit power P (noise normalized to 1)
    std::optional<double> fixed_error_variance;

    // alpha == 0 and alpha == 1 are handled as exact endpoints.
    double error_variance(double sigma2) const {
        if (fixed_error_variance) return *fixed_error_variance;
        if (alpha == 0.0) return sigma2;
        if (alpha == 1.0) return sigma2 / snr_power;
        return sigma2 * std::pow(snr_power, -alpha);
    }
    void validate() const;
};

/// i.i.d. CN(0, sigma2_k) channels; perfect-CSIT default (errors zero,
/// estimates equal to the true channels). Deterministic for a fixed seed.
ChannelSet sample_channels(int num_users, int num_antennas,
                           const std::vector<double>& variances,
                           std::uint64_t seed);

/// Redraws the set under the CSIT error model: hhat ~ CN(0, sigma2 - sigma_e2),
/// htilde ~ CN(0, sigma_e2), h = hhat + htilde.
ChannelSet apply_csit_error(const ChannelSet& cs, const CsitModel& model,
                            std::uint64_t seed);

/// n_samples sets sharing cs's estimates, each with a fresh error draw.
/// This is the SAA sample set for ergodic optimization.
std::vector<ChannelSet> sample_conditional(const ChannelSet& cs,
                                           const CsitModel& model,
                                           int n_samples, std::uint64_t seed);

/// Flat CSV layout: header (K, M), variances, then one section per
/// channel family with row-major (re, im) pairs.
void write_channel_csv(std::ostream& os, const ChannelSet& cs);
ChannelSet read_channel_csv(std::istream& is);

}  // namespace masim
