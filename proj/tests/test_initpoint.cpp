#include <doctest.h>

#include <cmath>

#include "masim/initpoint.hpp"

using namespace masim;

namespace {

ChannelSet manual_set(const std::vector<Cvec>& channels) {
    ChannelSet cs;
    cs.num_users = static_cast<int>(channels.size());
    cs.num_antennas = static_cast<int>(channels[0].size());
    cs.true_channels = channels;
    cs.estimates = channels;
    cs.errors.assign(cs.num_users, Cvec::Zero(cs.num_antennas));
    cs.variances.assign(cs.num_users, 1.0);
    return cs;
}

// Fixed unit-variance draws so only the power scales across SNR points;
// the realized directions are then identical at every P.
struct SlopeFixture {
    std::vector<Cvec> e_hat, e_tld;
    SlopeFixture(int K, int M, std::uint64_t seed) {
        Pcg32 rng(seed);
        for (int k = 0; k < K; ++k) {
            e_hat.push_back(rng.complex_normal_vector(M, 1.0));
            e_tld.push_back(rng.complex_normal_vector(M, 1.0));
        }
    }
    // Structured estimates keep every inner-product constant Theta(1), so
    // the fitted exponents are not polluted by unlucky near-orthogonality.
    // Group i of size g occupies coordinates [i*g, (i+1)*g); user p within
    // the group mixes its first two coordinates so intra-group channels
    // interfere without being aligned.
    static SlopeFixture grouped(int K, int M, int G, std::uint64_t seed) {
        SlopeFixture fx(K, M, seed);
        const int g = K / G;
        for (int k = 0; k < K; ++k) {
            Cvec v = Cvec::Zero(M);
            const int base = (k / g) * g;
            const int p = k % g;
            v(base) = 1.0;
            if (p > 0) v(base + p) = cxd(0.8, 0.6 * p);
            fx.e_hat[k] = std::sqrt(static_cast<double>(M)) * v / v.norm();
        }
        return fx;
    }
    ChannelSet at(double sigma2, double alpha, double power) const {
        ChannelSet cs;
        cs.num_users = static_cast<int>(e_hat.size());
        cs.num_antennas = static_cast<int>(e_hat[0].size());
        cs.variances.assign(cs.num_users, sigma2);
        const CsitModel model{alpha, power, {}};
        const double se2 = model.error_variance(sigma2);
        for (int k = 0; k < cs.num_users; ++k) {
            cs.estimates.push_back(std::sqrt(sigma2 - se2) * e_hat[k]);
            cs.errors.push_back(std::sqrt(se2) * e_tld[k]);
            cs.true_channels.push_back(cs.estimates[k] + cs.errors[k]);
        }
        return cs;
    }
    ChannelSet perfect(double sigma2) const {
        ChannelSet cs;
        cs.num_users = static_cast<int>(e_hat.size());
        cs.num_antennas = static_cast<int>(e_hat[0].size());
        cs.variances.assign(cs.num_users, sigma2);
        for (int k = 0; k < cs.num_users; ++k) {
            cs.estimates.push_back(std::sqrt(sigma2) * e_hat[k]);
            cs.errors.push_back(Cvec::Zero(cs.num_antennas));
            cs.true_channels.push_back(cs.estimates[k]);
        }
        return cs;
    }
};

// Fitted slope of log2(min-decoder SINR) against log2(P) per plan entry.
std::vector<double> realized_sinr_slopes(const AchievabilityPlan& plan,
                                         const SlopeFixture& fx, double sigma2,
                                         bool imperfect) {
    const std::vector<double> snr_db = {30.0, 40.0, 50.0};
    const StreamLayout layout = stream_layout(
        {plan.scheme, plan.scheme == StrategyKind::noma ? plan.G : 1}, plan.K);
    std::vector<std::vector<double>> log_sinr(plan.entries.size());
    for (double db : snr_db) {
        const double power = db_to_linear(db);
        const ChannelSet cs =
            imperfect ? fx.at(sigma2, plan.alpha, power) : fx.perfect(sigma2);
        std::vector<int> entry_streams;
        const PrecoderSet ps = realize_schedule(plan, cs, power, 99, &entry_streams);
        for (std::size_t e = 0; e < plan.entries.size(); ++e) {
            const int stream = entry_streams[e];
            double sinr = std::numeric_limits<double>::infinity();
            for (int j : layout.streams[stream].decoders)
                sinr = std::min(sinr, link_sinr(cs, ps, layout, j, stream));
            log_sinr[e].push_back(std::log2(sinr));
        }
    }
    std::vector<double> slopes;
    for (const auto& series : log_sinr)
        slopes.push_back(fit_slope(snr_db, series).slope);
    return slopes;
}

}  // namespace

TEST_CASE("mrt_svd_init: single user is plain MRT") {
    Pcg32 rng(1);
    ChannelSet cs;
    cs.num_users = 1;
    cs.num_antennas = 3;
    cs.variances = {1.0};
    cs.estimates = {rng.complex_normal_vector(3, 1.0)};
    cs.true_channels = cs.estimates;
    cs.errors = {Cvec::Zero(3)};
    const StreamLayout layout = stream_layout({StrategyKind::mulp, 1}, 1);
    const double P = 7.0;
    const PrecoderSet ps = mrt_svd_init(cs, layout, P);
    const Cvec expect = std::sqrt(P) * cs.estimates[0] / cs.estimates[0].norm();
    CHECK((ps.private_precoders[0] - expect).norm() < 1e-12);
}

TEST_CASE("mrt_svd_init: rank-1 decode-set stack returns that direction") {
    Pcg32 rng(2);
    const Cvec h = rng.complex_normal_vector(3, 1.0);
    ChannelSet cs = manual_set({h, h});
    const StreamLayout layout = stream_layout({StrategyKind::noma, 1}, 2);
    const PrecoderSet ps = mrt_svd_init(cs, layout, 4.0);
    // Stream 1 is decoded by both users; its SVD direction must align with h.
    const Cvec dir = ps.private_precoders[1].normalized();
    CHECK(std::abs(dir.dot(h.normalized())) == doctest::Approx(1.0).epsilon(1e-10));
}

TEST_CASE("mrt_svd_init: orthonormal two-user stack gives an in-span unit direction") {
    ChannelSet cs = manual_set({Cvec::Unit(2, 0), Cvec::Unit(2, 1)});
    const StreamLayout layout = stream_layout({StrategyKind::noma, 1}, 2);
    const PrecoderSet ps = mrt_svd_init(cs, layout, 2.0);
    const Cvec dir = ps.private_precoders[1] / ps.private_precoders[1].norm();
    CHECK(dir.norm() == doctest::Approx(1.0).epsilon(1e-12));
    const double in_span = std::norm(dir(0)) + std::norm(dir(1));
    CHECK(in_span == doctest::Approx(1.0).epsilon(1e-10));
}

TEST_CASE("mrt_svd_init: power accounting and RS common split") {
    const ChannelSet cs = sample_channels(4, 3, std::vector<double>(4, 1.0), 5);
    const double P = db_to_linear(20.0);
    SUBCASE("uniform split") {
        const StreamLayout layout = stream_layout({StrategyKind::mulp, 1}, 4);
        const PrecoderSet ps = mrt_svd_init(cs, layout, P);
        CHECK(std::abs(ps.total_power() - P) <= 1e-8 * P);
        for (const auto& p : ps.private_precoders)
            CHECK(p.squaredNorm() == doctest::Approx(P / 4).epsilon(1e-10));
    }
    SUBCASE("RS common stream gets half the budget") {
        const StreamLayout layout = stream_layout({StrategyKind::rs1, 1}, 4);
        const PrecoderSet ps = mrt_svd_init(cs, layout, P);
        CHECK(std::abs(ps.total_power() - P) <= 1e-8 * P);
        CHECK(ps.common_precoder->squaredNorm() ==
              doctest::Approx(P / 2).epsilon(1e-10));
    }
    SUBCASE("explicit split") {
        const StreamLayout layout = stream_layout({StrategyKind::mulp, 1}, 4);
        const std::vector<double> split = {0.4, 0.3, 0.2, 0.1};
        const PrecoderSet ps = mrt_svd_init(cs, layout, P, &split);
        CHECK(ps.private_precoders[0].squaredNorm() ==
              doctest::Approx(0.4 * P).epsilon(1e-10));
    }
}

TEST_CASE("mrt_svd_init rejects a zero estimate") {
    ChannelSet cs = manual_set({Cvec::Zero(2), Cvec::Unit(2, 1)});
    const StreamLayout layout = stream_layout({StrategyKind::mulp, 1}, 2);
    CHECK_THROWS_AS(mrt_svd_init(cs, layout, 1.0), ConfigError);
}

TEST_CASE("zfbf direction: 2-D geometry") {
    // Null e1: the direction is the normalized projection onto e1-perp.
    Cvec h(2), n(2);
    h << cxd(1.0, 0.5), cxd(0.3, -0.2);
    n << cxd(1.0, 0.0), cxd(0.0, 0.0);
    const ChannelSet cs = manual_set({h, n});
    const Cvec d = zfbf_direction(cs, 0, {1});
    CHECK(std::abs(d(0)) < 1e-12);
    CHECK(std::abs(d.norm() - 1.0) < 1e-12);
    // Exactly the normalized remainder of h.
    CHECK(std::abs(d(1) / (h(1) / std::abs(h(1)))) == doctest::Approx(1.0));
}

TEST_CASE("zfbf strong-user directions null all cross terms (M=3, K=6, G=3)") {
    const ChannelSet cs = sample_channels(6, 3, std::vector<double>(6, 1.0), 8);
    // Strong slots 0, 2, 4; each nulls the other two strong users.
    const std::vector<int> strong = {0, 2, 4};
    for (int i : strong) {
        std::vector<int> nulls;
        for (int j : strong)
            if (j != i) nulls.push_back(j);
        const Cvec d = zfbf_direction(cs, i, nulls);
        for (int j : nulls)
            CHECK(std::abs(cs.estimates[j].dot(d)) < 1e-9 * cs.estimates[j].norm());
    }
}

TEST_CASE("zfbf infeasible when the null set fills the space") {
    const ChannelSet cs = sample_channels(3, 2, {1.0, 1.0, 1.0}, 12);
    CHECK_THROWS_AS(zfbf_direction(cs, 0, {1, 2}), ConfigError);
}

TEST_CASE("achievability schedules: named exponent patterns") {
    SUBCASE("K=4, G=2, alpha=0.5 MMF: exponents (0.75, 1) per group") {
        const auto plan = achievability_schedule(StrategyKind::noma, Metric::mmf,
                                                 3, 4, 2, 0.5);
        REQUIRE(plan.entries.size() == 4);
        CHECK(plan.entries[0].exponent == doctest::Approx(0.75));
        CHECK(plan.entries[1].exponent == doctest::Approx(1.0));
        CHECK(plan.entries[2].exponent == doctest::Approx(0.75));
        CHECK(plan.entries[3].exponent == doctest::Approx(1.0));
        for (const auto& e : plan.entries) {
            CHECK(e.sinr_exponent == doctest::Approx(0.25));
            CHECK(e.null_set.size() == 2);  // the other group
        }
    }
    SUBCASE("G=1, K=3 MMF: exponents (1/3, 2/3, 1)") {
        const auto plan = achievability_schedule(StrategyKind::noma, Metric::mmf,
                                                 2, 3, 1, 1.0);
        REQUIRE(plan.entries.size() == 3);
        CHECK(plan.entries[0].exponent == doctest::Approx(1.0 / 3));
        CHECK(plan.entries[1].exponent == doctest::Approx(2.0 / 3));
        CHECK(plan.entries[2].exponent == doctest::Approx(1.0));
        for (const auto& e : plan.entries)
            CHECK(e.sinr_exponent == doctest::Approx(1.0 / 3));
    }
    SUBCASE("RS1, M=4, K=6, alpha=1 MMF: beta* = 1/3, served subset of 4") {
        const auto plan = achievability_schedule(StrategyKind::rs1, Metric::mmf,
                                                 4, 6, 1, 1.0);
        CHECK(plan.beta == doctest::Approx(1.0 / 3));
        CHECK(plan.z == doctest::Approx(0.0));
        int privates = 0;
        for (const auto& e : plan.entries)
            if (!e.common) {
                ++privates;
                CHECK(e.exponent == doctest::Approx(1.0 / 3));
            }
        CHECK(privates == 4);
    }
    SUBCASE("RS1 sum: common at full power, privates at alpha") {
        const auto plan = achievability_schedule(StrategyKind::rs1, Metric::sum,
                                                 4, 4, 1, 0.5);
        CHECK(plan.entries[0].common);
        CHECK(plan.entries[0].exponent == doctest::Approx(1.0));
        CHECK(plan.entries[0].sinr_exponent == doctest::Approx(0.5));
        for (std::size_t e = 1; e < plan.entries.size(); ++e)
            CHECK(plan.entries[e].exponent == doctest::Approx(0.5));
    }
    SUBCASE("NOMA G>1 MMF collapses to a zero-gain plan when M < K-g+1") {
        const auto plan = achievability_schedule(StrategyKind::noma, Metric::mmf,
                                                 4, 6, 3, 1.0);
        CHECK(plan.zero_gain);
        for (const auto& e : plan.entries) CHECK(e.sinr_exponent == 0.0);
    }
    SUBCASE("exponents always within [0, 1]") {
        for (double alpha : {0.0, 0.25, 0.5, 0.75, 1.0}) {
            for (StrategyKind kind :
                 {StrategyKind::noma, StrategyKind::mulp, StrategyKind::rs1}) {
                for (Metric m : {Metric::sum, Metric::mmf}) {
                    const int G = kind == StrategyKind::noma ? 2 : 1;
                    const auto plan =
                        achievability_schedule(kind, m, 4, 6, G, alpha);
                    for (const auto& e : plan.entries) {
                        CHECK(e.exponent >= 0.0);
                        CHECK(e.exponent <= 1.0);
                    }
                }
            }
        }
    }
}

TEST_CASE("realized schedules obey the power budget") {
    const SlopeFixture fx(6, 4, 51);
    const ChannelSet cs = fx.perfect(1.0);
    const double P = db_to_linear(30.0);
    for (Metric m : {Metric::sum, Metric::mmf}) {
        const auto plan = achievability_schedule(StrategyKind::rs1, m, 4, 6, 1, 1.0);
        const PrecoderSet ps = realize_schedule(plan, cs, P, 3);
        CHECK(ps.total_power() <= P * (1.0 + 1e-8));
        CHECK(ps.total_power() == doctest::Approx(P).epsilon(1e-8));
    }
}

TEST_CASE("realized SINR slopes match the claimed exponents") {
    // Strong channels (variance 100) push the noise floor out of the fitted
    // window for the interference-limited constructions; the RS MMF private
    // streams are noise-limited and keep variance 1 so the ZF residual stays
    // negligible.
    SUBCASE("NOMA G=1, K=3 cascade: every SINR grows as P^(1/3)") {
        const SlopeFixture fx(3, 2, 1001);
        const auto plan =
            achievability_schedule(StrategyKind::noma, Metric::mmf, 2, 3, 1, 1.0);
        for (double s : realized_sinr_slopes(plan, fx, 100.0, false))
            CHECK(std::abs(s - 1.0 / 3) < 0.05);
    }
    SUBCASE("K=4, G=2, alpha=0.5: every SINR grows as P^(alpha/2)") {
        const SlopeFixture fx = SlopeFixture::grouped(4, 4, 2, 1002);
        const auto plan =
            achievability_schedule(StrategyKind::noma, Metric::mmf, 4, 4, 2, 0.5);
        for (double s : realized_sinr_slopes(plan, fx, 100.0, true))
            CHECK(std::abs(s - 0.25) < 0.05);
    }
    SUBCASE("RS sum split: common at 1-alpha, privates at alpha") {
        const SlopeFixture fx = SlopeFixture::grouped(4, 4, 4, 1003);
        const auto plan =
            achievability_schedule(StrategyKind::rs1, Metric::sum, 4, 4, 1, 0.5);
        const auto slopes = realized_sinr_slopes(plan, fx, 100.0, true);
        CHECK(std::abs(slopes[0] - 0.5) < 0.05);  // common, 1 - alpha
        for (std::size_t e = 1; e < slopes.size(); ++e)
            CHECK(std::abs(slopes[e] - 0.5) < 0.05);  // privates, alpha
    }
    SUBCASE("RS MMF beta* split at M=4, K=6, alpha=1") {
        const SlopeFixture fx(6, 4, 1004);
        const auto plan =
            achievability_schedule(StrategyKind::rs1, Metric::mmf, 4, 6, 1, 1.0);
        const auto slopes = realized_sinr_slopes(plan, fx, 1.0, true);
        CHECK(std::abs(slopes[0] - 2.0 / 3) < 0.05);  // common, 1 - beta*
        for (std::size_t e = 1; e < slopes.size(); ++e)
            CHECK(std::abs(slopes[e] - 1.0 / 3) < 0.05);  // privates, beta*
    }
}
