#include <algorithm>
#include <cmath>
#include <ostream>
#include <sstream>

#include "masim/harness.hpp"
#include "masim/initpoint.hpp"

namespace masim {

namespace {

struct Suite {
    std::ostream& os;
    int failures = 0;

    void check(bool ok, const std::string& name, const std::string& detail) {
        os << (ok ? "[ok]   " : "[FAIL] ") << name << ": " << detail << "\n";
        if (!ok) ++failures;
    }
};

StrategyConfig pick_strategy(Pcg32& rng, int K) {
    switch (rng.next_u32() % 4) {
        case 0: {
            std::vector<int> gs;
            for (int G = 1; G < K; ++G)
                if (K % G == 0) gs.push_back(G);
            if (gs.empty()) return {StrategyKind::mulp, 1};
            return {StrategyKind::noma, gs[rng.next_u32() % gs.size()]};
        }
        case 1: return {StrategyKind::mulp, 1};
        case 2: return {StrategyKind::rs1, 1};
        default: return {StrategyKind::oma, 1};
    }
}

void identity_sweep(Suite& s, int instances) {
    Pcg32 rng(20240501);
    double max_gap = 0.0;
    for (int i = 0; i < instances; ++i) {
        const int K = 2 + rng.next_u32() % 5;
        const int M = 1 + rng.next_u32() % 6;
        const StrategyConfig cfg = pick_strategy(rng, K);
        const StreamLayout layout = stream_layout(cfg, K);
        const ChannelSet cs = sample_channels(K, M, std::vector<double>(K, 1.0),
                                              rng.next_u32());
        const double power = db_to_linear(5.0 + (rng.next_u32() % 7) * 5.0);
        const PrecoderSet ps = random_precoders(rng, K, M, power,
                                                layout.has_common());
        for (int j = 0; j < K; ++j)
            for (int st : layout.decode_sequence[j])
                max_gap = std::max(max_gap,
                                   std::abs(rate_wmmse_gap(cs, ps, layout, j, st)));
    }
    std::ostringstream d;
    d << "max |xi^MMSE - (1 - R)| = " << max_gap << " over " << instances
      << " instances";
    s.check(max_gap < 1e-8, "rate-wmmse identity", d.str());
}

void zfbf_residuals(Suite& s, int instances) {
    Pcg32 rng(77);
    double worst = 0.0;
    for (int i = 0; i < instances; ++i) {
        const int M = 2 + rng.next_u32() % 5;
        const int K = 2 + rng.next_u32() % 5;
        const ChannelSet cs = sample_channels(K, M, std::vector<double>(K, 1.0),
                                              rng.next_u32());
        const int served = rng.next_u32() % K;
        std::vector<int> nulls;
        for (int k = 0; k < K && static_cast<int>(nulls.size()) < M - 1; ++k)
            if (k != served) nulls.push_back(k);
        if (nulls.empty()) continue;
        const Cvec d = zfbf_direction(cs, served, nulls);
        for (int j : nulls)
            worst = std::max(worst, std::abs(cs.estimates[j].dot(d)) /
                                        cs.estimates[j].norm());
    }
    std::ostringstream d;
    d << "max relative residual = " << worst;
    s.check(worst < 1e-9, "zfbf residuals", d.str());
}

void two_user_bounds(Suite& s, int draws) {
    Pcg32 rng(4242);
    const int M = 3;
    const StrategyConfig cfg{StrategyKind::noma, 1};
    const StreamLayout layout = stream_layout(cfg, 2);
    bool mac_ok = true, adaptive_ok = true;
    for (int i = 0; i < draws; ++i) {
        const ChannelSet cs = sample_channels(2, M, {1.0, 1.0}, rng.next_u32());
        const double power = db_to_linear(5.0 + (rng.next_u32() % 6) * 5.0);
        const PrecoderSet ps = random_precoders(rng, 2, M, power, false,
                                                0.2 + 0.8 * rng.uniform());
        const RateReport rep = evaluate_rates(cs, ps, layout);
        // MAC bound at the strong user (slot 0).
        const Cvec& h0 = cs.true_channels[0];
        const double mac = std::log2(1.0 + std::norm(h0.dot(ps.private_precoders[0])) +
                                     std::norm(h0.dot(ps.private_precoders[1])));
        const double strongest =
            std::max(cs.true_channels[0].squaredNorm(), cs.true_channels[1].squaredNorm());
        const double adaptive = std::log2(1.0 + strongest * power);
        mac_ok = mac_ok && rep.sum_rate <= mac + 1e-9;
        adaptive_ok = adaptive_ok && rep.sum_rate <= adaptive + 1e-9;
    }
    s.check(mac_ok, "two-user MAC bound", "sum-rate <= MAC bound on all draws");
    s.check(adaptive_ok, "adaptive-order bound",
            "sum-rate <= log2(1 + max_k ||h_k||^2 P) on all draws");
}

void rs_degenerates_to_mulp(Suite& s) {
    Pcg32 rng(99);
    bool ok = true;
    for (int i = 0; i < 50; ++i) {
        const int K = 2 + rng.next_u32() % 5;
        const int M = 2 + rng.next_u32() % 5;
        const ChannelSet cs = sample_channels(K, M, std::vector<double>(K, 1.0),
                                              rng.next_u32());
        PrecoderSet ps = random_precoders(rng, K, M, db_to_linear(20.0), false);
        const RateReport mulp = mulp_rates(cs, ps);
        ps.common_precoder = Cvec::Zero(M);
        const RateReport rs = rs_rates(cs, ps, CommonAllocPolicy::equal);
        ok = ok && rs.common_rate == 0.0;
        for (int k = 0; k < K; ++k) ok = ok && rs.per_user[k] == mulp.per_user[k];
        ok = ok && rs.sum_rate == mulp.sum_rate && rs.mmf_rate == mulp.mmf_rate;
    }
    s.check(ok, "rs zero-common equals mu-lp", "shared fields bit-identical");
}

void remark2_monotonicity(Suite& s, int draws) {
    Pcg32 rng(1717);
    const StrategyConfig noma{StrategyKind::noma, 1};
    const StreamLayout nl = stream_layout(noma, 2);
    bool ok = true;
    for (int i = 0; i < draws; ++i) {
        const int M = 2 + rng.next_u32() % 4;
        const ChannelSet cs = sample_channels(2, M, {1.0, 1.0}, rng.next_u32());
        const PrecoderSet ps =
            random_precoders(rng, 2, M, db_to_linear(15.0), false);
        const RateReport rn = evaluate_rates(cs, ps, nl);
        const RateReport rm = mulp_rates(cs, ps);
        ok = ok && rn.per_user[0] >= rm.per_user[0] - 1e-12 &&
             rn.per_user[1] <= rm.per_user[1] + 1e-12;
    }
    s.check(ok, "remark-2 per-user monotonicity",
            "NOMA raises user-1 and lowers user-2 vs MU-LP on shared precoders");
}

void dof_consistency(Suite& s) {
    bool ok = true;
    const std::vector<Rational> alphas = {Rational(0), Rational(1, 4), Rational(1, 2),
                                          Rational(3, 4), Rational(1)};
    for (int K = 2; K <= 8; ++K) {
        for (int M = 1; M <= 8; ++M) {
            for (const auto& a : alphas) {
                for (int G = 1; G < K; ++G) {
                    if (K % G != 0) continue;
                    // RS dominance (sum and MMF) over NOMA and MU-LP.
                    for (Metric m : {Metric::sum, Metric::mmf}) {
                        ok = ok && compare_dof(StrategyKind::noma, StrategyKind::rs1,
                                               M, K, G, a, m) <= 0;
                        ok = ok && compare_dof(StrategyKind::mulp, StrategyKind::rs1,
                                               M, K, G, a, m) <= 0;
                    }
                    // Corollary 1: NOMA never beats MU-LP in sum gain.
                    ok = ok && compare_dof(StrategyKind::noma, StrategyKind::mulp,
                                           M, K, G, a, Metric::sum) <= 0;
                }
            }
        }
    }
    s.check(ok, "dof dominance grid",
            "RS >= {NOMA, MU-LP} and NOMA <= MU-LP (sum) on the dense grid");
}

void determinism(Suite& s) {
    ExperimentConfig cfg;
    cfg.num_users = 4;
    cfg.num_antennas = 2;
    cfg.strategies = parse_strategies("mulp,noma:2,oma");
    cfg.snr_grid_db = {10.0, 20.0};
    cfg.n_realizations = 2;
    cfg.seed = 31;
    cfg.threads = 2;
    std::ostringstream a, b;
    write_results_csv(a, run_experiment(cfg));
    write_results_csv(b, run_experiment(cfg));
    s.check(a.str() == b.str(), "campaign determinism",
            "identical CSV across repeated threaded runs");
}

}  // namespace

int run_selftest(std::ostream& os, bool full) {
    Suite s{os};
    identity_sweep(s, full ? 1000 : 200);
    zfbf_residuals(s, full ? 200 : 50);
    two_user_bounds(s, full ? 10000 : 1000);
    rs_degenerates_to_mulp(s);
    remark2_monotonicity(s, full ? 1000 : 200);
    dof_consistency(s);
    determinism(s);
    os << (s.failures == 0 ? "selftest passed\n"
                           : "selftest FAILED (" + std::to_string(s.failures) +
                                 " suites)\n");
    return s.failures;
}

}  // namespace masim
