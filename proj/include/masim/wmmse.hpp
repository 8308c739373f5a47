#pragma once

#include <iosfwd>
#include <span>
#include <vector>

#include "masim/channel.hpp"
#include "masim/common.hpp"
#include "masim/rate.hpp"
#include "masim/strategy.hpp"

namespace masim {

enum class Objective { sum, maxmin };

struct SolveOptions {
    double convergence_tol = 1e-4;  // on objective change per AO iteration
    int max_iterations = 200;
    enum class InnerSolver { kkt_bisection, projected_gradient };
    /// Preference where the subproblem is a plain quadratic (every decoded
    /// stream has a single decode link). Subproblems with min/max coupling
    /// always use the smoothed projected-gradient path.
    InnerSolver inner_solver = InnerSolver::kkt_bisection;
    double inner_tol = 1e-6;          // complementary slackness / solve tolerance
    double inner_kkt_target = 2e-5;   // normalized stationarity target (PGD)
    int inner_max_iterations = 400;   // per smoothing stage cap
    double final_temperature = 1e-3;  // log-sum-exp smoothing floor
    std::uint64_t seed = 0;
};

/// Per-decode-link WMMSE state for one channel realization.
struct LinkState {
    int user = 0, stream = 0, sample = 0;
    double received_power = 0.0;  // T_{j,k} = |h^H p_k|^2 + I_in + I_out + 1
    cxd equalizer;                // g_{j,k}
    double weight = 1.0;          // u_{j,k} > 0
    double mmse = 1.0;            // eps^MMSE
};

/// MSE of decoding `stream` at `decoder` with equalizer g:
/// |g|^2 T - 2 Re{g h^H p} + 1, with T including the unit noise.
double wmmse_mse(const ChannelSet& cs, const PrecoderSet& ps,
                 const StreamLayout& layout, int decoder, int stream, cxd g);

/// Optimal MMSE equalizer p_k^H h_j / T_{j,k}.
cxd mmse_equalizer(const ChannelSet& cs, const PrecoderSet& ps,
                   const StreamLayout& layout, int decoder, int stream);

/// u* = 1 / eps^MMSE; requires a positive MSE.
double mmse_weight(double mmse_value);

/// xi^MMSE - (1 - R) computed through two independent arithmetic routes;
/// identically zero in exact arithmetic (the rate-WMMSE identity).
double rate_wmmse_gap(const ChannelSet& cs, const PrecoderSet& ps,
                      const StreamLayout& layout, int decoder, int stream);

/// The convex subproblem in P for fixed MMSE equalizers/weights taken at a
/// reference point. Exposes its own transformed objective so optimality can
/// be probed directly.
class InnerProblem {
public:
    InnerProblem(std::span<const ChannelSet> samples, const StreamLayout& layout,
                 Objective objective, const PrecoderSet& reference,
                 double temperature);

    /// Transformed objective at candidate precoders (smoothed where the
    /// exact objective has min/max coupling).
    double value(const PrecoderSet& ps) const;
    bool is_quadratic() const { return quadratic_; }

    /// Minimizes value() over tr(PP^H) <= budget. Warm-started at `warm`.
    PrecoderSet solve(const PrecoderSet& warm, const SolveOptions& opts,
                      double* kkt_residual = nullptr,
                      bool* diagonal_loading = nullptr) const;

    /// Normalized KKT residual ||grad F + 2 mu P|| / (1 + ||grad F||) with
    /// the least-squares multiplier (clamped at 0 when inactive).
    double kkt_residual(const PrecoderSet& ps) const;
    void set_temperature(double t) { temperature_ = t; }

private:
    struct Branch {
        std::vector<int> links;  // indices into links_
        double constant = 0.0;
    };
    struct Term {
        std::vector<Branch> branches;
    };

    void eval(const PrecoderSet& ps, double* value, std::vector<Cvec>* grad,
              std::vector<double>* chain_out = nullptr) const;
    double waterfill_level(const std::vector<double>& branch_values,
                           std::vector<double>* chain_weights) const;
    /// Exact KKT minimizer of the chain-weighted quadratic (per-stream
    /// regularized inverse + power-multiplier bisection).
    PrecoderSet solve_weighted(const std::vector<double>& chain,
                               bool* diagonal_loading) const;
    /// Damped Gauss-Newton tail: chain-weighted quadratic curvature plus the
    /// log-sum-exp covariance term, solved as a small dense real system.
    PrecoderSet newton_polish(const PrecoderSet& start, const SolveOptions& opts,
                              double* kkt_residual_out) const;

    std::span<const ChannelSet> samples_;
    const StreamLayout& layout_;
    Objective objective_;
    double budget_;
    double temperature_;
    bool quadratic_ = false;
    bool rs_waterfill_ = false;
    std::vector<LinkState> links_;
    std::vector<std::vector<int>> visible_;  // per link-class: streams in T
    std::vector<Term> terms_;
    int num_streams_ = 0;
    // Per-class sample-averaged quadratics: the class branch value is
    // sum_{m seen} p_m^H A_c p_m - 2 Re(b_c^H p_stream) + kappa_c, so every
    // evaluation is independent of the sample count.
    std::vector<Cmat> class_A_;
    std::vector<Cvec> class_b_;
    std::vector<double> class_kappa_;
    std::vector<std::vector<bool>> class_sees_;  // class x stream

    friend class AoEngine;
};

/// One fixed-(g,u) precoder update, sum-rate form (Problem (36)).
PrecoderSet precoder_update_sumrate(const ChannelSet& cs, const StreamLayout& layout,
                                    const PrecoderSet& reference,
                                    const SolveOptions& opts,
                                    double* kkt_residual = nullptr);

/// One fixed-(g,u) precoder update, max-min form (Problem (38)).
PrecoderSet precoder_update_maxmin(const ChannelSet& cs, const StreamLayout& layout,
                                   const PrecoderSet& reference,
                                   const SolveOptions& opts,
                                   double* kkt_residual = nullptr);

struct IterationRecord {
    int iteration = 0;
    double objective = 0.0;
    double power_used = 0.0;
    double kkt_residual = 0.0;
    bool diagonal_loading = false;
};

struct SolveResult {
    PrecoderSet precoders;
    RateReport report;
    std::vector<IterationRecord> trace;
    bool converged = false;
    bool budget_exhausted = false;  // max_iterations hit before convergence
};

void write_trace_csv(std::ostream& os, const std::vector<IterationRecord>& trace);

/// Alternating optimization (Algorithm 1): MMSE equalizer/weight updates
/// alternated with convex precoder updates until the objective change drops
/// below tol. The recorded objective is reconstructed through the rate
/// module each iteration and is non-decreasing (a monotone safeguard damps
/// or rejects steps the smoothed inner solve cannot certify).
SolveResult ao_solve(const ChannelSet& cs, const StreamLayout& layout,
                     Objective objective, const PrecoderSet& init,
                     const SolveOptions& opts);
SolveResult ao_solve(const ChannelSet& cs, const StrategyConfig& config,
                     Objective objective, const PrecoderSet& init,
                     const SolveOptions& opts);

/// Sample Average Approximation for imperfect CSIT: conditional channel
/// samples are drawn around the estimate, every per-link MSE/rate is
/// replaced by its sample average, and the same AO loop runs on the
/// averaged objective. The returned report is the ergodic one.
SolveResult saa_solve(const ChannelSet& estimate_cs, const CsitModel& model,
                      int n_samples, const StreamLayout& layout,
                      Objective objective, const PrecoderSet& init,
                      const SolveOptions& opts);

}  // namespace masim
