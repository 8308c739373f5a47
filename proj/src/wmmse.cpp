#include "masim/wmmse.hpp"

#include <Eigen/Cholesky>
#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <ostream>

namespace masim {

namespace {

// h^H p_s for every stream at one decoder.
std::vector<cxd> received_row(const ChannelSet& cs, const PrecoderSet& ps, int user) {
    const Cvec& h = cs.true_channels[user];
    std::vector<cxd> r(ps.num_streams());
    for (int s = 0; s < ps.num_streams(); ++s) r[s] = h.dot(ps.stream(s));
    return r;
}

double link_T(const StreamLayout& layout, const std::vector<cxd>& r, int user,
              int stream) {
    double t = 1.0 + std::norm(r[stream]);
    for (int m = 0; m < layout.num_streams(); ++m)
        if (layout.interferes(user, stream, m)) t += std::norm(r[m]);
    return t;
}

double norm2(const std::vector<Cvec>& v) {
    double t = 0.0;
    for (const auto& x : v) t += x.squaredNorm();
    return t;
}

double dot_re(const std::vector<Cvec>& a, const std::vector<Cvec>& b) {
    double t = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) t += a[i].dot(b[i]).real();
    return t;
}

std::vector<Cvec> unpack(const PrecoderSet& ps) {
    std::vector<Cvec> v;
    v.reserve(ps.num_streams());
    for (int s = 0; s < ps.num_streams(); ++s) v.push_back(ps.stream(s));
    return v;
}

PrecoderSet pack(const std::vector<Cvec>& v, const StreamLayout& layout,
                 double budget) {
    PrecoderSet ps;
    ps.power_budget = budget;
    ps.private_precoders.assign(layout.num_users, Cvec());
    for (int s = 0; s < layout.num_users; ++s)
        ps.private_precoders[layout.streams[s].owner] = v[s];
    if (layout.has_common()) ps.common_precoder = v[layout.common_stream()];
    return ps;
}

void project_ball(std::vector<Cvec>& v, double budget) {
    const double p = norm2(v);
    if (p > budget) {
        const double c = std::sqrt(budget / p);
        for (auto& x : v) x *= c;
    }
}

double stable_lse(const std::vector<double>& vals, double tau,
                  std::vector<double>* softmax) {
    const double m = *std::max_element(vals.begin(), vals.end());
    double z = 0.0;
    for (double v : vals) z += std::exp((v - m) / tau);
    if (softmax) {
        softmax->resize(vals.size());
        for (std::size_t i = 0; i < vals.size(); ++i)
            (*softmax)[i] = std::exp((vals[i] - m) / tau) / z;
    }
    return m + tau * std::log(z);
}

double softplus(double x, double tau) {
    if (x > 40.0 * tau) return x;
    if (x < -40.0 * tau) return tau * std::exp(x / tau);
    return tau * std::log1p(std::exp(x / tau));
}

double sigmoid(double x, double tau) {
    const double t = x / tau;
    if (t > 40.0) return 1.0;
    if (t < -40.0) return std::exp(t);
    return 1.0 / (1.0 + std::exp(-t));
}

}  // namespace

double wmmse_mse(const ChannelSet& cs, const PrecoderSet& ps,
                 const StreamLayout& layout, int decoder, int stream, cxd g) {
    if (!layout.decodes(decoder, stream))
        throw UsageError("wmmse_mse: link outside the decode set");
    const auto r = received_row(cs, ps, decoder);
    const double T = link_T(layout, r, decoder, stream);
    return std::norm(g) * T - 2.0 * (g * r[stream]).real() + 1.0;
}

cxd mmse_equalizer(const ChannelSet& cs, const PrecoderSet& ps,
                   const StreamLayout& layout, int decoder, int stream) {
    if (!layout.decodes(decoder, stream))
        throw UsageError("mmse_equalizer: link outside the decode set");
    const auto r = received_row(cs, ps, decoder);
    const double T = link_T(layout, r, decoder, stream);
    return std::conj(r[stream]) / T;
}

double mmse_weight(double mmse_value) {
    if (!(mmse_value > 0.0))
        throw InvariantError("mmse_weight: MSE must be positive");
    return 1.0 / mmse_value;
}

double rate_wmmse_gap(const ChannelSet& cs, const PrecoderSet& ps,
                      const StreamLayout& layout, int decoder, int stream) {
    // xi route: through equalizer, MSE and weight algebra.
    const cxd g = mmse_equalizer(cs, ps, layout, decoder, stream);
    const double eps = wmmse_mse(cs, ps, layout, decoder, stream, g);
    const double u = mmse_weight(eps);
    const double xi = u * eps - std::log2(u);
    // rate route: through the SINR expression.
    const double rate = link_rate(cs, ps, layout, decoder, stream);
    return xi - (1.0 - rate);
}

// ---------------------------------------------------------------------------
// InnerProblem
// ---------------------------------------------------------------------------

InnerProblem::InnerProblem(std::span<const ChannelSet> samples,
                           const StreamLayout& layout, Objective objective,
                           const PrecoderSet& reference, double temperature)
    : samples_(samples),
      layout_(layout),
      objective_(objective),
      budget_(reference.power_budget),
      temperature_(temperature),
      num_streams_(layout.num_streams()) {
    if (samples.empty()) throw ConfigError("inner problem: no channel samples");

    // Link classes: one per (decoder, stream) pair; links replicate a class
    // across samples and carry the 1/N averaging weight implicitly.
    const int N = static_cast<int>(samples.size());
    std::vector<std::pair<int, int>> classes;
    for (int j = 0; j < layout.num_users; ++j)
        for (int s : layout.decode_sequence[j]) classes.emplace_back(j, s);

    for (const auto& [j, s] : classes) visible_.push_back(layout.interferers(j, s));
    const int M = samples[0].num_antennas;
    const double n_inv = 1.0 / N;
    links_.reserve(classes.size() * N);
    for (std::size_t c = 0; c < classes.size(); ++c) {
        const auto [j, s] = classes[c];
        Cmat A = Cmat::Zero(M, M);
        Cvec b = Cvec::Zero(M);
        double kappa = 0.0;
        for (int n = 0; n < N; ++n) {
            LinkState l;
            l.user = j;
            l.stream = s;
            l.sample = n;
            const auto r = received_row(samples[n], reference, j);
            l.received_power = link_T(layout, r, j, s);
            l.equalizer = std::conj(r[s]) / l.received_power;
            l.mmse = (l.received_power - std::norm(r[s])) / l.received_power;
            l.weight = 1.0 / l.mmse;
            links_.push_back(l);
            const Cvec& h = samples[n].true_channels[j];
            const double ug2 = l.weight * std::norm(l.equalizer);
            A.noalias() += (n_inv * ug2) * (h * h.adjoint());
            b.noalias() += (n_inv * l.weight * std::conj(l.equalizer)) * h;
            kappa += n_inv * (ug2 + l.weight - std::log2(l.weight));
        }
        class_A_.push_back(std::move(A));
        class_b_.push_back(std::move(b));
        class_kappa_.push_back(kappa);
        std::vector<bool> sees(layout.num_streams(), false);
        sees[s] = true;
        for (int m : visible_[c]) sees[m] = true;
        class_sees_.push_back(std::move(sees));
    }

    const auto class_of = [&](int j, int s) {
        for (std::size_t c = 0; c < classes.size(); ++c)
            if (classes[c].first == j && classes[c].second == s)
                return static_cast<int>(c);
        throw InvariantError("inner problem: missing link class");
    };

    if (objective == Objective::maxmin && layout.has_common()) {
        // RS max-min: soft water-fill over private totals fed by the common
        // rate; terms_[0] holds the private branches, terms_[1] the common.
        rs_waterfill_ = true;
        Term priv, common;
        for (int k = 0; k < layout.num_users; ++k) {
            priv.branches.push_back({{class_of(k, k)}, 0.0});
            common.branches.push_back({{class_of(k, layout.common_stream())}, 0.0});
        }
        terms_.push_back(std::move(priv));
        terms_.push_back(std::move(common));
        quadratic_ = false;
        return;
    }

    if (objective == Objective::maxmin) {
        Term t;
        for (std::size_t c = 0; c < classes.size(); ++c)
            t.branches.push_back({{static_cast<int>(c)}, 0.0});
        terms_.push_back(std::move(t));
        quadratic_ = terms_[0].branches.size() == 1;
        return;
    }

    // Sum objective: one term per stream, a branch per decode link of that
    // stream. Multi-decoder streams carry the max (smoothed) over decoders.
    bool quad = true;
    for (int s = 0; s < layout.num_streams(); ++s) {
        Term t;
        for (int j : layout.streams[s].decoders)
            t.branches.push_back({{class_of(j, s)}, 0.0});
        quad = quad && t.branches.size() == 1;
        terms_.push_back(std::move(t));
    }
    quadratic_ = quad;
}

double InnerProblem::waterfill_level(const std::vector<double>& branch_values,
                                     std::vector<double>* chain_weights) const {
    const int K = layout_.num_users;
    const double tau = temperature_;
    std::vector<double> rk(K);  // private xi-rates
    for (int k = 0; k < K; ++k) rk[k] = 1.0 - branch_values[k];
    std::vector<double> common_vals(branch_values.begin() + K, branch_values.end());
    std::vector<double> common_softmax;
    const double rc = 1.0 - stable_lse(common_vals, tau, &common_softmax);
    const double target = std::max(softplus(rc, tau), 1e-12);

    const double rmin = *std::min_element(rk.begin(), rk.end());
    const double rmax = *std::max_element(rk.begin(), rk.end());
    double lo = rmin - target - 50.0 * tau - 1.0;
    double hi = rmax + target + 1.0;
    for (int it = 0; it < 200; ++it) {
        const double mid = 0.5 * (lo + hi);
        double spent = 0.0;
        for (double r : rk) spent += softplus(mid - r, tau);
        (spent > target ? hi : lo) = mid;
    }
    const double level = 0.5 * (lo + hi);

    if (chain_weights) {
        chain_weights->assign(2 * K, 0.0);
        double sig_sum = 0.0;
        std::vector<double> sig(K);
        for (int k = 0; k < K; ++k) {
            sig[k] = sigmoid(level - rk[k], tau);
            sig_sum += sig[k];
        }
        sig_sum = std::max(sig_sum, 1e-30);
        const double common_gate = sigmoid(rc, tau);
        for (int k = 0; k < K; ++k) (*chain_weights)[k] = sig[k] / sig_sum;
        for (int k = 0; k < K; ++k)
            (*chain_weights)[K + k] = common_gate * common_softmax[k] / sig_sum;
    }
    return level;
}

void InnerProblem::eval(const PrecoderSet& ps, double* value,
                        std::vector<Cvec>* grad,
                        std::vector<double>* chain_out) const {
    const int C = static_cast<int>(visible_.size());
    const int N = static_cast<int>(samples_.size());
    const bool need_chain = grad != nullptr || chain_out != nullptr;
    const int M = samples_[0].num_antennas;

    // Sample-averaged branch value per class from the cached quadratics.
    std::vector<double> class_value(C);
    std::vector<std::vector<Cvec>> class_Ap(C);  // A_c p_s for seen streams
    for (int c = 0; c < C; ++c) {
        double quad = 0.0;
        class_Ap[c].assign(num_streams_, Cvec());
        for (int s = 0; s < num_streams_; ++s) {
            if (!class_sees_[c][s]) continue;
            class_Ap[c][s].noalias() = class_A_[c] * ps.stream(s);
            quad += ps.stream(s).dot(class_Ap[c][s]).real();
        }
        const int sig = links_[c * N].stream;
        class_value[c] =
            quad - 2.0 * class_b_[c].dot(ps.stream(sig)).real() + class_kappa_[c];
    }

    // Objective + chain weights from the term structure.
    std::vector<double> class_chain(C, 0.0);
    double f = 0.0;
    if (rs_waterfill_) {
        std::vector<double> bvals;
        for (const Term& t : terms_)
            for (const Branch& br : t.branches)
                bvals.push_back(class_value[br.links[0]] + br.constant);
        std::vector<double> weights;
        f = -waterfill_level(bvals, need_chain ? &weights : nullptr);
        if (need_chain) {
            int idx = 0;
            for (const Term& t : terms_)
                for (const Branch& br : t.branches)
                    class_chain[br.links[0]] = weights[idx++];
        }
    } else {
        for (const Term& t : terms_) {
            std::vector<double> bvals;
            for (const Branch& br : t.branches)
                bvals.push_back(class_value[br.links[0]] + br.constant);
            if (t.branches.size() == 1) {
                f += bvals[0];
                class_chain[t.branches[0].links[0]] += 1.0;
            } else {
                std::vector<double> softmax;
                f += stable_lse(bvals, temperature_, need_chain ? &softmax : nullptr);
                if (need_chain)
                    for (std::size_t i = 0; i < t.branches.size(); ++i)
                        class_chain[t.branches[i].links[0]] += softmax[i];
            }
        }
    }
    if (value) *value = f;
    if (chain_out) *chain_out = class_chain;
    if (!grad) return;

    grad->assign(num_streams_, Cvec::Zero(M));
    for (int c = 0; c < C; ++c) {
        if (class_chain[c] == 0.0) continue;
        const int sig = links_[c * N].stream;
        for (int s = 0; s < num_streams_; ++s)
            if (class_sees_[c][s]) (*grad)[s] += class_chain[c] * class_Ap[c][s];
        (*grad)[sig] -= class_chain[c] * class_b_[c];
    }
}

double InnerProblem::value(const PrecoderSet& ps) const {
    double f = 0.0;
    eval(ps, &f, nullptr);
    return f;
}

double InnerProblem::kkt_residual(const PrecoderSet& ps) const {
    std::vector<Cvec> grad;
    eval(ps, nullptr, &grad);
    const auto v = unpack(ps);
    const double gnorm = std::sqrt(norm2(grad));
    const double pw = norm2(v);
    double mu = 0.0;
    if (pw >= budget_ * (1.0 - 1e-8) && pw > 0.0)
        mu = std::max(0.0, -dot_re(grad, v) / pw);
    double r2 = 0.0;
    for (std::size_t s = 0; s < grad.size(); ++s)
        r2 += (grad[s] + mu * v[s]).squaredNorm();
    return std::sqrt(r2) / (1.0 + gnorm);
}

PrecoderSet InnerProblem::solve_weighted(const std::vector<double>& chain,
                                         bool* diagonal_loading) const {
    const int M = samples_[0].num_antennas;
    const int N = static_cast<int>(samples_.size());
    const int C = static_cast<int>(visible_.size());
    std::vector<Cmat> A(num_streams_, Cmat::Zero(M, M));
    std::vector<Cvec> b(num_streams_, Cvec::Zero(M));
    for (int c = 0; c < C; ++c) {
        if (chain[c] == 0.0) continue;
        for (int s = 0; s < num_streams_; ++s)
            if (class_sees_[c][s]) A[s] += chain[c] * class_A_[c];
        b[links_[c * N].stream] += chain[c] * class_b_[c];
    }

    double bnorm2 = 0.0;
    for (const auto& v : b) bnorm2 += v.squaredNorm();
    std::vector<Cvec> p(num_streams_, Cvec::Zero(M));
    if (bnorm2 == 0.0) return pack(p, layout_, budget_);

    const auto solve_mu = [&](double mu, std::vector<Cvec>& out) {
        double power = 0.0;
        for (int s = 0; s < num_streams_; ++s) {
            Cmat lhs = A[s] + mu * Cmat::Identity(M, M);
            out[s] = lhs.ldlt().solve(b[s]);
            const double resid = (lhs * out[s] - b[s]).norm();
            if (!out[s].allFinite() || resid > 1e-8 * (1.0 + b[s].norm())) {
                const double ridge = 1e-12 * (lhs.real().trace() / M + 1.0);
                out[s] = (lhs + ridge * Cmat::Identity(M, M)).ldlt().solve(b[s]);
                if (diagonal_loading) *diagonal_loading = true;
            }
            power += out[s].squaredNorm();
        }
        return power;
    };

    if (solve_mu(0.0, p) > budget_) {
        double lo = 0.0, hi = std::sqrt(bnorm2 / budget_);
        for (int it = 0; it < 200 && (hi - lo) > 1e-15 * hi; ++it) {
            const double mid = 0.5 * (lo + hi);
            (solve_mu(mid, p) > budget_ ? lo : hi) = mid;
        }
        solve_mu(hi, p);
    }
    return pack(p, layout_, budget_);
}

namespace {

// [Re A, -Im A; Im A, Re A]: the real form of a Hermitian quadratic.
Eigen::MatrixXd realify(const Cmat& a) {
    const int m = static_cast<int>(a.rows());
    Eigen::MatrixXd r(2 * m, 2 * m);
    r.topLeftCorner(m, m) = a.real();
    r.topRightCorner(m, m) = -a.imag();
    r.bottomLeftCorner(m, m) = a.imag();
    r.bottomRightCorner(m, m) = a.real();
    return r;
}

Eigen::VectorXd realify_streams(const std::vector<Cvec>& v) {
    int n = 0;
    for (const auto& x : v) n += 2 * static_cast<int>(x.size());
    Eigen::VectorXd r(n);
    int at = 0;
    for (const auto& x : v) {
        const int m = static_cast<int>(x.size());
        r.segment(at, m) = x.real();
        r.segment(at + m, m) = x.imag();
        at += 2 * m;
    }
    return r;
}

std::vector<Cvec> complexify_streams(const Eigen::VectorXd& r, int streams, int m) {
    std::vector<Cvec> v(streams, Cvec(m));
    for (int s = 0; s < streams; ++s) {
        for (int i = 0; i < m; ++i)
            v[s](i) = cxd(r(s * 2 * m + i), r(s * 2 * m + m + i));
    }
    return v;
}

}  // namespace

PrecoderSet InnerProblem::newton_polish(const PrecoderSet& start,
                                        const SolveOptions& opts,
                                        double* kkt_residual_out) const {
    const int M = samples_[0].num_antennas;
    const int C = static_cast<int>(visible_.size());
    const int N = static_cast<int>(samples_.size());
    const int dim = 2 * M * num_streams_;

    auto v = unpack(start);
    project_ball(v, budget_);
    PrecoderSet cur = pack(v, layout_, budget_);
    double cur_f = value(cur);
    double best_resid = kkt_residual(cur);
    PrecoderSet best = cur;
    double lambda = 1e-8;

    for (int it = 0; it < 80 && best_resid >= opts.inner_kkt_target; ++it) {
        std::vector<Cvec> grad;
        std::vector<double> chain;
        double f = 0.0;
        eval(cur, &f, &grad, &chain);

        // KKT residual and the active-set multiplier.
        const auto vc = unpack(cur);
        const double pw = norm2(vc);
        double mu = 0.0;
        if (pw >= budget_ * (1.0 - 1e-8) && pw > 0.0)
            mu = std::max(0.0, -dot_re(grad, vc) / pw);
        double r2 = 0.0;
        for (std::size_t s = 0; s < grad.size(); ++s)
            r2 += (grad[s] + mu * vc[s]).squaredNorm();
        const double resid = std::sqrt(r2) / (1.0 + std::sqrt(norm2(grad)));
        if (resid < best_resid) {
            best_resid = resid;
            best = cur;
        }
        if (best_resid < opts.inner_kkt_target) break;

        // Gauss-Newton model: chain-weighted quadratic blocks plus the
        // soft-max covariance curvature, in real coordinates.
        Eigen::MatrixXd H = Eigen::MatrixXd::Zero(dim, dim);
        for (int s = 0; s < num_streams_; ++s) {
            Cmat As = Cmat::Zero(M, M);
            for (int c = 0; c < C; ++c)
                if (chain[c] != 0.0 && class_sees_[c][s]) As += chain[c] * class_A_[c];
            H.block(2 * M * s, 2 * M * s, 2 * M, 2 * M) = 2.0 * realify(As);
        }
        {
            // Branch gradients for the covariance term.
            std::vector<Eigen::VectorXd> bg;
            std::vector<double> bw;
            Eigen::VectorXd mean = Eigen::VectorXd::Zero(dim);
            double wsum = 0.0;
            for (int c = 0; c < C; ++c) {
                if (chain[c] <= 1e-12) continue;
                std::vector<Cvec> g(num_streams_, Cvec::Zero(M));
                for (int s = 0; s < num_streams_; ++s)
                    if (class_sees_[c][s]) g[s] = class_A_[c] * cur.stream(s);
                g[links_[c * N].stream] -= class_b_[c];
                Eigen::VectorXd gr = 2.0 * realify_streams(g);
                mean += chain[c] * gr;
                wsum += chain[c];
                bg.push_back(std::move(gr));
                bw.push_back(chain[c]);
            }
            if (wsum > 1e-12) {
                for (std::size_t i = 0; i < bg.size(); ++i)
                    H.noalias() += (bw[i] / temperature_) * (bg[i] * bg[i].transpose());
                H.noalias() -=
                    (1.0 / (temperature_ * wsum)) * (mean * mean.transpose());
            }
        }
        H.diagonal().array() += 2.0 * mu;

        Eigen::VectorXd x = realify_streams(vc);
        std::vector<Cvec> kkt_grad = grad;
        for (std::size_t s = 0; s < kkt_grad.size(); ++s) kkt_grad[s] += mu * vc[s];
        const Eigen::VectorXd g_r = 2.0 * realify_streams(kkt_grad);

        bool moved = false;
        for (int boost = 0; boost < 6 && !moved; ++boost) {
            Eigen::MatrixXd Hl = H;
            Hl.diagonal().array() += lambda * (1.0 + H.diagonal().maxCoeff());
            const Eigen::VectorXd d = Hl.ldlt().solve(-g_r);
            if (!d.allFinite()) {
                lambda *= 30.0;
                continue;
            }
            for (double step = 1.0; step > 1e-8; step *= 0.4) {
                auto vn = complexify_streams(x + step * d, num_streams_, M);
                project_ball(vn, budget_);
                PrecoderSet cand = pack(vn, layout_, budget_);
                const double fc = value(cand);
                if (fc < cur_f - 1e-14 * (1.0 + std::abs(cur_f))) {
                    if (std::getenv("MASIM_DEBUG_POLISH"))
                        std::fprintf(stderr,
                                     "  polish it=%d resid=%.3g f=%.10f step=%g "
                                     "lambda=%.2g dnorm=%.3g\n",
                                     it, resid, fc, step, lambda, d.norm());
                    cur = std::move(cand);
                    cur_f = fc;
                    moved = true;
                    lambda = std::max(1e-10, lambda * 0.3);
                    break;
                }
            }
            if (!moved) lambda *= 30.0;
        }
        if (!moved) {
            if (std::getenv("MASIM_DEBUG_POLISH"))
                std::fprintf(stderr, "  polish STALL it=%d resid=%.3g lambda=%.2g\n",
                             it, resid, lambda);
            break;
        }
    }
    if (kkt_residual_out) *kkt_residual_out = best_resid;
    return best;
}

PrecoderSet InnerProblem::solve(const PrecoderSet& warm, const SolveOptions& opts,
                                double* kkt_residual_out,
                                bool* diagonal_loading) const {
    if (diagonal_loading) *diagonal_loading = false;

    if (quadratic_) {
        // Plain quadratic subproblem: exact KKT in one weighted solve.
        const std::vector<double> ones(visible_.size(), 1.0);
        const PrecoderSet out = solve_weighted(ones, diagonal_loading);
        if (kkt_residual_out) *kkt_residual_out = kkt_residual(out);
        return out;
    }

    // Smoothed path: projected gradient with temperature annealing, then a
    // weighted-KKT fixed-point polish at the final temperature.
    auto v = unpack(warm);
    project_ball(v, budget_);
    std::vector<double> stages;
    for (double t = 0.5; t > temperature_ * 4.0; t *= 0.2) stages.push_back(t);
    stages.push_back(temperature_);

    InnerProblem& self = const_cast<InnerProblem&>(*this);
    const double tau_final = temperature_;
    double last_resid = std::numeric_limits<double>::infinity();
    // The gradient stages only need to land in the right basin; the
    // weighted-KKT fixed-point polish below closes the residual gap far
    // faster than a long first-order tail would.
    for (std::size_t stage = 0; stage < stages.size(); ++stage) {
        self.temperature_ = stages[stage];
        const bool final_stage = stage + 1 == stages.size();
        const double target = final_stage ? opts.inner_kkt_target : 1e-3;
        const int cap = final_stage ? opts.inner_max_iterations : 300;

        double f = 0.0;
        std::vector<Cvec> g;
        eval(pack(v, layout_, budget_), &f, &g);
        double eta = 0.1 * (std::sqrt(norm2(v)) + 1.0) / (std::sqrt(norm2(g)) + 1e-12);

        for (int it = 0; it < cap; ++it) {
            // KKT residual of the current iterate.
            const double gnorm = std::sqrt(norm2(g));
            const double pw = norm2(v);
            double mu = 0.0;
            if (pw >= budget_ * (1.0 - 1e-8) && pw > 0.0)
                mu = std::max(0.0, -dot_re(g, v) / pw);
            double r2 = 0.0;
            for (std::size_t s = 0; s < g.size(); ++s)
                r2 += (g[s] + mu * v[s]).squaredNorm();
            last_resid = std::sqrt(r2) / (1.0 + gnorm);
            if (last_resid < target) break;

            std::vector<Cvec> vn;
            double fn = 0.0;
            bool moved = false;
            for (int bt = 0; bt < 60; ++bt) {
                vn = v;
                for (std::size_t s = 0; s < vn.size(); ++s) vn[s] -= eta * g[s];
                project_ball(vn, budget_);
                std::vector<Cvec> diff = vn;
                for (std::size_t s = 0; s < diff.size(); ++s) diff[s] -= v[s];
                const double step2 = norm2(diff);
                if (step2 == 0.0) break;
                fn = value(pack(vn, layout_, budget_));
                if (fn <= f - 1e-4 * step2 / eta + 1e-14 * (1.0 + std::abs(f))) {
                    moved = true;
                    break;
                }
                eta *= 0.5;
            }
            if (!moved) break;

            std::vector<Cvec> gn;
            eval(pack(vn, layout_, budget_), &fn, &gn);
            // Barzilai-Borwein step with safeguards.
            std::vector<Cvec> dx = vn, dg = gn;
            for (std::size_t s = 0; s < dx.size(); ++s) {
                dx[s] -= v[s];
                dg[s] -= g[s];
            }
            const double num = norm2(dx);
            const double den = dot_re(dx, dg);
            eta = den > 1e-30 ? std::clamp(num / den, 1e-12, 1e12) : eta * 2.0;
            v = std::move(vn);
            f = fn;
            g = std::move(gn);
        }
    }
    self.temperature_ = tau_final;

    // The gradient stages only locate the basin; the curvature-aware polish
    // closes the stationarity gap.
    double resid = 0.0;
    const PrecoderSet out = newton_polish(pack(v, layout_, budget_), opts, &resid);
    if (kkt_residual_out) *kkt_residual_out = resid;
    return out;
}

PrecoderSet precoder_update_sumrate(const ChannelSet& cs, const StreamLayout& layout,
                                    const PrecoderSet& reference,
                                    const SolveOptions& opts,
                                    double* kkt_residual) {
    const std::vector<ChannelSet> samples{cs};
    InnerProblem prob(samples, layout, Objective::sum, reference,
                      opts.final_temperature);
    return prob.solve(reference, opts, kkt_residual);
}

PrecoderSet precoder_update_maxmin(const ChannelSet& cs, const StreamLayout& layout,
                                   const PrecoderSet& reference,
                                   const SolveOptions& opts,
                                   double* kkt_residual) {
    const std::vector<ChannelSet> samples{cs};
    InnerProblem prob(samples, layout, Objective::maxmin, reference,
                      opts.final_temperature);
    return prob.solve(reference, opts, kkt_residual);
}

void write_trace_csv(std::ostream& os, const std::vector<IterationRecord>& trace) {
    os << "iteration,objective,power_used,max_kkt_residual,diagonal_loading\n";
    char buf[128];
    for (const auto& r : trace) {
        std::snprintf(buf, sizeof(buf), "%d,%.12g,%.12g,%.4g,%d\n", r.iteration,
                      r.objective, r.power_used, r.kkt_residual,
                      r.diagonal_loading ? 1 : 0);
        os << buf;
    }
}

// ---------------------------------------------------------------------------
// Alternating optimization
// ---------------------------------------------------------------------------

namespace {

// Average-then-min report used as the SAA optimizer objective: per-link rates
// averaged over the conditional samples first, then the usual aggregation.
RateReport saa_objective_report(std::span<const ChannelSet> samples,
                                const PrecoderSet& ps, const StreamLayout& layout,
                                CommonAllocPolicy policy) {
    RateReport acc;
    for (std::size_t n = 0; n < samples.size(); ++n) {
        const RateReport r = evaluate_rates(samples[n], ps, layout,
                                            CommonAllocPolicy::equal);
        if (n == 0)
            acc.per_link = r.per_link;
        else
            for (auto& [key, val] : acc.per_link) val += r.per_link.at(key);
    }
    const double inv = 1.0 / static_cast<double>(samples.size());
    for (auto& [key, val] : acc.per_link) val *= inv;

    const int K = layout.num_users;
    std::vector<double> stream_rate(layout.num_streams(),
                                    std::numeric_limits<double>::infinity());
    for (const auto& [key, val] : acc.per_link)
        stream_rate[key.second] = std::min(stream_rate[key.second], val);
    acc.per_user.assign(K, 0.0);
    for (int s = 0; s < layout.num_streams(); ++s)
        if (!layout.streams[s].common) acc.per_user[layout.streams[s].owner] = stream_rate[s];
    if (layout.has_common()) {
        acc.common_rate = stream_rate[layout.common_stream()];
        acc.common_alloc = policy == CommonAllocPolicy::mmf_equalizing
                               ? mmf_equalizing_alloc(acc.per_user, acc.common_rate)
                               : std::vector<double>(K, acc.common_rate / K);
        for (int k = 0; k < K; ++k) acc.per_user[k] += acc.common_alloc[k];
    }
    acc.sum_rate = 0.0;
    for (double r : acc.per_user) acc.sum_rate += r;
    acc.mmf_rate = *std::min_element(acc.per_user.begin(), acc.per_user.end());
    return acc;
}

class AoEngine {
public:
    AoEngine(std::vector<ChannelSet> samples, const StreamLayout& layout,
             Objective objective, const SolveOptions& opts)
        : samples_(std::move(samples)),
          layout_(layout),
          objective_(objective),
          opts_(opts) {
        policy_ = (objective == Objective::maxmin && layout.has_common())
                      ? CommonAllocPolicy::mmf_equalizing
                      : CommonAllocPolicy::equal;
    }

    RateReport report(const PrecoderSet& ps) const {
        if (samples_.size() == 1)
            return evaluate_rates(samples_[0], ps, layout_, policy_);
        return saa_objective_report(samples_, ps, layout_, policy_);
    }

    double pick(const RateReport& r) const {
        return objective_ == Objective::sum ? r.sum_rate : r.mmf_rate;
    }

    SolveResult run(const PrecoderSet& init) {
        PrecoderSet P = init;
        const double budget = init.power_budget;
        if (P.total_power() > budget * (1.0 + 1e-8))
            throw ConfigError("ao_solve: infeasible initial precoders");
        if (P.total_power() > budget) {
            auto v = unpack(P);
            project_ball(v, budget);
            P = pack(v, layout_, budget);
        }

        SolveResult res;
        RateReport rep = report(P);
        double obj = pick(rep);
        res.trace.push_back({0, obj, P.total_power(), 0.0, false});

        for (int it = 1; it <= opts_.max_iterations; ++it) {
            InnerProblem prob(samples_, layout_, objective_, P,
                              opts_.final_temperature);
            double resid = 0.0;
            bool loaded = false;
            const PrecoderSet cand = prob.solve(P, opts_, &resid, &loaded);

            // Monotone safeguard: damp along the feasible segment if the
            // full step does not improve the true objective.
            bool accepted = false;
            PrecoderSet next;
            RateReport next_rep;
            double next_obj = 0.0;
            for (double theta : {1.0, 0.5, 0.25, 0.125, 0.0625}) {
                auto vp = unpack(P);
                const auto vc = unpack(cand);
                for (std::size_t s = 0; s < vp.size(); ++s)
                    vp[s] = (1.0 - theta) * vp[s] + theta * vc[s];
                next = pack(vp, layout_, budget);
                next_rep = report(next);
                next_obj = pick(next_rep);
                if (next_obj >= obj - 1e-12) {
                    accepted = true;
                    break;
                }
            }
            if (!accepted) {
                res.converged = true;  // fixed point within smoothing resolution
                break;
            }
            if (next_obj < obj - 1e-9)
                throw InvariantError("ao_solve: non-monotone accepted step");

            P = std::move(next);
            rep = std::move(next_rep);
            res.trace.push_back({it, next_obj, P.total_power(), resid, loaded});
            const double delta = next_obj - obj;
            obj = next_obj;
            if (std::abs(delta) < opts_.convergence_tol) {
                res.converged = true;
                break;
            }
        }
        res.budget_exhausted = !res.converged;
        res.precoders = std::move(P);
        res.report = std::move(rep);
        res.report.iterations = res.trace.back().iteration;
        res.report.converged = res.converged;
        return res;
    }

    CommonAllocPolicy policy() const { return policy_; }

private:
    std::vector<ChannelSet> samples_;
    const StreamLayout& layout_;
    Objective objective_;
    SolveOptions opts_;
    CommonAllocPolicy policy_;
};

}  // namespace

SolveResult ao_solve(const ChannelSet& cs, const StreamLayout& layout,
                     Objective objective, const PrecoderSet& init,
                     const SolveOptions& opts) {
    if (layout.kind == StrategyKind::oma)
        throw UsageError("ao_solve: OMA is closed-form, nothing to optimize");
    cs.validate();
    AoEngine engine({cs}, layout, objective, opts);
    return engine.run(init);
}

SolveResult ao_solve(const ChannelSet& cs, const StrategyConfig& config,
                     Objective objective, const PrecoderSet& init,
                     const SolveOptions& opts) {
    return ao_solve(cs, stream_layout(config, cs.num_users), objective, init, opts);
}

SolveResult saa_solve(const ChannelSet& estimate_cs, const CsitModel& model,
                      int n_samples, const StreamLayout& layout,
                      Objective objective, const PrecoderSet& init,
                      const SolveOptions& opts) {
    if (layout.kind == StrategyKind::oma)
        throw UsageError("saa_solve: OMA is closed-form, nothing to optimize");
    if (n_samples < 1) throw ConfigError("saa_solve: n_samples >= 1");
    estimate_cs.validate();
    model.validate();

    bool zero_error = true;
    for (double v : estimate_cs.variances)
        zero_error = zero_error && model.error_variance(v) == 0.0;

    std::vector<ChannelSet> samples;
    if (zero_error) {
        // Point-mass conditional distribution: SAA degenerates exactly.
        ChannelSet s = estimate_cs;
        for (int k = 0; k < s.num_users; ++k) {
            s.errors[k] = Cvec::Zero(s.num_antennas);
            s.true_channels[k] = s.estimates[k];
        }
        samples.push_back(std::move(s));
    } else {
        samples = sample_conditional(estimate_cs, model, n_samples,
                                     mix_seed(opts.seed, 0x5aa5aa5aULL));
    }

    AoEngine engine(samples, layout, objective, opts);
    SolveResult res = engine.run(init);

    // Returned report follows the ergodic_rates contract (per-sample reports
    // averaged per user); the trace keeps the optimizer's aggregation.
    RateReport rep = ergodic_rates(samples, res.precoders, layout,
                                   engine.policy());
    rep.iterations = res.report.iterations;
    rep.converged = res.report.converged;
    res.report = std::move(rep);
    return res;
}

}  // namespace masim
