#include "masim/rate.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace masim {

double PrecoderSet::total_power() const {
    double p = 0.0;
    for (const auto& v : private_precoders) p += v.squaredNorm();
    if (common_precoder) p += common_precoder->squaredNorm();
    return p;
}

void PrecoderSet::validate() const {
    if (!(power_budget > 0.0)) throw ConfigError("power budget must be positive");
    const double p = total_power();
    if (p > power_budget * (1.0 + 1e-8))
        throw InvariantError("precoder power " + std::to_string(p) +
                             " exceeds budget " + std::to_string(power_budget));
}

PrecoderSet PrecoderSet::scaled(double factor) const {
    PrecoderSet out = *this;
    for (auto& v : out.private_precoders) v *= factor;
    if (out.common_precoder) *out.common_precoder *= factor;
    return out;
}

namespace {

// |h_j^H p_s|^2 for every stream, reused across the links of one decoder.
std::vector<double> received_powers(const ChannelSet& cs, const PrecoderSet& ps,
                                    int decoder) {
    const Cvec& h = cs.true_channels[decoder];
    std::vector<double> pw(ps.num_streams());
    for (int s = 0; s < ps.num_streams(); ++s) {
        const cxd x = h.dot(ps.stream(s));  // h^H p
        pw[s] = std::norm(x);
    }
    return pw;
}

double sinr_from_powers(const StreamLayout& layout, const std::vector<double>& pw,
                        int decoder, int stream) {
    double interference = 0.0;
    for (int s = 0; s < layout.num_streams(); ++s)
        if (layout.interferes(decoder, stream, s)) interference += pw[s];
    return pw[stream] / (1.0 + interference);
}

}  // namespace

double link_sinr(const ChannelSet& cs, const PrecoderSet& ps,
                 const StreamLayout& layout, int decoder, int stream) {
    if (!layout.decodes(decoder, stream))
        throw UsageError("link_sinr: decoder " + std::to_string(decoder) +
                         " does not decode stream " + std::to_string(stream));
    const auto pw = received_powers(cs, ps, decoder);
    return sinr_from_powers(layout, pw, decoder, stream);
}

double link_rate(const ChannelSet& cs, const PrecoderSet& ps,
                 const StreamLayout& layout, int decoder, int stream) {
    return std::log2(1.0 + link_sinr(cs, ps, layout, decoder, stream));
}

double noma_link_rate(const ChannelSet& cs, const PrecoderSet& ps,
                      const StreamLayout& layout, int decoder, int stream) {
    return link_rate(cs, ps, layout, decoder, stream);
}

std::vector<double> mmf_equalizing_alloc(const std::vector<double>& private_rates,
                                         double rc) {
    const int K = static_cast<int>(private_rates.size());
    std::vector<double> alloc(K, 0.0);
    if (rc <= 0.0) return alloc;
    double lo = *std::min_element(private_rates.begin(), private_rates.end());
    double hi = *std::max_element(private_rates.begin(), private_rates.end()) + rc;
    const auto spent = [&](double level) {
        double s = 0.0;
        for (double r : private_rates) s += std::max(0.0, level - r);
        return s;
    };
    for (int it = 0; it < 200; ++it) {
        const double mid = 0.5 * (lo + hi);
        (spent(mid) > rc ? hi : lo) = mid;
    }
    const double level = 0.5 * (lo + hi);
    double used = 0.0;
    for (int k = 0; k < K; ++k) {
        alloc[k] = std::max(0.0, level - private_rates[k]);
        used += alloc[k];
    }
    // Rescale so the split sums to rc exactly.
    if (used > 0.0)
        for (double& a : alloc) a *= rc / used;
    else
        alloc.assign(K, rc / K);
    return alloc;
}

RateReport evaluate_rates(const ChannelSet& cs, const PrecoderSet& ps,
                          const StreamLayout& layout, CommonAllocPolicy policy,
                          const std::vector<double>* explicit_alloc) {
    const int K = layout.num_users;
    if (static_cast<int>(ps.private_precoders.size()) != K)
        throw ConfigError("evaluate_rates: precoder count != K");
    if (layout.has_common() && !ps.common_precoder)
        throw ConfigError("evaluate_rates: layout expects a common precoder");

    RateReport rep;
    rep.per_user.assign(K, 0.0);
    std::vector<double> stream_rate(layout.num_streams(),
                                    std::numeric_limits<double>::infinity());
    for (int j = 0; j < K; ++j) {
        const auto pw = received_powers(cs, ps, j);
        for (int s : layout.decode_sequence[j]) {
            const double r = std::log2(1.0 + sinr_from_powers(layout, pw, j, s));
            rep.per_link[{j, s}] = r;
            stream_rate[s] = std::min(stream_rate[s], r);
        }
    }
    for (int s = 0; s < layout.num_streams(); ++s)
        if (!layout.streams[s].common) rep.per_user[layout.streams[s].owner] = stream_rate[s];

    if (layout.has_common()) {
        rep.common_rate = stream_rate[layout.common_stream()];
        switch (policy) {
            case CommonAllocPolicy::equal:
                rep.common_alloc.assign(K, rep.common_rate / K);
                break;
            case CommonAllocPolicy::mmf_equalizing:
                rep.common_alloc = mmf_equalizing_alloc(rep.per_user, rep.common_rate);
                break;
            case CommonAllocPolicy::explicit_alloc: {
                if (!explicit_alloc || static_cast<int>(explicit_alloc->size()) != K)
                    throw ConfigError("explicit common allocation needs K entries");
                double total = 0.0;
                for (double c : *explicit_alloc) {
                    if (c < 0.0) throw InvariantError("common allocation must be >= 0");
                    total += c;
                }
                if (total > rep.common_rate + 1e-12)
                    throw InvariantError("common allocation exceeds R_c");
                rep.common_alloc = *explicit_alloc;
                break;
            }
        }
        for (int k = 0; k < K; ++k) rep.per_user[k] += rep.common_alloc[k];
    }

    rep.sum_rate = 0.0;
    for (double r : rep.per_user) rep.sum_rate += r;
    rep.mmf_rate = *std::min_element(rep.per_user.begin(), rep.per_user.end());
    return rep;
}

RateReport noma_rates(const ChannelSet& cs, const PrecoderSet& ps,
                      const StrategyConfig& config) {
    if (config.kind != StrategyKind::noma)
        throw UsageError("noma_rates: config is not NOMA");
    return evaluate_rates(cs, ps, stream_layout(config, cs.num_users));
}

RateReport mulp_rates(const ChannelSet& cs, const PrecoderSet& ps) {
    if (ps.common_precoder) throw ConfigError("mulp_rates: no common precoder allowed");
    StrategyConfig cfg{StrategyKind::mulp, 1};
    return evaluate_rates(cs, ps, stream_layout(cfg, cs.num_users));
}

RateReport rs_rates(const ChannelSet& cs, const PrecoderSet& ps,
                    CommonAllocPolicy policy,
                    const std::vector<double>* explicit_alloc) {
    if (!ps.common_precoder) throw ConfigError("rs_rates: common precoder required");
    StrategyConfig cfg{StrategyKind::rs1, 1};
    return evaluate_rates(cs, ps, stream_layout(cfg, cs.num_users), policy,
                          explicit_alloc);
}

PrecoderSet oma_precoders(const ChannelSet& cs, double power) {
    cs.validate();
    int best = 0;
    for (int k = 1; k < cs.num_users; ++k)
        if (cs.estimates[k].norm() > cs.estimates[best].norm()) best = k;
    PrecoderSet ps;
    ps.power_budget = power;
    ps.private_precoders.assign(cs.num_users, Cvec::Zero(cs.num_antennas));
    const double n = cs.estimates[best].norm();
    if (!(n > 0.0)) throw ConfigError("oma: zero channel estimate");
    ps.private_precoders[best] = std::sqrt(power) * cs.estimates[best] / n;
    return ps;
}

RateReport oma_rates(const ChannelSet& cs, double power) {
    const PrecoderSet ps = oma_precoders(cs, power);
    StrategyConfig cfg{StrategyKind::oma, 1};
    return evaluate_rates(cs, ps, stream_layout(cfg, cs.num_users));
}

PrecoderSet random_precoders(Pcg32& rng, int num_users, int num_antennas,
                             double power, bool with_common, double fraction) {
    PrecoderSet ps;
    ps.power_budget = power;
    for (int k = 0; k < num_users; ++k)
        ps.private_precoders.push_back(rng.complex_normal_vector(num_antennas, 1.0));
    if (with_common)
        ps.common_precoder = rng.complex_normal_vector(num_antennas, 1.0);
    const double total = ps.total_power();
    const double scale = std::sqrt(fraction * power / total);
    for (auto& v : ps.private_precoders) v *= scale;
    if (ps.common_precoder) *ps.common_precoder *= scale;
    return ps;
}

RateReport ergodic_rates(std::span<const ChannelSet> samples, const PrecoderSet& ps,
                         const StreamLayout& layout, CommonAllocPolicy policy) {
    if (samples.empty()) throw ConfigError("ergodic_rates: empty sample list");
    RateReport acc = evaluate_rates(samples[0], ps, layout, policy);
    for (std::size_t n = 1; n < samples.size(); ++n) {
        const RateReport r = evaluate_rates(samples[n], ps, layout, policy);
        for (int k = 0; k < layout.num_users; ++k) acc.per_user[k] += r.per_user[k];
        acc.common_rate += r.common_rate;
        for (std::size_t k = 0; k < acc.common_alloc.size(); ++k)
            acc.common_alloc[k] += r.common_alloc[k];
        for (auto& [key, val] : acc.per_link) val += r.per_link.at(key);
    }
    const double inv = 1.0 / static_cast<double>(samples.size());
    for (double& v : acc.per_user) v *= inv;
    acc.common_rate *= inv;
    for (double& v : acc.common_alloc) v *= inv;
    for (auto& [key, val] : acc.per_link) val *= inv;
    acc.sum_rate = 0.0;
    for (double r : acc.per_user) acc.sum_rate += r;
    acc.mmf_rate = *std::min_element(acc.per_user.begin(), acc.per_user.end());
    return acc;
}

}  // namespace masim
