#include "masim/channel.hpp"

#include <cstdio>
#include <istream>
#include <ostream>
#include <sstream>

namespace masim {

void ChannelSet::validate() const {
    if (num_users < 1 || num_antennas < 1)
        throw ConfigError("channel set needs K >= 1 and M >= 1");
    const auto check = [&](const std::vector<Cvec>& v, const char* name) {
        if (static_cast<int>(v.size()) != num_users)
            throw ConfigError(std::string(name) + ": user count mismatch");
        for (const auto& h : v)
            if (h.size() != num_antennas)
                throw ConfigError(std::string(name) + ": antenna count mismatch");
    };
    check(true_channels, "true_channels");
    check(estimates, "estimates");
    check(errors, "errors");
    if (static_cast<int>(variances.size()) != num_users)
        throw ConfigError("variances: user count mismatch");
    for (double v : variances)
        if (!(v > 0.0)) throw ConfigError("variances must be positive");
    for (int k = 0; k < num_users; ++k) {
        // h is defined as the (rounded) sum, so compare against hhat + htilde
        // evaluated the same way.
        const double gap =
            (true_channels[k] - (estimates[k] + errors[k])).cwiseAbs().maxCoeff();
        if (gap != 0.0)
            throw InvariantError("h != hhat + htilde for user " + std::to_string(k));
    }
}

void CsitModel::validate() const {
    if (!(alpha >= 0.0 && alpha <= 1.0))
        throw ConfigError("CSIT quality alpha must be in [0, 1]");
    if (!(snr_power > 0.0)) throw ConfigError("snr_power must be positive");
    if (fixed_error_variance && !(*fixed_error_variance >= 0.0))
        throw ConfigError("fixed error variance must be nonnegative");
}

ChannelSet sample_channels(int num_users, int num_antennas,
                           const std::vector<double>& variances,
                           std::uint64_t seed) {
    if (num_users < 1 || num_antennas < 1)
        throw ConfigError("sample_channels: K >= 1 and M >= 1 required");
    if (static_cast<int>(variances.size()) != num_users)
        throw ConfigError("sample_channels: need one variance per user");
    for (double v : variances)
        if (!(v > 0.0)) throw ConfigError("sample_channels: variances must be positive");

    Pcg32 rng(seed);
    ChannelSet cs;
    cs.num_users = num_users;
    cs.num_antennas = num_antennas;
    cs.variances = variances;
    cs.true_channels.reserve(num_users);
    for (int k = 0; k < num_users; ++k)
        cs.true_channels.push_back(rng.complex_normal_vector(num_antennas, variances[k]));
    cs.estimates = cs.true_channels;
    cs.errors.assign(num_users, Cvec::Zero(num_antennas));
    return cs;
}

ChannelSet apply_csit_error(const ChannelSet& cs, const CsitModel& model,
                            std::uint64_t seed) {
    cs.validate();
    model.validate();
    Pcg32 rng(seed);
    ChannelSet out;
    out.num_users = cs.num_users;
    out.num_antennas = cs.num_antennas;
    out.variances = cs.variances;
    for (int k = 0; k < cs.num_users; ++k) {
        const double s2 = cs.variances[k];
        const double se2 = model.error_variance(s2);
        if (se2 > s2)
            throw InvariantError("CSIT error variance exceeds channel variance (P < 1?)");
        out.estimates.push_back(rng.complex_normal_vector(cs.num_antennas, s2 - se2));
        out.errors.push_back(rng.complex_normal_vector(cs.num_antennas, se2));
        out.true_channels.push_back(out.estimates.back() + out.errors.back());
    }
    return out;
}

std::vector<ChannelSet> sample_conditional(const ChannelSet& cs,
                                           const CsitModel& model,
                                           int n_samples, std::uint64_t seed) {
    if (n_samples < 1) throw ConfigError("sample_conditional: n_samples >= 1");
    cs.validate();
    model.validate();
    std::vector<ChannelSet> out;
    out.reserve(n_samples);
    Pcg32 rng(seed);
    for (int n = 0; n < n_samples; ++n) {
        ChannelSet s;
        s.num_users = cs.num_users;
        s.num_antennas = cs.num_antennas;
        s.variances = cs.variances;
        s.estimates = cs.estimates;
        for (int k = 0; k < cs.num_users; ++k) {
            const double se2 = model.error_variance(cs.variances[k]);
            if (se2 == 0.0)
                s.errors.push_back(Cvec::Zero(cs.num_antennas));
            else
                s.errors.push_back(rng.complex_normal_vector(cs.num_antennas, se2));
            s.true_channels.push_back(s.estimates[k] + s.errors[k]);
        }
        out.push_back(std::move(s));
    }
    return out;
}

namespace {

void write_section(std::ostream& os, const char* name,
                   const std::vector<Cvec>& rows) {
    char buf[64];
    for (std::size_t k = 0; k < rows.size(); ++k) {
        os << name << ',' << k;
        for (int m = 0; m < rows[k].size(); ++m) {
            std::snprintf(buf, sizeof(buf), ",%.17g,%.17g", rows[k](m).real(),
                          rows[k](m).imag());
            os << buf;
        }
        os << '\n';
    }
}

std::vector<std::string> split_csv(const std::string& line) {
    std::vector<std::string> out;
    std::string cur;
    std::stringstream ss(line);
    while (std::getline(ss, cur, ',')) out.push_back(cur);
    return out;
}

}  // namespace

void write_channel_csv(std::ostream& os, const ChannelSet& cs) {
    os << "channelset," << cs.num_users << ',' << cs.num_antennas << '\n';
    char buf[32];
    os << "variances";
    for (double v : cs.variances) {
        std::snprintf(buf, sizeof(buf), ",%.17g", v);
        os << buf;
    }
    os << '\n';
    write_section(os, "true", cs.true_channels);
    write_section(os, "estimate", cs.estimates);
    write_section(os, "error", cs.errors);
}

ChannelSet read_channel_csv(std::istream& is) {
    std::string line;
    if (!std::getline(is, line)) throw ConfigError("channel csv: empty stream");
    auto hdr = split_csv(line);
    if (hdr.size() != 3 || hdr[0] != "channelset")
        throw ConfigError("channel csv: bad header");
    ChannelSet cs;
    cs.num_users = std::stoi(hdr[1]);
    cs.num_antennas = std::stoi(hdr[2]);
    if (!std::getline(is, line)) throw ConfigError("channel csv: missing variances");
    auto var = split_csv(line);
    if (var.size() != static_cast<std::size_t>(cs.num_users) + 1 || var[0] != "variances")
        throw ConfigError("channel csv: bad variances row");
    for (int k = 0; k < cs.num_users; ++k) cs.variances.push_back(std::stod(var[k + 1]));

    auto read_section = [&](const char* name) {
        std::vector<Cvec> rows;
        for (int k = 0; k < cs.num_users; ++k) {
            if (!std::getline(is, line))
                throw ConfigError(std::string("channel csv: truncated ") + name);
            auto f = split_csv(line);
            if (f.size() != static_cast<std::size_t>(2 + 2 * cs.num_antennas) || f[0] != name)
                throw ConfigError(std::string("channel csv: bad row in ") + name);
            Cvec h(cs.num_antennas);
            for (int m = 0; m < cs.num_antennas; ++m)
                h(m) = cxd(std::stod(f[2 + 2 * m]), std::stod(f[3 + 2 * m]));
            rows.push_back(std::move(h));
        }
        return rows;
    };
    cs.true_channels = read_section("true");
    cs.estimates = read_section("estimate");
    cs.errors = read_section("error");
    // Rebuild the sum so the additivity invariant is exact after the
    // text round-trip.
    for (int k = 0; k < cs.num_users; ++k)
        cs.true_channels[k] = cs.estimates[k] + cs.errors[k];
    return cs;
}

}  // namespace masim
