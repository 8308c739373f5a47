#include "masim/strategy.hpp"

#include <algorithm>
#include <numeric>

namespace masim {

std::string to_string(StrategyKind kind) {
    switch (kind) {
        case StrategyKind::noma: return "noma";
        case StrategyKind::mulp: return "mulp";
        case StrategyKind::rs1: return "rs1";
        case StrategyKind::oma: return "oma";
    }
    return "?";
}

StrategyKind strategy_from_string(const std::string& s) {
    if (s == "noma") return StrategyKind::noma;
    if (s == "mulp") return StrategyKind::mulp;
    if (s == "rs1") return StrategyKind::rs1;
    if (s == "oma") return StrategyKind::oma;
    throw ConfigError("unknown strategy kind: " + s);
}

void StrategyConfig::validate(int num_users) const {
    if (num_users < 1) throw ConfigError("K >= 1 required");
    if (kind == StrategyKind::noma) {
        if (num_groups < 1 || num_groups >= num_users)
            throw ConfigError("NOMA requires 1 <= G < K (G = K is MU-LP)");
        if (num_users % num_groups != 0)
            throw ConfigError("NOMA requires G to divide K");
    }
}

std::string StrategyConfig::name() const {
    if (kind == StrategyKind::noma)
        return "noma-g" + std::to_string(num_groups);
    return to_string(kind);
}

Grouping build_grouping(int num_users, int num_groups) {
    if (num_groups < 1 || num_groups >= num_users)
        throw ConfigError("build_grouping: 1 <= G < K required");
    if (num_users % num_groups != 0)
        throw ConfigError("build_grouping: G must divide K");
    const int g = num_users / num_groups;
    Grouping grouping(num_groups);
    for (int i = 0; i < num_groups; ++i)
        for (int j = 0; j < g; ++j) grouping[i].push_back(i * g + j);
    return grouping;
}

Grouping decoding_order(const ChannelSet& cs, const Grouping& grouping,
                        bool use_estimates) {
    cs.validate();
    const auto& chans = use_estimates ? cs.estimates : cs.true_channels;
    Grouping order;
    order.reserve(grouping.size());
    for (const auto& cell : grouping) {
        std::vector<int> o = cell;
        std::stable_sort(o.begin(), o.end(), [&](int a, int b) {
            return chans[a].norm() > chans[b].norm();
        });
        order.push_back(std::move(o));
    }
    return order;
}

std::vector<int> flatten_order(const Grouping& order) {
    std::vector<int> slots;
    for (const auto& cell : order)
        slots.insert(slots.end(), cell.begin(), cell.end());
    return slots;
}

ChannelSet reindex_users(const ChannelSet& cs, const std::vector<int>& slot_to_user) {
    if (static_cast<int>(slot_to_user.size()) != cs.num_users)
        throw ConfigError("reindex_users: permutation size mismatch");
    std::vector<bool> seen(cs.num_users, false);
    for (int u : slot_to_user) {
        if (u < 0 || u >= cs.num_users || seen[u])
            throw ConfigError("reindex_users: not a permutation");
        seen[u] = true;
    }
    ChannelSet out;
    out.num_users = cs.num_users;
    out.num_antennas = cs.num_antennas;
    for (int u : slot_to_user) {
        out.true_channels.push_back(cs.true_channels[u]);
        out.estimates.push_back(cs.estimates[u]);
        out.errors.push_back(cs.errors[u]);
        out.variances.push_back(cs.variances[u]);
    }
    return out;
}

bool StreamLayout::decodes(int j, int s) const {
    const auto& seq = decode_sequence[j];
    return std::find(seq.begin(), seq.end(), s) != seq.end();
}

bool StreamLayout::interferes(int j, int target, int stream) const {
    if (stream == target) return false;
    const auto& seq = decode_sequence[j];
    auto target_pos = std::find(seq.begin(), seq.end(), target);
    auto stream_pos = std::find(seq.begin(), seq.end(), stream);
    if (stream_pos == seq.end()) return true;       // never decoded at j
    return stream_pos > target_pos;                 // decoded after target
}

std::vector<int> StreamLayout::interferers(int j, int target) const {
    std::vector<int> out;
    for (int s = 0; s < num_streams(); ++s)
        if (interferes(j, target, s)) out.push_back(s);
    return out;
}

void StreamLayout::validate() const {
    if (num_users < 1) throw InvariantError("layout: no users");
    for (int s = 0; s < num_streams(); ++s) {
        if (streams[s].decoders.empty())
            throw InvariantError("layout: stream without decoders");
        for (int j : streams[s].decoders)
            if (!decodes(j, s)) throw InvariantError("layout: decode set mismatch");
    }
}

StreamLayout stream_layout(const StrategyConfig& config, int num_users) {
    config.validate(num_users);
    StreamLayout layout;
    layout.kind = config.kind;
    layout.num_users = num_users;
    layout.decode_sequence.assign(num_users, {});

    const auto singleton_groups = [&] {
        Grouping grouping(num_users);
        for (int k = 0; k < num_users; ++k) grouping[k] = {k};
        return grouping;
    };

    switch (config.kind) {
        case StrategyKind::noma: {
            layout.groups = build_grouping(num_users, config.num_groups);
            layout.streams.resize(num_users);
            for (const auto& cell : layout.groups) {
                const int a = cell.front();
                const int b = cell.back();
                for (int k = a; k <= b; ++k) {
                    layout.streams[k].owner = k;
                    for (int j = a; j <= k; ++j)
                        layout.streams[k].decoders.push_back(j);
                }
                // User j decodes streams b, b-1, ..., j: the last-indexed
                // (weakest) stream first, its own stream last.
                for (int j = a; j <= b; ++j)
                    for (int s = b; s >= j; --s)
                        layout.decode_sequence[j].push_back(s);
            }
            break;
        }
        case StrategyKind::mulp:
        case StrategyKind::oma: {
            layout.groups = singleton_groups();
            layout.streams.resize(num_users);
            for (int k = 0; k < num_users; ++k) {
                layout.streams[k].owner = k;
                layout.streams[k].decoders = {k};
                layout.decode_sequence[k] = {k};
            }
            break;
        }
        case StrategyKind::rs1: {
            layout.groups = singleton_groups();
            layout.streams.resize(num_users + 1);
            Stream& common = layout.streams[num_users];
            common.common = true;
            for (int k = 0; k < num_users; ++k) {
                layout.streams[k].owner = k;
                layout.streams[k].decoders = {k};
                common.decoders.push_back(k);
                layout.decode_sequence[k] = {num_users, k};
            }
            break;
        }
    }
    layout.validate();
    return layout;
}

}  // namespace masim
