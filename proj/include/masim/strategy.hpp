#pragma once

#include <string>
#include <vector>

#include "masim/channel.hpp"
#include "masim/common.hpp"

namespace masim {

enum class StrategyKind { noma, mulp, rs1, oma };

std::string to_string(StrategyKind kind);
StrategyKind strategy_from_string(const std::string& s);  // "noma","mulp","rs1","oma"

/// Multiple-access scheme selector. For NOMA, num_groups G with G | K and
/// 1 <= G < K (G = K is MU-LP by definition and is rejected as a NOMA config).
struct StrategyConfig {
    StrategyKind kind = StrategyKind::mulp;
    int num_groups = 1;  // NOMA only

    void validate(int num_users) const;
    std::string name() const;  // "noma-g3", "mulp", ...
};

/// Partition of user slots {0..K-1} into cells.
using Grouping = std::vector<std::vector<int>>;

/// Contiguous fixed grouping: group i gets slots {i*g .. i*g+g-1}.
Grouping build_grouping(int num_users, int num_groups);

/// Within each group, users ordered by descending channel norm (estimates
/// when use_estimates is set): position 0 is the "strong" user that decodes
/// every stream in the group, the last position is the weakest user whose
/// stream is decoded first by all. Ties keep the original index order.
/// Returns, per group, the original user indices in slot order.
Grouping decoding_order(const ChannelSet& cs, const Grouping& grouping,
                        bool use_estimates);

/// Flattens a per-group order into slot -> original-user.
std::vector<int> flatten_order(const Grouping& order);

/// Permutes a ChannelSet into slot space (slot i holds user slot_to_user[i]).
ChannelSet reindex_users(const ChannelSet& cs, const std::vector<int>& slot_to_user);

/// One transmitted stream: which user slot owns its message, whether it is
/// the RS common stream, and which slots must decode it.
struct Stream {
    int owner = -1;           // -1 for the common stream
    bool common = false;
    std::vector<int> decoders;  // user slots, ascending
};

/// Who decodes what, in slot space. Private stream k has index k; the RS
/// common stream, when present, has index K. decode_sequence[j] lists the
/// streams user j decodes in SIC order (first decoded first).
struct StreamLayout {
    StrategyKind kind = StrategyKind::mulp;
    int num_users = 0;
    Grouping groups;  // contiguous slot cells (singletons for MU-LP/RS/OMA)
    std::vector<Stream> streams;
    std::vector<std::vector<int>> decode_sequence;

    bool has_common() const { return kind == StrategyKind::rs1; }
    int common_stream() const { return num_users; }
    int num_streams() const { return static_cast<int>(streams.size()); }
    int sic_count(int user) const {
        return static_cast<int>(decode_sequence[user].size()) - 1;
    }
    /// True if `stream` is still uncancelled interference when user `j`
    /// decodes `target` (the target itself excluded).
    bool interferes(int j, int target, int stream) const;
    /// Streams visible as interference at link (j, target).
    std::vector<int> interferers(int j, int target) const;
    /// Whether user j decodes stream s.
    bool decodes(int j, int s) const;
    void validate() const;
};

StreamLayout stream_layout(const StrategyConfig& config, int num_users);

}  // namespace masim
