#include <doctest.h>

#include <algorithm>

#include "masim/strategy.hpp"

using namespace masim;

TEST_CASE("build_grouping is contiguous and validated") {
    const Grouping g = build_grouping(6, 3);
    REQUIRE(g.size() == 3);
    CHECK(g[0] == std::vector<int>{0, 1});
    CHECK(g[1] == std::vector<int>{2, 3});
    CHECK(g[2] == std::vector<int>{4, 5});

    const Grouping one = build_grouping(6, 1);
    CHECK(one[0] == std::vector<int>{0, 1, 2, 3, 4, 5});

    CHECK_THROWS_AS(build_grouping(6, 4), ConfigError);   // 4 does not divide 6
    CHECK_THROWS_AS(build_grouping(6, 6), ConfigError);   // G = K excluded
    CHECK_THROWS_AS(build_grouping(6, 0), ConfigError);
}

TEST_CASE("noma config rejects G = K (that is MU-LP)") {
    StrategyConfig cfg{StrategyKind::noma, 6};
    CHECK_THROWS_AS(cfg.validate(6), ConfigError);
    cfg.num_groups = 2;
    CHECK_NOTHROW(cfg.validate(6));
}

namespace {
ChannelSet two_user_set(double n1, double n2) {
    ChannelSet cs;
    cs.num_users = 2;
    cs.num_antennas = 2;
    cs.variances = {1.0, 1.0};
    Cvec h1(2), h2(2);
    h1 << cxd(n1, 0), cxd(0, 0);
    h2 << cxd(0, 0), cxd(n2, 0);
    cs.true_channels = {h1, h2};
    cs.estimates = cs.true_channels;
    cs.errors = {Cvec::Zero(2), Cvec::Zero(2)};
    return cs;
}
}  // namespace

TEST_CASE("decoding order puts the weakest user last (decoded first by all)") {
    // ||h_1|| = 2 > ||h_2|| = 1: user-2 stays last-indexed, decoded first.
    const ChannelSet cs = two_user_set(2.0, 1.0);
    const Grouping order = decoding_order(cs, {{0, 1}}, false);
    CHECK(order[0] == std::vector<int>{0, 1});

    // Swapped strengths: the weak original user-1 moves to the last slot.
    const ChannelSet swapped = two_user_set(1.0, 2.0);
    const Grouping order2 = decoding_order(swapped, {{0, 1}}, false);
    CHECK(order2[0] == std::vector<int>{1, 0});
}

TEST_CASE("equal norms tie-break by original index") {
    const ChannelSet cs = two_user_set(1.0, 1.0);
    const Grouping order = decoding_order(cs, {{0, 1}}, false);
    CHECK(order[0] == std::vector<int>{0, 1});
}

TEST_CASE("decoding order matches an independent norm sort (K=6, G=3)") {
    const ChannelSet cs = sample_channels(6, 3, std::vector<double>(6, 1.0), 42);
    const Grouping grouping = build_grouping(6, 3);
    const Grouping order = decoding_order(cs, grouping, false);
    for (int i = 0; i < 3; ++i) {
        std::vector<int> expect = grouping[i];
        std::stable_sort(expect.begin(), expect.end(), [&](int a, int b) {
            return cs.true_channels[a].norm() > cs.true_channels[b].norm();
        });
        CHECK(order[i] == expect);
        // Descending norms across the slot order.
        for (std::size_t p = 1; p < order[i].size(); ++p)
            CHECK(cs.true_channels[order[i][p - 1]].norm() >=
                  cs.true_channels[order[i][p]].norm());
    }
    // Re-indexing is a permutation of all users.
    std::vector<int> flat = flatten_order(order);
    std::sort(flat.begin(), flat.end());
    CHECK(flat == std::vector<int>{0, 1, 2, 3, 4, 5});
}

TEST_CASE("imperfect-CSIT ordering uses the estimates") {
    ChannelSet cs = two_user_set(1.0, 2.0);
    // Estimates say user-0 is stronger even though the true norms disagree.
    cs.estimates[0] *= 5.0;
    cs.errors[0] = cs.true_channels[0] - cs.estimates[0];
    const Grouping order = decoding_order(cs, {{0, 1}}, true);
    CHECK(order[0] == std::vector<int>{0, 1});
    const Grouping order_true = decoding_order(cs, {{0, 1}}, false);
    CHECK(order_true[0] == std::vector<int>{1, 0});
}

TEST_CASE("two-user NOMA layout: user-1 decodes both streams") {
    const StreamLayout layout = stream_layout({StrategyKind::noma, 1}, 2);
    CHECK(layout.decode_sequence[0] == std::vector<int>{1, 0});
    CHECK(layout.decode_sequence[1] == std::vector<int>{1});
    CHECK(layout.streams[1].decoders == std::vector<int>{0, 1});
    CHECK(layout.streams[0].decoders == std::vector<int>{0});
    CHECK(layout.sic_count(0) == 1);
    CHECK(layout.sic_count(1) == 0);
}

TEST_CASE("mulp layout has singleton decode sets and no SIC") {
    const StreamLayout layout = stream_layout({StrategyKind::mulp, 1}, 6);
    for (int k = 0; k < 6; ++k) {
        CHECK(layout.streams[k].decoders == std::vector<int>{k});
        CHECK(layout.sic_count(k) == 0);
    }
}

TEST_CASE("rs1 layout: common decoded by all, one SIC each") {
    const StreamLayout layout = stream_layout({StrategyKind::rs1, 1}, 6);
    CHECK(layout.num_streams() == 7);
    CHECK(layout.streams[6].decoders.size() == 6);
    for (int k = 0; k < 6; ++k) {
        CHECK(layout.sic_count(k) == 1);
        CHECK(layout.decode_sequence[k] == std::vector<int>{6, k});
    }
}

TEST_CASE("sic-count law across all divisors of K") {
    for (int K : {4, 6, 8, 12}) {
        for (int G = 1; G < K; ++G) {
            if (K % G != 0) continue;
            const int g = K / G;
            const StreamLayout layout = stream_layout({StrategyKind::noma, G}, K);
            int max_sic = 0;
            for (int j = 0; j < K; ++j) max_sic = std::max(max_sic, layout.sic_count(j));
            CHECK(max_sic == g - 1);
        }
    }
    const StreamLayout rs = stream_layout({StrategyKind::rs1, 1}, 6);
    for (int j = 0; j < 6; ++j) CHECK(rs.sic_count(j) == 1);
    const StreamLayout oma = stream_layout({StrategyKind::oma, 1}, 6);
    for (int j = 0; j < 6; ++j) CHECK(oma.sic_count(j) == 0);
}

TEST_CASE("noma decode-set monotonicity within a group") {
    const StreamLayout layout = stream_layout({StrategyKind::noma, 2}, 6);
    for (const auto& cell : layout.groups) {
        for (std::size_t i = 0; i + 1 < cell.size(); ++i) {
            const auto& a = layout.decode_sequence[cell[i]];
            const auto& b = layout.decode_sequence[cell[i + 1]];
            CHECK(a.size() == b.size() + 1);
            for (int s : b) CHECK(std::count(a.begin(), a.end(), s) == 1);
        }
    }
}

TEST_CASE("interference visibility respects SIC") {
    const StreamLayout layout = stream_layout({StrategyKind::noma, 2}, 4);
    // Group 0 = slots {0,1}. Decoding stream 1 at slot 0: stream 0 interferes
    // (not yet decoded), streams 2,3 (other group) interfere.
    CHECK(layout.interferes(0, 1, 0));
    CHECK(layout.interferes(0, 1, 2));
    CHECK(layout.interferes(0, 1, 3));
    // Decoding stream 0 at slot 0: stream 1 already cancelled.
    CHECK_FALSE(layout.interferes(0, 0, 1));
    CHECK(layout.interferes(0, 0, 2));
}
