#include <doctest.h>

#include <cmath>
#include <sstream>

#include "masim/harness.hpp"

using namespace masim;

TEST_CASE("strategy and SNR grid parsing") {
    const auto strategies = parse_strategies("rs1,mulp,noma:1,noma:3,oma");
    REQUIRE(strategies.size() == 5);
    CHECK(strategies[0].kind == StrategyKind::rs1);
    CHECK(strategies[2].kind == StrategyKind::noma);
    CHECK(strategies[2].num_groups == 1);
    CHECK(strategies[3].num_groups == 3);
    CHECK(strategies[3].name() == "noma-g3");
    CHECK_THROWS_AS(parse_strategies("bogus"), ConfigError);

    CHECK(parse_snr_grid("25,30,35") == std::vector<double>{25, 30, 35});
    CHECK(parse_snr_grid("5:5:20") == std::vector<double>{5, 10, 15, 20});
    CHECK_THROWS_AS(parse_snr_grid(""), ConfigError);
}

TEST_CASE("config validation") {
    ExperimentConfig cfg;
    cfg.strategies = parse_strategies("mulp");
    cfg.snr_grid_db = {10.0};
    CHECK_NOTHROW(cfg.validate());
    cfg.alpha = "1.5";
    CHECK_THROWS_AS(cfg.validate(), ConfigError);
    cfg.alpha = "0.5";
    cfg.n_realizations = 0;
    CHECK_THROWS_AS(cfg.validate(), ConfigError);
}

TEST_CASE("single OMA cell reproduces the closed form") {
    ExperimentConfig cfg;
    cfg.num_users = 4;
    cfg.num_antennas = 3;
    cfg.strategies = parse_strategies("oma");
    cfg.snr_grid_db = {20.0};
    cfg.n_realizations = 1;
    cfg.seed = 99;
    const ResultTable table = run_experiment(cfg);
    REQUIRE(table.rows.size() == 1);
    const ChannelSet cs = experiment_channels(cfg, 0, 0);
    double best = 0.0;
    for (const auto& h : cs.true_channels)
        best = std::max(best, h.squaredNorm());
    const double expect = std::log2(1.0 + best * db_to_linear(20.0));
    CHECK(table.rows[0].report.sum_rate == doctest::Approx(expect).epsilon(1e-9));
    CHECK(table.rows[0].report.mmf_rate == 0.0);
}

TEST_CASE("campaign csv is deterministic and schema-stable") {
    ExperimentConfig cfg;
    cfg.num_users = 3;
    cfg.num_antennas = 2;
    cfg.strategies = parse_strategies("mulp,oma");
    cfg.snr_grid_db = {10.0, 15.0};
    cfg.n_realizations = 2;
    cfg.seed = 7;
    cfg.threads = 3;
    std::ostringstream a, b;
    write_results_csv(a, run_experiment(cfg));
    write_results_csv(b, run_experiment(cfg));
    CHECK(a.str() == b.str());
    CHECK(a.str().find("strategy,seed,snr_db,alpha,R_1,R_2,R_3,R_c,sum,mmf,"
                       "iterations,converged") == 0);
    // One summary row per (snr, strategy).
    CHECK(run_experiment(cfg).summaries.size() == 4);
}

TEST_CASE("channels are shared across strategies within a cell") {
    ExperimentConfig cfg;
    cfg.num_users = 2;
    cfg.num_antennas = 2;
    cfg.strategies = parse_strategies("mulp,oma");
    cfg.snr_grid_db = {25.0};
    cfg.n_realizations = 1;
    cfg.seed = 5;
    const ResultTable table = run_experiment(cfg);
    REQUIRE(table.rows.size() == 2);
    CHECK(table.rows[0].cell_seed == table.rows[1].cell_seed);
}

TEST_CASE("uniform-range variances are drawn in [0.1, 1] per realization") {
    ExperimentConfig cfg;
    cfg.num_users = 6;
    cfg.num_antennas = 2;
    cfg.variance_mode = ExperimentConfig::VarianceMode::uniform_range;
    cfg.strategies = parse_strategies("oma");
    cfg.snr_grid_db = {10.0};
    cfg.n_realizations = 3;
    cfg.seed = 11;
    for (int r = 0; r < 3; ++r) {
        const ChannelSet cs = experiment_channels(cfg, r, 0);
        for (double v : cs.variances) {
            CHECK(v >= 0.1);
            CHECK(v <= 1.0);
        }
    }
    CHECK(experiment_channels(cfg, 0, 0).variances !=
          experiment_channels(cfg, 1, 0).variances);
}

TEST_CASE("slope campaign: cheap closed-form strategies fit their gains") {
    ExperimentConfig cfg;
    cfg.num_users = 2;
    cfg.num_antennas = 2;
    cfg.strategies = parse_strategies("mulp,oma");
    cfg.snr_grid_db = parse_snr_grid("25:5:40");
    cfg.n_realizations = 8;
    cfg.seed = 19;
    const SlopeTable slopes = slope_campaign(cfg);
    REQUIRE(slopes.rows.size() == 2);
    CHECK(slopes.rows[0].strategy == "mulp");
    CHECK(slopes.rows[0].predicted == "2");
    CHECK(std::abs(slopes.rows[0].fitted - 2.0) < 0.3);
    CHECK(slopes.rows[1].predicted == "1");
    CHECK(std::abs(slopes.rows[1].fitted - 1.0) < 0.1);

    // A narrow window is rejected.
    ExperimentConfig narrow = cfg;
    narrow.snr_grid_db = {25.0, 30.0};
    CHECK_THROWS_AS(slope_campaign(narrow), ConfigError);
}

TEST_CASE("imperfect-CSIT campaign runs end to end (tiny)") {
    ExperimentConfig cfg;
    cfg.num_users = 2;
    cfg.num_antennas = 2;
    cfg.strategies = parse_strategies("mulp,rs1,oma");
    cfg.snr_grid_db = {20.0};
    cfg.n_realizations = 1;
    cfg.imperfect_csit = true;
    cfg.alpha = "0.5";
    cfg.n_saa_samples = 32;
    cfg.seed = 23;
    const ResultTable table = run_experiment(cfg);
    for (const auto& row : table.rows) {
        CAPTURE(row.strategy);
        CHECK(row.error.empty());
        CHECK(row.report.sum_rate > 0.0);
    }
    const ResultTable again = run_experiment(cfg);
    for (std::size_t i = 0; i < table.rows.size(); ++i)
        CHECK(table.rows[i].report.sum_rate == again.rows[i].report.sum_rate);
}
