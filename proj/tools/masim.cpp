// masim: downlink multi-antenna multiple-access strategy simulator.
//
// Subcommands:
//   dof        closed-form sum/MMF multiplexing-gain tables (exact rationals)
//   simulate   Monte-Carlo rate campaign over seeds x SNR x strategies
//   slopes     campaign + fitted high-SNR slopes vs closed-form predictions
//   selftest   invariant suites; nonzero exit on any violation

#include <fstream>
#include <iostream>
#include <sstream>

#include <CLI11.hpp>

#include "masim/harness.hpp"

namespace {

std::ostream& open_output(const std::string& path, std::ofstream& file) {
    if (path.empty() || path == "-") return std::cout;
    file.open(path);
    if (!file) throw masim::ConfigError("cannot open output file: " + path);
    return file;
}

void add_experiment_options(CLI::App* cmd, masim::ExperimentConfig& cfg,
                            std::string& strategies, std::string& snr,
                            std::string& variance_mode, std::string& objective) {
    cmd->add_option("-K,--users", cfg.num_users, "number of users");
    cmd->add_option("-M,--antennas", cfg.num_antennas, "number of transmit antennas");
    cmd->add_option("--strategies", strategies,
                    "comma list: rs1,mulp,noma:1,noma:3,oma");
    cmd->add_option("--snr", snr, "SNR grid in dB: \"25,30,35,40\" or \"5:5:35\"");
    cmd->add_option("--realizations", cfg.n_realizations, "channel realizations");
    cmd->add_flag("--imperfect", cfg.imperfect_csit,
                  "imperfect CSIT (scaled error model + SAA optimization)");
    cmd->add_option("--alpha", cfg.alpha, "CSIT quality exponent (rational/decimal)");
    cmd->add_option("--saa-samples", cfg.n_saa_samples,
                    "conditional channel samples per estimate");
    cmd->add_option("--variances", variance_mode, "equal | uniform-range");
    cmd->add_option("--objective", objective, "sum | maxmin");
    cmd->add_option("--seed", cfg.seed, "master seed");
    cmd->add_option("--threads", cfg.threads, "worker threads (0 = auto)");
    cmd->add_option("-o,--out", cfg.output_path, "output CSV path (- for stdout)");
    cmd->set_config("--config", "", "key=value config file (flags override)");
}

void finish_config(masim::ExperimentConfig& cfg, const std::string& strategies,
                   const std::string& snr, const std::string& variance_mode,
                   const std::string& objective) {
    cfg.strategies = masim::parse_strategies(strategies);
    cfg.snr_grid_db = masim::parse_snr_grid(snr);
    if (variance_mode == "equal")
        cfg.variance_mode = masim::ExperimentConfig::VarianceMode::equal;
    else if (variance_mode == "uniform-range")
        cfg.variance_mode = masim::ExperimentConfig::VarianceMode::uniform_range;
    else
        throw masim::ConfigError("unknown variance mode: " + variance_mode);
    if (objective == "sum")
        cfg.objective = masim::Objective::sum;
    else if (objective == "maxmin")
        cfg.objective = masim::Objective::maxmin;
    else
        throw masim::ConfigError("unknown objective: " + objective);
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"downlink multi-antenna multiple-access strategy simulator"};
    app.require_subcommand(1);

    // dof
    auto* dof_cmd = app.add_subcommand("dof", "closed-form multiplexing-gain tables");
    int dof_users = 6;
    std::string dof_alpha = "1";
    std::string dof_out;
    bool golden = false;
    dof_cmd->add_option("-K,--users", dof_users, "number of users");
    dof_cmd->add_option("--alpha", dof_alpha, "CSIT quality exponent");
    dof_cmd->add_flag("--emit-golden-tables", golden,
                      "emit the perfect-CSIT golden tables (alpha = 1)");
    dof_cmd->add_option("-o,--out", dof_out, "output CSV path (- for stdout)");

    // simulate / slopes share the experiment options
    masim::ExperimentConfig sim_cfg, slope_cfg;
    std::string sim_strategies = "rs1,mulp,noma:1,noma:3,oma";
    std::string sim_snr = "5:5:35";
    std::string sim_var = "equal", sim_obj = "sum";
    auto* sim_cmd = app.add_subcommand("simulate", "Monte-Carlo rate campaign");
    add_experiment_options(sim_cmd, sim_cfg, sim_strategies, sim_snr, sim_var,
                           sim_obj);

    std::string slope_strategies = "rs1,mulp,noma:1,noma:3,oma";
    std::string slope_snr = "25:5:40";
    std::string slope_var = "equal", slope_obj = "sum";
    std::string slope_raw_out;
    auto* slope_cmd =
        app.add_subcommand("slopes", "fitted rate slopes vs closed-form gains");
    add_experiment_options(slope_cmd, slope_cfg, slope_strategies, slope_snr,
                           slope_var, slope_obj);
    slope_cmd->add_option("--raw-out", slope_raw_out, "also write the raw campaign CSV");

    auto* selftest_cmd = app.add_subcommand("selftest", "run the invariant suites");
    bool full = false;
    selftest_cmd->add_flag("--full", full, "full-size sweeps");

    CLI11_PARSE(app, argc, argv);

    try {
        if (dof_cmd->parsed()) {
            std::ofstream file;
            std::ostream& os = open_output(dof_out, file);
            if (golden)
                masim::emit_golden_tables(os, dof_users);
            else
                masim::emit_dof_table(os, dof_users, masim::Rational::parse(dof_alpha));
            return 0;
        }
        if (sim_cmd->parsed()) {
            finish_config(sim_cfg, sim_strategies, sim_snr, sim_var, sim_obj);
            const masim::ResultTable table = masim::run_experiment(sim_cfg);
            std::ofstream file;
            std::ostream& os = open_output(sim_cfg.output_path, file);
            masim::write_results_csv(os, table);
            for (const auto& row : table.rows)
                if (!row.error.empty())
                    std::cerr << "cell error (" << row.strategy << ", "
                              << row.snr_db << " dB): " << row.error << "\n";
            return 0;
        }
        if (slope_cmd->parsed()) {
            finish_config(slope_cfg, slope_strategies, slope_snr, slope_var,
                          slope_obj);
            masim::ResultTable raw;
            const masim::SlopeTable slopes = masim::slope_campaign(slope_cfg, &raw);
            std::ofstream file;
            std::ostream& os = open_output(slope_cfg.output_path, file);
            masim::write_slopes_csv(os, slopes);
            if (!slope_raw_out.empty()) {
                std::ofstream rawfile(slope_raw_out);
                masim::write_results_csv(rawfile, raw);
            }
            return 0;
        }
        if (selftest_cmd->parsed()) {
            const int failures = masim::run_selftest(std::cout, full);
            return failures == 0 ? 0 : 1;
        }
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    }
    return 0;
}
