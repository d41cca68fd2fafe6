#include <cstdint>
#include <cstdio>
#include <exception>
#include <filesystem>
#include <stdexcept>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "tdalign/experiment.hpp"

namespace {

struct CommonOpts {
    std::string config_path;
    std::string out_dir;
    std::vector<std::uint64_t> seeds;
    bool quiet = false;
};

void add_common(CLI::App* cmd, CommonOpts& opts) {
    cmd->add_option("--config", opts.config_path, "experiment config, a flat JSON object")
        ->required();
    cmd->add_option("--out", opts.out_dir, "output directory (overrides the config's out_dir)");
    cmd->add_option("--seeds", opts.seeds, "seed list override, e.g. 0,1,2")->delimiter(',');
    cmd->add_flag("--quiet", opts.quiet, "suppress progress output");
}

tdalign::ExperimentConfig load_config(const CommonOpts& opts) {
    tdalign::ExperimentConfig cfg = tdalign::ExperimentConfig::from_json_file(opts.config_path);
    if (!opts.out_dir.empty()) {
        cfg.out_dir = opts.out_dir;
    }
    if (!opts.seeds.empty()) {
        cfg.seeds = opts.seeds;
    }
    cfg.validate();
    return cfg;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"linear forecasters trained with temporal-difference alignment"};
    app.require_subcommand(1);

    CommonOpts train_opts;
    CLI::App* train_cmd = app.add_subcommand("train", "train one config across its seeds");
    add_common(train_cmd, train_opts);

    CommonOpts ablate_opts;
    CLI::App* ablate_cmd =
        app.add_subcommand("ablate", "train every loss mode on identical data and seeds");
    add_common(ablate_cmd, ablate_opts);

    CommonOpts sweep_diff_opts;
    CLI::App* sweep_diff_cmd = app.add_subcommand(
        "sweep-diff", "train at every configured differencing (order, interval) pair");
    add_common(sweep_diff_cmd, sweep_diff_opts);

    CommonOpts sweep_noise_opts;
    CLI::App* sweep_noise_cmd = app.add_subcommand(
        "sweep-noise", "train baseline and tdalign at every configured train-noise variance");
    add_common(sweep_noise_cmd, sweep_noise_opts);

    std::string verify_out = "runs";
    std::vector<std::uint64_t> verify_seeds;
    bool verify_quiet = false;
    CLI::App* verify_cmd = app.add_subcommand(
        "verify-theory", "run the closed-form identity and Monte Carlo checks");
    verify_cmd->add_option("--out", verify_out, "directory for the check report");
    verify_cmd->add_option("--seeds", verify_seeds, "seed override (first entry is used)")
        ->delimiter(',');
    verify_cmd->add_flag("--quiet", verify_quiet, "suppress the report on stdout");

    std::vector<std::string> report_dirs;
    std::string report_out = "report_out";
    bool report_quiet = false;
    CLI::App* report_cmd = app.add_subcommand(
        "report", "merge run reports into a tidy CSV plus SVG charts");
    report_cmd->add_option("dirs", report_dirs, "run directories or report.csv files")->required();
    report_cmd->add_option("--out", report_out, "output directory for tidy.csv and charts");
    report_cmd->add_flag("--quiet", report_quiet, "suppress progress output");

    CommonOpts synth_opts;
    CLI::App* synth_cmd = app.add_subcommand("synth", "emit the configured synthetic dataset as CSV");
    add_common(synth_cmd, synth_opts);

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForAllHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return 1;
    }

    try {
        if (train_cmd->parsed()) {
            tdalign::cmd_train(load_config(train_opts), train_opts.quiet);
        } else if (ablate_cmd->parsed()) {
            tdalign::cmd_ablate(load_config(ablate_opts), ablate_opts.quiet);
        } else if (sweep_diff_cmd->parsed()) {
            const tdalign::ExperimentConfig cfg = load_config(sweep_diff_opts);
            tdalign::cmd_sweep_diffspec(cfg, cfg.sweep_orders, cfg.sweep_intervals,
                                        sweep_diff_opts.quiet);
        } else if (sweep_noise_cmd->parsed()) {
            const tdalign::ExperimentConfig cfg = load_config(sweep_noise_opts);
            tdalign::cmd_sweep_noise(cfg, cfg.noise_variances, sweep_noise_opts.quiet);
        } else if (verify_cmd->parsed()) {
            const std::uint64_t seed = verify_seeds.empty() ? 7 : verify_seeds.front();
            const std::string path =
                (std::filesystem::path(verify_out) / "theory_checks.txt").string();
            if (!tdalign::cmd_verify_theory(path, seed, verify_quiet)) {
                std::fprintf(stderr, "error: a theory check failed, see %s\n", path.c_str());
                return 2;
            }
        } else if (report_cmd->parsed()) {
            tdalign::cmd_report(report_dirs, report_out);
            if (!report_quiet) {
                std::printf("wrote %s/tidy.csv and charts\n", report_out.c_str());
            }
        } else if (synth_cmd->parsed()) {
            const std::string path = tdalign::cmd_synth(load_config(synth_opts), "");
            if (!synth_opts.quiet) {
                std::printf("wrote %s\n", path.c_str());
            }
        }
    } catch (const std::invalid_argument& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 1;
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 2;
    }
    return 0;
}
