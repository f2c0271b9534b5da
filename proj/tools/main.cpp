#include <cstdint>
#include <exception>
#include <iostream>
#include <string>

#include <CLI11.hpp>

#include "ovb/errors.hpp"
#include "ovb/experiment.hpp"

namespace {

constexpr int kExitOk = 0;
constexpr int kExitConfig = 2;
constexpr int kExitSolver = 3;
constexpr int kExitIo = 4;

struct CommonFlags {
    std::string config_path;
    std::string out_dir;
    std::string data_path;
    std::uint64_t seed = 0;
    int threads = -1;
    bool with_svg = false;
    bool seed_set = false;
    bool out_set = false;
};

ovb::ExperimentConfig load_config(const CommonFlags& flags, const std::string& experiment) {
    ovb::ExperimentConfig cfg;
    if (!flags.config_path.empty()) {
        cfg = ovb::config_from_json_file(flags.config_path);
        if (cfg.experiment != experiment) {
            throw ovb::ConfigError("config experiment '" + cfg.experiment +
                                   "' does not match subcommand '" + experiment + "'");
        }
    } else {
        cfg = ovb::config_from_json_string("{\"experiment\":\"" + experiment + "\"}");
    }
    // Flags override the config file.
    if (flags.seed_set) cfg.seed = flags.seed;
    if (flags.out_set) cfg.out_dir = flags.out_dir;
    if (flags.threads >= 0) cfg.threads = flags.threads;
    if (!flags.data_path.empty()) cfg.data_csv = flags.data_path;
    cfg.validate();
    return cfg;
}

void add_common(CLI::App* cmd, CommonFlags& flags) {
    cmd->add_option("--config", flags.config_path, "JSON config file");
    cmd->add_option("--seed", flags.seed, "master seed (overrides config)")
        ->trigger_on_parse()
        ->each([&flags](const std::string&) { flags.seed_set = true; });
    cmd->add_option("--out-dir", flags.out_dir, "output directory (overrides config)")
        ->trigger_on_parse()
        ->each([&flags](const std::string&) { flags.out_set = true; });
    cmd->add_option("--threads", flags.threads, "worker thread count (0 = hardware)");
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"sequential Bayesian updating experiments"};
    app.require_subcommand(1);

    CommonFlags flags;

    CLI::App* sec9 = app.add_subcommand("sec9", "Bernoulli coverage table and RE curve");
    add_common(sec9, flags);
    sec9->add_flag("--svg", flags.with_svg, "also render re_curve.svg");

    CLI::App* logistic =
        app.add_subcommand("logistic", "Gaussian-design TV scaling study");
    add_common(logistic, flags);
    logistic->add_flag("--svg", flags.with_svg, "also render tv_scaling.svg");

    CLI::App* diagnose = app.add_subcommand("diagnose", "run updates over a CSV dataset");
    add_common(diagnose, flags);
    diagnose->add_option("--data", flags.data_path, "input CSV (y,x1,...,xp)");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? kExitOk : kExitConfig;
    }

    try {
        if (sec9->parsed()) {
            const auto cfg = load_config(flags, "bernoulli_sec9");
            ovb::run_sec9(cfg);
            if (flags.with_svg) {
                ovb::emit_svg(cfg.out_dir + "/re_curve.csv", "re", cfg.out_dir + "/re_curve.svg");
            }
        } else if (logistic->parsed()) {
            const auto cfg = load_config(flags, "logistic_gaussian");
            ovb::run_logistic_scaling(cfg);
            if (flags.with_svg) {
                ovb::emit_svg(cfg.out_dir + "/tv_scaling.csv", "tv",
                              cfg.out_dir + "/tv_scaling.svg");
            }
        } else if (diagnose->parsed()) {
            const auto cfg = load_config(flags, "diagnose");
            ovb::run_diagnose(cfg);
        }
    } catch (const ovb::ConfigError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return kExitConfig;
    } catch (const ovb::MalformedCsv& e) {
        std::cerr << "csv error: " << e.what() << "\n";
        return kExitConfig;
    } catch (const ovb::IoError& e) {
        std::cerr << "io error: " << e.what() << "\n";
        return kExitIo;
    } catch (const std::exception& e) {
        std::cerr << "solver error: " << e.what() << "\n";
        return kExitSolver;
    }
    return kExitOk;
}
