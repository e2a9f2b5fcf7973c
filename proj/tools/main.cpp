#include <cstdlib>
#include <iostream>
#include <string>

#include <CLI11.hpp>

#include "experiment.hpp"
#include "multifbsde/errors.hpp"

using namespace mfbsde;

namespace {

constexpr int kExitConfig = 2;
constexpr int kExitDivergence = 3;
constexpr int kExitCheck = 4;

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Deep FBSDE and multi-FBSDE experiment runner"};
    std::string command;
    std::string config_file;
    bool desk = false;
    int threads = 0;
    bool check = false;
    app.add_option("command", command, "train | landscape | converge | beta-sweep | reference | plot")
        ->required()
        ->check(CLI::IsMember({"train", "landscape", "converge", "beta-sweep", "reference", "plot"}));
    app.add_option("--config", config_file, "JSON experiment configuration")->required();
    app.add_flag("--desk", desk, "reduced training budget (2^16 samples, batch 2^10, 4 epochs)");
    app.add_option("--threads", threads, "worker threads; 1 gives bit-exact runs")->check(CLI::PositiveNumber);
    app.add_flag("--check", check, "exit with status 4 when the run misses its acceptance thresholds");
    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        return app.exit(e) == 0 ? 0 : kExitConfig;
    }

    try {
        auto cfg = cli::load_config(config_file);
        const auto kind = cli::experiment_kind_from_string(command);
        if (cfg.experiment && *cfg.experiment != kind)
            throw ConfigError("config: file is for '" + cli::to_string(*cfg.experiment) + "', not '" + command + "'");
        if (desk) cfg.train = desk_profile(cfg.train);
        if (const char* dir = std::getenv("MULTIFBSDE_OUTPUT_DIR"); dir && *dir) cfg.output_dir = dir;
        if (const char* env = std::getenv("MULTIFBSDE_THREADS"); env && *env) {
            try {
                cfg.train.threads = std::stoi(env);
            } catch (const std::exception&) {
                throw ConfigError("environment: MULTIFBSDE_THREADS is not an integer");
            }
        }
        if (threads > 0) cfg.train.threads = threads;
        cfg.train.validate();

        const auto outcome = cli::run_experiment(cfg, kind);
        auto brief = outcome.summary;
        brief.erase("config");
        std::cout << brief.dump(2) << '\n';
        if (check && !outcome.check_passed) {
            for (const auto& m : outcome.check_messages) std::cerr << "check failed: " << m << '\n';
            return kExitCheck;
        }
        return 0;
    } catch (const ConfigError& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kExitConfig;
    } catch (const DivergenceError& e) {
        std::cerr << "divergence: " << e.what();
        if (e.step() >= 0) std::cerr << " (step " << e.step() << ", sample " << e.sample() << ")";
        std::cerr << '\n';
        return kExitDivergence;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 1;
    }
}
