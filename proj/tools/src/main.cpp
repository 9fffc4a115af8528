#include "hsav_cli/config.hpp"
#include "hsav_cli/run.hpp"

#include "hsav/error.hpp"
#include "hsav/tableau.hpp"

#include <CLI11.hpp>

#include <iostream>

namespace {

enum ExitCode { kOk = 0, kConfig = 1, kNumerical = 2, kIo = 3 };

}  // namespace

int main(int argc, char** argv) {
    using namespace hsav;
    using namespace hsav::cli;

    CLI::App app{"Energy-stable high-order SAV Runge-Kutta solver for gradient flows"};
    app.require_subcommand(1);

    std::string config_path;
    std::vector<std::string> overrides;
    RunOptions options;

    auto* run = app.add_subcommand("run", "Run the experiment described by a config file");
    run->add_option("config", config_path, "INI run configuration")->required();
    run->add_option("--set", overrides, "Override a config key, e.g. --set dt=0.1 --set model.eps=0.02");
    run->add_flag("--force", options.force, "Overwrite an output directory that already holds a manifest");
    run->add_flag("--csv-fields", options.csv_fields, "Also write node-listed CSV next to each field snapshot");
    run->add_option("--threads", options.threads, "Worker threads for sweeps and refinement studies")
        ->check(CLI::PositiveNumber);

    auto* validate = app.add_subcommand("validate", "Check a config file and print the effective configuration");
    validate->add_option("config", config_path, "INI run configuration")->required();
    validate->add_option("--set", overrides, "Override a config key");

    int stages = 0;
    auto* tableau = app.add_subcommand("tableau", "Print the s-stage Gauss tableau and its stability check");
    tableau->add_option("s", stages, "Number of stages")->required();

    CLI11_PARSE(app, argc, argv);

    try {
        if (*tableau) {
            std::cout << describe(gauss_tableau(stages));
            return kOk;
        }
        const RunConfig config = load_config(config_path, overrides);
        if (*validate) {
            std::cout << "OK\n" << resolved_config(config);
            return kOk;
        }
        const RunSummary summary = run_experiment(config, options);
        std::cout << "wrote " << summary.files.size() << " file(s) and " << kManifestName << " to "
                  << summary.directory.string() << '\n';
        return kOk;
    } catch (const ConfigError& e) {
        std::cerr << "config error: " << e.what() << '\n';
        return kConfig;
    } catch (const IoError& e) {
        std::cerr << "I/O error: " << e.what() << '\n';
        return kIo;
    } catch (const NumericalError& e) {
        std::cerr << "numerical failure: " << e.what() << '\n';
        return kNumerical;
    } catch (const std::filesystem::filesystem_error& e) {
        std::cerr << "I/O error: " << e.what() << '\n';
        return kIo;
    } catch (const std::invalid_argument& e) {
        std::cerr << "config error: " << e.what() << '\n';
        return kConfig;
    }
}
