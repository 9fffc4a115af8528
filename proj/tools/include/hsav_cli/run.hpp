#pragma once

#include "hsav_cli/config.hpp"

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

namespace hsav::cli {

inline constexpr const char* kManifestName = "manifest.json";
inline constexpr const char* kFailedManifestName = "manifest.json.failed";
inline constexpr const char* kOutputRootEnv = "HSAV_OUTPUT_ROOT";

struct RunOptions {
    bool force = false;
    bool csv_fields = false;
    int threads = 1;
};

struct ProducedFile {
    std::string name;
    std::uintmax_t bytes = 0;
};

struct RunSummary {
    std::filesystem::path directory;
    std::vector<ProducedFile> files;
    std::string results_json;
};

/// Relative output directories are taken relative to $HSAV_OUTPUT_ROOT when set.
std::filesystem::path resolve_output_directory(const RunConfig& config);

/// Runs the configured experiment and writes its outputs plus manifest.json.
/// A failure leaves manifest.json.failed and rethrows.
RunSummary run_experiment(const RunConfig& config, const RunOptions& options = {});

}  // namespace hsav::cli
