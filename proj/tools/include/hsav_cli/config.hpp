#pragma once

#include "hsav/harness.hpp"
#include "hsav/models.hpp"
#include "hsav/stepper.hpp"

#include <filesystem>
#include <iosfwd>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <variant>
#include <vector>

namespace hsav::cli {

/// Invalid or incomplete run configuration (exit code 1).
class ConfigError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Output directory or file problems (exit code 3).
class IoError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

enum class Experiment { single, refinement, energy_sweep, disk, power_law };

std::string_view to_string(Experiment e);

using ModelParams = std::variant<AllenCahnParams, CahnHilliardParams, MbeParams>;

struct OutputConfig {
    std::filesystem::path directory;
    std::size_t snapshot_stride = 0;  // 0: final snapshot only
    std::size_t energy_stride = 1;
};

/// Fully resolved run description. Every field holds its effective value.
struct RunConfig {
    Experiment experiment = Experiment::single;
    ModelParams model;
    Grid2D grid{4, 4, 1.0, 1.0};
    std::optional<Method> method;
    std::optional<double> dt;
    double t_end = 0.0;
    SolverConfig solver;
    InitialCondition initial;
    OutputConfig output;

    // refinement
    std::vector<double> refinement_dts;
    ReferenceKind reference = ReferenceKind::cauchy;
    ErrorNorm norm = ErrorNorm::l2_h;
    // energy_sweep and disk
    std::vector<Method> sweep_methods;
    std::vector<double> sweep_dts;
    // disk
    double disk_sample_interval = 1.0;
    double disk_fit_t_lo = 0.0;
    // power_law
    double window_lo = 10.0;
    std::optional<double> window_hi;

    ModelSpec build_model() const;
    std::optional<std::uint64_t> seed() const;
};

/// Parses INI text. `overrides` are "key=value" with dotted section paths
/// ("dt=0.1", "model.eps=0.02") applied before validation.
RunConfig parse_config(std::istream& in, std::span<const std::string> overrides = {});
RunConfig load_config(const std::filesystem::path& path, std::span<const std::string> overrides = {});

/// Canonical INI rendering of the effective configuration.
std::string resolved_config(const RunConfig& config);

}  // namespace hsav::cli
