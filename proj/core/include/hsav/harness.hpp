#pragma once

#include "hsav/models.hpp"
#include "hsav/sav.hpp"
#include "hsav/stepper.hpp"

#include <cstddef>
#include <cstdint>
#include <functional>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace hsav {

enum class ErrorNorm { l2_h, max };
enum class ReferenceKind { analytic, finest_dt, cauchy };

std::string_view to_string(ErrorNorm norm);
std::string_view to_string(ReferenceKind kind);
ReferenceKind parse_reference(std::string_view text);

double error_norm(const Field& a, const Field& b, ErrorNorm norm);

struct ConvergenceRow {
    double dt = 0.0;
    double error = 0.0;
    std::optional<double> order;  // absent on the first row
};

/// Errors at t_end per dt. For Cauchy references row i holds |u(dt_i) - u(dt_{i+1})|.
/// order_i = log(e_{i-1}/e_i) / log(dt_{i-1}/dt_i), i.e. log2 of the ratio when dt halves.
struct ConvergenceTable {
    std::string method;
    ErrorNorm norm = ErrorNorm::l2_h;
    ReferenceKind reference = ReferenceKind::cauchy;
    std::vector<ConvergenceRow> rows;
};

struct RefinementSpec {
    Method method;
    std::vector<double> dt_list;  // strictly decreasing, each dividing t_end
    double t_end = 1.0;
    ReferenceKind reference = ReferenceKind::cauchy;
    ErrorNorm norm = ErrorNorm::l2_h;
    std::function<Field(double)> analytic;  // required for ReferenceKind::analytic
    SolverConfig solver;
    int threads = 1;
};

/// Checks the dt list precondition; throws std::invalid_argument naming the problem.
void validate_dt_list(std::span<const double> dt_list, double t_end);

ConvergenceTable refinement_study(const ModelSpec& model, const Field& phi0, const RefinementSpec& spec);

/// Observed orders of the last `pairs` consecutive rows whose errors both exceed `floor`.
std::vector<double> orders_above_floor(const ConvergenceTable& table, double floor, std::size_t pairs);

struct EnergySample {
    double t = 0.0;
    double modified = 0.0;
    double raw = 0.0;
    double q = 0.0;
};

struct EnergyTrace {
    Method method;
    double dt = 0.0;
    std::vector<EnergySample> samples;
    std::optional<std::string> failure;

    /// Largest E_h(t_{n+1}) - E_h(t_n) - slack*(1+|E_h(t_n)|) over the samples; <= 0 means monotone.
    double worst_increase(double slack = kDissipationSlack) const;
};

/// Integrate one configuration while sampling (t, E_h, F_h, q) every `stride` steps.
EnergyTrace record_energy(const ModelSpec& model, const Field& phi0, const Method& method, double dt,
                          double t_end, std::size_t stride, const SolverConfig& solver = {});

/// One trace per (method, dt); failures are recorded in the trace and the sweep continues.
std::vector<EnergyTrace> energy_sweep(const ModelSpec& model, const Field& phi0, std::span<const Method> methods,
                                      std::span<const double> dt_list, double t_end, std::size_t stride,
                                      const SolverConfig& solver = {}, int threads = 1);

struct LinearFit {
    double slope = 0.0;
    double intercept = 0.0;
    double residual = 0.0;  // RMS of the fit residuals
};

LinearFit fit_line(std::span<const double> x, std::span<const double> y);

/// Area of {phi > 0}: hx * hy * (number of nodes with phi > 0).
double disk_volume(const Field& phi);

struct DiskSample {
    double t = 0.0;
    double volume = 0.0;
};

struct DiskTrace {
    Method method;
    double dt = 0.0;
    std::vector<DiskSample> samples;
    LinearFit fit;  // V(t) over [fit_t_lo, t_end]
    std::optional<std::string> failure;

    /// max |V(t) - (pi R0^2 - 2 pi t)| / (pi R0^2 - 2 pi t) over samples with t in [t_lo, t_hi].
    double max_relative_deviation(double radius, double t_lo, double t_hi) const;
};

struct DiskBenchmarkConfig {
    Grid2D grid{256, 256, 256.0, 256.0, -128.0, -128.0};
    AllenCahnParams params{};
    double radius = 100.0;
    double t_end = 1000.0;
    double sample_interval = 1.0;
    double fit_t_lo = 0.0;
    SolverConfig solver{};
};

std::vector<DiskTrace> disk_benchmark(const DiskBenchmarkConfig& config, std::span<const double> dt_list,
                                      std::span<const Method> methods, int threads = 1);

struct PowerLawFit {
    double slope = 0.0;
    double intercept = 0.0;
    double t_lo = 0.0;
    double t_hi = 0.0;
    double residual = 0.0;
    std::size_t samples = 0;
};

/// Least squares on (log t, log E) over the samples with t in [t_lo, t_hi].
/// Rejects windows with fewer than 5 samples or non-positive energies.
PowerLawFit fit_power_law(std::span<const EnergySample> samples, double t_lo, double t_hi, bool use_raw = false);

struct PowerLawConfig {
    Grid2D grid{128, 128, 4.0 * 3.14159265358979323846, 4.0 * 3.14159265358979323846};
    CahnHilliardParams params{0.02, 0.05, 1.0, std::nullopt};
    RandomInit initial{1e-3, 0.0, 20190101};
    Method method = Method::gauss(2);
    double dt = 1e-2;
    double t_end = 200.0;
    double window_lo = 10.0;
    std::optional<double> window_hi;  // defaults to t_end
    std::size_t stride = 10;
    SolverConfig solver{};
};

struct PowerLawResult {
    EnergyTrace trace;
    PowerLawFit modified;
    PowerLawFit raw;
};

PowerLawResult power_law_study(const PowerLawConfig& config);

/// Independent brute-force reference for tiny problems: implicit midpoint on
/// the semi-discrete SAV system at step dt_ref, each step solved by fixed-point
/// iteration in physical space. Uses only the spectral primitives and the
/// model's pointwise maps; nothing from the stage solver.
inline constexpr std::size_t kOracleMaxNodes = 16 * 16;
inline constexpr double kOracleMaxSteps = 2e6;

SavState oracle_reference(const ModelSpec& model, const SavState& initial, double t_end, double dt_ref = 1e-6);

/// 64-bit FNV-1a, used as the config hash in CSV manifests.
std::uint64_t fnv1a(std::string_view text) noexcept;

/// Each writer emits `# manifest: <manifest>` then a header row and the data.
void write_energy_csv(std::ostream& out, const EnergyTrace& trace, std::string_view manifest);
void write_convergence_csv(std::ostream& out, const ConvergenceTable& table, std::string_view manifest);
void write_disk_csv(std::ostream& out, const DiskTrace& trace, std::string_view manifest);

/// Runs fn(i) for i in [0, count) on up to `threads` worker threads.
void parallel_for(std::size_t count, int threads, const std::function<void(std::size_t)>& fn);

}  // namespace hsav
