#pragma once

#include "hsav/sav.hpp"
#include "hsav/spectral.hpp"
#include "hsav/tableau.hpp"

#include <cstddef>
#include <functional>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace hsav {

/// How the nonlinear stage equations are iterated.
///
/// Both modes solve the stiff linear part exactly, Fourier mode by Fourier
/// mode, and differ only in what is frozen between sweeps:
///  - picard_preconditioned freezes the normalised variation w = g'(Phi)/r and
///    keeps the stage scalars Q implicit (an s x s Schur solve per sweep). Every
///    sweep is then itself an energy-stable linear SAV step.
///  - full_picard freezes the whole nonlinear term Q g'(Phi)/r and updates Q
///    explicitly afterwards.
/// Models with a Jacobian model additionally move its constant-coefficient
/// part (taken at phi^n) into the exact per-mode solve. Sweeps then only
/// freeze the remainder, which keeps them convergent in spinodal regions where
/// g'' < 0 outweighs L.
enum class SolverMode { picard_preconditioned, full_picard };

struct SolverConfig {
    double tolerance = 1e-12;  // max-norm on stage increments
    int max_iterations = 200;
    SolverMode mode = SolverMode::picard_preconditioned;
    /// Anderson acceleration depth on top of the sweeps; 0 disables it.
    int anderson_depth = 0;
    /// When sweeps stall or diverge, continue with Jacobian-free Newton-Krylov
    /// on the fixed-point residual of the same sweep map.
    bool newton_fallback = true;
    /// Keep physical-space stage data (Phi_i, Q_i, k_i, l_i) in the result.
    bool record_stages = false;

    void validate() const;
};

std::string_view to_string(SolverMode mode);
SolverMode parse_solver_mode(std::string_view text);

struct StepReport {
    int iterations_used = 0;
    double final_residual = 0.0;
    double energy_before = 0.0;
    double energy_after = 0.0;
    /// dt * sum_i b_i (mu_i, G_h mu_i)_h over the converged stages.
    double dissipation = 0.0;
    bool dissipation_ok = true;
};

inline constexpr double kDissipationSlack = 1e-10;

bool dissipation_holds(double before, double after) noexcept;

/// Stage values Phi_i, Q_i and derivatives k_i, l_i after the stage solve.
struct StageSystem {
    std::vector<Field> phi;
    std::vector<double> q;
    std::vector<Field> k;
    std::vector<double> l;
};

struct StepResult {
    SavState state;
    StepReport report;
    StageSystem stages;
};

enum class TableauPolicy { require_stable, allow_unstable };

/// Fully discrete SAV Runge-Kutta step for one model and tableau.
///
/// Per-mode stage matrices (I - dt sigma A)^-1 are cached for the most recent
/// dt, so reuse one stepper across a run.
class HsavStepper {
public:
    HsavStepper(const ModelSpec& model, ButcherTableau tableau, SolverConfig config = {},
                TableauPolicy policy = TableauPolicy::require_stable);
    ~HsavStepper();
    HsavStepper(HsavStepper&&) noexcept;
    HsavStepper& operator=(HsavStepper&&) noexcept;

    StepResult step(const SavState& state, double dt);

    /// One linear SAV step with the normalised variation frozen to
    /// `frozen_variation` at every stage (no iteration). With the 1-stage
    /// midpoint tableau this is the SAV Crank-Nicolson update.
    StepResult frozen_step(const SavState& state, const Field& frozen_variation, double dt);

    const ButcherTableau& tableau() const noexcept;
    const SolverConfig& config() const noexcept;
    bool stable_tableau() const noexcept;

private:
    struct Impl;
    std::unique_ptr<Impl> impl_;
};

StepResult hsav_rk_step(const SavState& state, const ModelSpec& model, const ButcherTableau& tableau,
                        double dt, const SolverConfig& config = {},
                        TableauPolicy policy = TableauPolicy::require_stable);

/// Previous step needed by the SAV Crank-Nicolson extrapolation.
struct CnHistory {
    Field phi_prev;
    double dt_prev = 0.0;
};

/// Second-order linearly implicit SAV-CN step. The nonlinear coefficient uses
/// phi* = phi^n + dt/(2 dt_prev) (phi^n - phi^{n-1}); without history the step
/// is bootstrapped by a 1-stage Gauss step.
StepResult sav_cn_step(const SavState& state, const ModelSpec& model, double dt,
                       const std::optional<CnHistory>& history,
                       const SolverConfig& bootstrap_config = {});

struct Method {
    enum class Kind { cn, gauss };
    Kind kind = Kind::gauss;
    int stages = 1;

    static Method cn() { return {Kind::cn, 1}; }
    static Method gauss(int s) { return {Kind::gauss, s}; }
    /// "cn" or "gaussN"
    static Method parse(std::string_view text);
    std::string name() const;
    /// Nominal temporal order.
    int order() const noexcept { return kind == Kind::cn ? 2 : 2 * stages; }
    bool operator==(const Method&) const = default;
};

struct StepEvent {
    std::size_t step;
    double t;
    const SavState& state;
    const StepReport& report;
};

/// Called on step 0 (the initial state), every `stride` steps, and on the last step.
struct Observer {
    std::size_t stride = 1;
    std::function<void(const StepEvent&)> callback;
};

/// Steps from state.t to t_end with step dt (the last step shortened to land
/// on t_end). Failures are rethrown as StepFailure with step index and time.
SavState integrate(SavState state, const ModelSpec& model, const Method& method, double dt,
                   double t_end, std::span<const Observer> observers = {},
                   const SolverConfig& config = {});

}  // namespace hsav
