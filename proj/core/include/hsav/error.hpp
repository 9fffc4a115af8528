#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace hsav {

/// Two fields or a field and an operator symbol live on different grids.
class GridMismatch : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

/// Base for failures of the numerics themselves (as opposed to bad input).
class NumericalError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// (g(phi),1)_h + C0 fell to (or below) the guard; C0 is too small for this state.
class RadicandError : public NumericalError {
public:
    RadicandError(const std::string& what, double radicand)
        : NumericalError(what), radicand_(radicand) {}

    double radicand() const noexcept { return radicand_; }

private:
    double radicand_;
};

/// The implicit stage iteration did not reach its tolerance.
class ConvergenceError : public NumericalError {
public:
    ConvergenceError(const std::string& what, int iterations, double residual)
        : NumericalError(what), iterations_(iterations), residual_(residual) {}

    int iterations() const noexcept { return iterations_; }
    double residual() const noexcept { return residual_; }

private:
    int iterations_;
    double residual_;
};

/// A step inside `integrate` failed; carries where it happened.
class StepFailure : public NumericalError {
public:
    StepFailure(const std::string& what, std::size_t step, double time)
        : NumericalError(what), step_(step), time_(time) {}

    std::size_t step() const noexcept { return step_; }
    double time() const noexcept { return time_; }

private:
    std::size_t step_;
    double time_;
};

}  // namespace hsav
