#pragma once

#include <cstddef>
#include <string>
#include <vector>

namespace hsav {

/// Runge-Kutta coefficients (A, b, c) of an s-stage method.
///
/// Construction checks the row-sum condition c_i = sum_j a_ij and
/// sum_i b_i = 1, both to 1e-14.
class ButcherTableau {
public:
    /// `a` is row-major s x s.
    ButcherTableau(std::string name, std::vector<double> a, std::vector<double> b,
                   std::vector<double> c);

    const std::string& name() const noexcept { return name_; }
    std::size_t stages() const noexcept { return b_.size(); }
    double a(std::size_t i, std::size_t j) const noexcept { return a_[i * stages() + j]; }
    double b(std::size_t i) const noexcept { return b_[i]; }
    double c(std::size_t i) const noexcept { return c_[i]; }

    const std::vector<double>& a() const noexcept { return a_; }
    const std::vector<double>& b() const noexcept { return b_; }
    const std::vector<double>& c() const noexcept { return c_; }

private:
    std::string name_;
    std::vector<double> a_;
    std::vector<double> b_;
    std::vector<double> c_;
};

inline constexpr int kMaxGaussStages = 10;

/// s-stage Gauss-Legendre collocation tableau (order 2s), 1 <= s <= 10.
///
/// Nodes are the roots of the shifted Legendre polynomial on [0, 1] (Newton
/// from Chebyshev guesses); b and each row of A solve the collocation
/// conditions. All of it runs in extended precision and is rounded once.
ButcherTableau gauss_tableau(int s);

/// Closed-form order-4 and order-6 Gauss tables, kept as golden data.
ButcherTableau gauss4_closed_form();
ButcherTableau gauss6_closed_form();

/// Classical explicit RK4; fails the stability check.
ButcherTableau classical_rk4();
/// Trapezoidal rule written as a 2-stage (Lobatto IIIA) tableau.
ButcherTableau crank_nicolson_tableau();

/// Energy-stability condition for quadratic energies:
/// b_i a_ij + b_j a_ji = b_i b_j for all i, j, and b_i >= 0.
struct StabilityReport {
    double max_residual = 0.0;
    double min_weight = 0.0;
    bool passes = false;
};

inline constexpr double kStabilityResidualTolerance = 1e-13;
inline constexpr double kStabilityWeightTolerance = 1e-14;

StabilityReport check_stability(const ButcherTableau& t);

/// Aligned text Butcher table followed by the stability report.
std::string describe(const ButcherTableau& t);

}  // namespace hsav
