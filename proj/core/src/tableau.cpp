#include "hsav/tableau.hpp"

#include "hsav/dense.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <numbers>
#include <numeric>
#include <sstream>
#include <stdexcept>
#include <string>
#include <utility>

namespace hsav {

namespace {

using Real = long double;

// Legendre P_n(x) and P_n'(x) on [-1, 1] by the three-term recurrence.
std::pair<Real, Real> legendre(int n, Real x) {
    Real p0 = 1.0L;
    Real p1 = x;
    if (n == 0) return {p0, 0.0L};
    for (int k = 2; k <= n; ++k) {
        const Real p2 = ((2 * k - 1) * x * p1 - (k - 1) * p0) / k;
        p0 = p1;
        p1 = p2;
    }
    const Real dp = n * (x * p1 - p0) / (x * x - 1.0L);
    return {p1, dp};
}

std::vector<Real> gauss_nodes(int s) {
    constexpr int kMaxNewton = 100;
    constexpr Real kNewtonTol = 1e-15L;
    const Real pi = std::numbers::pi_v<Real>;
    std::vector<Real> nodes;
    nodes.reserve(static_cast<std::size_t>(s));
    for (int i = s; i >= 1; --i) {
        // Chebyshev node as the starting guess; Legendre roots interlace with them.
        Real x = std::cos((2 * i - 1) * pi / (2 * s));
        bool converged = false;
        for (int it = 0; it < kMaxNewton; ++it) {
            const auto [p, dp] = legendre(s, x);
            const Real dx = p / dp;
            x -= dx;
            if (std::fabs(dx) <= kNewtonTol) {
                converged = true;
                break;
            }
        }
        if (!converged) {
            throw std::runtime_error("gauss_tableau: Newton did not converge for node " +
                                     std::to_string(i) + " of s=" + std::to_string(s));
        }
        nodes.push_back((1.0L + x) / 2.0L);
    }
    return nodes;
}

}  // namespace

ButcherTableau::ButcherTableau(std::string name, std::vector<double> a, std::vector<double> b,
                               std::vector<double> c)
    : name_(std::move(name)), a_(std::move(a)), b_(std::move(b)), c_(std::move(c)) {
    const std::size_t s = b_.size();
    if (s == 0 || c_.size() != s || a_.size() != s * s) {
        throw std::invalid_argument("ButcherTableau '" + name_ + "': inconsistent dimensions");
    }
    for (std::size_t i = 0; i < s; ++i) {
        double row = 0.0;
        for (std::size_t j = 0; j < s; ++j) row += a_[i * s + j];
        if (std::abs(row - c_[i]) > 1e-14) {
            throw std::invalid_argument("ButcherTableau '" + name_ + "': row " + std::to_string(i) +
                                        " of A does not sum to c");
        }
    }
    const double bsum = std::accumulate(b_.begin(), b_.end(), 0.0);
    if (std::abs(bsum - 1.0) > 1e-14) {
        throw std::invalid_argument("ButcherTableau '" + name_ + "': weights do not sum to 1");
    }
}

ButcherTableau gauss_tableau(int s) {
    if (s < 1 || s > kMaxGaussStages) {
        throw std::invalid_argument("gauss_tableau: stage count " + std::to_string(s) +
                                    " outside [1, " + std::to_string(kMaxGaussStages) + "]");
    }
    const auto n = static_cast<std::size_t>(s);
    const auto c = gauss_nodes(s);

    // Collocation matrix V[k][j] = c_j^k, k = 0..s-1.
    std::vector<Real> vander(n * n);
    for (std::size_t k = 0; k < n; ++k) {
        for (std::size_t j = 0; j < n; ++j) vander[k * n + j] = std::pow(c[j], static_cast<Real>(k));
    }

    // Quadrature weights: sum_j b_j c_j^(k-1) = 1/k.
    std::vector<Real> m = vander;
    std::vector<Real> bw(n);
    for (std::size_t k = 0; k < n; ++k) bw[k] = 1.0L / static_cast<Real>(k + 1);
    dense::solve_in_place<Real>(m, bw, n);

    // Row i of A: sum_j a_ij c_j^(k-1) = c_i^k / k.
    std::vector<double> a(n * n);
    for (std::size_t i = 0; i < n; ++i) {
        m = vander;
        std::vector<Real> row(n);
        for (std::size_t k = 0; k < n; ++k) {
            row[k] = std::pow(c[i], static_cast<Real>(k + 1)) / static_cast<Real>(k + 1);
        }
        dense::solve_in_place<Real>(m, row, n);
        for (std::size_t j = 0; j < n; ++j) a[i * n + j] = static_cast<double>(row[j]);
    }

    std::vector<double> b(bw.begin(), bw.end());
    std::vector<double> cd(c.begin(), c.end());
    return ButcherTableau("gauss" + std::to_string(s), std::move(a), std::move(b), std::move(cd));
}

ButcherTableau gauss4_closed_form() {
    const double r3 = std::sqrt(3.0);
    return ButcherTableau("gauss2 (closed form)",
                          {0.25, 0.25 - r3 / 6.0,
                           0.25 + r3 / 6.0, 0.25},
                          {0.5, 0.5},
                          {0.5 - r3 / 6.0, 0.5 + r3 / 6.0});
}

ButcherTableau gauss6_closed_form() {
    const double r15 = std::sqrt(15.0);
    return ButcherTableau("gauss3 (closed form)",
                          {5.0 / 36.0, 2.0 / 9.0 - r15 / 15.0, 5.0 / 36.0 - r15 / 30.0,
                           5.0 / 36.0 + r15 / 24.0, 2.0 / 9.0, 5.0 / 36.0 - r15 / 24.0,
                           5.0 / 36.0 + r15 / 30.0, 2.0 / 9.0 + r15 / 15.0, 5.0 / 36.0},
                          {5.0 / 18.0, 4.0 / 9.0, 5.0 / 18.0},
                          {0.5 - r15 / 10.0, 0.5, 0.5 + r15 / 10.0});
}

ButcherTableau classical_rk4() {
    return ButcherTableau("rk4",
                          {0.0, 0.0, 0.0, 0.0,
                           0.5, 0.0, 0.0, 0.0,
                           0.0, 0.5, 0.0, 0.0,
                           0.0, 0.0, 1.0, 0.0},
                          {1.0 / 6.0, 1.0 / 3.0, 1.0 / 3.0, 1.0 / 6.0},
                          {0.0, 0.5, 0.5, 1.0});
}

ButcherTableau crank_nicolson_tableau() {
    return ButcherTableau("trapezoid", {0.0, 0.0, 0.5, 0.5}, {0.5, 0.5}, {0.0, 1.0});
}

StabilityReport check_stability(const ButcherTableau& t) {
    const std::size_t s = t.stages();
    StabilityReport r;
    r.min_weight = *std::min_element(t.b().begin(), t.b().end());
    for (std::size_t i = 0; i < s; ++i) {
        for (std::size_t j = 0; j < s; ++j) {
            const double m = t.b(i) * t.a(i, j) + t.b(j) * t.a(j, i) - t.b(i) * t.b(j);
            r.max_residual = std::max(r.max_residual, std::abs(m));
        }
    }
    r.passes = r.max_residual <= kStabilityResidualTolerance &&
               r.min_weight >= -kStabilityWeightTolerance;
    return r;
}

std::string describe(const ButcherTableau& t) {
    const std::size_t s = t.stages();
    constexpr int kWidth = 24;
    std::ostringstream out;
    out << t.name() << " (s = " << s << ")\n";
    out << std::scientific << std::setprecision(16);
    for (std::size_t i = 0; i < s; ++i) {
        out << std::setw(kWidth) << t.c(i) << " |";
        for (std::size_t j = 0; j < s; ++j) out << std::setw(kWidth) << t.a(i, j);
        out << '\n';
    }
    out << std::string(kWidth, '-') << "-+" << std::string(kWidth * s, '-') << '\n';
    out << std::setw(kWidth) << "" << " |";
    for (std::size_t j = 0; j < s; ++j) out << std::setw(kWidth) << t.b(j);
    out << '\n';

    const auto r = check_stability(t);
    out << std::setprecision(3) << "stability: max|b_i a_ij + b_j a_ji - b_i b_j| = " << r.max_residual
        << ", min b_i = " << std::defaultfloat << std::setprecision(17) << r.min_weight << ", "
        << (r.passes ? "PASS" : "FAIL") << '\n';
    return out.str();
}

}  // namespace hsav
