#include "hsav/error.hpp"
#include "hsav/models.hpp"
#include "hsav/spectral.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <numbers>
#include <random>

namespace {

using namespace hsav;

constexpr double pi = std::numbers::pi;

Field random_field(const Grid2D& grid, std::mt19937_64& rng) {
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    Field f(grid);
    for (double& v : f.values()) v = u(rng);
    return f;
}

// f = cos(a x) sin(b y) on [0, Lx) x [0, Ly), with a = 3 mu_x, b = 5 mu_y.
struct TrigCase {
    Grid2D grid{32, 16, 2.0, 3.0};
    double a = 3.0 * 2.0 * pi / 2.0;
    double b = 5.0 * 2.0 * pi / 3.0;
};

}  // namespace

TEST(Grid, RejectsBadDimensions) {
    EXPECT_THROW(Grid2D(7, 8, 1.0, 1.0), std::invalid_argument);
    EXPECT_THROW(Grid2D(2, 8, 1.0, 1.0), std::invalid_argument);
    EXPECT_THROW(Grid2D(8, 8, 0.0, 1.0), std::invalid_argument);
    EXPECT_THROW(Grid2D(8, 8, 1.0, -1.0), std::invalid_argument);
}

TEST(Spectral, RoundTrip) {
    std::mt19937_64 rng(3);
    const Grid2D grid(16, 8, 1.0, 2.0);
    const Field f = random_field(grid, rng);
    EXPECT_LT(max_abs_diff(inverse(forward(f)), f), 1e-14);
}

TEST(Spectral, DerivativesOfTrigPolynomialsAreExact) {
    const TrigCase c;
    const double a = c.a;
    const double b = c.b;
    const Field f = Field::sample(c.grid, [&](double x, double y) { return std::cos(a * x) * std::sin(b * y); });

    const Field fx = Field::sample(c.grid, [&](double x, double y) { return -a * std::sin(a * x) * std::sin(b * y); });
    const Field fyy = Field::sample(c.grid, [&](double x, double y) { return -b * b * std::cos(a * x) * std::sin(b * y); });
    const Field fxxxy = Field::sample(
        c.grid, [&](double x, double y) { return a * a * a * b * std::sin(a * x) * std::cos(b * y); });

    EXPECT_LT(max_abs_diff(apply_derivative(f, 1, 0), fx), 1e-11 * a);
    EXPECT_LT(max_abs_diff(apply_derivative(f, 0, 2), fyy), 1e-11 * b * b);
    EXPECT_LT(max_abs_diff(apply_derivative(f, 3, 1), fxxxy), 1e-11 * a * a * a * b);
    EXPECT_LT(max_abs_diff(apply_derivative(f, 0, 0), f), 1e-14);
}

TEST(Spectral, NyquistConvention) {
    const Grid2D grid(8, 8, 2.0 * pi, 2.0 * pi);
    // cos(4x) sampled at 8 points per period is the Nyquist mode.
    const Field f = Field::sample(grid, [](double x, double) { return std::cos(4.0 * x); });
    EXPECT_LT(apply_derivative(f, 1, 0).max_abs(), 1e-13);
    EXPECT_LT(apply_derivative(f, 3, 0).max_abs(), 1e-11);
    EXPECT_LT(max_abs_diff(apply_derivative(f, 2, 0), -16.0 * f), 1e-12);
}

TEST(Spectral, MultiplierLayout) {
    const Grid2D grid(8, 4, 2.0 * pi, pi);
    const auto m = make_multiplier(grid, Axis::x, 1);
    ASSERT_EQ(m.diag.size(), 8u);
    EXPECT_DOUBLE_EQ(m.diag[1].imag(), 1.0);
    EXPECT_DOUBLE_EQ(m.diag[7].imag(), -1.0);
    EXPECT_EQ(m.diag[4], std::complex<double>(0.0, 0.0));
    const auto my2 = make_multiplier(grid, Axis::y, 2);
    ASSERT_EQ(my2.diag.size(), 4u);
    EXPECT_DOUBLE_EQ(my2.diag[2].real(), -16.0);
    EXPECT_THROW(make_multiplier(grid, Axis::x, -1), std::invalid_argument);
}

TEST(Spectral, InnerProductsAgree) {
    std::mt19937_64 rng(11);
    const Grid2D grid(16, 12, 1.5, 0.5);
    const Field f = random_field(grid, rng);
    const Field g = random_field(grid, rng);
    double direct = 0.0;
    for (std::size_t i = 0; i < f.size(); ++i) direct += f[i] * g[i];
    direct *= grid.hx() * grid.hy();
    EXPECT_NEAR(inner(f, g), direct, 1e-14 * std::abs(direct) + 1e-15);
    EXPECT_NEAR(inner(forward(f), forward(g)), direct, 1e-12 * (std::abs(direct) + 1.0));
    EXPECT_NEAR(norm(f), std::sqrt(inner(f, f)), 1e-14);
}

TEST(Spectral, InnerRejectsGridMismatch) {
    const Field f(Grid2D(8, 8, 1.0, 1.0));
    const Field g(Grid2D(8, 8, 2.0, 1.0));
    EXPECT_THROW(inner(f, g), GridMismatch);
}

TEST(Spectral, IntegrationByParts) {
    std::mt19937_64 rng(5);
    const Grid2D grid(64, 64, 2.0, 2.0);
    for (int trial = 0; trial < 10; ++trial) {
        const Field f = random_field(grid, rng);
        const Field g = random_field(grid, rng);
        for (int order = 1; order <= 4; ++order) {
            const double lhs = inner(apply_derivative(f, order, 0), g);
            const double rhs = inner(f, apply_derivative(g, order, 0));
            const double sign = order % 2 == 1 ? -1.0 : 1.0;
            const double scale = norm(apply_derivative(f, order, 0)) * norm(g);
            EXPECT_LE(std::abs(lhs - sign * rhs), 1e-12 * scale) << "order " << order;
        }
        const double lhs = inner(apply_derivative(f, 1, 1), g);
        const double rhs = inner(f, apply_derivative(g, 1, 1));
        EXPECT_LE(std::abs(lhs - rhs), 1e-12 * norm(apply_derivative(f, 1, 1)) * norm(g));
    }
}

TEST(Spectral, LaplacianSymbolMatchesDerivatives) {
    std::mt19937_64 rng(9);
    const Grid2D grid(16, 16, 3.0, 2.0);
    const Field f = random_field(grid, rng);
    const auto lap = make_operator_symbol(grid, SymbolKind::linear, OperatorRecipe::polynomial({0.0, 1.0}));
    Field expected = apply_derivative(f, 2, 0);
    expected += apply_derivative(f, 0, 2);
    EXPECT_LT(max_abs_diff(apply_symbol(lap, f), expected), 1e-10 * expected.max_abs());

    const auto bi = make_operator_symbol(grid, SymbolKind::linear, OperatorRecipe::polynomial({2.0, 0.0, 1.0}));
    Field expected_bi = apply_symbol(lap, apply_symbol(lap, f));
    expected_bi.axpy(2.0, f);
    EXPECT_LT(max_abs_diff(apply_symbol(bi, f), expected_bi), 1e-10 * expected_bi.max_abs());
}

TEST(Spectral, SymbolValidation) {
    const Grid2D grid(8, 8, 1.0, 1.0);
    EXPECT_THROW(make_operator_symbol(grid, SymbolKind::mobility, OperatorRecipe::polynomial({0.0, -1.0})),
                 std::invalid_argument);
    EXPECT_THROW(make_operator_symbol(grid, SymbolKind::mobility, OperatorRecipe::constant(1.0)),
                 std::invalid_argument);
    EXPECT_NO_THROW(make_operator_symbol(grid, SymbolKind::mobility, OperatorRecipe::polynomial({0.0, 1.0})));
    const auto sym = make_operator_symbol(grid, SymbolKind::linear, OperatorRecipe::constant(1.0));
    EXPECT_THROW(apply_symbol(sym, Field(Grid2D(16, 8, 1.0, 1.0))), GridMismatch);
}

TEST(Spectral, FullSpectrumAccessIsHermitian) {
    const Grid2D grid(8, 8, 1.0, 2.0);
    const auto sym = make_operator_symbol(grid, SymbolKind::linear, OperatorRecipe::polynomial({1.0, -0.5}));
    for (std::size_t j = 0; j < 8; ++j) {
        for (std::size_t k = 5; k < 8; ++k) {
            EXPECT_DOUBLE_EQ(sym.at(j, k), sym.at((8 - j) % 8, 8 - k));
        }
    }
}

TEST(Spectral, OperatorsSelfAdjointAndMobilityNonPositive) {
    std::mt19937_64 rng(2024);
    const Grid2D grid(64, 64, 4.0 * pi, 4.0 * pi);
    const ModelSpec models[] = {allen_cahn({}, grid), cahn_hilliard({0.1, 0.025, 1.0, std::nullopt}, grid),
                                mbe({}, grid)};
    for (const auto& model : models) {
        for (int trial = 0; trial < 100; ++trial) {
            const Field f = random_field(grid, rng);
            const Field g = random_field(grid, rng);
            const Field lf = apply_symbol(model.linear, f);
            const Field lg = apply_symbol(model.linear, g);
            EXPECT_LE(std::abs(inner(lf, g) - inner(f, lg)), 1e-12 * norm(lf) * norm(g)) << model.name;
            const Field gf = apply_symbol(model.mobility, f);
            EXPECT_LE(inner(f, gf), 1e-12 * norm(gf) * norm(f)) << model.name;
        }
    }
}
