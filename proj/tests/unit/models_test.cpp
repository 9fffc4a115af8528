#include "hsav/models.hpp"
#include "hsav/sav.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <numbers>
#include <random>

namespace {

using namespace hsav;

constexpr double pi = std::numbers::pi;

double integral(const Field& f) { return inner(f, Field(f.grid(), 1.0)); }

// Central difference of tau -> (g(phi + tau v), 1)_h at tau = 0.
double directional_derivative(const ModelSpec& model, const Field& phi, const Field& v, double tau) {
    Field plus = phi;
    plus.axpy(tau, v);
    Field minus = phi;
    minus.axpy(-tau, v);
    return (integral(model.potential(plus)) - integral(model.potential(minus))) / (2.0 * tau);
}

Field smooth_field(const Grid2D& grid, double a, double b, double phase) {
    return Field::sample(grid, [&](double x, double y) {
        return 0.6 * std::sin(a * x + phase) * std::cos(b * y) + 0.3 * std::cos(2.0 * a * x - b * y);
    });
}

}  // namespace

TEST(Models, VariationIsTheDerivativeOfTheNonlinearEnergy) {
    const Grid2D grid(32, 32, 2.0 * pi, 2.0 * pi);
    const Field phi = smooth_field(grid, 1.0, 2.0, 0.3);
    const Field v = smooth_field(grid, 3.0, 1.0, 1.1);
    const ModelSpec models[] = {allen_cahn({}, grid), cahn_hilliard({}, grid), mbe({}, grid),
                                mbe({1.0, 0.1, 0.0, std::nullopt}, grid)};
    for (const auto& model : models) {
        const double fd = directional_derivative(model, phi, v, 1e-5);
        const double exact = inner(model.variation(phi), v);
        EXPECT_NEAR(exact, fd, 1e-8 * (1.0 + std::abs(fd))) << model.name;
    }
}

TEST(Models, DoubleWellPointwiseValues) {
    const Grid2D grid(4, 4, 1.0, 1.0);
    const ModelSpec model = allen_cahn({1.0, 1.0, 2.0, std::nullopt}, grid);
    const Field phi(grid, 0.5);
    // g = 1/4 (0.25 - 1)^2 - 0.25 = -0.109375, g' = 0.125 - 0.5 - 1 = -1.375
    EXPECT_DOUBLE_EQ(model.potential(phi)[5], 0.25 * 0.75 * 0.75 - 0.25);
    EXPECT_DOUBLE_EQ(model.variation(phi)[5], -1.375);
}

TEST(Models, OperatorSymbols) {
    const Grid2D grid(8, 8, 2.0 * pi, 2.0 * pi);
    const auto ac = allen_cahn({2.0, 0.5, 1.0, std::nullopt}, grid);
    const auto ch = cahn_hilliard({0.1, 0.5, 1.0, std::nullopt}, grid);
    const auto m = mbe({3.0, 0.2, 1.0, std::nullopt}, grid);
    // mode (1, 2): |k|^2 = 5
    EXPECT_DOUBLE_EQ(ac.mobility(1, 2), -2.0);
    EXPECT_DOUBLE_EQ(ac.linear(1, 2), 1.0 + 0.25 * 5.0);
    EXPECT_DOUBLE_EQ(ch.mobility(1, 2), -0.5);
    EXPECT_DOUBLE_EQ(ch.linear(1, 2), 1.0 + 0.25 * 5.0);
    EXPECT_DOUBLE_EQ(m.mobility(1, 2), -3.0);
    EXPECT_NEAR(m.linear(1, 2), 0.2 * 25.0 + 5.0, 1e-13);
}

TEST(Models, DefaultC0KeepsRadicandPositive) {
    const Grid2D grid(8, 8, 4.0 * pi, 4.0 * pi);
    for (double gamma0 : {0.0, 1.0, 2.5}) {
        const auto model = cahn_hilliard({1e-3, 0.01, gamma0, std::nullopt}, grid);
        // The double well attains its minimum at phi^2 = 1 + gamma0.
        const Field worst(grid, std::sqrt(1.0 + gamma0));
        EXPECT_NEAR(radicand(worst, model), 1.0, 1e-9 * model.c0);
    }
    EXPECT_DOUBLE_EQ(cahn_hilliard({1e-3, 0.01, 1.0, 1.0}, grid).c0, 1.0);
    EXPECT_DOUBLE_EQ(mbe({}, grid).c0, 1.0);
}

TEST(Models, RejectInvalidParameters) {
    const Grid2D grid(8, 8, 1.0, 1.0);
    EXPECT_THROW(allen_cahn({0.0, 1.0, 1.0, std::nullopt}, grid), std::invalid_argument);
    EXPECT_THROW(allen_cahn({1.0, -1.0, 1.0, std::nullopt}, grid), std::invalid_argument);
    EXPECT_THROW(cahn_hilliard({-1.0, 0.1, 1.0, std::nullopt}, grid), std::invalid_argument);
    EXPECT_THROW(cahn_hilliard({1.0, 0.1, -1.0, std::nullopt}, grid), std::invalid_argument);
    EXPECT_THROW(mbe({1.0, 0.0, 1.0, std::nullopt}, grid), std::invalid_argument);
    EXPECT_THROW(cahn_hilliard({1.0, 0.1, 1.0, -2.0}, grid), std::invalid_argument);
}

TEST(Models, RandomInitialConditionIsReproducible) {
    const Grid2D grid(16, 16, 1.0, 1.0);
    const Field a = initial_condition(RandomInit{0.05, 0.2, 42}, grid);
    const Field b = initial_condition(RandomInit{0.05, 0.2, 42}, grid);
    const Field c = initial_condition(RandomInit{0.05, 0.2, 43}, grid);
    EXPECT_EQ(max_abs_diff(a, b), 0.0);
    EXPECT_GT(max_abs_diff(a, c), 0.0);
    for (double v : a.values()) {
        EXPECT_GE(v, 0.15);
        EXPECT_LT(v, 0.25);
    }
    EXPECT_NEAR(a.mean(), 0.2, 0.01);

    // First draw of mt19937_64 seeded with 42, mapped through the top 53 bits.
    std::mt19937_64 engine(42);
    const double u = static_cast<double>(engine() >> 11) * 0x1.0p-53;
    EXPECT_DOUBLE_EQ(a[0], 0.2 + 0.05 * (2.0 * u - 1.0));
}

TEST(Models, DiskInitialCondition) {
    const Grid2D grid(128, 128, 256.0, 256.0, -128.0, -128.0);
    const Field phi = initial_condition(DiskInit{50.0}, grid);
    double inside = 0.0;
    for (double v : phi.values()) {
        EXPECT_TRUE(v == 1.0 || v == -1.0);
        if (v > 0.0) inside += grid.hx() * grid.hy();
    }
    const double area = pi * 50.0 * 50.0;
    EXPECT_NEAR(inside, area, 2.0 * pi * 50.0 * grid.hx());
    EXPECT_THROW(initial_condition(DiskInit{0.0}, grid), std::invalid_argument);
}

TEST(Models, ProductSineAndTwoModeInitialConditions) {
    const Grid2D grid(16, 16, 2.0 * pi, 2.0 * pi);
    const Field s = initial_condition(ProductSineInit{2.0, 3.0, 0.5}, grid);
    EXPECT_NEAR(s(3, 5), 0.5 * std::sin(2.0 * grid.x(3)) * std::sin(3.0 * grid.y(5)), 1e-15);
    const Field m = initial_condition(MbeTwoModeInit{}, grid);
    const double x = grid.x(2);
    const double y = grid.y(7);
    EXPECT_NEAR(m(2, 7), 0.1 * (std::sin(3.0 * x) * std::sin(2.0 * y) + std::sin(5.0 * x) * std::sin(5.0 * y)), 1e-15);
}

TEST(Models, JacobianModelScale) {
    const Grid2D grid(8, 8, 2.0 * pi, 2.0 * pi);
    const auto ch = cahn_hilliard({}, grid);
    ASSERT_TRUE(ch.jacobian);
    // mean g'' = 3 mean(phi^2) - 1 - gamma0
    EXPECT_NEAR(ch.jacobian->scale(Field(grid, 0.5)), 0.75 - 2.0, 1e-15);
    const auto lin = linear_model(grid, OperatorRecipe::constant(-1.0), OperatorRecipe::constant(1.0));
    EXPECT_FALSE(lin.jacobian);
}
