#include "hsav/error.hpp"
#include "hsav/models.hpp"
#include "hsav/sav.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <numbers>

namespace {

using namespace hsav;

constexpr double pi = std::numbers::pi;

}  // namespace

TEST(Sav, ConsistentInitialisation) {
    const Grid2D grid(16, 16, 2.0 * pi, 2.0 * pi);
    const auto model = cahn_hilliard({0.1, 0.3, 1.0, std::nullopt}, grid);
    const SavState st = init_consistent(initial_condition(RandomInit{0.5, 0.0, 1}, grid), model);
    EXPECT_DOUBLE_EQ(st.t, 0.0);
    EXPECT_NEAR(st.q * st.q, radicand(st.phi, model), 1e-13 * st.q * st.q);
    const auto e = energy(st, model);
    EXPECT_NEAR(e.modified, e.raw, 1e-12 * (1.0 + std::abs(e.raw)));
    EXPECT_LT(q_consistency_gap(st, model), 1e-15);
}

TEST(Sav, EnergyOfProductSine) {
    // phi = sin x sin y on [0, 2pi)^2; both energy parts are exact on the grid.
    const Grid2D grid(16, 16, 2.0 * pi, 2.0 * pi);
    const double eps = 0.7;
    const double gamma0 = 1.5;
    const auto model = allen_cahn({1.0, eps, gamma0, 3.0}, grid);
    const Field phi = Field::sample(grid, [](double x, double y) { return std::sin(x) * std::sin(y); });

    const double quad = 0.5 * (gamma0 * pi * pi + eps * eps * 2.0 * pi * pi);
    EXPECT_NEAR(quadratic_energy(phi, model), quad, 1e-12 * quad);

    double g_sum = 0.0;
    for (std::size_t j = 0; j < 16; ++j) {
        for (std::size_t k = 0; k < 16; ++k) {
            const double p = std::sin(grid.x(j)) * std::sin(grid.y(k));
            g_sum += 0.25 * (p * p - 1.0) * (p * p - 1.0) - 0.5 * gamma0 * p * p;
        }
    }
    g_sum *= grid.hx() * grid.hy();
    const SavState st{phi, 2.0, 0.0};
    const auto e = energy(st, model);
    EXPECT_NEAR(e.raw, quad + g_sum, 1e-12 * std::abs(quad + g_sum));
    EXPECT_NEAR(e.modified, quad + 4.0 - 3.0, 1e-12 * quad);
    EXPECT_NEAR(radicand(phi, model), g_sum + 3.0, 1e-12);
}

TEST(Sav, RadicandGuard) {
    const Grid2D grid(8, 8, 4.0, 4.0);
    const auto model = allen_cahn({1.0, 1.0, 1.0, 0.0}, grid);
    // g(1) = -1/2, so (g, 1)_h = -8 < 0 with C0 = 0
    try {
        radicand(Field(grid, 1.0), model);
        FAIL() << "expected RadicandError";
    } catch (const RadicandError& e) {
        EXPECT_NEAR(e.radicand(), -8.0, 1e-12);
        EXPECT_NE(std::string(e.what()).find("C0"), std::string::npos);
    }
    EXPECT_THROW(init_consistent(Field(grid, 1.0), model), RadicandError);
}

TEST(Sav, RejectsNonFiniteInitialField) {
    const Grid2D grid(8, 8, 1.0, 1.0);
    Field phi(grid);
    phi[3] = std::nan("");
    EXPECT_THROW(init_consistent(phi, allen_cahn({}, grid)), std::invalid_argument);
}

TEST(Sav, StageRhsDefinition) {
    const Grid2D grid(16, 16, 2.0 * pi, 2.0 * pi);
    const auto model = cahn_hilliard({0.2, 0.4, 1.0, std::nullopt}, grid);
    const Field phi = initial_condition(RandomInit{0.8, 0.1, 7}, grid);
    const double q = 5.0;
    const StageRhs rhs = stage_rhs(phi, q, model);

    const double r = std::sqrt(radicand(phi, model));
    EXPECT_DOUBLE_EQ(rhs.denominator, r);
    Field w = model.variation(phi);
    w *= 1.0 / r;
    EXPECT_LT(max_abs_diff(rhs.normalized_variation, w), 1e-15 * (1.0 + w.max_abs()));

    Field mu = apply_symbol(model.linear, phi);
    mu.axpy(q, w);
    const Field k = apply_symbol(model.mobility, mu);
    EXPECT_LT(max_abs_diff(rhs.k, k), 1e-13 * (1.0 + k.max_abs()));
    EXPECT_NEAR(rhs.l, 0.5 * inner(w, k), 1e-13 * (1.0 + std::abs(rhs.l)));
}

TEST(Sav, QGapDetectsDrift) {
    const Grid2D grid(8, 8, 2.0 * pi, 2.0 * pi);
    const auto model = allen_cahn({}, grid);
    SavState st = init_consistent(initial_condition(ProductSineInit{1.0, 1.0, 0.5}, grid), model);
    const double q0 = st.q;
    st.q *= 1.001;
    EXPECT_NEAR(q_consistency_gap(st, model), 0.001 / 1.001, 1e-12);
    EXPECT_GT(q0, 0.0);
}

TEST(Sav, ModelSpecValidation) {
    const Grid2D grid(8, 8, 1.0, 1.0);
    const auto g = make_operator_symbol(grid, SymbolKind::mobility, OperatorRecipe::constant(-1.0));
    const auto l = make_operator_symbol(grid, SymbolKind::linear, OperatorRecipe::constant(1.0));
    auto id = [](const Field& f) { return f; };
    EXPECT_NO_THROW(ModelSpec("ok", g, l, id, id, 1.0, 0.0));
    EXPECT_THROW(ModelSpec("swapped", l, g, id, id, 1.0, 0.0), std::invalid_argument);
    EXPECT_THROW(ModelSpec("c0", g, l, id, id, -1.0, 0.0), std::invalid_argument);
    EXPECT_THROW(ModelSpec("empty", g, l, nullptr, id, 1.0, 0.0), std::invalid_argument);
    const auto other = make_operator_symbol(Grid2D(16, 8, 1.0, 1.0), SymbolKind::linear, OperatorRecipe::constant(1.0));
    EXPECT_THROW(ModelSpec("grids", g, other, id, id, 1.0, 0.0), std::invalid_argument);
}
