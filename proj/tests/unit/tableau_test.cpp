#include "hsav/tableau.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <vector>

namespace {

using namespace hsav;

struct Table {
    std::vector<double> a;
    std::vector<double> b;
    std::vector<double> c;
};

Table two_stage() {
    const double r3 = std::sqrt(3.0);
    return {{0.25, 0.25 - r3 / 6.0, 0.25 + r3 / 6.0, 0.25}, {0.5, 0.5}, {0.5 - r3 / 6.0, 0.5 + r3 / 6.0}};
}

Table three_stage() {
    const double r = std::sqrt(15.0);
    return {{5.0 / 36.0, 2.0 / 9.0 - r / 15.0, 5.0 / 36.0 - r / 30.0,
             5.0 / 36.0 + r / 24.0, 2.0 / 9.0, 5.0 / 36.0 - r / 24.0,
             5.0 / 36.0 + r / 30.0, 2.0 / 9.0 + r / 15.0, 5.0 / 36.0},
            {5.0 / 18.0, 4.0 / 9.0, 5.0 / 18.0},
            {0.5 - r / 10.0, 0.5, 0.5 + r / 10.0}};
}

void expect_matches(const ButcherTableau& t, const Table& ref, double tol) {
    const std::size_t s = ref.b.size();
    ASSERT_EQ(t.stages(), s);
    for (std::size_t i = 0; i < s; ++i) {
        EXPECT_NEAR(t.b(i), ref.b[i], tol) << "b" << i;
        EXPECT_NEAR(t.c(i), ref.c[i], tol) << "c" << i;
        for (std::size_t j = 0; j < s; ++j) EXPECT_NEAR(t.a(i, j), ref.a[i * s + j], tol) << "a" << i << j;
    }
}

}  // namespace

TEST(Tableau, GeneratedMatchesClosedForms) {
    expect_matches(gauss_tableau(2), two_stage(), 1e-14);
    expect_matches(gauss_tableau(3), three_stage(), 1e-14);
    expect_matches(gauss4_closed_form(), two_stage(), 1e-15);
    expect_matches(gauss6_closed_form(), three_stage(), 1e-15);
}

TEST(Tableau, MidpointRule) {
    const auto t = gauss_tableau(1);
    EXPECT_DOUBLE_EQ(t.a(0, 0), 0.5);
    EXPECT_DOUBLE_EQ(t.b(0), 1.0);
    EXPECT_DOUBLE_EQ(t.c(0), 0.5);
}

TEST(Tableau, GaussFamilyIsEnergyStable) {
    for (int s = 1; s <= 5; ++s) {
        const auto report = check_stability(gauss_tableau(s));
        EXPECT_LE(report.max_residual, 1e-15) << "s = " << s;
        EXPECT_GT(report.min_weight, 0.0);
        EXPECT_TRUE(report.passes);
    }
    for (int s = 6; s <= kMaxGaussStages; ++s) EXPECT_TRUE(check_stability(gauss_tableau(s)).passes) << s;
}

TEST(Tableau, OrderConditions) {
    for (int s = 1; s <= kMaxGaussStages; ++s) {
        const auto t = gauss_tableau(s);
        for (int k = 1; k <= 2 * s; ++k) {
            double sum = 0.0;
            for (int i = 0; i < s; ++i) sum += t.b(i) * std::pow(t.c(i), k - 1);
            EXPECT_NEAR(sum, 1.0 / k, 1e-12) << "s = " << s << ", k = " << k;
        }
        // simplifying condition C(s): sum_j a_ij c_j^(k-1) = c_i^k / k
        for (int i = 0; i < s; ++i) {
            for (int k = 1; k <= s; ++k) {
                double sum = 0.0;
                for (int j = 0; j < s; ++j) sum += t.a(i, j) * std::pow(t.c(j), k - 1);
                EXPECT_NEAR(sum, std::pow(t.c(i), k) / k, 1e-12) << "s = " << s << ", i = " << i << ", k = " << k;
            }
        }
    }
}

TEST(Tableau, NodesAndWeightsSymmetric) {
    for (int s = 1; s <= kMaxGaussStages; ++s) {
        const auto t = gauss_tableau(s);
        for (int i = 0; i < s; ++i) {
            EXPECT_NEAR(t.c(i) + t.c(s - 1 - i), 1.0, 1e-15);
            EXPECT_NEAR(t.b(i), t.b(s - 1 - i), 1e-14);
            if (i > 0) EXPECT_LT(t.c(i - 1), t.c(i));
        }
    }
}

TEST(Tableau, StageCountRange) {
    EXPECT_THROW(gauss_tableau(0), std::invalid_argument);
    EXPECT_THROW(gauss_tableau(kMaxGaussStages + 1), std::invalid_argument);
}

TEST(Tableau, UnstableTableausAreReported) {
    const auto rk4 = check_stability(classical_rk4());
    EXPECT_FALSE(rk4.passes);
    EXPECT_GT(rk4.max_residual, 1e-3);

    // Trapezoidal rule: M_11 = 2 b1 a11 - b1^2 = -1/4, M_22 = 1/4.
    const auto trap = check_stability(crank_nicolson_tableau());
    EXPECT_FALSE(trap.passes);
    EXPECT_NEAR(trap.max_residual, 0.25, 1e-15);
}

TEST(Tableau, ConstructionChecksConsistency) {
    EXPECT_THROW(ButcherTableau("bad", {0.5}, {1.0}, {0.4}), std::invalid_argument);
    EXPECT_THROW(ButcherTableau("bad", {0.5}, {0.9}, {0.5}), std::invalid_argument);
    EXPECT_THROW(ButcherTableau("bad", {0.5, 0.0}, {1.0}, {0.5}), std::invalid_argument);
    EXPECT_NO_THROW(ButcherTableau("midpoint", {0.5}, {1.0}, {0.5}));
}

TEST(Tableau, DescribeListsCoefficientsAndVerdict) {
    const std::string text = describe(gauss_tableau(2));
    EXPECT_NE(text.find("gauss2"), std::string::npos);
    EXPECT_NE(text.find("2.5000000000000000e-01"), std::string::npos);
    EXPECT_NE(text.find("PASS"), std::string::npos);
    EXPECT_NE(describe(classical_rk4()).find("FAIL"), std::string::npos);
}
