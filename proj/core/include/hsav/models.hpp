#pragma once

#include "hsav/sav.hpp"
#include "hsav/spectral.hpp"

#include <cstdint>
#include <optional>
#include <string>
#include <variant>

namespace hsav {

// An unset c0 selects default_c0(): the smallest C0 that keeps the radicand
// positive for every field, plus 1.

/// phi_t = -M (-eps^2 Lap phi + phi^3 - phi)
struct AllenCahnParams {
    double mobility = 1.0;
    double eps = 1.0;
    double gamma0 = 1.0;
    std::optional<double> c0;
};

/// phi_t = lambda Lap (-eps^2 Lap phi + phi^3 - phi)
struct CahnHilliardParams {
    double lambda = 1e-3;
    double eps = 0.01;
    double gamma0 = 1.0;
    std::optional<double> c0;
};

/// phi_t = -M (eps2 Lap^2 phi + div((1 - |grad phi|^2) grad phi)), slope selection
struct MbeParams {
    double mobility = 1.0;
    double eps2 = 0.1;
    double gamma0 = 1.0;
    std::optional<double> c0;
};

/// G = -M, L = -eps^2 Lap + gamma0, g = 1/4 (phi^2 - 1)^2 - gamma0/2 phi^2.
ModelSpec allen_cahn(const AllenCahnParams& p, const Grid2D& grid);
/// G = lambda Lap, L = -eps^2 Lap + gamma0, same g as Allen-Cahn.
ModelSpec cahn_hilliard(const CahnHilliardParams& p, const Grid2D& grid);
/// G = -M, L = eps2 Lap^2 - gamma0 Lap, g = 1/4 (|grad phi|^2 - 1 - gamma0)^2.
ModelSpec mbe(const MbeParams& p, const Grid2D& grid);

/// g = 0: the pure linear flow phi_t = G L phi, used by tests and oracles.
ModelSpec linear_model(const Grid2D& grid, const OperatorRecipe& mobility, const OperatorRecipe& linear,
                       double c0 = 1.0);

/// 1 + |Omega| * max(0, -min g) for the double-well potentials, 1 for MBE.
double default_c0_double_well(double gamma0, const Grid2D& grid);

// Initial conditions ---------------------------------------------------------

/// +1 inside the disk x^2 + y^2 < radius^2, -1 outside.
struct DiskInit {
    double radius = 100.0;
};

/// amp * sin(kx x) sin(ky y)
struct ProductSineInit {
    double kx = 1.0;
    double ky = 1.0;
    double amp = 1.0;
};

/// mean + amp * U(-1, 1), node by node in x-major order.
struct RandomInit {
    double amp = 1e-3;
    double mean = 0.0;
    std::uint64_t seed = 1;
};

/// 0.1 (sin 3x sin 2y + sin 5x sin 5y)
struct MbeTwoModeInit {};

using InitialCondition = std::variant<DiskInit, ProductSineInit, RandomInit, MbeTwoModeInit>;

Field initial_condition(const InitialCondition& ic, const Grid2D& grid);

/// Name of the generator behind RandomInit (recorded in run manifests).
inline constexpr const char* kRandomAlgorithm = "mt19937_64 (top 53 bits -> [0,1))";

}  // namespace hsav
