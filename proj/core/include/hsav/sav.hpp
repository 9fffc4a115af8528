#pragma once

#include "hsav/spectral.hpp"

#include <functional>
#include <optional>
#include <string>

namespace hsav {

/// One gradient flow  phi_t = G (L phi + delta(g,1)/delta phi)  in SAV form.
///
/// `potential` returns the pointwise density of g (no C0 shift; C0 is added
/// under the square root separately). `variation` returns the discrete
/// functional derivative of (g(phi), 1)_h: g'(phi) for pointwise potentials,
/// a divergence form for gradient-dependent ones.
struct ModelSpec {
    using FieldMap = std::function<Field(const Field&)>;

    ModelSpec(std::string name, OperatorSymbol mobility, OperatorSymbol linear, FieldMap potential,
              FieldMap variation, double c0, double gamma0);

    std::string name;
    OperatorSymbol mobility;  // G_h, non-positive
    OperatorSymbol linear;    // L_h, self-adjoint
    FieldMap potential;
    FieldMap variation;
    double c0;
    double gamma0;

    /// Optional constant-coefficient model of the Jacobian of `variation`:
    /// variation'(phi) v ~ jacobian_scale(phi) * jacobian_shape v. Only the
    /// stage solver uses it, to precondition its iteration; results do not
    /// depend on it beyond the solver tolerance.
    struct JacobianModel {
        OperatorSymbol shape;
        std::function<double(const Field&)> scale;
    };
    std::optional<JacobianModel> jacobian;

    const Grid2D& grid() const noexcept { return linear.grid(); }
};

struct SavState {
    Field phi;
    double q = 0.0;
    double t = 0.0;
};

/// Modified energy E_h = 1/2 (L phi, phi)_h + q^2 - C0 and the raw
/// F_h = 1/2 (L phi, phi)_h + (g(phi), 1)_h.
struct EnergyPair {
    double modified = 0.0;
    double raw = 0.0;
};

/// Radicands below kRadicandGuard * |Omega| are rejected.
inline constexpr double kRadicandGuard = 1e-12;

/// (g(phi), 1)_h + C0, throwing RadicandError when it is not safely positive.
double radicand(const Field& phi, const ModelSpec& model);

/// q0 = sqrt((g(phi0), 1)_h + C0), t = 0.
SavState init_consistent(Field phi0, const ModelSpec& model);

/// Stage derivatives for the SAV system at (Phi, Q):
///   k = G_h (L_h Phi + Q g'(Phi) / r),  l = (g'(Phi) / (2 r), k)_h,
/// with r = sqrt((g(Phi), 1)_h + C0) computed once and shared.
struct StageRhs {
    Field k;
    double l = 0.0;
    double denominator = 0.0;  // r
    Field normalized_variation;  // g'(Phi) / r
};

StageRhs stage_rhs(const Field& phi, double q, const ModelSpec& model);

/// 1/2 (L_h phi, phi)_h
double quadratic_energy(const Field& phi, const ModelSpec& model);

EnergyPair energy(const SavState& state, const ModelSpec& model);

/// |q - sqrt((g(phi),1)_h + C0)| / |q|.
double q_consistency_gap(const SavState& state, const ModelSpec& model);

}  // namespace hsav
