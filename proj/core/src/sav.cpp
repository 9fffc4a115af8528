#include "hsav/sav.hpp"

#include "hsav/error.hpp"

#include <cmath>
#include <sstream>
#include <stdexcept>
#include <utility>

namespace hsav {

ModelSpec::ModelSpec(std::string name_, OperatorSymbol mobility_, OperatorSymbol linear_,
                     FieldMap potential_, FieldMap variation_, double c0_, double gamma0_)
    : name(std::move(name_)),
      mobility(std::move(mobility_)),
      linear(std::move(linear_)),
      potential(std::move(potential_)),
      variation(std::move(variation_)),
      c0(c0_),
      gamma0(gamma0_) {
    if (mobility.kind() != SymbolKind::mobility) {
        throw std::invalid_argument("ModelSpec '" + name + "': G symbol is not a mobility symbol");
    }
    if (linear.kind() != SymbolKind::linear) {
        throw std::invalid_argument("ModelSpec '" + name + "': L symbol is not a linear symbol");
    }
    if (!mobility.grid().same_mesh(linear.grid())) {
        throw std::invalid_argument("ModelSpec '" + name + "': G and L live on different grids");
    }
    if (!potential || !variation) {
        throw std::invalid_argument("ModelSpec '" + name + "': missing potential or variation");
    }
    if (!(c0 >= 0.0) || !std::isfinite(c0)) {
        throw std::invalid_argument("ModelSpec '" + name + "': C0 must be finite and >= 0");
    }
    if (!(gamma0 >= 0.0)) throw std::invalid_argument("ModelSpec '" + name + "': gamma0 must be >= 0");
}

double radicand(const Field& phi, const ModelSpec& model) {
    const Field g = model.potential(phi);
    const double value = inner(g, Field(phi.grid(), 1.0)) + model.c0;
    const double guard = kRadicandGuard * phi.grid().area();
    if (!(value >= guard)) {
        std::ostringstream msg;
        msg << "SAV radicand (g(phi),1)_h + C0 = " << value << " is below the guard " << guard
            << " for model '" << model.name << "' (C0 = " << model.c0
            << "); increase C0 so that (g(phi),1)_h + C0 stays positive";
        throw RadicandError(msg.str(), value);
    }
    return value;
}

SavState init_consistent(Field phi0, const ModelSpec& model) {
    if (!phi0.all_finite()) throw std::invalid_argument("init_consistent: non-finite initial field");
    const double r = radicand(phi0, model);
    return SavState{std::move(phi0), std::sqrt(r), 0.0};
}

StageRhs stage_rhs(const Field& phi, double q, const ModelSpec& model) {
    const double r = std::sqrt(radicand(phi, model));
    Field w = model.variation(phi);
    w *= 1.0 / r;

    Field mu = apply_symbol(model.linear, phi);
    mu.axpy(q, w);
    Field k = apply_symbol(model.mobility, mu);
    const double l = 0.5 * inner(w, k);
    return StageRhs{std::move(k), l, r, std::move(w)};
}

double quadratic_energy(const Field& phi, const ModelSpec& model) {
    return 0.5 * inner(apply_symbol(model.linear, phi), phi);
}

EnergyPair energy(const SavState& state, const ModelSpec& model) {
    const double quad = quadratic_energy(state.phi, model);
    const double g_int = inner(model.potential(state.phi), Field(state.phi.grid(), 1.0));
    return EnergyPair{quad + state.q * state.q - model.c0, quad + g_int};
}

double q_consistency_gap(const SavState& state, const ModelSpec& model) {
    const double r = std::sqrt(radicand(state.phi, model));
    return std::abs(state.q - r) / std::abs(state.q);
}

}  // namespace hsav
