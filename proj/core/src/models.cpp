#include "hsav/models.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <stdexcept>
#include <string>

namespace hsav {

namespace {

void require_positive(double v, const char* what) {
    if (!(v > 0.0) || !std::isfinite(v)) throw std::invalid_argument(std::string(what) + " must be positive");
}

void require_nonnegative(double v, const char* what) {
    if (!(v >= 0.0) || !std::isfinite(v)) throw std::invalid_argument(std::string(what) + " must be >= 0");
}

// Stabilised double well g = 1/4 (phi^2 - 1)^2 - gamma0/2 phi^2.
ModelSpec::FieldMap double_well_potential(double gamma0) {
    return [gamma0](const Field& phi) {
        Field g(phi.grid());
        for (std::size_t i = 0; i < phi.size(); ++i) {
            const double p2 = phi[i] * phi[i];
            g[i] = 0.25 * (p2 - 1.0) * (p2 - 1.0) - 0.5 * gamma0 * p2;
        }
        return g;
    };
}

ModelSpec::FieldMap double_well_variation(double gamma0) {
    return [gamma0](const Field& phi) {
        Field v(phi.grid());
        for (std::size_t i = 0; i < phi.size(); ++i) {
            const double p = phi[i];
            v[i] = p * p * p - p - gamma0 * p;
        }
        return v;
    };
}

// Mean of g''(phi) = 3 phi^2 - 1 - gamma0 over the grid.
std::optional<ModelSpec::JacobianModel> double_well_jacobian(const Grid2D& grid, double gamma0) {
    return ModelSpec::JacobianModel{
        make_operator_symbol(grid, SymbolKind::linear, OperatorRecipe::constant(1.0)), [gamma0](const Field& phi) {
            double sum = 0.0;
            for (double v : phi.values()) sum += 3.0 * v * v;
            return sum / static_cast<double>(phi.size()) - 1.0 - gamma0;
        }};
}

}  // namespace

double default_c0_double_well(double gamma0, const Grid2D& grid) {
    // min over phi of 1/4 (phi^2-1)^2 - gamma0/2 phi^2 is -(gamma0/2 + gamma0^2/4), at phi^2 = 1 + gamma0.
    const double min_density = -(0.5 * gamma0 + 0.25 * gamma0 * gamma0);
    return 1.0 + grid.area() * std::max(0.0, -min_density);
}

ModelSpec allen_cahn(const AllenCahnParams& p, const Grid2D& grid) {
    require_positive(p.mobility, "Allen-Cahn mobility M");
    require_positive(p.eps, "Allen-Cahn eps");
    require_nonnegative(p.gamma0, "Allen-Cahn gamma0");
    const double c0 = p.c0.value_or(default_c0_double_well(p.gamma0, grid));
    ModelSpec model("allen_cahn",
                    make_operator_symbol(grid, SymbolKind::mobility, OperatorRecipe::constant(-p.mobility)),
                    make_operator_symbol(grid, SymbolKind::linear, OperatorRecipe::polynomial({p.gamma0, -p.eps * p.eps})),
                    double_well_potential(p.gamma0), double_well_variation(p.gamma0), c0, p.gamma0);
    model.jacobian = double_well_jacobian(grid, p.gamma0);
    return model;
}

ModelSpec cahn_hilliard(const CahnHilliardParams& p, const Grid2D& grid) {
    require_positive(p.lambda, "Cahn-Hilliard lambda");
    require_positive(p.eps, "Cahn-Hilliard eps");
    require_nonnegative(p.gamma0, "Cahn-Hilliard gamma0");
    const double c0 = p.c0.value_or(default_c0_double_well(p.gamma0, grid));
    ModelSpec model("cahn_hilliard",
                    make_operator_symbol(grid, SymbolKind::mobility, OperatorRecipe::polynomial({0.0, p.lambda})),
                    make_operator_symbol(grid, SymbolKind::linear, OperatorRecipe::polynomial({p.gamma0, -p.eps * p.eps})),
                    double_well_potential(p.gamma0), double_well_variation(p.gamma0), c0, p.gamma0);
    model.jacobian = double_well_jacobian(grid, p.gamma0);
    return model;
}

ModelSpec mbe(const MbeParams& p, const Grid2D& grid) {
    require_positive(p.mobility, "MBE mobility M");
    require_positive(p.eps2, "MBE eps2");
    require_nonnegative(p.gamma0, "MBE gamma0");
    const double gamma0 = p.gamma0;

    // g = 1/4 (|grad phi|^2 - 1 - gamma0)^2 >= 0
    auto potential = [gamma0](const Field& phi) {
        const Field px = apply_derivative(phi, 1, 0);
        const Field py = apply_derivative(phi, 0, 1);
        Field g(phi.grid());
        for (std::size_t i = 0; i < phi.size(); ++i) {
            const double a = px[i] * px[i] + py[i] * py[i] - 1.0 - gamma0;
            g[i] = 0.25 * a * a;
        }
        return g;
    };
    // Discrete variation of (g, 1)_h: div((1 + gamma0 - |grad phi|^2) grad phi),
    // with the same spectral first derivatives for gradient and divergence.
    auto variation = [gamma0](const Field& phi) {
        const auto& grid = phi.grid();
        const auto mx = make_multiplier(grid, Axis::x, 1);
        const auto my = make_multiplier(grid, Axis::y, 1);
        const Spectrum ph = forward(phi);
        Spectrum sx(grid);
        Spectrum sy(grid);
        for (std::size_t j = 0; j < grid.nx(); ++j) {
            for (std::size_t k = 0; k < grid.spectral_ny(); ++k) {
                sx(j, k) = mx.diag[j] * ph(j, k);
                sy(j, k) = my.diag[k] * ph(j, k);
            }
        }
        Field fx = inverse(std::move(sx));
        Field fy = inverse(std::move(sy));
        for (std::size_t i = 0; i < phi.size(); ++i) {
            const double coeff = 1.0 + gamma0 - fx[i] * fx[i] - fy[i] * fy[i];
            fx[i] *= coeff;
            fy[i] *= coeff;
        }
        const Spectrum hx = forward(fx);
        const Spectrum hy = forward(fy);
        Spectrum div(grid);
        for (std::size_t j = 0; j < grid.nx(); ++j) {
            for (std::size_t k = 0; k < grid.spectral_ny(); ++k) {
                div(j, k) = mx.diag[j] * hx(j, k) + my.diag[k] * hy(j, k);
            }
        }
        return inverse(std::move(div));
    };

    ModelSpec model("mbe", make_operator_symbol(grid, SymbolKind::mobility, OperatorRecipe::constant(-p.mobility)),
                    make_operator_symbol(grid, SymbolKind::linear, OperatorRecipe::polynomial({0.0, -gamma0, p.eps2})),
                    potential, variation, p.c0.value_or(1.0), gamma0);
    // Isotropic average of the linearised divergence term: -(1 + gamma0 - 2 <|grad phi|^2>) times -Lap.
    model.jacobian = ModelSpec::JacobianModel{
        make_operator_symbol(grid, SymbolKind::linear, OperatorRecipe::polynomial({0.0, -1.0})), [gamma0](const Field& phi) {
            const Field px = apply_derivative(phi, 1, 0);
            const Field py = apply_derivative(phi, 0, 1);
            double sum = 0.0;
            for (std::size_t i = 0; i < phi.size(); ++i) sum += px[i] * px[i] + py[i] * py[i];
            return -(1.0 + gamma0 - 2.0 * sum / static_cast<double>(phi.size()));
        }};
    return model;
}

ModelSpec linear_model(const Grid2D& grid, const OperatorRecipe& mobility, const OperatorRecipe& linear, double c0) {
    auto zero = [](const Field& phi) { return Field(phi.grid(), 0.0); };
    return ModelSpec("linear", make_operator_symbol(grid, SymbolKind::mobility, mobility),
                     make_operator_symbol(grid, SymbolKind::linear, linear), zero, zero, c0, 0.0);
}

namespace {

struct InitialConditionSampler {
    const Grid2D& grid;

    Field operator()(const DiskInit& d) const {
        if (!(d.radius > 0.0)) throw std::invalid_argument("disk initial condition: radius must be > 0");
        const double r2 = d.radius * d.radius;
        return Field::sample(grid, [r2](double x, double y) { return x * x + y * y < r2 ? 1.0 : -1.0; });
    }

    Field operator()(const ProductSineInit& p) const {
        return Field::sample(grid, [p](double x, double y) { return p.amp * std::sin(p.kx * x) * std::sin(p.ky * y); });
    }

    Field operator()(const RandomInit& r) const {
        std::mt19937_64 engine(r.seed);
        Field f(grid);
        for (double& v : f.values()) {
            // Portable mapping: top 53 bits to [0, 1), then to [-1, 1).
            const double u = static_cast<double>(engine() >> 11) * 0x1.0p-53;
            v = r.mean + r.amp * (2.0 * u - 1.0);
        }
        return f;
    }

    Field operator()(const MbeTwoModeInit&) const {
        return Field::sample(grid, [](double x, double y) {
            return 0.1 * (std::sin(3.0 * x) * std::sin(2.0 * y) + std::sin(5.0 * x) * std::sin(5.0 * y));
        });
    }
};

}  // namespace

Field initial_condition(const InitialCondition& ic, const Grid2D& grid) {
    return std::visit(InitialConditionSampler{grid}, ic);
}

}  // namespace hsav
