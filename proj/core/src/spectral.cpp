#include "hsav/spectral.hpp"

#include "hsav/error.hpp"

#include <fftw3.h>

#include <algorithm>
#include <cassert>
#include <cmath>
#include <map>
#include <mutex>
#include <numbers>
#include <stdexcept>
#include <string>
#include <utility>

namespace hsav {

namespace {

void require_same_mesh(const Grid2D& a, const Grid2D& b, const char* where) {
    if (!a.same_mesh(b)) {
        throw GridMismatch(std::string(where) + ": grids differ (" + std::to_string(a.nx()) + "x" +
                           std::to_string(a.ny()) + " vs " + std::to_string(b.nx()) + "x" +
                           std::to_string(b.ny()) + ")");
    }
}

// FFTW planning is not thread safe, execution with the new-array interface is.
// Plans are created once per mesh size and shared; FFTW_UNALIGNED lets them run
// on std::vector storage.
struct TransformPlans {
    fftw_plan r2c = nullptr;
    fftw_plan c2r = nullptr;
};

class PlanCache {
public:
    ~PlanCache() {
        for (auto& [key, plans] : plans_) {
            fftw_destroy_plan(plans.r2c);
            fftw_destroy_plan(plans.c2r);
        }
    }

    TransformPlans get(std::size_t nx, std::size_t ny) {
        std::lock_guard lock(mutex_);
        auto it = plans_.find({nx, ny});
        if (it != plans_.end()) return it->second;

        const int n0 = static_cast<int>(nx);
        const int n1 = static_cast<int>(ny);
        std::vector<double> real(nx * ny);
        std::vector<std::complex<double>> spec(nx * (ny / 2 + 1));
        auto* cplx = reinterpret_cast<fftw_complex*>(spec.data());
        const unsigned flags = FFTW_ESTIMATE | FFTW_UNALIGNED;
        TransformPlans plans;
        plans.r2c = fftw_plan_dft_r2c_2d(n0, n1, real.data(), cplx, flags);
        plans.c2r = fftw_plan_dft_c2r_2d(n0, n1, cplx, real.data(), flags);
        if (plans.r2c == nullptr || plans.c2r == nullptr) {
            throw std::runtime_error("fftw: failed to create plans");
        }
        plans_.emplace(std::make_pair(nx, ny), plans);
        return plans;
    }

private:
    std::mutex mutex_;
    std::map<std::pair<std::size_t, std::size_t>, TransformPlans> plans_;
};

PlanCache& plan_cache() {
    static PlanCache cache;
    return cache;
}

// Signed wavenumber index of DFT position j on an axis of n points.
long wavenumber(std::size_t j, std::size_t n) {
    const auto jj = static_cast<long>(j);
    const auto nn = static_cast<long>(n);
    return jj <= nn / 2 ? jj : jj - nn;
}

#ifndef NDEBUG
// Self-conjugate modes must be real for the c2r transform to be exact.
void check_hermitian(const Spectrum& s) {
    const auto& g = s.grid();
    const std::size_t cols[] = {0, g.ny() / 2};
    double scale = 1.0;
    for (const auto& c : s.coefficients()) scale = std::max(scale, std::abs(c));
    for (std::size_t k : cols) {
        for (std::size_t j = 0; j < g.nx(); ++j) {
            const std::size_t jm = (g.nx() - j) % g.nx();
            const auto diff = std::abs(s(j, k) - std::conj(s(jm, k)));
            assert(diff <= 1e-12 * scale && "spectrum lost Hermitian symmetry");
            (void)diff;
        }
    }
}
#endif

}  // namespace

Grid2D::Grid2D(std::size_t nx, std::size_t ny, double lx, double ly, double x0, double y0)
    : nx_(nx), ny_(ny), lx_(lx), ly_(ly), x0_(x0), y0_(y0) {
    if (nx < 4 || ny < 4 || nx % 2 != 0 || ny % 2 != 0) {
        throw std::invalid_argument("Grid2D: Nx and Ny must be even and >= 4 (got " +
                                    std::to_string(nx) + "x" + std::to_string(ny) + ")");
    }
    if (!(lx > 0.0) || !(ly > 0.0) || !std::isfinite(lx) || !std::isfinite(ly)) {
        throw std::invalid_argument("Grid2D: domain lengths must be positive and finite");
    }
}

double Grid2D::mu_x() const noexcept { return 2.0 * std::numbers::pi / lx_; }
double Grid2D::mu_y() const noexcept { return 2.0 * std::numbers::pi / ly_; }

bool Grid2D::same_mesh(const Grid2D& other) const noexcept {
    return nx_ == other.nx_ && ny_ == other.ny_ && lx_ == other.lx_ && ly_ == other.ly_;
}

Field::Field(const Grid2D& grid, double value) : grid_(grid), values_(grid.size(), value) {}

Field::Field(const Grid2D& grid, std::vector<double> values)
    : grid_(grid), values_(std::move(values)) {
    if (values_.size() != grid_.size()) {
        throw std::invalid_argument("Field: " + std::to_string(values_.size()) +
                                    " values for a grid of " + std::to_string(grid_.size()));
    }
}

Field Field::sample(const Grid2D& grid, const std::function<double(double, double)>& f) {
    Field out(grid);
    for (std::size_t j = 0; j < grid.nx(); ++j) {
        const double x = grid.x(j);
        for (std::size_t k = 0; k < grid.ny(); ++k) out(j, k) = f(x, grid.y(k));
    }
    return out;
}

bool Field::all_finite() const noexcept {
    return std::all_of(values_.begin(), values_.end(), [](double v) { return std::isfinite(v); });
}

double Field::max_abs() const noexcept {
    double m = 0.0;
    for (double v : values_) m = std::max(m, std::abs(v));
    return m;
}

double Field::mean() const noexcept {
    double sum = 0.0;
    for (double v : values_) sum += v;
    return sum / static_cast<double>(values_.size());
}

Field& Field::operator+=(const Field& other) { return axpy(1.0, other); }
Field& Field::operator-=(const Field& other) { return axpy(-1.0, other); }

Field& Field::operator*=(double s) noexcept {
    for (double& v : values_) v *= s;
    return *this;
}

Field& Field::axpy(double alpha, const Field& x) {
    require_same_mesh(grid_, x.grid_, "Field::axpy");
    for (std::size_t i = 0; i < values_.size(); ++i) values_[i] += alpha * x.values_[i];
    return *this;
}

Field operator+(Field a, const Field& b) { return a += b; }
Field operator-(Field a, const Field& b) { return a -= b; }
Field operator*(double s, Field a) { return a *= s; }

double max_abs_diff(const Field& a, const Field& b) {
    require_same_mesh(a.grid(), b.grid(), "max_abs_diff");
    double m = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, std::abs(a[i] - b[i]));
    return m;
}

Spectrum::Spectrum(const Grid2D& grid) : grid_(grid), coeffs_(grid.spectral_size()) {}

Spectrum forward(const Field& f) {
    const auto& g = f.grid();
    const auto plans = plan_cache().get(g.nx(), g.ny());
    Spectrum out(g);
    // r2c does not modify its input.
    auto* in = const_cast<double*>(f.values().data());
    fftw_execute_dft_r2c(plans.r2c, in, reinterpret_cast<fftw_complex*>(out.coefficients().data()));
    return out;
}

Field inverse(Spectrum s) {
    const auto& g = s.grid();
#ifndef NDEBUG
    check_hermitian(s);
#endif
    const auto plans = plan_cache().get(g.nx(), g.ny());
    Field out(g);
    fftw_execute_dft_c2r(plans.c2r, reinterpret_cast<fftw_complex*>(s.coefficients().data()),
                         out.values().data());
    out *= 1.0 / static_cast<double>(g.size());
    return out;
}

SpectralMultiplier make_multiplier(const Grid2D& grid, Axis axis, int order) {
    if (order < 0) throw std::invalid_argument("make_multiplier: derivative order must be >= 0");
    const std::size_t n = axis == Axis::x ? grid.nx() : grid.ny();
    const double mu = axis == Axis::x ? grid.mu_x() : grid.mu_y();

    SpectralMultiplier m;
    m.order = order;
    m.diag.resize(n);
    for (std::size_t j = 0; j < n; ++j) {
        long w = wavenumber(j, n);
        if (2 * j == n) w = (order % 2 == 1) ? 0 : static_cast<long>(n / 2);
        const std::complex<double> base(0.0, mu * static_cast<double>(w));
        std::complex<double> value(1.0, 0.0);
        for (int p = 0; p < order; ++p) value *= base;
        // Remove the rounding residue so even orders are exactly real and odd
        // orders exactly imaginary.
        if (order % 2 == 0) value.imag(0.0);
        else value.real(0.0);
        m.diag[j] = value;
    }
    return m;
}

Field apply_derivative(const Field& f, int sx, int sy) {
    if (sx < 0 || sy < 0) throw std::invalid_argument("apply_derivative: negative order");
    if (!f.all_finite()) throw std::invalid_argument("apply_derivative: field has non-finite values");
    const auto& g = f.grid();
    const auto mx = make_multiplier(g, Axis::x, sx);
    const auto my = make_multiplier(g, Axis::y, sy);
    auto s = forward(f);
    for (std::size_t j = 0; j < g.nx(); ++j) {
        for (std::size_t k = 0; k < g.spectral_ny(); ++k) s(j, k) *= mx.diag[j] * my.diag[k];
    }
    return inverse(std::move(s));
}

double inner(const Field& f, const Field& g) {
    require_same_mesh(f.grid(), g.grid(), "inner");
    double sum = 0.0;
    for (std::size_t i = 0; i < f.size(); ++i) sum += f[i] * g[i];
    return f.grid().hx() * f.grid().hy() * sum;
}

double norm(const Field& f) { return std::sqrt(inner(f, f)); }

double inner(const Spectrum& f, const Spectrum& g) {
    require_same_mesh(f.grid(), g.grid(), "inner");
    const auto& grid = f.grid();
    const std::size_t cols = grid.spectral_ny();
    double sum = 0.0;
    for (std::size_t j = 0; j < grid.nx(); ++j) {
        for (std::size_t k = 0; k < cols; ++k) {
            const auto a = f(j, k);
            const auto b = g(j, k);
            sum += column_weight(grid, k) * (a.real() * b.real() + a.imag() * b.imag());
        }
    }
    return grid.hx() * grid.hy() * sum / static_cast<double>(grid.size());
}

OperatorSymbol::OperatorSymbol(const Grid2D& grid, SymbolKind kind, std::vector<double> half_values)
    : grid_(grid), kind_(kind), values_(std::move(half_values)) {
    if (values_.size() != grid_.spectral_size()) {
        throw std::invalid_argument("OperatorSymbol: wrong number of half-spectrum values");
    }
    for (std::size_t i = 0; i < values_.size(); ++i) {
        if (!std::isfinite(values_[i])) throw std::invalid_argument("OperatorSymbol: non-finite entry");
        if (kind_ == SymbolKind::mobility && values_[i] > 0.0) {
            throw std::invalid_argument(
                "OperatorSymbol: mobility symbol has a positive entry " + std::to_string(values_[i]) +
                " at mode index " + std::to_string(i) + "; G_h must be negative semi-definite");
        }
    }
}

double OperatorSymbol::at(std::size_t j, std::size_t k) const {
    if (j >= grid_.nx() || k >= grid_.ny()) throw std::out_of_range("OperatorSymbol::at");
    // Symbols are even in each wavenumber, so the missing half mirrors k -> Ny - k.
    const std::size_t kk = k < grid_.spectral_ny() ? k : grid_.ny() - k;
    return (*this)(j, kk);
}

OperatorSymbol make_operator_symbol(const Grid2D& grid, SymbolKind kind, const OperatorRecipe& recipe) {
    if (recipe.laplacian_coefficients.empty()) {
        throw std::invalid_argument("make_operator_symbol: empty recipe");
    }
    const auto lx = make_multiplier(grid, Axis::x, 2);
    const auto ly = make_multiplier(grid, Axis::y, 2);
    std::vector<double> values(grid.spectral_size());
    for (std::size_t j = 0; j < grid.nx(); ++j) {
        for (std::size_t k = 0; k < grid.spectral_ny(); ++k) {
            const double lap = lx.diag[j].real() + ly.diag[k].real();
            // Horner in Lap.
            double v = 0.0;
            for (auto it = recipe.laplacian_coefficients.rbegin();
                 it != recipe.laplacian_coefficients.rend(); ++it) {
                v = v * lap + *it;
            }
            values[j * grid.spectral_ny() + k] = v;
        }
    }
    return OperatorSymbol(grid, kind, std::move(values));
}

void apply_symbol_in_place(const OperatorSymbol& symbol, Spectrum& s) {
    require_same_mesh(symbol.grid(), s.grid(), "apply_symbol");
    for (std::size_t i = 0; i < s.size(); ++i) s[i] *= symbol[i];
}

Field apply_symbol(const OperatorSymbol& symbol, const Field& f) {
    require_same_mesh(symbol.grid(), f.grid(), "apply_symbol");
    auto s = forward(f);
    apply_symbol_in_place(symbol, s);
    return inverse(std::move(s));
}

}  // namespace hsav
