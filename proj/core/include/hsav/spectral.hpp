#pragma once

#include <complex>
#include <cstddef>
#include <functional>
#include <initializer_list>
#include <span>
#include <vector>

namespace hsav {

/// Uniform periodic tensor grid on [x0, x0+Lx) x [y0, y0+Ly).
///
/// Node (j, k) sits at (x0 + j*hx, y0 + k*hy). Both point counts must be even
/// and at least 4. The origin only matters when sampling functions onto the
/// grid; every spectral operator is translation invariant.
class Grid2D {
public:
    Grid2D(std::size_t nx, std::size_t ny, double lx, double ly, double x0 = 0.0,
           double y0 = 0.0);

    std::size_t nx() const noexcept { return nx_; }
    std::size_t ny() const noexcept { return ny_; }
    double lx() const noexcept { return lx_; }
    double ly() const noexcept { return ly_; }
    double x0() const noexcept { return x0_; }
    double y0() const noexcept { return y0_; }

    double hx() const noexcept { return lx_ / static_cast<double>(nx_); }
    double hy() const noexcept { return ly_ / static_cast<double>(ny_); }
    double mu_x() const noexcept;
    double mu_y() const noexcept;
    double area() const noexcept { return lx_ * ly_; }

    double x(std::size_t j) const noexcept { return x0_ + static_cast<double>(j) * hx(); }
    double y(std::size_t k) const noexcept { return y0_ + static_cast<double>(k) * hy(); }

    std::size_t size() const noexcept { return nx_ * ny_; }
    /// Number of stored y-frequencies in the real-to-complex half spectrum.
    std::size_t spectral_ny() const noexcept { return ny_ / 2 + 1; }
    std::size_t spectral_size() const noexcept { return nx_ * spectral_ny(); }

    /// Same mesh (counts and lengths). Origins are not compared.
    bool same_mesh(const Grid2D& other) const noexcept;
    bool operator==(const Grid2D& other) const noexcept = default;

private:
    std::size_t nx_;
    std::size_t ny_;
    double lx_;
    double ly_;
    double x0_;
    double y0_;
};

/// Real grid function, stored x-major: value (j, k) at index j*Ny + k.
class Field {
public:
    explicit Field(const Grid2D& grid, double value = 0.0);
    Field(const Grid2D& grid, std::vector<double> values);

    static Field sample(const Grid2D& grid, const std::function<double(double, double)>& f);

    const Grid2D& grid() const noexcept { return grid_; }
    std::size_t size() const noexcept { return values_.size(); }

    double& operator()(std::size_t j, std::size_t k) noexcept { return values_[j * grid_.ny() + k]; }
    double operator()(std::size_t j, std::size_t k) const noexcept {
        return values_[j * grid_.ny() + k];
    }
    double& operator[](std::size_t i) noexcept { return values_[i]; }
    double operator[](std::size_t i) const noexcept { return values_[i]; }

    std::span<double> values() noexcept { return values_; }
    std::span<const double> values() const noexcept { return values_; }

    bool all_finite() const noexcept;
    double max_abs() const noexcept;
    /// Grid mean (1/(Nx*Ny)) sum of values.
    double mean() const noexcept;

    Field& operator+=(const Field& other);
    Field& operator-=(const Field& other);
    Field& operator*=(double s) noexcept;
    /// this += alpha * x
    Field& axpy(double alpha, const Field& x);

private:
    Grid2D grid_;
    std::vector<double> values_;
};

Field operator+(Field a, const Field& b);
Field operator-(Field a, const Field& b);
Field operator*(double s, Field a);

/// Max-norm distance between two fields on the same grid.
double max_abs_diff(const Field& a, const Field& b);

/// Half spectrum of a real field (FFTW r2c layout): Nx rows by Ny/2+1 columns.
///
/// Rows follow the standard DFT ordering 0, 1, ..., Nx/2, -Nx/2+1, ..., -1.
class Spectrum {
public:
    explicit Spectrum(const Grid2D& grid);

    const Grid2D& grid() const noexcept { return grid_; }
    std::size_t size() const noexcept { return coeffs_.size(); }

    std::complex<double>& operator()(std::size_t j, std::size_t k) noexcept {
        return coeffs_[j * grid_.spectral_ny() + k];
    }
    const std::complex<double>& operator()(std::size_t j, std::size_t k) const noexcept {
        return coeffs_[j * grid_.spectral_ny() + k];
    }
    std::complex<double>& operator[](std::size_t i) noexcept { return coeffs_[i]; }
    const std::complex<double>& operator[](std::size_t i) const noexcept { return coeffs_[i]; }

    std::span<std::complex<double>> coefficients() noexcept { return coeffs_; }
    std::span<const std::complex<double>> coefficients() const noexcept { return coeffs_; }

private:
    Grid2D grid_;
    std::vector<std::complex<double>> coeffs_;
};

/// Unnormalised forward DFT.
Spectrum forward(const Field& f);
/// Inverse DFT including the 1/(Nx*Ny) factor.
Field inverse(Spectrum s);

/// Weight of half-spectrum column k when summing over the full spectrum.
inline double column_weight(const Grid2D& grid, std::size_t k) noexcept {
    return (k == 0 || 2 * k == grid.ny()) ? 1.0 : 2.0;
}

enum class Axis { x, y };

/// Diagonal of the eigenvalue matrix of the order-s pseudospectral
/// differentiation matrix along one axis, full DFT ordering.
///
/// Odd orders zero the Nyquist entry so D_s stays real and antisymmetric; even
/// orders keep it, (i mu N/2)^s.
struct SpectralMultiplier {
    int order = 0;
    std::vector<std::complex<double>> diag;
};

SpectralMultiplier make_multiplier(const Grid2D& grid, Axis axis, int order);

/// d^sx/dx^sx d^sy/dy^sy of the trigonometric interpolant, evaluated at the nodes.
Field apply_derivative(const Field& f, int sx, int sy);

/// (f, g)_h = hx*hy*sum f*g.
double inner(const Field& f, const Field& g);
double norm(const Field& f);
/// Discrete inner product evaluated from spectra through Parseval's identity.
double inner(const Spectrum& f, const Spectrum& g);

enum class SymbolKind { linear, mobility };

/// Polynomial in the discrete Laplacian: sum_p coefficients[p] * Lap^p.
struct OperatorRecipe {
    std::vector<double> laplacian_coefficients;

    static OperatorRecipe constant(double c) { return {{c}}; }
    static OperatorRecipe polynomial(std::initializer_list<double> coefficients) {
        return {std::vector<double>(coefficients)};
    }
};

/// Fourier-diagonal real operator on a grid, stored over the half spectrum.
///
/// Mobility symbols are non-positive everywhere; this is checked when the
/// symbol is built.
class OperatorSymbol {
public:
    OperatorSymbol(const Grid2D& grid, SymbolKind kind, std::vector<double> half_values);

    const Grid2D& grid() const noexcept { return grid_; }
    SymbolKind kind() const noexcept { return kind_; }

    /// Symbol value at half-spectrum position (j, k), k <= Ny/2.
    double operator()(std::size_t j, std::size_t k) const noexcept {
        return values_[j * grid_.spectral_ny() + k];
    }
    double operator[](std::size_t i) const noexcept { return values_[i]; }
    /// Symbol value for any full-spectrum index (j, k), k < Ny.
    double at(std::size_t j, std::size_t k) const;

    std::span<const double> values() const noexcept { return values_; }

private:
    Grid2D grid_;
    SymbolKind kind_;
    std::vector<double> values_;
};

OperatorSymbol make_operator_symbol(const Grid2D& grid, SymbolKind kind, const OperatorRecipe& recipe);

Field apply_symbol(const OperatorSymbol& symbol, const Field& f);
void apply_symbol_in_place(const OperatorSymbol& symbol, Spectrum& s);

}  // namespace hsav
