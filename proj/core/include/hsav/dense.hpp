#pragma once

#include <cmath>
#include <cstddef>
#include <span>
#include <stdexcept>
#include <utility>

namespace hsav::dense {

/// Solves the n x n system a * x = rhs in place by Gaussian elimination with
/// partial pivoting. `a` is row-major and is overwritten; `rhs` becomes x.
template <typename T>
void solve_in_place(std::span<T> a, std::span<T> rhs, std::size_t n) {
    using std::abs;
    for (std::size_t col = 0; col < n; ++col) {
        std::size_t pivot = col;
        for (std::size_t r = col + 1; r < n; ++r) {
            if (abs(a[r * n + col]) > abs(a[pivot * n + col])) pivot = r;
        }
        if (a[pivot * n + col] == T(0)) throw std::domain_error("dense::solve_in_place: singular matrix");
        if (pivot != col) {
            for (std::size_t c = 0; c < n; ++c) std::swap(a[col * n + c], a[pivot * n + c]);
            std::swap(rhs[col], rhs[pivot]);
        }
        for (std::size_t r = col + 1; r < n; ++r) {
            const T factor = a[r * n + col] / a[col * n + col];
            if (factor == T(0)) continue;
            for (std::size_t c = col; c < n; ++c) a[r * n + c] -= factor * a[col * n + c];
            rhs[r] -= factor * rhs[col];
        }
    }
    for (std::size_t i = n; i-- > 0;) {
        T sum = rhs[i];
        for (std::size_t c = i + 1; c < n; ++c) sum -= a[i * n + c] * rhs[c];
        rhs[i] = sum / a[i * n + i];
    }
}

/// Inverse of a row-major n x n matrix (column by column).
template <typename T>
void invert(std::span<const T> a, std::span<T> out, std::size_t n, std::span<T> scratch) {
    // scratch needs n*n + n entries
    for (std::size_t col = 0; col < n; ++col) {
        auto m = scratch.subspan(0, n * n);
        auto e = scratch.subspan(n * n, n);
        for (std::size_t i = 0; i < n * n; ++i) m[i] = a[i];
        for (std::size_t i = 0; i < n; ++i) e[i] = i == col ? T(1) : T(0);
        solve_in_place<T>(m, e, n);
        for (std::size_t i = 0; i < n; ++i) out[i * n + col] = e[i];
    }
}

}  // namespace hsav::dense
