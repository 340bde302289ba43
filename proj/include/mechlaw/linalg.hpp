#pragma once

// Dense linear algebra used by the trainer: a row-major matrix, Gram
// products, and a symmetric eigensolver (Householder tridiagonalization
// followed by implicit QL with Wilkinson-style shifts).

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <numeric>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "mechlaw/errors.hpp"

namespace mechlaw {

using Vector = std::vector<double>;

/// Row-major dense matrix.
class Matrix {
public:
    Matrix() = default;
    Matrix(std::size_t rows, std::size_t cols, double fill = 0.0)
        : rows_(rows), cols_(cols), data_(rows * cols, fill) {}

    [[nodiscard]] std::size_t rows() const noexcept { return rows_; }
    [[nodiscard]] std::size_t cols() const noexcept { return cols_; }
    [[nodiscard]] bool empty() const noexcept { return data_.empty(); }

    double& operator()(std::size_t i, std::size_t j) noexcept { return data_[i * cols_ + j]; }
    double operator()(std::size_t i, std::size_t j) const noexcept { return data_[i * cols_ + j]; }

    [[nodiscard]] std::span<double> row(std::size_t i) noexcept {
        return {data_.data() + i * cols_, cols_};
    }
    [[nodiscard]] std::span<const double> row(std::size_t i) const noexcept {
        return {data_.data() + i * cols_, cols_};
    }

    [[nodiscard]] Vector col(std::size_t j) const {
        Vector c(rows_);
        for (std::size_t i = 0; i < rows_; ++i) c[i] = (*this)(i, j);
        return c;
    }

    [[nodiscard]] std::span<double> data() noexcept { return data_; }
    [[nodiscard]] std::span<const double> data() const noexcept { return data_; }

    friend bool operator==(const Matrix&, const Matrix&) = default;

private:
    std::size_t rows_ = 0;
    std::size_t cols_ = 0;
    std::vector<double> data_;
};

[[nodiscard]] inline double dot(std::span<const double> a, std::span<const double> b) {
    detail::require(a.size() == b.size(), "dot: length mismatch");
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
    return s;
}

[[nodiscard]] inline double norm2(std::span<const double> a) { return std::sqrt(dot(a, a)); }

[[nodiscard]] inline double frobenius(const Matrix& a) { return norm2(a.data()); }

/// A * B.
[[nodiscard]] inline Matrix multiply(const Matrix& a, const Matrix& b) {
    detail::require(a.cols() == b.rows(), "multiply: inner dimension mismatch");
    Matrix c(a.rows(), b.cols());
    for (std::size_t i = 0; i < a.rows(); ++i) {
        auto ci = c.row(i);
        for (std::size_t k = 0; k < a.cols(); ++k) {
            const double aik = a(i, k);
            if (aik == 0.0) continue;
            auto bk = b.row(k);
            for (std::size_t j = 0; j < b.cols(); ++j) ci[j] += aik * bk[j];
        }
    }
    return c;
}

/// A^T * B without forming A^T.
[[nodiscard]] inline Matrix multiply_transposed(const Matrix& a, const Matrix& b) {
    detail::require(a.rows() == b.rows(), "multiply_transposed: row count mismatch");
    Matrix c(a.cols(), b.cols());
    for (std::size_t n = 0; n < a.rows(); ++n) {
        auto an = a.row(n);
        auto bn = b.row(n);
        for (std::size_t i = 0; i < a.cols(); ++i) {
            const double ai = an[i];
            if (ai == 0.0) continue;
            auto ci = c.row(i);
            for (std::size_t j = 0; j < b.cols(); ++j) ci[j] += ai * bn[j];
        }
    }
    return c;
}

/// A * x.
[[nodiscard]] inline Vector multiply(const Matrix& a, std::span<const double> x) {
    detail::require(a.cols() == x.size(), "multiply: vector length mismatch");
    Vector y(a.rows());
    for (std::size_t i = 0; i < a.rows(); ++i) y[i] = dot(a.row(i), x);
    return y;
}

/// A^T * A, accumulated row by row over the upper triangle and mirrored.
[[nodiscard]] inline Matrix gram(const Matrix& a) {
    const std::size_t p = a.cols();
    Matrix g(p, p);
    for (std::size_t n = 0; n < a.rows(); ++n) {
        auto r = a.row(n);
        for (std::size_t i = 0; i < p; ++i) {
            const double ri = r[i];
            if (ri == 0.0) continue;
            double* gi = &g(i, 0);
            for (std::size_t j = i; j < p; ++j) gi[j] += ri * r[j];
        }
    }
    for (std::size_t i = 0; i < p; ++i)
        for (std::size_t j = 0; j < i; ++j) g(i, j) = g(j, i);
    return g;
}

/// Eigen-decomposition of a symmetric matrix.
/// values are ascending; row k of `vectors` is the unit eigenvector for values[k].
struct SymmetricEigen {
    Vector values;
    Matrix vectors;
};

namespace detail {

// Householder reduction to tridiagonal form. `v` is an n*n column-major
// buffer holding the symmetric input on entry and the accumulated
// orthogonal transform on exit; d/e receive the diagonal/sub-diagonal.
inline void tridiagonalize(std::vector<double>& v, std::size_t n, Vector& d, Vector& e) {
    auto V = [&](std::size_t r, std::size_t c) -> double& { return v[c * n + r]; };

    for (std::size_t j = 0; j < n; ++j) d[j] = V(n - 1, j);

    for (std::size_t i = n - 1; i > 0; --i) {
        double scale = 0.0;
        double h = 0.0;
        for (std::size_t k = 0; k < i; ++k) scale += std::abs(d[k]);
        if (scale == 0.0) {
            e[i] = d[i - 1];
            for (std::size_t j = 0; j < i; ++j) {
                d[j] = V(i - 1, j);
                V(i, j) = 0.0;
                V(j, i) = 0.0;
            }
        } else {
            for (std::size_t k = 0; k < i; ++k) {
                d[k] /= scale;
                h += d[k] * d[k];
            }
            double f = d[i - 1];
            double g = std::sqrt(h);
            if (f > 0) g = -g;
            e[i] = scale * g;
            h -= f * g;
            d[i - 1] = f - g;
            for (std::size_t j = 0; j < i; ++j) e[j] = 0.0;

            for (std::size_t j = 0; j < i; ++j) {
                f = d[j];
                V(j, i) = f;
                g = e[j] + V(j, j) * f;
                double* colj = &V(0, j);
                for (std::size_t k = j + 1; k < i; ++k) {
                    g += colj[k] * d[k];
                    e[k] += colj[k] * f;
                }
                e[j] = g;
            }
            f = 0.0;
            for (std::size_t j = 0; j < i; ++j) {
                e[j] /= h;
                f += e[j] * d[j];
            }
            const double hh = f / (h + h);
            for (std::size_t j = 0; j < i; ++j) e[j] -= hh * d[j];
            for (std::size_t j = 0; j < i; ++j) {
                f = d[j];
                g = e[j];
                double* colj = &V(0, j);
                for (std::size_t k = j; k < i; ++k) colj[k] -= (f * e[k] + g * d[k]);
                d[j] = V(i - 1, j);
                V(i, j) = 0.0;
            }
        }
        d[i] = h;
    }

    // Accumulate transformations.
    for (std::size_t i = 0; i + 1 < n; ++i) {
        V(n - 1, i) = V(i, i);
        V(i, i) = 1.0;
        const double h = d[i + 1];
        if (h != 0.0) {
            const double* next = &V(0, i + 1);
            for (std::size_t k = 0; k <= i; ++k) d[k] = next[k] / h;
            for (std::size_t j = 0; j <= i; ++j) {
                double* colj = &V(0, j);
                double g = 0.0;
                for (std::size_t k = 0; k <= i; ++k) g += next[k] * colj[k];
                for (std::size_t k = 0; k <= i; ++k) colj[k] -= g * d[k];
            }
        }
        for (std::size_t k = 0; k <= i; ++k) V(k, i + 1) = 0.0;
    }
    for (std::size_t j = 0; j < n; ++j) {
        d[j] = V(n - 1, j);
        V(n - 1, j) = 0.0;
    }
    V(n - 1, n - 1) = 1.0;
    e[0] = 0.0;
}

// Implicit QL on the tridiagonal (d, e), rotating the columns of v.
inline void tridiagonal_ql(std::vector<double>& v, std::size_t n, Vector& d, Vector& e) {
    for (std::size_t i = 1; i < n; ++i) e[i - 1] = e[i];
    e[n - 1] = 0.0;

    constexpr double eps = std::numeric_limits<double>::epsilon();
    constexpr int max_iter = 64;
    double f = 0.0;
    double tst1 = 0.0;
    for (std::size_t l = 0; l < n; ++l) {
        tst1 = std::max(tst1, std::abs(d[l]) + std::abs(e[l]));
        std::size_t m = l;
        while (m < n - 1) {
            if (std::abs(e[m]) <= eps * tst1) break;
            ++m;
        }
        if (m > l) {
            int iter = 0;
            do {
                if (++iter > max_iter) throw Error("symmetric_eigen: QL iteration did not converge");
                double g = d[l];
                double p = (d[l + 1] - g) / (2.0 * e[l]);
                double r = std::hypot(p, 1.0);
                if (p < 0) r = -r;
                d[l] = e[l] / (p + r);
                d[l + 1] = e[l] * (p + r);
                const double dl1 = d[l + 1];
                double h = g - d[l];
                for (std::size_t i = l + 2; i < n; ++i) d[i] -= h;
                f += h;

                p = d[m];
                double c = 1.0, c2 = 1.0, c3 = 1.0;
                const double el1 = e[l + 1];
                double s = 0.0, s2 = 0.0;
                for (std::size_t ii = m; ii-- > l;) {
                    c3 = c2;
                    c2 = c;
                    s2 = s;
                    g = c * e[ii];
                    h = c * p;
                    r = std::hypot(p, e[ii]);
                    e[ii + 1] = s * r;
                    s = e[ii] / r;
                    c = p / r;
                    p = c * d[ii] - s * g;
                    d[ii + 1] = h + s * (c * g + s * d[ii]);
                    double* a = &v[ii * n];
                    double* b = &v[(ii + 1) * n];
                    for (std::size_t k = 0; k < n; ++k) {
                        const double hk = b[k];
                        b[k] = s * a[k] + c * hk;
                        a[k] = c * a[k] - s * hk;
                    }
                }
                p = -s * s2 * c3 * el1 * e[l] / dl1;
                e[l] = s * p;
                d[l] = c * p;
            } while (std::abs(e[l]) > eps * tst1);
        }
        d[l] += f;
        e[l] = 0.0;
    }
}

}  // namespace detail

/// Full eigen-decomposition of a symmetric matrix (only the values are
/// read as given; asymmetry is not checked). Cost O(n^3).
[[nodiscard]] inline SymmetricEigen symmetric_eigen(const Matrix& a) {
    detail::require(a.rows() == a.cols(), "symmetric_eigen: matrix must be square");
    const std::size_t n = a.rows();
    SymmetricEigen out;
    if (n == 0) return out;
    for (double x : a.data())
        if (!std::isfinite(x)) throw InvalidInput("symmetric_eigen: non-finite entry");

    // Column-major working copy; for symmetric input it equals the row-major data.
    std::vector<double> v(a.data().begin(), a.data().end());
    Vector d(n), e(n);
    detail::tridiagonalize(v, n, d, e);
    detail::tridiagonal_ql(v, n, d, e);

    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t x, std::size_t y) { return d[x] < d[y]; });

    out.values.resize(n);
    out.vectors = Matrix(n, n);
    for (std::size_t k = 0; k < n; ++k) {
        out.values[k] = d[order[k]];
        // Column order[k] of the column-major buffer is contiguous.
        std::copy_n(v.begin() + static_cast<std::ptrdiff_t>(order[k] * n), n,
                    out.vectors.row(k).begin());
    }
    return out;
}

}  // namespace mechlaw
