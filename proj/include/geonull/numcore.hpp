#pragma once

// Small dense linear algebra: matrices of a few dozen entries, rank-revealing
// kernels, and closed-form eigenvalues up to 4x4.

#include <geonull/error.hpp>

#include <algorithm>
#include <cmath>
#include <complex>
#include <initializer_list>
#include <numeric>
#include <span>
#include <string>
#include <vector>

namespace geonull {

using Vec = std::vector<double>;
using Complex = std::complex<double>;

class Matrix {
public:
    Matrix() = default;
    Matrix(int rows, int cols, double fill = 0.0)
        : rows_(rows), cols_(cols), data_(static_cast<std::size_t>(rows * cols), fill) {}
    Matrix(std::initializer_list<std::initializer_list<double>> rows) {
        rows_ = static_cast<int>(rows.size());
        cols_ = rows_ ? static_cast<int>(rows.begin()->size()) : 0;
        data_.reserve(static_cast<std::size_t>(rows_ * cols_));
        for (const auto& r : rows) {
            if (static_cast<int>(r.size()) != cols_) throw Error("ragged matrix initializer");
            data_.insert(data_.end(), r.begin(), r.end());
        }
    }

    static Matrix identity(int n) {
        Matrix m(n, n);
        for (int i = 0; i < n; ++i) m(i, i) = 1.0;
        return m;
    }

    static Matrix from_columns(const std::vector<Vec>& cols) {
        const int c = static_cast<int>(cols.size());
        const int r = c ? static_cast<int>(cols[0].size()) : 0;
        Matrix m(r, c);
        for (int j = 0; j < c; ++j)
            for (int i = 0; i < r; ++i) m(i, j) = cols[static_cast<std::size_t>(j)][static_cast<std::size_t>(i)];
        return m;
    }

    int rows() const noexcept { return rows_; }
    int cols() const noexcept { return cols_; }
    bool square() const noexcept { return rows_ == cols_; }

    double& operator()(int r, int c) { return data_[idx(r, c)]; }
    double operator()(int r, int c) const { return data_[idx(r, c)]; }

    std::span<const double> data() const noexcept { return data_; }

    Vec column(int c) const {
        Vec v(static_cast<std::size_t>(rows_));
        for (int r = 0; r < rows_; ++r) v[static_cast<std::size_t>(r)] = (*this)(r, c);
        return v;
    }

    Matrix transpose() const {
        Matrix t(cols_, rows_);
        for (int r = 0; r < rows_; ++r)
            for (int c = 0; c < cols_; ++c) t(c, r) = (*this)(r, c);
        return t;
    }

    double trace() const {
        double s = 0.0;
        for (int i = 0; i < std::min(rows_, cols_); ++i) s += (*this)(i, i);
        return s;
    }

    double max_abs() const {
        double m = 0.0;
        for (double v : data_) m = std::max(m, std::abs(v));
        return m;
    }

    /// Operator infinity norm (max absolute row sum).
    double norm_inf() const {
        double m = 0.0;
        for (int r = 0; r < rows_; ++r) {
            double s = 0.0;
            for (int c = 0; c < cols_; ++c) s += std::abs((*this)(r, c));
            m = std::max(m, s);
        }
        return m;
    }

    Matrix& operator+=(const Matrix& o) {
        check_same(o);
        for (std::size_t k = 0; k < data_.size(); ++k) data_[k] += o.data_[k];
        return *this;
    }
    Matrix& operator-=(const Matrix& o) {
        check_same(o);
        for (std::size_t k = 0; k < data_.size(); ++k) data_[k] -= o.data_[k];
        return *this;
    }
    Matrix& operator*=(double s) {
        for (double& v : data_) v *= s;
        return *this;
    }

    friend Matrix operator+(Matrix a, const Matrix& b) { return a += b; }
    friend Matrix operator-(Matrix a, const Matrix& b) { return a -= b; }
    friend Matrix operator*(Matrix a, double s) { return a *= s; }
    friend Matrix operator*(double s, Matrix a) { return a *= s; }

    friend Matrix operator*(const Matrix& a, const Matrix& b) {
        if (a.cols_ != b.rows_) throw Error("matrix product dimension mismatch");
        Matrix r(a.rows_, b.cols_);
        for (int i = 0; i < a.rows_; ++i)
            for (int k = 0; k < a.cols_; ++k) {
                const double aik = a(i, k);
                if (aik == 0.0) continue;
                for (int j = 0; j < b.cols_; ++j) r(i, j) += aik * b(k, j);
            }
        return r;
    }

    friend Vec operator*(const Matrix& a, std::span<const double> x) {
        if (a.cols_ != static_cast<int>(x.size())) throw Error("matrix-vector dimension mismatch");
        Vec y(static_cast<std::size_t>(a.rows_), 0.0);
        for (int i = 0; i < a.rows_; ++i)
            for (int j = 0; j < a.cols_; ++j) y[static_cast<std::size_t>(i)] += a(i, j) * x[static_cast<std::size_t>(j)];
        return y;
    }

    friend bool operator==(const Matrix&, const Matrix&) = default;

private:
    std::size_t idx(int r, int c) const { return static_cast<std::size_t>(r * cols_ + c); }
    void check_same(const Matrix& o) const {
        if (rows_ != o.rows_ || cols_ != o.cols_) throw Error("matrix dimension mismatch");
    }

    int rows_ = 0;
    int cols_ = 0;
    std::vector<double> data_;
};

using SmallMatrix = Matrix;

inline Matrix block_diagonal(const Matrix& a, const Matrix& b) {
    Matrix m(a.rows() + b.rows(), a.cols() + b.cols());
    for (int i = 0; i < a.rows(); ++i)
        for (int j = 0; j < a.cols(); ++j) m(i, j) = a(i, j);
    for (int i = 0; i < b.rows(); ++i)
        for (int j = 0; j < b.cols(); ++j) m(a.rows() + i, a.cols() + j) = b(i, j);
    return m;
}

// ---------------------------------------------------------------------------
// Vector helpers
// ---------------------------------------------------------------------------

inline double dot(std::span<const double> a, std::span<const double> b) {
    return std::inner_product(a.begin(), a.end(), b.begin(), 0.0);
}

inline double norm2(std::span<const double> a) { return std::sqrt(dot(a, a)); }

inline double max_abs(std::span<const double> a) {
    double m = 0.0;
    for (double v : a) m = std::max(m, std::abs(v));
    return m;
}

inline Vec axpy(double alpha, std::span<const double> x, Vec y) {
    for (std::size_t i = 0; i < y.size(); ++i) y[i] += alpha * x[i];
    return y;
}

inline Vec scaled(std::span<const double> x, double s) {
    Vec r(x.begin(), x.end());
    for (double& v : r) v *= s;
    return r;
}

/// <a, b>_g for a symmetric bilinear form g.
inline double inner(const Matrix& g, std::span<const double> a, std::span<const double> b) {
    double s = 0.0;
    for (int i = 0; i < g.rows(); ++i)
        for (int j = 0; j < g.cols(); ++j) s += a[static_cast<std::size_t>(i)] * g(i, j) * b[static_cast<std::size_t>(j)];
    return s;
}

// ---------------------------------------------------------------------------
// Inverse
// ---------------------------------------------------------------------------

/// Gauss-Jordan inverse with partial pivoting. Throws SingularMatrixError when
/// a pivot vanishes or the infinity-norm condition estimate exceeds 1e12.
inline Matrix invert(const Matrix& m) {
    if (!m.square()) throw Error("invert: matrix is not square");
    const int n = m.rows();
    Matrix a = m;
    Matrix inv = Matrix::identity(n);
    const double scale = std::max(m.max_abs(), 1e-300);
    double smallest = std::numeric_limits<double>::infinity();

    for (int col = 0; col < n; ++col) {
        int piv = col;
        for (int r = col + 1; r < n; ++r)
            if (std::abs(a(r, col)) > std::abs(a(piv, col))) piv = r;
        const double p = a(piv, col);
        smallest = std::min(smallest, std::abs(p));
        if (std::abs(p) <= 1e-300 || std::abs(p) < 1e-15 * scale)
            throw SingularMatrixError("invert: matrix is singular (pivot " + std::to_string(p) + ")", std::abs(p));
        if (piv != col)
            for (int c = 0; c < n; ++c) {
                std::swap(a(piv, c), a(col, c));
                std::swap(inv(piv, c), inv(col, c));
            }
        const double rp = 1.0 / a(col, col);
        for (int c = 0; c < n; ++c) {
            a(col, c) *= rp;
            inv(col, c) *= rp;
        }
        for (int r = 0; r < n; ++r) {
            if (r == col) continue;
            const double f = a(r, col);
            if (f == 0.0) continue;
            for (int c = 0; c < n; ++c) {
                a(r, c) -= f * a(col, c);
                inv(r, c) -= f * inv(col, c);
            }
        }
    }
    const double cond = m.norm_inf() * inv.norm_inf();
    if (!(cond < 1e12))
        throw SingularMatrixError("invert: condition number " + std::to_string(cond) + " exceeds 1e12", smallest);
    return inv;
}

/// Solves a x = b for square a.
inline Vec solve(const Matrix& a, std::span<const double> b) { return invert(a) * b; }

/// Lower-triangular L with g = L L^T; throws DomainError if g is not positive definite.
inline Matrix cholesky(const Matrix& g) {
    const int n = g.rows();
    Matrix l(n, n);
    for (int j = 0; j < n; ++j) {
        double d = g(j, j);
        for (int k = 0; k < j; ++k) d -= l(j, k) * l(j, k);
        if (!(d > 0.0)) throw DomainError("matrix is not positive definite");
        l(j, j) = std::sqrt(d);
        for (int i = j + 1; i < n; ++i) {
            double s = g(i, j);
            for (int k = 0; k < j; ++k) s -= l(i, k) * l(j, k);
            l(i, j) = s / l(j, j);
        }
    }
    return l;
}

// ---------------------------------------------------------------------------
// Singular values and kernels
// ---------------------------------------------------------------------------

struct SvdResult {
    Vec singular_values;  // descending
    Matrix v;             // right singular vectors as columns, same order
};

/// One-sided Jacobi SVD (right factor only). Rows may exceed columns freely.
inline SvdResult svd_right(const Matrix& m) {
    const int rows = m.rows();
    const int n = m.cols();
    Matrix a = m;
    Matrix v = Matrix::identity(n);

    for (int sweep = 0; sweep < 60; ++sweep) {
        double off = 0.0;
        for (int p = 0; p < n - 1; ++p)
            for (int q = p + 1; q < n; ++q) {
                double alpha = 0.0, beta = 0.0, gamma = 0.0;
                for (int i = 0; i < rows; ++i) {
                    alpha += a(i, p) * a(i, p);
                    beta += a(i, q) * a(i, q);
                    gamma += a(i, p) * a(i, q);
                }
                if (gamma == 0.0) continue;
                const double denom = std::sqrt(alpha * beta);
                if (denom == 0.0) continue;
                off = std::max(off, std::abs(gamma) / denom);
                if (std::abs(gamma) <= 1e-15 * denom) continue;
                const double zeta = (beta - alpha) / (2.0 * gamma);
                const double t = std::copysign(1.0, zeta) / (std::abs(zeta) + std::sqrt(1.0 + zeta * zeta));
                const double c = 1.0 / std::sqrt(1.0 + t * t);
                const double s = c * t;
                for (int i = 0; i < rows; ++i) {
                    const double ap = a(i, p), aq = a(i, q);
                    a(i, p) = c * ap - s * aq;
                    a(i, q) = s * ap + c * aq;
                }
                for (int i = 0; i < n; ++i) {
                    const double vp = v(i, p), vq = v(i, q);
                    v(i, p) = c * vp - s * vq;
                    v(i, q) = s * vp + c * vq;
                }
            }
        if (off <= 1e-15) break;
    }

    std::vector<double> sv(static_cast<std::size_t>(n));
    for (int j = 0; j < n; ++j) {
        double s = 0.0;
        for (int i = 0; i < rows; ++i) s += a(i, j) * a(i, j);
        sv[static_cast<std::size_t>(j)] = std::sqrt(s);
    }
    std::vector<int> order(static_cast<std::size_t>(n));
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(),
                     [&](int x, int y) { return sv[static_cast<std::size_t>(x)] > sv[static_cast<std::size_t>(y)]; });

    SvdResult r{Vec(static_cast<std::size_t>(n)), Matrix(n, n)};
    for (int k = 0; k < n; ++k) {
        const int j = order[static_cast<std::size_t>(k)];
        r.singular_values[static_cast<std::size_t>(k)] = sv[static_cast<std::size_t>(j)];
        for (int i = 0; i < n; ++i) r.v(i, k) = v(i, j);
    }
    return r;
}

/// Orthonormalizes `vectors` in place (modified Gram-Schmidt, two passes)
/// with respect to the form g; an empty g means the Euclidean product.
inline void orthonormalize(std::vector<Vec>& vectors, const Matrix& g = {}) {
    auto ip = [&](const Vec& a, const Vec& b) { return g.rows() ? inner(g, a, b) : dot(a, b); };
    for (std::size_t i = 0; i < vectors.size(); ++i) {
        for (int pass = 0; pass < 2; ++pass)
            for (std::size_t j = 0; j < i; ++j) vectors[i] = axpy(-ip(vectors[i], vectors[j]), vectors[j], vectors[i]);
        const double nrm = std::sqrt(ip(vectors[i], vectors[i]));
        if (!(nrm > 0.0)) throw Error("orthonormalize: linearly dependent vectors");
        for (double& x : vectors[i]) x /= nrm;
    }
}

struct KernelResult {
    std::vector<Vec> basis;  // orthonormal columns spanning the numerical kernel
    int rank = 0;
    Vec singular_values;     // descending
    double tolerance_used = 0.0;
};

/// Numerical kernel of m: right singular vectors whose singular values fall
/// below rel_tol * sigma_max. If sigma_max is below the 1e-12 floor, the whole
/// space is returned.
inline KernelResult kernel(const Matrix& m, double rel_tol) {
    if (!(rel_tol > 0.0 && rel_tol < 1.0)) throw Error("kernel: rel_tol must lie in (0, 1)");
    constexpr double kAbsoluteFloor = 1e-12;
    const int n = m.cols();
    SvdResult s = svd_right(m);

    KernelResult r;
    r.singular_values = s.singular_values;
    const double smax = n ? s.singular_values.front() : 0.0;
    r.tolerance_used = smax < kAbsoluteFloor ? kAbsoluteFloor : rel_tol * smax;
    for (int k = 0; k < n; ++k) {
        if (s.singular_values[static_cast<std::size_t>(k)] < r.tolerance_used || smax < kAbsoluteFloor)
            r.basis.push_back(s.v.column(k));
        else
            ++r.rank;
    }
    if (!r.basis.empty()) orthonormalize(r.basis);
    return r;
}

// ---------------------------------------------------------------------------
// Eigenvalues (n <= 4)
// ---------------------------------------------------------------------------

/// Monic characteristic polynomial coefficients: det(lambda I - m) =
/// lambda^n + c[1] lambda^{n-1} + ... + c[n], with c[0] = 1 (Faddeev-LeVerrier).
inline Vec characteristic_polynomial(const Matrix& m) {
    if (!m.square()) throw Error("characteristic_polynomial: matrix is not square");
    const int n = m.rows();
    Vec c(static_cast<std::size_t>(n + 1), 0.0);
    c[0] = 1.0;
    Matrix mk(n, n);  // M_0 = 0
    for (int k = 1; k <= n; ++k) {
        Matrix next = m * mk;
        for (int i = 0; i < n; ++i) next(i, i) += c[static_cast<std::size_t>(k - 1)];
        mk = next;
        c[static_cast<std::size_t>(k)] = -(m * mk).trace() / k;
    }
    return c;
}

namespace detail {

inline Complex poly_eval(std::span<const double> c, Complex z) {
    Complex r = c[0];
    for (std::size_t k = 1; k < c.size(); ++k) r = r * z + c[k];
    return r;
}

inline Complex poly_deriv(std::span<const double> c, Complex z) {
    const std::size_t n = c.size() - 1;
    Complex r = 0.0;
    for (std::size_t k = 0; k < n; ++k) r = r * z + c[k] * static_cast<double>(n - k);
    return r;
}

inline std::vector<Complex> quadratic_roots(Complex b, Complex c) {
    // z^2 + b z + c
    const Complex disc = std::sqrt(b * b - 4.0 * c);
    Complex q = -0.5 * (b + (std::real(std::conj(b) * disc) >= 0.0 ? disc : -disc));
    if (std::abs(q) == 0.0) return {0.0, 0.0};
    return {q, c / q};
}

inline std::vector<Complex> cubic_roots(double a, double b, double c) {
    // z^3 + a z^2 + b z + c, depressed via z = y - a/3
    const double p = b - a * a / 3.0;
    const double q = 2.0 * a * a * a / 27.0 - a * b / 3.0 + c;
    const double shift = -a / 3.0;
    std::vector<Complex> y;
    const double disc = q * q / 4.0 + p * p * p / 27.0;
    if (p == 0.0 && q == 0.0) {
        y = {0.0, 0.0, 0.0};
    } else if (disc < 0.0) {
        const double r = std::sqrt(-p / 3.0);
        const double phi = std::acos(std::clamp(-q / (2.0 * r * r * r), -1.0, 1.0));
        for (int k = 0; k < 3; ++k) y.emplace_back(2.0 * r * std::cos((phi - 2.0 * std::numbers::pi * k) / 3.0));
    } else {
        const double sd = std::sqrt(disc);
        const double u = std::cbrt(-q / 2.0 + sd);
        const double v = std::cbrt(-q / 2.0 - sd);
        const Complex omega(-0.5, std::sqrt(3.0) / 2.0);
        y = {u + v, u * omega + v * std::conj(omega), u * std::conj(omega) + v * omega};
    }
    for (auto& r : y) r += shift;
    return y;
}

inline std::vector<Complex> quartic_roots(double a, double b, double c, double d) {
    // z^4 + a z^3 + b z^2 + c z + d, depressed via z = y - a/4
    const double p = b - 3.0 * a * a / 8.0;
    const double q = a * a * a / 8.0 - a * b / 2.0 + c;
    const double r = -3.0 * a * a * a * a / 256.0 + a * a * b / 16.0 - a * c / 4.0 + d;
    const double shift = -a / 4.0;
    std::vector<Complex> y;
    if (std::abs(q) <= 1e-14 * (1.0 + std::abs(p) + std::abs(r))) {
        // biquadratic
        for (Complex w : quadratic_roots(p, r)) {
            const Complex s = std::sqrt(w);
            y.push_back(s);
            y.push_back(-s);
        }
    } else {
        // resolvent cubic m^3 + p m^2 + (p^2/4 - r) m - q^2/8 = 0 has a positive real root
        auto res = cubic_roots(p, p * p / 4.0 - r, -q * q / 8.0);
        double m = 0.0;
        for (const Complex& z : res)
            if (std::abs(z.imag()) <= 1e-9 * (1.0 + std::abs(z)) && z.real() > m) m = z.real();
        if (m <= 0.0) m = std::max(std::abs(res[0]), 1e-300);
        const double s = std::sqrt(2.0 * m);
        for (Complex z : quadratic_roots(s, p / 2.0 + m - q / (2.0 * s))) y.push_back(z);
        for (Complex z : quadratic_roots(-s, p / 2.0 + m + q / (2.0 * s))) y.push_back(z);
    }
    for (auto& z : y) z += shift;
    return y;
}

} // namespace detail

/// Eigenvalues with multiplicity of a square matrix of size <= 4, from the
/// characteristic polynomial and closed-form root formulas, each root polished
/// by two Newton steps. Conjugate pairs are returned symmetric.
inline std::vector<Complex> eigenvalues(const Matrix& m) {
    if (!m.square() || m.rows() > 4) throw Error("eigenvalues: square matrices up to 4x4 only");
    const int n = m.rows();
    if (n == 0) return {};
    const Vec c = characteristic_polynomial(m);
    std::vector<Complex> roots;
    switch (n) {
    case 1: roots = {Complex(-c[1])}; break;
    case 2: roots = detail::quadratic_roots(c[1], c[2]); break;
    case 3: roots = detail::cubic_roots(c[1], c[2], c[3]); break;
    case 4: roots = detail::quartic_roots(c[1], c[2], c[3], c[4]); break;
    default: break;
    }
    for (Complex& z : roots) {
        for (int it = 0; it < 2; ++it) {
            const Complex f = detail::poly_eval(c, z);
            const Complex df = detail::poly_deriv(c, z);
            if (std::abs(df) == 0.0) break;
            const Complex cand = z - f / df;
            if (std::abs(detail::poly_eval(c, cand)) < std::abs(f)) z = cand;
        }
    }
    // The polynomial is real: snap near-real roots to the axis and pair the rest.
    const double scale = 1.0 + m.max_abs();
    for (Complex& z : roots)
        if (std::abs(z.imag()) <= 1e-13 * scale) z = Complex(z.real(), 0.0);
    std::vector<bool> used(roots.size(), false);
    for (std::size_t i = 0; i < roots.size(); ++i) {
        if (used[i] || roots[i].imag() <= 0.0) continue;
        std::size_t best = roots.size();
        for (std::size_t j = 0; j < roots.size(); ++j) {
            if (j == i || used[j] || roots[j].imag() >= 0.0) continue;
            if (best == roots.size() || std::abs(roots[j] - std::conj(roots[i])) < std::abs(roots[best] - std::conj(roots[i])))
                best = j;
        }
        if (best == roots.size()) continue;
        const Complex avg = 0.5 * (roots[i] + std::conj(roots[best]));
        roots[i] = avg;
        roots[best] = std::conj(avg);
        used[i] = used[best] = true;
    }
    std::sort(roots.begin(), roots.end(), [](Complex x, Complex y) {
        if (x.real() != y.real()) return x.real() > y.real();
        return x.imag() > y.imag();
    });
    return roots;
}

/// Eigenvalues of a symmetric matrix (cyclic Jacobi), ascending.
inline Vec symmetric_eigenvalues(const Matrix& s) {
    if (!s.square()) throw Error("symmetric_eigenvalues: matrix is not square");
    const int n = s.rows();
    Matrix a = s;
    for (int sweep = 0; sweep < 100; ++sweep) {
        double off = 0.0;
        for (int p = 0; p < n; ++p)
            for (int q = p + 1; q < n; ++q) off += a(p, q) * a(p, q);
        if (off <= 1e-30 * (1.0 + a.max_abs() * a.max_abs())) break;
        for (int p = 0; p < n - 1; ++p)
            for (int q = p + 1; q < n; ++q) {
                if (a(p, q) == 0.0) continue;
                const double theta = (a(q, q) - a(p, p)) / (2.0 * a(p, q));
                const double t = std::copysign(1.0, theta) / (std::abs(theta) + std::sqrt(theta * theta + 1.0));
                const double c = 1.0 / std::sqrt(t * t + 1.0);
                const double sn = t * c;
                for (int k = 0; k < n; ++k) {
                    const double akp = a(k, p), akq = a(k, q);
                    a(k, p) = c * akp - sn * akq;
                    a(k, q) = sn * akp + c * akq;
                }
                for (int k = 0; k < n; ++k) {
                    const double apk = a(p, k), aqk = a(q, k);
                    a(p, k) = c * apk - sn * aqk;
                    a(q, k) = sn * apk + c * aqk;
                }
            }
    }
    Vec ev(static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i) ev[static_cast<std::size_t>(i)] = a(i, i);
    std::sort(ev.begin(), ev.end());
    return ev;
}

inline double determinant(const Matrix& m) {
    if (!m.square()) throw Error("determinant: matrix is not square");
    const int n = m.rows();
    Matrix a = m;
    double det = 1.0;
    for (int col = 0; col < n; ++col) {
        int piv = col;
        for (int r = col + 1; r < n; ++r)
            if (std::abs(a(r, col)) > std::abs(a(piv, col))) piv = r;
        if (a(piv, col) == 0.0) return 0.0;
        if (piv != col) {
            for (int c = 0; c < n; ++c) std::swap(a(piv, c), a(col, c));
            det = -det;
        }
        det *= a(col, col);
        for (int r = col + 1; r < n; ++r) {
            const double f = a(r, col) / a(col, col);
            for (int c = col; c < n; ++c) a(r, c) -= f * a(col, c);
        }
    }
    return det;
}

} // namespace geonull
