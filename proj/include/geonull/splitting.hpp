#pragma once

/**
 * @file splitting.hpp
 * @brief The splitting tensor C_T of a nullity field and its evolution.
 *
 * For T in ker R, C_T(X) = -(nabla_X T) projected onto ker R⊥. In a basis
 * {e_i} of ker R⊥ the matrix entry (i, j) is <C_T(e_j), e_i>. Along a nullity
 * geodesic with a parallel basis the matrix obeys C' = C^2, whose solutions
 * are C(t) = C0 (I - t C0)^{-1}; this header computes C_T numerically from a
 * metric, evolves it, and provides the closed forms it is checked against.
 */

#include <geonull/curvature.hpp>
#include <geonull/flows.hpp>
#include <geonull/metricspace.hpp>
#include <geonull/numcore.hpp>

#include <cmath>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace geonull {

/// A vector field in ker R. The reference vector (possibly empty) fixes the
/// sign: the returned vector has non-negative g-inner product with it.
using NullityVectorField = std::function<Vec(std::span<const double> x, std::span<const double> reference)>;

namespace detail {

/// Canonical sign when no reference is available: the largest coordinate
/// component is positive.
inline void canonical_sign(Vec& v) {
    std::size_t big = 0;
    for (std::size_t i = 1; i < v.size(); ++i)
        if (std::abs(v[i]) > std::abs(v[big]) + 1e-12) big = i;
    if (v[big] < 0.0)
        for (double& c : v) c = -c;
}

inline void align_with(const Matrix& g, Vec& v, std::span<const double> reference) {
    if (reference.empty()) {
        canonical_sign(v);
        return;
    }
    const double ip = inner(g, v, reference);
    const double nv = std::sqrt(inner(g, v, v)), nr = std::sqrt(inner(g, reference, reference));
    if (std::abs(ip) < 0.9 * nv * nr)
        throw NullityError("nullity field: consecutive kernel vectors are nearly orthogonal (alignment failure)");
    if (ip < 0.0)
        for (double& c : v) c = -c;
}

} // namespace detail

/// The g-unit nullity direction near a point where dim ker R = 1.
class NullityField {
public:
    NullityField(MetricField field, std::span<const double> seed, double probe_step = 1e-3,
                 std::optional<double> rel_tol = {})
        : field_(std::move(field)), probe_step_(probe_step), rel_tol_(rel_tol.value_or(default_rel_tol(field_))) {
        seed_vector_ = at(seed, {});
        last_ = seed_vector_;
    }

    /// g-unit kernel vector at x, sign-aligned with `reference`. Throws
    /// NullityError if dim ker R != 1 at x.
    Vec at(std::span<const double> x, std::span<const double> reference) const {
        const CurvatureData d = curvature(field_, x);
        const NullityResult nr = nullity(d, rel_tol_);
        if (nr.nullity != 1)
            throw NullityError("nullity field: dim ker R = " + std::to_string(nr.nullity) + " (expected 1)");
        Vec v = nr.kernel_basis.front();
        detail::align_with(d.g, v, reference);
        return v;
    }

    /// Stateful query aligned with the previously returned vector.
    Vec operator()(std::span<const double> x) {
        last_ = at(x, last_);
        return last_;
    }

    const Vec& seed_vector() const noexcept { return seed_vector_; }
    double probe_step() const noexcept { return probe_step_; }
    double rel_tol() const noexcept { return rel_tol_; }

    NullityVectorField as_field() const {
        auto self = *this;
        return [self](std::span<const double> x, std::span<const double> ref) {
            return self.at(x, ref.empty() ? std::span<const double>(self.seed_vector_) : ref);
        };
    }

private:
    MetricField field_;
    double probe_step_;
    double rel_tol_;
    Vec seed_vector_;
    Vec last_;
};

/// T(x) = the normalized g-orthogonal projection of a fixed coordinate vector
/// onto ker R_x. Works for any nullity >= 1.
inline NullityVectorField kernel_projection_field(const MetricField& field, Vec direction,
                                                  std::optional<double> rel_tol = {}) {
    const double rel = rel_tol.value_or(default_rel_tol(field));
    return [field, direction, rel](std::span<const double> x, std::span<const double> ref) {
        const CurvatureData d = curvature(field, x);
        const NullityResult nr = nullity(d, rel);
        if (nr.nullity == 0) throw NullityError("kernel projection field: ker R is trivial");
        Vec v(direction.size(), 0.0);
        for (const Vec& b : nr.kernel_basis) v = axpy(inner(d.g, direction, b), b, v);
        const double nv = std::sqrt(inner(d.g, v, v));
        if (nv < 1e-8) throw NullityError("kernel projection field: direction is orthogonal to ker R");
        for (double& c : v) c /= nv;
        if (!ref.empty() && inner(d.g, v, ref) < 0.0)
            for (double& c : v) c = -c;
        return v;
    };
}

struct SplittingOptions {
    double h = 1e-3;                 // coordinate step for differentiating T
    bool richardson = true;          // one Richardson level on the central difference
    bool require_unit = true;
    std::optional<double> rel_tol;   // kernel tolerance; defaults by provenance
};

struct SplittingTensor {
    Vec point;
    Vec T;
    std::vector<Vec> basis;  // g-orthonormal basis of ker R⊥
    Matrix matrix;           // (i, j) = <C_T(e_j), e_i>
    /// Entries of the strictly upper triangular 3x3 normal form
    /// [[0, a, c], [0, 0, b], [0, 0, 0]], when the matrix has that shape.
    std::optional<double> a, b, c;
};

namespace detail {

inline Vec directional_derivative(const NullityVectorField& field, std::span<const double> x, std::span<const double> dir,
                                  std::span<const double> reference, double h, bool richardson) {
    auto central = [&](double step) {
        Vec xp(x.begin(), x.end()), xm(x.begin(), x.end());
        for (std::size_t i = 0; i < xp.size(); ++i) {
            xp[i] += step * dir[i];
            xm[i] -= step * dir[i];
        }
        const Vec tp = field(xp, reference), tm = field(xm, reference);
        Vec d(tp.size());
        for (std::size_t i = 0; i < d.size(); ++i) d[i] = (tp[i] - tm[i]) / (2.0 * step);
        return d;
    };
    const Vec coarse = central(h);
    if (!richardson) return coarse;
    const Vec fine = central(0.5 * h);
    Vec r(coarse.size());
    for (std::size_t i = 0; i < r.size(); ++i) r[i] = (4.0 * fine[i] - coarse[i]) / 3.0;
    return r;
}

/// nabla_X T = D_X T + Gamma(X, T).
inline Vec covariant_derivative(const Tensor3& gam, std::span<const double> x_dir, std::span<const double> t,
                                Vec directional) {
    const int n = gam.dim();
    for (int k = 0; k < n; ++k)
        for (int i = 0; i < n; ++i)
            for (int j = 0; j < n; ++j)
                directional[static_cast<std::size_t>(k)] += gam(k, i, j) * x_dir[static_cast<std::size_t>(i)] * t[static_cast<std::size_t>(j)];
    return directional;
}

} // namespace detail

/// C_T at x in the given g-orthonormal basis of ker R⊥ (default: the metric's
/// adapted frame when it has one and the nullity is 1, otherwise the
/// g-orthonormalized coordinate complement of ker R).
inline SplittingTensor splitting_tensor(const MetricField& field, std::span<const double> x, const NullityVectorField& tfield,
                                        const SplittingOptions& opts = {},
                                        std::optional<std::vector<Vec>> basis = std::nullopt,
                                        std::span<const double> reference = {}) {
    const CurvatureData d = curvature(field, x);
    const NullityResult nr = nullity(d, opts.rel_tol.value_or(default_rel_tol(field)));
    if (nr.nullity == 0) throw NullityError("splitting_tensor: ker R is trivial");

    SplittingTensor st;
    st.point.assign(x.begin(), x.end());
    st.T = tfield(x, reference);
    const double tn = std::sqrt(inner(d.g, st.T, st.T));
    if (opts.require_unit && std::abs(tn - 1.0) > 1e-8) throw Error("splitting_tensor: T is not a unit vector");
    if (projection_residual(d.g, st.T, nr.kernel_basis) > 1e-6) throw NullityError("splitting_tensor: T is not in ker R");

    if (basis) {
        st.basis = *basis;
    } else if (nr.nullity == 1 && field.has_adapted_frame()) {
        st.basis = field.adapted_frame(x);
    } else {
        st.basis = kernel_complement(d, nr.kernel_basis);
    }
    const int k = static_cast<int>(st.basis.size());
    if (k != nr.conullity)
        throw Error("splitting_tensor: basis has " + std::to_string(k) + " vectors, conullity is " + std::to_string(nr.conullity));
    for (int i = 0; i < k; ++i) {
        for (int j = 0; j < k; ++j) {
            const double ip = inner(d.g, st.basis[static_cast<std::size_t>(i)], st.basis[static_cast<std::size_t>(j)]);
            if (std::abs(ip - (i == j ? 1.0 : 0.0)) > 1e-6) throw Error("splitting_tensor: basis is not g-orthonormal");
        }
        for (const Vec& kv : nr.kernel_basis)
            if (std::abs(inner(d.g, st.basis[static_cast<std::size_t>(i)], kv)) > 1e-6)
                throw Error("splitting_tensor: basis is not orthogonal to ker R");
    }

    st.matrix = Matrix(k, k);
    for (int j = 0; j < k; ++j) {
        const Vec& ej = st.basis[static_cast<std::size_t>(j)];
        const Vec dir = detail::directional_derivative(tfield, x, ej, st.T, opts.h, opts.richardson);
        const Vec nab = detail::covariant_derivative(d.christoffel, ej, st.T, dir);
        for (int i = 0; i < k; ++i) st.matrix(i, j) = -inner(d.g, nab, st.basis[static_cast<std::size_t>(i)]);
    }

    if (k == 3) {
        const double scale = std::max(st.matrix.max_abs(), 1e-300);
        bool upper = true;
        for (int i = 0; i < 3; ++i)
            for (int j = 0; j <= i; ++j)
                if (std::abs(st.matrix(i, j)) > 1e-5 * std::max(scale, 1.0)) upper = false;
        if (upper) {
            st.a = st.matrix(0, 1);
            st.b = st.matrix(1, 2);
            st.c = st.matrix(0, 2);
        }
    }
    return st;
}

/// div T = d_i T^i + Gamma^i_{ik} T^k, with T differentiated like splitting_tensor does.
inline double divergence(const MetricField& field, std::span<const double> x, const NullityVectorField& tfield,
                         const SplittingOptions& opts = {}, std::span<const double> reference = {}) {
    const int n = field.dim();
    const Tensor3 gam = christoffel(field, x);
    const Vec t = tfield(x, reference);
    double s = 0.0;
    for (int i = 0; i < n; ++i) {
        Vec e(static_cast<std::size_t>(n), 0.0);
        e[static_cast<std::size_t>(i)] = 1.0;
        const Vec dt = detail::directional_derivative(tfield, x, e, t, opts.h, opts.richardson);
        s += dt[static_cast<std::size_t>(i)];
        for (int k = 0; k < n; ++k) s += gam(i, i, k) * t[static_cast<std::size_t>(k)];
    }
    return s;
}

// ---------------------------------------------------------------------------
// Riccati flow C' = C^2
// ---------------------------------------------------------------------------

/// C(t) = C0 (I - t C0)^{-1}. Throws BlowUpError when I - t C0 is singular.
inline Matrix riccati_closed_form(const Matrix& c0, double t) {
    if (!c0.square()) throw Error("riccati_closed_form: matrix is not square");
    const Matrix m = Matrix::identity(c0.rows()) - t * c0;
    try {
        return c0 * invert(m);
    } catch (const SingularMatrixError&) {
        throw BlowUpError("riccati_closed_form: I - t C0 is singular at t = " + detail::format_number(t), t);
    }
}

struct RiccatiSample {
    double t = 0.0;
    Matrix c;
};

/// RK4 on C' = C^2 from C(0) = C0 over [0, t_max].
inline std::vector<RiccatiSample> riccati_ode(const Matrix& c0, double t_max, int steps) {
    if (steps < 1) throw Error("riccati_ode: steps must be positive");
    const double dt = t_max / steps;
    std::vector<RiccatiSample> out{{0.0, c0}};
    Matrix c = c0;
    const double limit = 1e12 * std::max(1.0, c0.max_abs());
    for (int i = 1; i <= steps; ++i) {
        const Matrix k1 = c * c;
        const Matrix c2 = c + 0.5 * dt * k1;
        const Matrix k2 = c2 * c2;
        const Matrix c3 = c + 0.5 * dt * k2;
        const Matrix k3 = c3 * c3;
        const Matrix c4 = c + dt * k3;
        const Matrix k4 = c4 * c4;
        c = c + (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
        const double m = c.max_abs();
        if (!std::isfinite(m) || m > limit)
            throw BlowUpError("riccati_ode: step rejected near blow-up at t = " + detail::format_number(i * dt), i * dt);
        out.push_back({i * dt, c});
    }
    return out;
}

/// Trace and determinant of a 2x2 block evolving under C' = C^2:
///   tr(t)  = (tr0 - 2 t det0) / (1 - t tr0 + t^2 det0)
///   det(t) = det0 / (1 - t tr0 + t^2 det0)
inline std::pair<double, double> trace_det_evolution(double tr0, double det0, double t) {
    const double den = 1.0 - t * tr0 + t * t * det0;
    if (std::abs(den) < 1e-14) throw BlowUpError("trace_det_evolution: singular denominator", t);
    return {(tr0 - 2.0 * t * det0) / den, det0 / den};
}

enum class SplittingClass { zero, nilpotent, complex_pair, invalid };

inline const char* to_string(SplittingClass c) {
    switch (c) {
    case SplittingClass::zero: return "zero";
    case SplittingClass::nilpotent: return "nilpotent";
    case SplittingClass::complex_pair: return "complex_pair";
    case SplittingClass::invalid: return "invalid";
    }
    return "?";
}

struct BlockInvariants {
    double trace = 0.0;
    double det_block = 0.0;  // ((tr C)^2 - tr(C^2)) / 2
    SplittingClass classification = SplittingClass::zero;
    std::vector<Complex> eigenvalues;
    double max_abs_real_eigenvalue = 0.0;  // over eigenvalues with zero imaginary part
    bool invalid = false;                  // a real eigenvalue is significantly non-zero
};

inline double det_block(const Matrix& c) {
    const double tr = c.trace();
    return 0.5 * (tr * tr - (c * c).trace());
}

/// Classifies C (<= 4x4; 2x2 and 3x3 in practice) with s = ||C||_inf:
///  - zero         if s < tol
///  - nilpotent    if every characteristic coefficient satisfies |c_k| <= tol s^k
///  - complex_pair if a conjugate pair has |Im| >= tol s and every real
///                 eigenvalue is below sqrt(tol) s in magnitude
///  - invalid      otherwise (a non-zero real eigenvalue)
inline BlockInvariants classify(const Matrix& c, double tol = 1e-5) {
    if (!c.square() || c.rows() > 4) throw Error("classify: square matrices up to 4x4 only");
    BlockInvariants bi;
    bi.trace = c.trace();
    bi.det_block = det_block(c);
    bi.eigenvalues = eigenvalues(c);
    for (const Complex& z : bi.eigenvalues)
        if (z.imag() == 0.0) bi.max_abs_real_eigenvalue = std::max(bi.max_abs_real_eigenvalue, std::abs(z.real()));

    const double s = c.norm_inf();
    if (s < tol) {
        bi.classification = SplittingClass::zero;
        return bi;
    }
    const Vec coeff = characteristic_polynomial(c);
    bool nilpotent = true;
    for (std::size_t k = 1; k < coeff.size(); ++k)
        if (std::abs(coeff[k]) > tol * std::pow(s, static_cast<double>(k))) nilpotent = false;
    if (nilpotent) {
        bi.classification = SplittingClass::nilpotent;
        return bi;
    }
    bool pair = false;
    double worst_real = 0.0;
    for (const Complex& z : bi.eigenvalues) {
        if (z.imag() >= tol * s) pair = true;
        if (std::abs(z.imag()) < tol * s) worst_real = std::max(worst_real, std::abs(z.real()));
    }
    if (pair && worst_real <= std::sqrt(tol) * s) {
        bi.classification = SplittingClass::complex_pair;
        return bi;
    }
    bi.classification = SplittingClass::invalid;
    bi.invalid = true;
    return bi;
}

// ---------------------------------------------------------------------------
// Evolution along a nullity geodesic
// ---------------------------------------------------------------------------

struct EvolutionSample {
    double t = 0.0;
    Vec position;
    Matrix computed;
    Matrix predicted;
    double deviation = 0.0;  // max entry difference
    double trace = 0.0;
    double divergence = 0.0;
    SplittingClass classification = SplittingClass::zero;
};

struct EvolutionReport {
    Matrix c0;
    std::vector<EvolutionSample> samples;
    double max_deviation = 0.0;
    double max_trace_divergence_residual = 0.0;  // max |tr C + div T|
    bool aborted = false;
    std::string abort_reason;
    int nullity = 0;
};

/// Follows the nullity geodesic from x0 with initial velocity T(x0), transports
/// the initial ker R⊥ basis in parallel, and compares C_T in the transported
/// basis with C0 (I - t C0)^{-1}. A kernel-dimension change aborts the run and
/// keeps the samples gathered so far.
inline EvolutionReport evolve_along_nullity_geodesic(const MetricField& field, std::span<const double> x0, double t_max,
                                                     int steps, const SplittingOptions& opts = {}) {
    const double rel = opts.rel_tol.value_or(default_rel_tol(field));
    const CurvatureData d0 = curvature(field, x0);
    const NullityResult nr0 = nullity(d0, rel);
    if (nr0.nullity == 0) throw NullityError("evolve: ker R is trivial at the start point");

    EvolutionReport rep;
    rep.nullity = nr0.nullity;
    NullityVectorField tfield;
    if (nr0.nullity == 1) {
        tfield = NullityField(field, x0, opts.h, rel).as_field();
    } else {
        Vec seed = nr0.kernel_basis.front();
        detail::canonical_sign(seed);
        tfield = kernel_projection_field(field, seed, rel);
    }

    const Vec t0 = tfield(x0, {});
    const SplittingTensor st0 = splitting_tensor(field, x0, tfield, opts, std::nullopt, t0);
    rep.c0 = st0.matrix;

    const GeodesicPath path = geodesic(field, x0, t0, t_max, steps, false);
    const ParallelFrame frame = parallel_transport(field, path, st0.basis);

    Vec reference = t0;
    for (std::size_t i = 0; i < path.samples.size(); ++i) {
        const PathSample& s = path.samples[i];
        try {
            const NullityResult nr = nullity(field, s.position, rel);
            if (nr.nullity != rep.nullity)
                throw NullityError("kernel dimension changed from " + std::to_string(rep.nullity) + " to " +
                                   std::to_string(nr.nullity));
            const SplittingTensor st = splitting_tensor(field, s.position, tfield, opts, frame.vectors[i], reference);
            reference = st.T;
            EvolutionSample es;
            es.t = s.t;
            es.position = s.position;
            es.computed = st.matrix;
            es.predicted = riccati_closed_form(rep.c0, s.t);
            es.deviation = (es.computed - es.predicted).max_abs();
            es.trace = st.matrix.trace();
            es.divergence = divergence(field, s.position, tfield, opts, reference);
            es.classification = classify(st.matrix).classification;
            rep.max_deviation = std::max(rep.max_deviation, es.deviation);
            rep.max_trace_divergence_residual = std::max(rep.max_trace_divergence_residual, std::abs(es.trace + es.divergence));
            rep.samples.push_back(std::move(es));
        } catch (const Error& e) {
            rep.aborted = true;
            rep.abort_reason = e.what();
            break;
        }
    }
    if (path.truncated && !rep.aborted) {
        rep.aborted = true;
        rep.abort_reason = "geodesic left the domain at t = " + detail::format_number(path.last_valid_t);
    }
    return rep;
}

} // namespace geonull
