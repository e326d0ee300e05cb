#pragma once

// Christoffel symbols, the Riemann tensor, sectional and scalar curvature,
// and the nullity distribution ker R at a point.
//
// Conventions:
//   R(X,Y)Z = nabla_X nabla_Y Z - nabla_Y nabla_X Z - nabla_[X,Y] Z
//   riemann_up(l, i, j, k)  = R^l_{ijk},  R(d_i, d_j) d_k = R^l_{ijk} d_l
//   riemann_down(i, j, k, l) = R_{ijkl} = <R(d_i, d_j) d_l, d_k>
// so that R_{ijij} is the (unnormalized) sectional curvature of the (i, j)
// coordinate plane and g^{ik} g^{jl} R_{ijkl} is the usual scalar curvature
// (2 on the unit sphere).

#include <geonull/metricspace.hpp>
#include <geonull/numcore.hpp>
#include <geonull/tensor.hpp>

#include <algorithm>
#include <cmath>
#include <optional>
#include <span>
#include <vector>

namespace geonull {

/// Default relative tolerance for rank decisions on analytic jets.
inline constexpr double kAnalyticRelTol = 1e-7;
/// Default relative tolerance when metric jets come from finite differences.
inline constexpr double kFiniteDifferenceRelTol = 1e-4;

inline double default_rel_tol(const MetricField& f) {
    return f.provenance() == Provenance::analytic ? kAnalyticRelTol : kFiniteDifferenceRelTol;
}

struct ChristoffelData {
    Tensor3 gamma;   // gamma(k, i, j) = Gamma^k_{ij}
    Tensor4 dgamma;  // dgamma(m, k, i, j) = d_m Gamma^k_{ij}
};

struct CurvatureData {
    Vec point;
    int n = 0;
    Matrix g, g_inv;
    Tensor3 christoffel;
    Tensor4 riemann_up;
    Tensor4 riemann_down;
    /// g-orthonormal frame (columns) used for frame components.
    Matrix frame;
    /// R_{abcd} in `frame`.
    Tensor4 riemann_frame;
    double scalar_trace = 0.0;
    double half_trace = 0.0;
};

namespace detail {

inline ChristoffelData christoffel_from_jet(const MetricJet& j, const Matrix& gi) {
    const int n = j.g.rows();
    ChristoffelData c{Tensor3(n), Tensor4(n)};
    // first kind: A(i, j, l) = 1/2 (d_i g_jl + d_j g_il - d_l g_ij), symmetric in i, j
    Tensor3 first(n);
    for (int i = 0; i < n; ++i)
        for (int jj = i; jj < n; ++jj)
            for (int l = 0; l < n; ++l) {
                const double a = 0.5 * (j.dg(i, jj, l) + j.dg(jj, i, l) - j.dg(l, i, jj));
                first(i, jj, l) = a;
                first(jj, i, l) = a;
            }
    for (int k = 0; k < n; ++k)
        for (int i = 0; i < n; ++i)
            for (int jj = i; jj < n; ++jj) {
                double s = 0.0;
                for (int l = 0; l < n; ++l) s += gi(k, l) * first(i, jj, l);
                c.gamma(k, i, jj) = s;
                c.gamma(k, jj, i) = s;
            }
    // d_m Gamma^k_ij = -g^{ka} d_m g_ab Gamma^b_ij + g^{kl} d_m A(i, j, l)
    for (int m = 0; m < n; ++m)
        for (int i = 0; i < n; ++i)
            for (int jj = i; jj < n; ++jj) {
                Vec t(static_cast<std::size_t>(n), 0.0);  // t_a = -d_m g_ab Gamma^b_ij + d_m A(i, j, a)
                for (int a = 0; a < n; ++a) {
                    double s = 0.5 * (j.ddg(m, i, jj, a) + j.ddg(m, jj, i, a) - j.ddg(m, a, i, jj));
                    for (int b = 0; b < n; ++b) s -= j.dg(m, a, b) * c.gamma(b, i, jj);
                    t[static_cast<std::size_t>(a)] = s;
                }
                for (int k = 0; k < n; ++k) {
                    double s = 0.0;
                    for (int a = 0; a < n; ++a) s += gi(k, a) * t[static_cast<std::size_t>(a)];
                    c.dgamma(m, k, i, jj) = s;
                    c.dgamma(m, k, jj, i) = s;
                }
            }
    return c;
}

inline Matrix symmetrized_inverse(const Matrix& g) {
    Matrix gi = invert(g);
    for (int i = 0; i < gi.rows(); ++i)
        for (int j = i + 1; j < gi.cols(); ++j) {
            const double s = 0.5 * (gi(i, j) + gi(j, i));
            gi(i, j) = s;
            gi(j, i) = s;
        }
    return gi;
}

} // namespace detail

/// Gamma^k_{ij} = 1/2 g^{kl} (d_i g_jl + d_j g_il - d_l g_ij), exactly symmetric in i, j.
inline Tensor3 christoffel(const MetricField& field, std::span<const double> x) {
    const MetricJet j = field.jet(x);
    return detail::christoffel_from_jet(j, detail::symmetrized_inverse(j.g)).gamma;
}

/// Everything curvature-related at one point.
inline CurvatureData curvature(const MetricField& field, std::span<const double> x) {
    const MetricJet j = field.jet(x);
    const int n = field.dim();
    CurvatureData d;
    d.point.assign(x.begin(), x.end());
    d.n = n;
    d.g = j.g;
    d.g_inv = detail::symmetrized_inverse(j.g);
    const ChristoffelData c = detail::christoffel_from_jet(j, d.g_inv);
    d.christoffel = c.gamma;

    d.riemann_up = Tensor4(n);
    for (int l = 0; l < n; ++l)
        for (int i = 0; i < n; ++i)
            for (int jj = i + 1; jj < n; ++jj)
                for (int k = 0; k < n; ++k) {
                    double s = c.dgamma(i, l, jj, k) - c.dgamma(jj, l, i, k);
                    for (int m = 0; m < n; ++m)
                        s += c.gamma(l, i, m) * c.gamma(m, jj, k) - c.gamma(l, jj, m) * c.gamma(m, i, k);
                    d.riemann_up(l, i, jj, k) = s;
                    d.riemann_up(l, jj, i, k) = -s;
                }

    d.riemann_down = Tensor4(n);
    for (int i = 0; i < n; ++i)
        for (int jj = 0; jj < n; ++jj)
            for (int k = 0; k < n; ++k)
                for (int l = 0; l < n; ++l) {
                    double s = 0.0;
                    for (int m = 0; m < n; ++m) s += d.g(k, m) * d.riemann_up(m, i, jj, l);
                    d.riemann_down(i, jj, k, l) = s;
                }

    // orthonormal frame E = L^{-T}, g = L L^T
    const Matrix lt = cholesky(d.g).transpose();
    d.frame = invert(lt);
    // R_{abcd} = R_{ijkl} E^i_a E^j_b E^k_c E^l_d, one slot at a time
    auto contract = [n](const Tensor4& t, const Matrix& e, int slot) {
        Tensor4 r(n);
        for (int a = 0; a < n; ++a)
            for (int b = 0; b < n; ++b)
                for (int c2 = 0; c2 < n; ++c2)
                    for (int dd = 0; dd < n; ++dd) {
                        double s = 0.0;
                        for (int m = 0; m < n; ++m) {
                            const int idx[4] = {a, b, c2, dd};
                            int q[4] = {idx[0], idx[1], idx[2], idx[3]};
                            q[slot] = m;
                            s += t(q[0], q[1], q[2], q[3]) * e(m, idx[slot]);
                        }
                        r(a, b, c2, dd) = s;
                    }
        return r;
    };
    Tensor4 f = d.riemann_down;
    for (int slot = 0; slot < 4; ++slot) f = contract(f, d.frame, slot);
    d.riemann_frame = f;

    double s = 0.0;
    for (int a = 0; a < n; ++a)
        for (int b = 0; b < n; ++b) s += f(a, b, a, b);
    d.scalar_trace = s;
    d.half_trace = 0.5 * s;
    return d;
}

/// (R^l_{ijk}, R_{ijkl}).
inline std::pair<Tensor4, Tensor4> riemann(const MetricField& field, std::span<const double> x) {
    CurvatureData d = curvature(field, x);
    return {std::move(d.riemann_up), std::move(d.riemann_down)};
}

/// Largest absolute orthonormal-frame component of R.
inline double riemann_norm(const CurvatureData& d) { return max_abs(d.riemann_frame.data()); }

/// <R(X,Y)Y, X> / (|X|^2 |Y|^2 - <X,Y>^2).
inline double sectional(const CurvatureData& d, std::span<const double> xv, std::span<const double> yv) {
    const int n = d.n;
    const double xx = inner(d.g, xv, xv), yy = inner(d.g, yv, yv), xy = inner(d.g, xv, yv);
    const double area = xx * yy - xy * xy;
    if (!(area > 1e-14 * std::max(1.0, xx * yy))) throw Error("sectional: degenerate plane");
    double num = 0.0;
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j)
            for (int k = 0; k < n; ++k)
                for (int l = 0; l < n; ++l)
                    num += d.riemann_down(i, j, k, l) * xv[static_cast<std::size_t>(i)] * yv[static_cast<std::size_t>(j)] *
                           xv[static_cast<std::size_t>(k)] * yv[static_cast<std::size_t>(l)];
    return num / area;
}

inline double sectional(const MetricField& field, std::span<const double> x, std::span<const double> xv,
                        std::span<const double> yv) {
    return sectional(curvature(field, x), xv, yv);
}

struct ScalarCurvature {
    double trace = 0.0;       // g^{ik} g^{jl} R_{ijkl}
    double half_trace = 0.0;  // trace / 2: the non-flat plane's curvature in conullity 2
};

inline ScalarCurvature scalar_curvature(const MetricField& field, std::span<const double> x) {
    const CurvatureData d = curvature(field, x);
    return {d.scalar_trace, d.half_trace};
}

/// Residual max_{jkl} |R(v, d_j, d_k, d_l)| in frame components, for a vector v
/// given in coordinates.
inline double kernel_residual(const CurvatureData& d, std::span<const double> v) {
    const int n = d.n;
    // frame components of v: w = E^{-1} v = L^T v
    const Matrix lt = invert(d.frame);
    const Vec w = lt * v;
    double r = 0.0;
    for (int b = 0; b < n; ++b)
        for (int c = 0; c < n; ++c)
            for (int e = 0; e < n; ++e) {
                double s = 0.0;
                for (int a = 0; a < n; ++a) s += w[static_cast<std::size_t>(a)] * d.riemann_frame(a, b, c, e);
                r = std::max(r, std::abs(s));
            }
    return r;
}

struct NullityResult {
    std::vector<Vec> kernel_basis;  // coordinate components, g-orthonormal
    int nullity = 0;
    int conullity = 0;
    Vec residuals;
    Vec singular_values;
    double tolerance_used = 0.0;
};

/// ker R_x = {X : R(X,Y)Z = 0 for all Y, Z}: the kernel of the n^3 x n matrix
/// of frame components contracted on the first slot. Returned vectors are
/// g-orthonormal.
inline NullityResult nullity(const CurvatureData& d, double rel_tol = kAnalyticRelTol) {
    const int n = d.n;
    Matrix flat(n * n * n, n);
    for (int a = 0; a < n; ++a)
        for (int b = 0; b < n; ++b)
            for (int c = 0; c < n; ++c)
                for (int e = 0; e < n; ++e) flat((b * n + c) * n + e, a) = d.riemann_frame(a, b, c, e);
    const KernelResult k = kernel(flat, rel_tol);

    NullityResult r;
    r.nullity = static_cast<int>(k.basis.size());
    r.conullity = n - r.nullity;
    r.singular_values = k.singular_values;
    r.tolerance_used = k.tolerance_used;
    for (const Vec& w : k.basis) {
        Vec v = d.frame * w;
        r.residuals.push_back(kernel_residual(d, v));
        r.kernel_basis.push_back(std::move(v));
    }
    return r;
}

inline NullityResult nullity(const MetricField& field, std::span<const double> x, double rel_tol) {
    return nullity(curvature(field, x), rel_tol);
}
inline NullityResult nullity(const MetricField& field, std::span<const double> x) {
    return nullity(curvature(field, x), default_rel_tol(field));
}

/// g-orthonormal basis of the g-orthogonal complement of span(kernel).
inline std::vector<Vec> kernel_complement(const CurvatureData& d, const std::vector<Vec>& kernel_basis) {
    const int n = d.n;
    std::vector<Vec> out;
    std::vector<Vec> accepted = kernel_basis;
    const int want = n - static_cast<int>(kernel_basis.size());
    // greedily take projected coordinate vectors, largest remaining norm first
    std::vector<bool> taken(static_cast<std::size_t>(n), false);
    while (static_cast<int>(out.size()) < want) {
        int best = -1;
        double best_norm = -1.0;
        Vec best_vec;
        for (int i = 0; i < n; ++i) {
            if (taken[static_cast<std::size_t>(i)]) continue;
            Vec v(static_cast<std::size_t>(n), 0.0);
            v[static_cast<std::size_t>(i)] = 1.0;
            for (int pass = 0; pass < 2; ++pass)
                for (const Vec& a : accepted) v = axpy(-inner(d.g, v, a), a, v);
            const double nv = std::sqrt(inner(d.g, v, v)) / std::sqrt(d.g(i, i));
            if (nv > best_norm + 1e-12) {
                best_norm = nv;
                best = i;
                best_vec = v;
            }
        }
        taken[static_cast<std::size_t>(best)] = true;
        const double nv = std::sqrt(inner(d.g, best_vec, best_vec));
        for (double& c : best_vec) c /= nv;
        accepted.push_back(best_vec);
        out.push_back(best_vec);
    }
    return out;
}

/// Curvatures of the planes spanned by pairs of a g-orthonormal basis of ker R⊥.
inline Vec complement_plane_curvatures(const CurvatureData& d, const NullityResult& nr) {
    Vec out;
    const auto comp = kernel_complement(d, nr.kernel_basis);
    for (std::size_t a = 0; a < comp.size(); ++a)
        for (std::size_t b = a + 1; b < comp.size(); ++b) out.push_back(sectional(d, comp[a], comp[b]));
    return out;
}

/// Max over (i, j, k, l, m) of |nabla_i R_{jklm} + nabla_j R_{kilm} + nabla_k R_{ijlm}|,
/// with d R from central differences of riemann_down at step h.
inline double bianchi2_residual(const MetricField& field, std::span<const double> x, double h) {
    const int n = field.dim();
    const CurvatureData c0 = curvature(field, x);
    // cov(i, j, k, l, m) = nabla_i R_{jklm}, stored per i
    std::vector<Tensor4> cov(static_cast<std::size_t>(n), Tensor4(n));
    for (int i = 0; i < n; ++i) {
        Vec xp(x.begin(), x.end()), xm(x.begin(), x.end());
        xp[static_cast<std::size_t>(i)] += h;
        xm[static_cast<std::size_t>(i)] -= h;
        if (!field.in_domain(xp) || !field.in_domain(xm)) throw DomainError("bianchi2_residual: stencil leaves the domain");
        const Tensor4 rp = curvature(field, xp).riemann_down;
        const Tensor4 rm = curvature(field, xm).riemann_down;
        Tensor4& t = cov[static_cast<std::size_t>(i)];
        const Tensor4& r = c0.riemann_down;
        const Tensor3& gam = c0.christoffel;
        for (int j = 0; j < n; ++j)
            for (int k = 0; k < n; ++k)
                for (int l = 0; l < n; ++l)
                    for (int m = 0; m < n; ++m) {
                        double s = (rp(j, k, l, m) - rm(j, k, l, m)) / (2.0 * h);
                        for (int q = 0; q < n; ++q)
                            s -= gam(q, i, j) * r(q, k, l, m) + gam(q, i, k) * r(j, q, l, m) +
                                 gam(q, i, l) * r(j, k, q, m) + gam(q, i, m) * r(j, k, l, q);
                        t(j, k, l, m) = s;
                    }
    }
    double worst = 0.0;
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j)
            for (int k = 0; k < n; ++k)
                for (int l = 0; l < n; ++l)
                    for (int m = 0; m < n; ++m) {
                        const double s = cov[static_cast<std::size_t>(i)](j, k, l, m) +
                                         cov[static_cast<std::size_t>(j)](k, i, l, m) +
                                         cov[static_cast<std::size_t>(k)](i, j, l, m);
                        worst = std::max(worst, std::abs(s));
                    }
    return worst;
}

} // namespace geonull
