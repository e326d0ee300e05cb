#pragma once

// Geodesics, parallel transport, and probes of nullity geodesics, flat
// totally geodesic slices, and metric degeneracy along coordinate rays.
//
// All integrators are fixed-step classical RK4.

#include <geonull/curvature.hpp>
#include <geonull/metricspace.hpp>
#include <geonull/numcore.hpp>

#include <cmath>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace geonull {

struct PathSample {
    double t = 0.0;
    Vec position;
    Vec velocity;
};

struct GeodesicPath {
    std::vector<PathSample> samples;
    double step = 0.0;
    int steps = 0;
    std::string method = "rk4";
    /// |endpoint(steps) - endpoint(2 * steps)|; NaN when not computed or truncated.
    double convergence_delta = std::numeric_limits<double>::quiet_NaN();
    bool truncated = false;
    /// Last parameter value inside the domain (the endpoint when truncated).
    double last_valid_t = 0.0;

    const PathSample& back() const { return samples.back(); }
};

struct ParallelFrame {
    std::vector<Vec> base;
    std::vector<std::vector<Vec>> vectors;  // vectors[sample][k]
};

namespace detail {

/// Geodesic equation with transported vectors: state = (x, v, V_1, ..., V_m).
inline Vec geodesic_rhs(const MetricField& field, std::span<const double> s, int n, int m) {
    const std::span<const double> x = s.subspan(0, static_cast<std::size_t>(n));
    const Tensor3 gam = christoffel(field, x);
    Vec out(s.size(), 0.0);
    auto at = [&](int block, int k) { return s[static_cast<std::size_t>(block * n + k)]; };
    for (int k = 0; k < n; ++k) {
        out[static_cast<std::size_t>(k)] = at(1, k);
        double acc = 0.0;
        for (int i = 0; i < n; ++i)
            for (int j = 0; j < n; ++j) acc += gam(k, i, j) * at(1, i) * at(1, j);
        out[static_cast<std::size_t>(n + k)] = -acc;
        for (int b = 0; b < m; ++b) {
            double t = 0.0;
            for (int i = 0; i < n; ++i)
                for (int j = 0; j < n; ++j) t += gam(k, i, j) * at(1, i) * at(2 + b, j);
            out[static_cast<std::size_t>((2 + b) * n + k)] = -t;
        }
    }
    return out;
}

/// One RK4 step; nullopt if any stage leaves the domain.
template <class Rhs>
std::optional<Vec> rk4_step(const Rhs& rhs, const Vec& s, double dt, const std::function<bool(const Vec&)>& ok) {
    try {
        const Vec k1 = rhs(s);
        const Vec s2 = axpy(0.5 * dt, k1, s);
        if (!ok(s2)) return std::nullopt;
        const Vec k2 = rhs(s2);
        const Vec s3 = axpy(0.5 * dt, k2, s);
        if (!ok(s3)) return std::nullopt;
        const Vec k3 = rhs(s3);
        const Vec s4 = axpy(dt, k3, s);
        if (!ok(s4)) return std::nullopt;
        const Vec k4 = rhs(s4);
        Vec r = s;
        for (std::size_t i = 0; i < r.size(); ++i) r[i] += dt / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
        if (!ok(r)) return std::nullopt;
        return r;
    } catch (const DomainError&) {
        return std::nullopt;
    }
}

struct RawPath {
    std::vector<double> t;
    std::vector<Vec> states;
    bool truncated = false;
};

/// Integrates the augmented geodesic system. On domain exit the final step is
/// bisected down to the boundary and the path is truncated there.
inline RawPath integrate_geodesic_system(const MetricField& field, Vec s0, int m, double t_max, int steps) {
    const int n = field.dim();
    auto rhs = [&](const Vec& s) { return geodesic_rhs(field, s, n, m); };
    auto ok = [&](const Vec& s) { return field.in_domain(std::span<const double>(s).subspan(0, static_cast<std::size_t>(n))); };
    const double dt = t_max / steps;
    RawPath p;
    p.t.push_back(0.0);
    p.states.push_back(std::move(s0));
    for (int i = 0; i < steps; ++i) {
        const Vec& s = p.states.back();
        auto next = rk4_step(rhs, s, dt, ok);
        if (next) {
            p.t.push_back(dt * (i + 1));
            p.states.push_back(std::move(*next));
            continue;
        }
        double lo = 0.0, hi = dt;
        std::optional<Vec> best;
        for (int it = 0; it < 60 && hi - lo > 1e-13 * std::max(1.0, t_max); ++it) {
            const double mid = 0.5 * (lo + hi);
            auto trial = rk4_step(rhs, s, mid, ok);
            if (trial) {
                lo = mid;
                best = std::move(trial);
            } else {
                hi = mid;
            }
        }
        if (best && lo > 0.0) {
            p.t.push_back(p.t.back() + lo);
            p.states.push_back(std::move(*best));
        }
        p.truncated = true;
        break;
    }
    return p;
}

} // namespace detail

/// Geodesic with x(0) = x0, x'(0) = v0 on [0, t_max] by RK4 on
/// x''^k = -Gamma^k_ij x'^i x'^j. The run is repeated at twice the step count
/// and the endpoint difference recorded in `convergence_delta`. Leaving the
/// domain truncates the path rather than failing.
inline GeodesicPath geodesic(const MetricField& field, std::span<const double> x0, std::span<const double> v0,
                             double t_max, int steps, bool convergence_check = true) {
    field.require_domain(x0);
    const int n = field.dim();
    if (static_cast<int>(v0.size()) != n) throw Error("geodesic: velocity dimension mismatch");
    if (steps < 16) throw Error("geodesic: at least 16 steps are required");
    Vec s0(x0.begin(), x0.end());
    s0.insert(s0.end(), v0.begin(), v0.end());
    const auto raw = detail::integrate_geodesic_system(field, s0, 0, t_max, steps);

    GeodesicPath path;
    path.step = t_max / steps;
    path.steps = steps;
    path.truncated = raw.truncated;
    for (std::size_t i = 0; i < raw.t.size(); ++i) {
        const Vec& s = raw.states[i];
        path.samples.push_back({raw.t[i], Vec(s.begin(), s.begin() + n), Vec(s.begin() + n, s.begin() + 2 * n)});
    }
    path.last_valid_t = path.samples.back().t;
    if (convergence_check && !raw.truncated) {
        const auto fine = detail::integrate_geodesic_system(field, s0, 0, t_max, 2 * steps);
        if (!fine.truncated) {
            const Vec& a = raw.states.back();
            const Vec& b = fine.states.back();
            double d = 0.0;
            for (int k = 0; k < n; ++k) d = std::max(d, std::abs(a[static_cast<std::size_t>(k)] - b[static_cast<std::size_t>(k)]));
            path.convergence_delta = d;
        }
    }
    return path;
}

/// Parallel transport of `vectors` (given at the path start) along a geodesic
/// path, integrating the geodesic and transport equations together over the
/// path's own sample times.
inline ParallelFrame parallel_transport(const MetricField& field, const GeodesicPath& path, const std::vector<Vec>& vectors) {
    const int n = field.dim();
    const int m = static_cast<int>(vectors.size());
    if (path.samples.empty()) throw Error("parallel_transport: empty path");
    Vec s = path.samples.front().position;
    s.insert(s.end(), path.samples.front().velocity.begin(), path.samples.front().velocity.end());
    for (const Vec& v : vectors) {
        if (static_cast<int>(v.size()) != n) throw Error("parallel_transport: vector dimension mismatch");
        s.insert(s.end(), v.begin(), v.end());
    }
    auto rhs = [&](const Vec& st) { return detail::geodesic_rhs(field, st, n, m); };
    auto ok = [&](const Vec& st) { return field.in_domain(std::span<const double>(st).subspan(0, static_cast<std::size_t>(n))); };

    ParallelFrame frame;
    frame.base = vectors;
    auto unpack = [&](const Vec& st) {
        std::vector<Vec> out;
        for (int b = 0; b < m; ++b)
            out.emplace_back(st.begin() + (2 + b) * n, st.begin() + (3 + b) * n);
        return out;
    };
    frame.vectors.push_back(unpack(s));
    for (std::size_t i = 1; i < path.samples.size(); ++i) {
        auto next = detail::rk4_step(rhs, s, path.samples[i].t - path.samples[i - 1].t, ok);
        if (!next) throw DomainError("parallel_transport: path leaves the domain");
        s = std::move(*next);
        frame.vectors.push_back(unpack(s));
    }
    return frame;
}

/// A curve given by position and velocity as functions of the parameter.
struct Curve {
    std::function<Vec(double)> position;
    std::function<Vec(double)> velocity;
};

/// Parallel transport along an arbitrary curve on [t0, t1] (RK4, `steps` steps).
/// Returns the transported vectors at t1.
inline std::vector<Vec> transport_along_curve(const MetricField& field, const Curve& curve, double t0, double t1,
                                              int steps, const std::vector<Vec>& vectors) {
    const int n = field.dim();
    const int m = static_cast<int>(vectors.size());
    Vec s;
    for (const Vec& v : vectors) s.insert(s.end(), v.begin(), v.end());
    auto rhs = [&](double t, const Vec& st) {
        const Vec x = curve.position(t), xd = curve.velocity(t);
        const Tensor3 gam = christoffel(field, x);
        Vec out(st.size(), 0.0);
        for (int b = 0; b < m; ++b)
            for (int k = 0; k < n; ++k) {
                double acc = 0.0;
                for (int i = 0; i < n; ++i)
                    for (int j = 0; j < n; ++j)
                        acc += gam(k, i, j) * xd[static_cast<std::size_t>(i)] * st[static_cast<std::size_t>(b * n + j)];
                out[static_cast<std::size_t>(b * n + k)] = -acc;
            }
        return out;
    };
    const double dt = (t1 - t0) / steps;
    for (int i = 0; i < steps; ++i) {
        const double t = t0 + i * dt;
        const Vec k1 = rhs(t, s);
        const Vec k2 = rhs(t + 0.5 * dt, axpy(0.5 * dt, k1, s));
        const Vec k3 = rhs(t + 0.5 * dt, axpy(0.5 * dt, k2, s));
        const Vec k4 = rhs(t + dt, axpy(dt, k3, s));
        for (std::size_t q = 0; q < s.size(); ++q) s[q] += dt / 6.0 * (k1[q] + 2.0 * k2[q] + 2.0 * k3[q] + k4[q]);
    }
    std::vector<Vec> out;
    for (int b = 0; b < m; ++b) out.emplace_back(s.begin() + b * n, s.begin() + (b + 1) * n);
    return out;
}

/// |v - P v|_g / |v|_g for P the g-orthogonal projection onto span(basis);
/// `basis` must be g-orthonormal.
inline double projection_residual(const Matrix& g, std::span<const double> v, const std::vector<Vec>& basis) {
    Vec r(v.begin(), v.end());
    for (const Vec& b : basis) r = axpy(-inner(g, v, b), b, r);
    const double nv = std::sqrt(inner(g, v, v));
    if (nv == 0.0) return 0.0;
    return std::sqrt(std::max(0.0, inner(g, r, r))) / nv;
}

struct NullityGeodesicReport {
    double max_residual = 0.0;
    double worst_t = 0.0;
    int samples_checked = 0;
    bool pass = false;
};

/// Is the path a nullity geodesic? At each sample the tangent's distance from
/// ker R (relative, in the g norm) is measured; pass when all are below pass_tol.
inline NullityGeodesicReport nullity_geodesic_check(const MetricField& field, const GeodesicPath& path,
                                                    double pass_tol = 1e-6, std::optional<double> kernel_rel_tol = {}) {
    const double rel = kernel_rel_tol.value_or(default_rel_tol(field));
    NullityGeodesicReport rep;
    for (const auto& s : path.samples) {
        const CurvatureData d = curvature(field, s.position);
        const NullityResult nr = nullity(d, rel);
        const double r = projection_residual(d.g, s.velocity, nr.kernel_basis);
        if (r > rep.max_residual) {
            rep.max_residual = r;
            rep.worst_t = s.t;
        }
        ++rep.samples_checked;
    }
    rep.pass = rep.max_residual < pass_tol;
    return rep;
}

struct FlatnessReport {
    Vec sectional;                  // one per pair (i < j), row-major over pairs
    double max_abs_sectional = 0.0;
    double total_geodesy_residual = 0.0;
};

/// Curvature of every plane in span(E_i) and the normal part of nabla_{E_i} E_j
/// for the coordinate-constant extensions E_i of the span vectors.
inline FlatnessReport flatness_probe(const MetricField& field, std::span<const double> x, const std::vector<Vec>& span) {
    const CurvatureData d = curvature(field, x);
    const int n = d.n;
    const int k = static_cast<int>(span.size());
    Matrix gram(k, k);
    for (int a = 0; a < k; ++a)
        for (int b = 0; b < k; ++b) gram(a, b) = inner(d.g, span[static_cast<std::size_t>(a)], span[static_cast<std::size_t>(b)]);
    if (k == 0 || std::abs(determinant(gram)) < 1e-14 * std::pow(gram.max_abs(), k)) throw Error("flatness_probe: degenerate span");

    FlatnessReport rep;
    for (int a = 0; a < k; ++a)
        for (int b = a + 1; b < k; ++b) {
            const double s = sectional(d, span[static_cast<std::size_t>(a)], span[static_cast<std::size_t>(b)]);
            rep.sectional.push_back(s);
            rep.max_abs_sectional = std::max(rep.max_abs_sectional, std::abs(s));
        }

    std::vector<Vec> on = span;
    orthonormalize(on, d.g);
    for (int a = 0; a < k; ++a)
        for (int b = 0; b < k; ++b) {
            const Vec& ea = span[static_cast<std::size_t>(a)];
            const Vec& eb = span[static_cast<std::size_t>(b)];
            Vec cov(static_cast<std::size_t>(n), 0.0);
            for (int q = 0; q < n; ++q)
                for (int i = 0; i < n; ++i)
                    for (int j = 0; j < n; ++j)
                        cov[static_cast<std::size_t>(q)] += d.christoffel(q, i, j) * ea[static_cast<std::size_t>(i)] * eb[static_cast<std::size_t>(j)];
            Vec normal = cov;
            for (const Vec& e : on) normal = axpy(-inner(d.g, cov, e), e, normal);
            rep.total_geodesy_residual = std::max(rep.total_geodesy_residual, std::sqrt(std::max(0.0, inner(d.g, normal, normal))));
        }
    return rep;
}

struct IncompletenessReport {
    bool degenerate = false;         // p reached the floor inside the box
    double parameter = 0.0;          // arc parameter where p crosses the floor
    double p_at_crossing = 0.0;
    double smallest_metric_eigenvalue = 0.0;
    Vec crossing_point;
    std::string message;
};

/// Follows the geodesic leaving `from` along the unit coordinate direction
/// `direction` (an index into the chart) and locates where the warping function
/// drops to the catalog floor. The domain boundary is located by bisection on
/// the final step.
inline IncompletenessReport incompleteness_probe(const CatalogEntry& entry, int direction, std::span<const double> from,
                                                 double t_max = 6.0, int steps = 600) {
    if (!entry.warp) throw Error("incompleteness_probe: metric has no warping function");
    const MetricField& field = entry.field;
    const int n = field.dim();
    if (direction < 0 || direction >= n) throw Error("incompleteness_probe: bad direction");
    const Matrix g0 = field.g(from);
    Vec v0(static_cast<std::size_t>(n), 0.0);
    v0[static_cast<std::size_t>(direction)] = 1.0 / std::sqrt(g0(direction, direction));

    const GeodesicPath path = geodesic(field, from, v0, t_max, steps, false);
    const std::vector<int> slots = n == 4 ? std::vector<int>{0, 1, 3} : std::vector<int>{0, 1};
    auto p_at = [&](const Vec& x) { return detail::embedded_value(*entry.warp, x, slots); };

    IncompletenessReport rep;
    const PathSample& last = path.back();
    rep.parameter = last.t;
    rep.crossing_point = last.position;
    rep.p_at_crossing = p_at(last.position);
    rep.smallest_metric_eigenvalue = smallest_metric_eigenvalue(field, last.position);
    rep.degenerate = path.truncated && rep.p_at_crossing < entry.p_floor * (1.0 + 1e-3);
    if (rep.degenerate) {
        rep.message = "metric degenerates: p reaches the floor at parameter " + detail::format_number(rep.parameter);
    } else {
        rep.message = "no degeneracy in range";
    }
    return rep;
}

} // namespace geonull
