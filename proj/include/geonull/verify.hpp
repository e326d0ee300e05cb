#pragma once

// Named verification suites over the catalog metrics. Each check records the
// expected value, the computed value and the tolerance it was judged against.

#include <geonull/curvature.hpp>
#include <geonull/flows.hpp>
#include <geonull/metricspace.hpp>
#include <geonull/report.hpp>
#include <geonull/splitting.hpp>

#include <cmath>
#include <cstdint>
#include <numbers>
#include <random>
#include <string>
#include <vector>

namespace geonull {

inline constexpr std::uint64_t kDefaultSeed = 12345;

struct VerifyCheck {
    std::string name;
    double expected = 0.0;
    double computed = 0.0;
    double tolerance = 0.0;
    bool pass = false;
};

struct VerifySuiteResult {
    std::string suite;
    std::uint64_t seed = kDefaultSeed;
    std::vector<VerifyCheck> checks;
    bool pass = true;

    /// |computed - expected| <= tolerance.
    void close(std::string name, double expected, double computed, double tolerance) {
        add({std::move(name), expected, computed, tolerance, std::abs(computed - expected) <= tolerance});
    }
    /// |computed - expected| <= tolerance * |expected|.
    void close_rel(std::string name, double expected, double computed, double tolerance) {
        add({std::move(name), expected, computed, tolerance,
             std::abs(computed - expected) <= tolerance * std::abs(expected)});
    }
    /// computed < bound (expected is reported as 0).
    void below(std::string name, double computed, double bound) {
        add({std::move(name), 0.0, computed, bound, computed < bound});
    }
    /// computed > bound.
    void above(std::string name, double computed, double bound) {
        add({std::move(name), bound, computed, 0.0, computed > bound});
    }

private:
    void add(VerifyCheck c) {
        if (!std::isfinite(c.computed)) c.pass = false;
        pass = pass && c.pass;
        checks.push_back(std::move(c));
    }
};

inline const std::vector<std::string>& verify_suite_names() {
    static const std::vector<std::string> names{"euclidean", "sphere", "product", "sekigawa", "conullity3", "riccati", "all"};
    return names;
}

namespace detail {

inline Vec uniform_point(std::mt19937_64& rng, int n, double lo = -2.0, double hi = 2.0) {
    std::uniform_real_distribution<double> u(lo, hi);
    Vec x(static_cast<std::size_t>(n));
    for (double& c : x) c = u(rng);
    return x;
}

inline Matrix random_matrix(std::mt19937_64& rng, int n, double scale) {
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    Matrix m(n, n);
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j) m(i, j) = u(rng);
    return (scale / std::max(m.norm_inf(), 1e-300)) * m;
}

inline Matrix random_orthogonal(std::mt19937_64& rng, int n) {
    std::vector<Vec> cols;
    for (int i = 0; i < n; ++i) cols.push_back(uniform_point(rng, n, -1.0, 1.0));
    orthonormalize(cols);
    return Matrix::from_columns(cols);
}

/// Max over the vectors of `a` of their distance from span(b); both bases g-orthonormal.
inline double subspace_residual(const Matrix& g, const std::vector<Vec>& a, const std::vector<Vec>& b) {
    double r = 0.0;
    for (const Vec& v : a) r = std::max(r, projection_residual(g, v, b));
    return r;
}

inline void suite_euclidean(VerifySuiteResult& r, std::mt19937_64& rng) {
    const CatalogEntry e = make_catalog_entry("euclidean", {});
    double rmax = 0.0, nullity_err = 0.0, scal = 0.0;
    for (int i = 0; i < 10; ++i) {
        const Vec x = uniform_point(rng, 4);
        const CurvatureData d = curvature(e.field, x);
        rmax = std::max(rmax, riemann_norm(d));
        scal = std::max(scal, std::abs(d.scalar_trace));
        nullity_err = std::max(nullity_err, std::abs(nullity(d).nullity - 4.0));
    }
    r.below("euclidean.riemann_max_abs", rmax, 1e-12);
    r.below("euclidean.scalar_max_abs", scal, 1e-12);
    r.close("euclidean.nullity_mismatch", 0.0, nullity_err, 0.0);
    const Vec x0(4, 0.0);
    const Vec v0{1.0, 0.5, -0.25, 2.0};
    const GeodesicPath path = geodesic(e.field, x0, v0, 1.0, 64);
    double dev = 0.0;
    for (std::size_t k = 0; k < 4; ++k) dev = std::max(dev, std::abs(path.back().position[k] - v0[k]));
    r.below("euclidean.geodesic_straight_line", dev, 1e-12);
}

inline void suite_sphere(VerifySuiteResult& r, std::mt19937_64& rng) {
    const CatalogEntry e = make_catalog_entry("sphere", {});
    double scal_err = 0.0, sec_err = 0.0, conull_err = 0.0, rdown = 0.0;
    for (int i = 0; i < 10; ++i) {
        std::uniform_real_distribution<double> th(0.3, std::numbers::pi - 0.3), ph(-2.0, 2.0);
        const Vec x{th(rng), ph(rng)};
        const CurvatureData d = curvature(e.field, x);
        scal_err = std::max(scal_err, std::abs(d.scalar_trace - 2.0));
        sec_err = std::max(sec_err, std::abs(sectional(d, Vec{1.0, 0.0}, Vec{0.0, 1.0}) - 1.0));
        conull_err = std::max(conull_err, std::abs(nullity(d).conullity - 2.0));
        rdown = std::max(rdown, std::abs(d.riemann_down(0, 1, 0, 1) - std::pow(std::sin(x[0]), 2)));
    }
    r.below("sphere.scalar_trace_minus_2", scal_err, 1e-10);
    r.below("sphere.sectional_minus_1", sec_err, 1e-10);
    r.close("sphere.conullity_mismatch", 0.0, conull_err, 0.0);
    r.below("sphere.R_thetaphithetaphi_minus_sin2", rdown, 1e-10);

    // Holonomy around the latitude theta0 = pi/3 rotates vectors by 2 pi (1 - cos theta0) = pi.
    const double th0 = std::numbers::pi / 3.0;
    Curve c{[th0](double t) { return Vec{th0, t}; }, [](double) { return Vec{0.0, 1.0}; }};
    const auto out = transport_along_curve(e.field, c, 0.0, 2.0 * std::numbers::pi, 2000, {Vec{1.0, 0.0}});
    const double s = std::sin(th0);
    const double angle = std::atan2(out[0][1] * s, out[0][0]);
    r.close("sphere.holonomy_angle_abs", std::numbers::pi, std::abs(angle), 1e-5);
}

inline void suite_product(VerifySuiteResult& r, std::mt19937_64& rng) {
    const CatalogEntry e = make_catalog_entry("product", {});
    double conull_err = 0.0, kres = 0.0, cmax = 0.0, worst_real = 0.0, invalid = 0.0;
    for (int i = 0; i < 50; ++i) {
        Vec x = uniform_point(rng, 4);
        std::uniform_real_distribution<double> th(0.3, std::numbers::pi - 0.3);
        x[0] = th(rng);
        const CurvatureData d = curvature(e.field, x);
        const NullityResult nr = nullity(d);
        conull_err = std::max(conull_err, std::abs(nr.conullity - 2.0));
        std::vector<Vec> expected = e.expected_kernel;
        orthonormalize(expected, d.g);
        kres = std::max({kres, subspace_residual(d.g, nr.kernel_basis, expected), subspace_residual(d.g, expected, nr.kernel_basis)});
        Vec seed = nr.kernel_basis.front();
        canonical_sign(seed);
        const SplittingTensor st = splitting_tensor(e.field, x, kernel_projection_field(e.field, seed));
        cmax = std::max(cmax, st.matrix.max_abs());
        const BlockInvariants bi = classify(st.matrix);
        worst_real = std::max(worst_real, bi.max_abs_real_eigenvalue);
        if (bi.invalid) invalid += 1.0;
    }
    r.close("product.conullity_mismatch", 0.0, conull_err, 0.0);
    r.below("product.kernel_residual", kres, 1e-8);
    r.below("product.splitting_max_abs", cmax, 1e-6);
    r.below("product.max_real_eigenvalue", worst_real, 1e-4);
    r.close("product.invalid_classifications", 0.0, invalid, 0.0);

    const EvolutionReport ev = evolve_along_nullity_geodesic(e.field, Vec{1.0, 0.0, 0.0, 0.0}, 1.0, 20);
    double m = 0.0;
    for (const auto& s : ev.samples) m = std::max(m, s.computed.max_abs());
    r.below("product.flow_splitting_max_abs", m, 1e-6);
}

inline void suite_sekigawa(VerifySuiteResult& r, std::mt19937_64& rng) {
    for (const std::string p : {"exp(u)", "2+u*u", "cos(u)+2"}) {
        CatalogParams params;
        params.p = p;
        const CatalogEntry e = make_catalog_entry("sekigawa", params);
        double rel_err = 0.0, conull_err = 0.0, worst_real = 0.0, invalid = 0.0, kres = 0.0;
        for (int i = 0; i < 20; ++i) {
            const Vec x = uniform_point(rng, 3);
            const CurvatureData d = curvature(e.field, x);
            const double expected = e.expected_scalar(x);
            rel_err = std::max(rel_err, std::abs(d.half_trace - expected) / std::max(std::abs(expected), 1e-300));
            if (std::abs(d.half_trace) <= 1e-6) continue;
            const NullityResult nr = nullity(d);
            conull_err = std::max(conull_err, std::abs(nr.conullity - 2.0));
            if (nr.nullity != 1) continue;
            std::vector<Vec> expected_k = e.expected_kernel;
            orthonormalize(expected_k, d.g);
            kres = std::max(kres, subspace_residual(d.g, nr.kernel_basis, expected_k));
            const SplittingTensor st = splitting_tensor(e.field, x, NullityField(e.field, x).as_field());
            const BlockInvariants bi = classify(st.matrix);
            worst_real = std::max(worst_real, bi.max_abs_real_eigenvalue);
            if (bi.invalid) invalid += 1.0;
        }
        const std::string tag = "sekigawa[" + p + "]";
        r.below(tag + ".plane_scalar_rel_error", rel_err, 1e-5);
        r.close(tag + ".conullity_mismatch", 0.0, conull_err, 0.0);
        r.below(tag + ".kernel_residual", kres, 1e-6);
        r.below(tag + ".max_real_eigenvalue", worst_real, 1e-4);
        r.close(tag + ".invalid_classifications", 0.0, invalid, 0.0);
    }
}

inline void suite_conullity3(VerifySuiteResult& r, std::mt19937_64& rng) {
    const CatalogEntry e = make_catalog_entry("conullity3", {});
    const MetricField& f = e.field;

    double kres = 0.0, nullity_err = 0.0, scal_rel = 0.0;
    int accepted = 0;
    for (int tries = 0; accepted < 20 && tries < 1000; ++tries) {
        const Vec x = uniform_point(rng, 4);
        const CurvatureData d = curvature(f, x);
        if (std::abs(d.scalar_trace) <= 1e-4) continue;
        ++accepted;
        const NullityResult nr = nullity(d);
        nullity_err = std::max(nullity_err, std::abs(nr.nullity - 1.0));
        const Vec dv{0.0, 0.0, 1.0, 0.0};
        kres = std::max(kres, projection_residual(d.g, dv, nr.kernel_basis));
        const double expected = e.expected_scalar(x);
        scal_rel = std::max(scal_rel, std::abs(d.scalar_trace - expected) / std::abs(expected));
    }
    r.close("conullity3.sample_points", 20.0, accepted, 0.0);
    r.close("conullity3.nullity_mismatch", 0.0, nullity_err, 0.0);
    r.below("conullity3.kernel_dv_residual", kres, 1e-6);
    r.below("conullity3.scalar_rel_error", scal_rel, 1e-4);

    const Vec origin(4, 0.0);
    const SplittingTensor st = splitting_tensor(f, origin, NullityField(f, origin).as_field());
    const double a = std::sqrt(2.0) / 5.0;
    double off = 0.0;
    for (int i = 0; i < 3; ++i)
        for (int j = 0; j < 3; ++j)
            if (!(i == 0 && j == 1)) off = std::max(off, std::abs(st.matrix(i, j)));
    r.close("conullity3.splitting_C12", a, st.matrix(0, 1), 1e-5);
    r.below("conullity3.splitting_other_entries", off, 1e-5);
    const BlockInvariants bi = classify(st.matrix);
    r.close("conullity3.splitting_nilpotent", 1.0, bi.classification == SplittingClass::nilpotent ? 1.0 : 0.0, 0.0);
    r.above("conullity3.splitting_nonzero", st.matrix.max_abs(), 1e-3);

    double sec = 0.0, geo = 0.0;
    const std::vector<Vec> span{{0, 1, 0, 0}, {0, 0, 1, 0}, {0, 0, 0, 1}};
    for (int i = 0; i < 20; ++i) {
        const FlatnessReport fr = flatness_probe(f, uniform_point(rng, 4), span);
        sec = std::max(sec, fr.max_abs_sectional);
        geo = std::max(geo, fr.total_geodesy_residual);
    }
    r.below("conullity3.flat_slices_sectional", sec, 1e-7);
    r.below("conullity3.flat_slices_geodesy_residual", geo, 1e-6);

    // Along u = w in [0, pi] the curvature vanishes exactly where Scal does; the
    // chart box is widened so the whole path lies inside it.
    CatalogParams wide;
    wide.options.box = 4.0;
    const MetricField fw = make_catalog_entry("conullity3", wide).field;
    double flat_r = 0.0, curved_r = std::numeric_limits<double>::infinity();
    for (int i = 0; i <= 200; ++i) {
        const double s = std::numbers::pi * i / 200.0;
        const Vec x{0.0, s, 0.0, s};
        const CurvatureData d = curvature(fw, x);
        if (std::abs(d.scalar_trace) < 1e-6) flat_r = std::max(flat_r, riemann_norm(d));
        if (std::abs(d.scalar_trace) > 1e-2) curved_r = std::min(curved_r, riemann_norm(d));
    }
    r.below("conullity3.riemann_where_scal_zero", flat_r, 1e-5);
    r.above("conullity3.riemann_where_scal_nonzero", curved_r, 1e-3);

    CatalogParams ip;
    ip.p = "4-u*u-w*w";
    const IncompletenessReport inc = incompleteness_probe(make_catalog_entry("conullity3", ip), 1, origin);
    r.close("conullity3.incompleteness_parameter", 2.0, inc.degenerate ? inc.parameter : 0.0, 1e-3);

    const EvolutionReport ev = evolve_along_nullity_geodesic(f, origin, 1.0, 20);
    r.close("conullity3.flow_aborted", 0.0, ev.aborted ? 1.0 : 0.0, 0.0);
    r.below("conullity3.flow_deviation", ev.max_deviation, 1e-4);
    r.below("conullity3.trace_plus_divergence", ev.max_trace_divergence_residual, 1e-4);
}

inline void suite_riccati(VerifySuiteResult& r, std::mt19937_64& rng) {
    const auto [tr1, det1] = trace_det_evolution(0.0, 1.0, 1.0);
    r.close("riccati.trace_det_instance_trace", -1.0, tr1, 1e-9);
    r.close("riccati.trace_det_instance_det", 0.5, det1, 1e-9);

    const Matrix rot = block_diagonal(Matrix{{0.0, 1.0}, {-1.0, 0.0}}, Matrix{{0.0}});
    const Matrix c1 = riccati_closed_form(rot, 1.0);
    r.close("riccati.closed_form_rotation_trace", -1.0, c1.trace(), 1e-9);
    r.close("riccati.closed_form_rotation_det_block", 0.5, det_block(c1), 1e-9);

    double ode = 0.0, law = 0.0, cocycle = 0.0, sim = 0.0;
    for (int i = 0; i < 100; ++i) {
        const Matrix c0 = random_matrix(rng, 3, std::uniform_real_distribution<double>(0.0, 1.0)(rng));
        for (const auto& s : riccati_ode(c0, 0.5, 200))
            ode = std::max(ode, (s.c - riccati_closed_form(c0, s.t)).max_abs());
    }
    for (int i = 0; i < 50; ++i) {
        const Matrix b = random_matrix(rng, 2, 1.0);
        const Matrix c0 = block_diagonal(b, Matrix{{0.0}});
        const double t = std::uniform_real_distribution<double>(0.0, 0.4)(rng);
        const double s = std::uniform_real_distribution<double>(0.0, 0.4)(rng);
        const Matrix ct = riccati_closed_form(c0, t);
        const auto [tr, det] = trace_det_evolution(c0.trace(), det_block(c0), t);
        law = std::max({law, std::abs(tr - ct.trace()), std::abs(det - det_block(ct))});
        cocycle = std::max(cocycle, (riccati_closed_form(c0, t + s) - riccati_closed_form(ct, s)).max_abs());
    }
    const Matrix c = block_diagonal(Matrix{{1.0, 2.0}, {-2.0, 1.0}}, Matrix{{0.0}});
    for (int i = 0; i < 20; ++i) {
        const Matrix q = random_orthogonal(rng, 3);
        sim = std::max(sim, std::abs(det_block(q * c * q.transpose()) - det_block(c)));
    }
    r.below("riccati.ode_vs_closed_form", ode, 1e-7);
    r.below("riccati.trace_det_laws", law, 1e-9);
    r.below("riccati.cocycle", cocycle, 1e-9);
    r.below("riccati.det_block_similarity", sim, 1e-9);
}

} // namespace detail

/// Runs one named suite (or "all") with the given seed.
inline VerifySuiteResult run_verify_suite(const std::string& suite, std::uint64_t seed = kDefaultSeed) {
    VerifySuiteResult r;
    r.suite = suite;
    r.seed = seed;
    std::mt19937_64 rng(seed);
    const bool all = suite == "all";
    bool known = all;
    auto want = [&](const char* s) {
        if (all || suite == s) {
            known = true;
            return true;
        }
        return false;
    };
    if (want("euclidean")) detail::suite_euclidean(r, rng);
    if (want("sphere")) detail::suite_sphere(r, rng);
    if (want("product")) detail::suite_product(r, rng);
    if (want("sekigawa")) detail::suite_sekigawa(r, rng);
    if (want("conullity3")) detail::suite_conullity3(r, rng);
    if (want("riccati")) detail::suite_riccati(r, rng);
    if (!known) throw Error("unknown verify suite '" + suite + "'");
    return r;
}

inline Json to_json(const VerifySuiteResult& r) {
    Json j;
    j["schema"] = kSchema;
    j["suite"] = r.suite;
    j["seed"] = r.seed;
    j["pass"] = r.pass;
    Json checks = Json::array();
    for (const auto& c : r.checks)
        checks.push_back({{"name", c.name}, {"expected", c.expected}, {"computed", c.computed},
                          {"tolerance", c.tolerance}, {"pass", c.pass}});
    j["checks"] = checks;
    return j;
}

inline std::string to_text(const VerifySuiteResult& r) {
    std::string out = "suite " + r.suite + " (seed " + std::to_string(r.seed) + ")\n";
    char buf[512];
    for (const auto& c : r.checks) {
        std::snprintf(buf, sizeof buf, "  %s  %-48s computed %.6e  expected %.6e  tol %.1e\n", c.pass ? "PASS" : "FAIL",
                      c.name.c_str(), c.computed, c.expected, c.tolerance);
        out += buf;
    }
    out += r.pass ? "overall: PASS\n" : "overall: FAIL\n";
    return out;
}

} // namespace geonull
