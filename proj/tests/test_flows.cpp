#include <geonull/flows.hpp>

#include "oracles.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <numbers>

using namespace geonull;

namespace {

CatalogEntry entry(const std::string& name, const std::string& p = {}) {
    CatalogParams params;
    params.p = p;
    return make_catalog_entry(name, params);
}

double gnorm(const Matrix& g, const Vec& v) { return std::sqrt(inner(g, v, v)); }

double speed(const MetricField& f, const PathSample& s) { return gnorm(f.g(s.position), s.velocity); }

double dist(const Vec& a, const Vec& b) {
    double d = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) d = std::max(d, std::abs(a[i] - b[i]));
    return d;
}

// Rotation angle of a vector transported once around the latitude theta0,
// measured in the orthonormal frame (d_theta, d_phi / sin theta).
double holonomy_angle(double theta0, int steps) {
    const MetricField f = catalog_sphere(1.0);
    Curve c{[theta0](double t) { return Vec{theta0, t}; }, [](double) { return Vec{0.0, 1.0}; }};
    const Vec v = transport_along_curve(f, c, 0.0, 2 * std::numbers::pi, steps, {Vec{1.0, 0.0}}).front();
    return std::atan2(v[1] * std::sin(theta0), v[0]);
}

} // namespace

TEST(Geodesic, EuclideanStraightLine) {
    const MetricField f = catalog_euclidean(3);
    const Vec x0{1, 2, 3}, v0{0.5, -1, 2};
    const GeodesicPath p = geodesic(f, x0, v0, 2.0, 64);
    ASSERT_EQ(p.samples.size(), 65u);
    for (const auto& s : p.samples)
        for (int k = 0; k < 3; ++k) EXPECT_NEAR(s.position[static_cast<std::size_t>(k)], x0[static_cast<std::size_t>(k)] + s.t * v0[static_cast<std::size_t>(k)], 1e-13);
    EXPECT_FALSE(p.truncated);
    EXPECT_LT(p.convergence_delta, 1e-12);
    EXPECT_THROW(geodesic(f, x0, v0, 1.0, 15), Error);
}

TEST(Geodesic, PolarPlaneFollowsCartesianLine) {
    // (r, phi) = (1, 0) with Cartesian velocity (0, 1): at t = 1 the point is (1, 1).
    const MetricField f = catalog_polar_plane();
    const GeodesicPath p = geodesic(f, Vec{1.0, 0.0}, Vec{0.0, 1.0}, 1.0, 256);
    EXPECT_NEAR(p.back().position[0], std::sqrt(2.0), 1e-7);
    EXPECT_NEAR(p.back().position[1], std::numbers::pi / 4, 1e-7);
    EXPECT_LT(p.convergence_delta, 1e-7);
}

TEST(Geodesic, Conullity3NullityDirectionIsCoordinateLine) {
    const MetricField f = entry("conullity3").field;
    const GeodesicPath p = geodesic(f, Vec{0, 0, 0, 0}, Vec{0, 0, 1, 0}, 1.5, 128);
    for (const auto& s : p.samples) {
        EXPECT_LT(std::abs(s.position[0]) + std::abs(s.position[1]) + std::abs(s.position[3]), 1e-9);
        EXPECT_NEAR(s.position[2], s.t, 1e-9);
    }
}

TEST(Geodesic, TruncatesAtDomainBoundary) {
    const MetricField f = catalog_sphere(1.0);
    const GeodesicPath p = geodesic(f, Vec{0.5, 0.0}, Vec{-1.0, 0.0}, 2.0, 200);
    EXPECT_TRUE(p.truncated);
    EXPECT_LT(p.last_valid_t, 0.41);
    EXPECT_GT(p.last_valid_t, 0.38);
    EXPECT_TRUE(std::isnan(p.convergence_delta));
}

TEST(Geodesic, Rk4OrderOnSphere) {
    const MetricField f = catalog_sphere(1.0);
    const Vec x0{1.0, 0.0}, v0{0.3, 0.8};
    const Vec ref = geodesic(f, x0, v0, 2.0, 4096, false).back().position;
    const double e1 = dist(geodesic(f, x0, v0, 2.0, 32, false).back().position, ref);
    const double e2 = dist(geodesic(f, x0, v0, 2.0, 64, false).back().position, ref);
    EXPECT_GE(e1 / e2, 14.0) << e1 << " " << e2;
}

TEST(Geodesic, SpeedConservedOnCatalogMetrics) {
    std::mt19937_64 rng(21);
    for (const std::string name : catalog_names()) {
        const MetricField f = entry(name).field;
        int checked = 0;
        for (int attempt = 0; attempt < 200 && checked < 5; ++attempt) {
            Vec x0 = oracle::uniform(rng, f.dim(), -0.5, 0.5);
            if (name == "sphere" || name == "product") x0[0] += std::numbers::pi / 2;
            Vec v0 = oracle::uniform(rng, f.dim(), -1, 1);
            const double s0 = gnorm(f.g(x0), v0);
            for (double& c : v0) c *= 0.5 / s0;
            const GeodesicPath p = geodesic(f, x0, v0, 3.0, 1024, false);
            if (p.truncated) continue;
            ++checked;
            for (const auto& s : p.samples) EXPECT_NEAR(speed(f, s) / 0.5, 1.0, 1e-6) << name;
        }
        EXPECT_EQ(checked, 5) << name;
    }
}

TEST(Transport, EuclideanKeepsComponents) {
    const MetricField f = catalog_euclidean(2);
    const GeodesicPath p = geodesic(f, Vec{0, 0}, Vec{1, 1}, 1.0, 32);
    const ParallelFrame fr = parallel_transport(f, p, {Vec{1, 2}});
    for (const auto& vs : fr.vectors) EXPECT_LT(dist(vs.front(), Vec{1, 2}), 1e-15);
}

TEST(Transport, SphereHolonomyAroundLatitude) {
    const double theta0 = std::numbers::pi / 3;
    const double coarse = holonomy_angle(theta0, 400);
    const double fine = holonomy_angle(theta0, 4000);
    // 2 pi (1 - cos theta0) = pi: the vector comes back reversed
    EXPECT_NEAR(std::abs(fine), std::numbers::pi, 1e-5);
    EXPECT_NEAR(std::abs(coarse), std::abs(fine), 1e-5);
    // a smaller cap as a second oracle point
    const double th = 0.7;
    double expected = std::remainder(2 * std::numbers::pi * (1 - std::cos(th)), 2 * std::numbers::pi);
    EXPECT_NEAR(std::abs(holonomy_angle(th, 4000)), std::abs(expected), 1e-5);
}

TEST(Transport, PreservesInnerProducts) {
    std::mt19937_64 rng(22);
    for (const std::string name : {"sphere", "sekigawa", "conullity3"}) {
        const MetricField f = entry(name).field;
        Vec x0 = oracle::uniform(rng, f.dim(), -0.3, 0.3);
        if (name == std::string("sphere")) x0[0] += 1.2;
        const Vec v0 = oracle::uniform(rng, f.dim(), -0.5, 0.5);
        std::vector<Vec> vs;
        for (int k = 0; k < f.dim(); ++k) vs.push_back(oracle::uniform(rng, f.dim(), -1, 1));
        const GeodesicPath p = geodesic(f, x0, v0, 1.0, 256);
        ASSERT_FALSE(p.truncated);
        const ParallelFrame fr = parallel_transport(f, p, vs);
        const Matrix g0 = f.g(x0);
        for (std::size_t i = 0; i < p.samples.size(); ++i) {
            const Matrix g = f.g(p.samples[i].position);
            for (std::size_t a = 0; a < vs.size(); ++a) {
                EXPECT_NEAR(gnorm(g, fr.vectors[i][a]), gnorm(g0, vs[a]), 1e-7) << name;
                for (std::size_t b = a + 1; b < vs.size(); ++b)
                    EXPECT_NEAR(inner(g, fr.vectors[i][a], fr.vectors[i][b]), inner(g0, vs[a], vs[b]), 1e-6) << name;
            }
        }
    }
}

TEST(Transport, KernelIsParallelAlongNullityGeodesic) {
    const MetricField f = entry("conullity3").field;
    std::mt19937_64 rng(23);
    for (int trial = 0; trial < 3; ++trial) {
        const Vec x0 = oracle::uniform(rng, 4, -1, 1);
        const NullityResult n0 = nullity(f, x0);
        ASSERT_EQ(n0.nullity, 1);
        const GeodesicPath p = geodesic(f, x0, n0.kernel_basis.front(), 1.0, 128);
        const ParallelFrame fr = parallel_transport(f, p, n0.kernel_basis);
        for (std::size_t i = 0; i < p.samples.size(); i += 16) {
            const CurvatureData d = curvature(f, p.samples[i].position);
            const NullityResult ni = nullity(d);
            EXPECT_LT(projection_residual(d.g, fr.vectors[i].front(), ni.kernel_basis), 1e-5);
        }
    }
}

TEST(NullityGeodesic, Examples) {
    const MetricField f = entry("conullity3").field;
    const auto along_v = nullity_geodesic_check(f, geodesic(f, Vec{0, 0, 0, 0}, Vec{0, 0, 1, 0}, 1.0, 32));
    EXPECT_TRUE(along_v.pass);
    EXPECT_LT(along_v.max_residual, 1e-6);
    EXPECT_EQ(along_v.samples_checked, 33);

    const auto along_u = nullity_geodesic_check(f, geodesic(f, Vec{0, 0, 0, 0}, Vec{0, 1, 0, 0}, 1.0, 32));
    EXPECT_FALSE(along_u.pass);
    EXPECT_GT(along_u.max_residual, 0.5);

    const MetricField e = catalog_euclidean(3);
    EXPECT_TRUE(nullity_geodesic_check(e, geodesic(e, Vec{0, 0, 0}, Vec{1, -2, 0.5}, 1.0, 16)).pass);
}

TEST(Flatness, Conullity3Slices) {
    const MetricField f = entry("conullity3").field;
    const std::vector<Vec> span{{0, 1, 0, 0}, {0, 0, 1, 0}, {0, 0, 0, 1}};
    std::mt19937_64 rng(24);
    for (int k = 0; k < 20; ++k) {
        const FlatnessReport r = flatness_probe(f, oracle::uniform(rng, 4, -2, 2), span);
        EXPECT_EQ(r.sectional.size(), 3u);
        EXPECT_LT(r.max_abs_sectional, 1e-8);
        EXPECT_LT(r.total_geodesy_residual, 1e-7);
    }
    // the (x, u) plane is neither flat in general nor tangent to a totally geodesic slice
    const FlatnessReport bad = flatness_probe(f, Vec{0.1, 0.2, 0.3, 0.4}, {Vec{1, 0, 0, 0}, Vec{0, 1, 0, 0}});
    EXPECT_GT(bad.total_geodesy_residual, 1e-3);
}

TEST(Flatness, SekigawaAndEuclideanSlices) {
    const MetricField f = entry("sekigawa").field;
    std::mt19937_64 rng(25);
    for (int k = 0; k < 10; ++k) {
        const FlatnessReport r = flatness_probe(f, oracle::uniform(rng, 3, -2, 2), {Vec{0, 1, 0}, Vec{0, 0, 1}});
        EXPECT_LT(r.max_abs_sectional, 1e-10);
        EXPECT_LT(r.total_geodesy_residual, 1e-10);
    }
    const FlatnessReport e = flatness_probe(catalog_euclidean(3), Vec{1, 2, 3}, {Vec{1, 0, 0}, Vec{0, 0, 1}});
    EXPECT_EQ(e.max_abs_sectional, 0.0);
    EXPECT_EQ(e.total_geodesy_residual, 0.0);
    EXPECT_THROW(flatness_probe(catalog_euclidean(3), Vec{1, 2, 3}, {Vec{1, 0, 0}, Vec{2, 0, 0}}), Error);
}

TEST(Incompleteness, ConcaveWarpDegeneratesAtTwo) {
    const CatalogEntry e = entry("conullity3", "4 - u*u - w*w");
    const IncompletenessReport r = incompleteness_probe(e, 1, Vec{0, 0, 0, 0});
    EXPECT_TRUE(r.degenerate) << r.message;
    EXPECT_NEAR(r.parameter, 2.0, 1e-3);
    EXPECT_LT(r.p_at_crossing, 2e-3);
    // Scal at the origin: -(2/p)(p_uu + p_ww) = -(2/4)(-4) = 2
    EXPECT_NEAR(scalar_curvature(e.field, Vec{0, 0, 0, 0}).trace, 2.0, 1e-12);
}

TEST(Incompleteness, PositiveWarpHasNoDegeneracy) {
    const CatalogEntry e = entry("conullity3");
    const IncompletenessReport r = incompleteness_probe(e, 1, Vec{0, 0, 0, 0});
    EXPECT_FALSE(r.degenerate);
    EXPECT_EQ(r.message, "no degeneracy in range");
    EXPECT_GE(r.p_at_crossing, 1.0);
    EXPECT_THROW(incompleteness_probe(entry("sphere"), 0, Vec{1.0, 0.0}), Error);
}
