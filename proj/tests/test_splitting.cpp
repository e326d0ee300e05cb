#include <geonull/splitting.hpp>

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

Matrix random_matrix(std::mt19937_64& rng, int n, double scale) {
    Matrix m(n, n);
    std::uniform_real_distribution<double> u(-1, 1);
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j) m(i, j) = u(rng);
    const double s = m.norm_inf();
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j) m(i, j) *= scale / s;
    return m;
}

// Orthogonal matrix by Gram-Schmidt on random columns.
Matrix random_orthogonal(std::mt19937_64& rng, int n) {
    std::vector<Vec> cols;
    for (int k = 0; k < n; ++k) {
        Vec v = oracle::uniform(rng, n, -1, 1);
        for (const Vec& c : cols) v = axpy(-dot(v, c), c, v);
        const double nv = norm2(v);
        for (double& x : v) x /= nv;
        cols.push_back(v);
    }
    return Matrix::from_columns(cols);
}

const Matrix kRotation{{0, 1, 0}, {-1, 0, 0}, {0, 0, 0}};

} // namespace

TEST(NullityField, Conullity3GivesSignedDv) {
    const MetricField f = entry("conullity3").field;
    NullityField tf(f, Vec{0, 0, 0, 0});
    const Vec t0 = tf(Vec{0, 0, 0, 0});
    EXPECT_NEAR(std::abs(t0[2]), 1.0, 1e-10);
    const double sign = t0[2];
    for (double s = 0.0; s < 0.01; s += 5e-4) {
        const Vec t = tf(Vec{s, -s, 2 * s, s});
        EXPECT_NEAR(t[2], sign, 1e-9);  // the kernel is exactly d_v everywhere
    }
}

TEST(NullityField, SphereTimesLineIsFlatDirection) {
    const MetricField f = catalog_product(catalog_sphere(1.0), catalog_euclidean(1));
    NullityField tf(f, Vec{1.0, 0.2, 0.0});
    const Vec t = tf.at(Vec{1.3, 0.5, 2.0}, tf.seed_vector());
    EXPECT_LT(std::abs(t[0]) + std::abs(t[1]), 1e-8);
    EXPECT_NEAR(t[2], tf.seed_vector()[2], 1e-8);
    EXPECT_NEAR(std::abs(t[2]), 1.0, 1e-8);
}

TEST(NullityField, EuclideanIsRejected) {
    EXPECT_THROW(NullityField(catalog_euclidean(3), Vec{0, 0, 0}), NullityError);
}

TEST(Splitting, ProductIsZero) {
    const MetricField f = entry("product").field;
    std::mt19937_64 rng(31);
    for (int k = 0; k < 5; ++k) {
        Vec x = oracle::uniform(rng, 4, -1, 1);
        x[0] += std::numbers::pi / 2;
        const SplittingTensor st = splitting_tensor(f, x, kernel_projection_field(f, Vec{0, 0, 1, 0}));
        EXPECT_EQ(st.matrix.rows(), 2);
        EXPECT_LT(st.matrix.max_abs(), 1e-6);
        EXPECT_EQ(classify(st.matrix).classification, SplittingClass::zero);
    }
    const MetricField line = catalog_product(catalog_sphere(1.0), catalog_euclidean(1));
    const Vec x{1.1, 0.3, 0.0};
    EXPECT_LT(splitting_tensor(line, x, NullityField(line, x).as_field()).matrix.max_abs(), 1e-6);
}

TEST(Splitting, Conullity3AtOrigin) {
    const MetricField f = entry("conullity3").field;
    const Vec x{0, 0, 0, 0};
    const SplittingTensor st = splitting_tensor(f, x, NullityField(f, x).as_field());
    ASSERT_EQ(st.matrix.rows(), 3);
    const double expected = std::numbers::sqrt2 / 5;  // sqrt(2) / p(0) with p(0) = 5
    for (int i = 0; i < 3; ++i)
        for (int j = 0; j < 3; ++j) EXPECT_NEAR(st.matrix(i, j), i == 0 && j == 1 ? expected : 0.0, 1e-5);
    ASSERT_TRUE(st.a.has_value());
    EXPECT_NEAR(*st.a, expected, 1e-5);
    EXPECT_NEAR(*st.b, 0.0, 1e-5);
    EXPECT_NEAR(*st.c, 0.0, 1e-5);
    const BlockInvariants bi = classify(st.matrix);
    EXPECT_EQ(bi.classification, SplittingClass::nilpotent);
    EXPECT_NEAR(bi.det_block, 0.0, 1e-9);
}

TEST(Splitting, SekigawaRealEigenvaluesVanish) {
    const MetricField f = entry("sekigawa", "exp(u)").field;
    std::mt19937_64 rng(32);
    const Vec x = oracle::uniform(rng, 3, -2, 2);
    const SplittingTensor st = splitting_tensor(f, x, NullityField(f, x).as_field());
    ASSERT_EQ(st.matrix.rows(), 2);
    const BlockInvariants bi = classify(st.matrix);
    EXPECT_LT(bi.max_abs_real_eigenvalue, 1e-5);
    EXPECT_NE(bi.classification, SplittingClass::invalid);
}

TEST(Splitting, LinearInT) {
    const MetricField f = entry("conullity3").field;
    std::mt19937_64 rng(33);
    for (int k = 0; k < 5; ++k) {
        const Vec x = oracle::uniform(rng, 4, -2, 2);
        const NullityVectorField t = NullityField(f, x).as_field();
        const NullityVectorField t2 = [t](std::span<const double> y, std::span<const double> ref) {
            Vec v = t(y, ref);
            for (double& c : v) c *= 2.0;
            return v;
        };
        SplittingOptions loose;
        loose.require_unit = false;
        const SplittingTensor a = splitting_tensor(f, x, t);
        const SplittingTensor b = splitting_tensor(f, x, t2, loose, a.basis);
        EXPECT_LT((b.matrix - 2.0 * a.matrix).max_abs(), 1e-6);
        EXPECT_THROW(splitting_tensor(f, x, t2), Error);  // not unit
    }
}

TEST(Splitting, CatalogTensorsAreNeverInvalid) {
    std::mt19937_64 rng(34);
    for (const auto& [name, p] : std::vector<std::pair<std::string, std::string>>{
             {"sekigawa", "exp(u)"}, {"sekigawa", "2+u*u"}, {"sekigawa", "cos(u)+2"}, {"conullity3", ""}}) {
        const MetricField f = entry(name, p).field;
        int done = 0;
        while (done < 10) {
            const Vec x = oracle::uniform(rng, f.dim(), -2, 2);
            if (!f.in_domain(x) || std::abs(curvature(f, x).scalar_trace) < 1e-4) continue;
            ++done;
            const BlockInvariants bi = classify(splitting_tensor(f, x, NullityField(f, x).as_field()).matrix);
            EXPECT_FALSE(bi.invalid) << name << " " << p;
            EXPECT_LT(bi.max_abs_real_eigenvalue, 1e-4) << name << " " << p;
        }
    }
}

TEST(Riccati, ClosedFormExamples) {
    std::mt19937_64 rng(35);
    const Matrix c0 = random_matrix(rng, 3, 0.5);
    EXPECT_EQ(riccati_closed_form(c0, 0.0), c0);

    Matrix nil(3, 3, 0.0);
    nil(0, 1) = 0.7;
    for (double t : {0.5, 1.0, 10.0}) EXPECT_LT((riccati_closed_form(nil, t) - nil).max_abs(), 1e-15);

    const Matrix c1 = riccati_closed_form(kRotation, 1.0);
    EXPECT_NEAR(c1.trace(), -1.0, 1e-14);
    EXPECT_NEAR(det_block(c1), 0.5, 1e-14);

    try {
        riccati_closed_form(Matrix::identity(2), 1.0);
        FAIL() << "expected blow-up";
    } catch (const BlowUpError& e) {
        EXPECT_EQ(e.critical_t(), 1.0);
    }
}

TEST(Riccati, OdeExamples) {
    const auto zero = riccati_ode(Matrix(3, 3, 0.0), 2.0, 20);
    ASSERT_EQ(zero.size(), 21u);
    for (const auto& s : zero) EXPECT_EQ(s.c.max_abs(), 0.0);

    std::mt19937_64 rng(36);
    std::uniform_real_distribution<double> u(-1, 1);
    for (int k = 0; k < 5; ++k) {
        const double a = u(rng), b = u(rng), c = u(rng);
        const Matrix c0{{0, a, c}, {0, 0, b}, {0, 0, 0}};
        for (const auto& s : riccati_ode(c0, 3.0, 30)) {
            EXPECT_NEAR(s.c(0, 2), c + s.t * a * b, 1e-12);
            EXPECT_NEAR(s.c(0, 1), a, 1e-12);
            EXPECT_NEAR(s.c(1, 2), b, 1e-12);
        }
    }

    for (const auto& s : riccati_ode(kRotation, 5.0, 1000))
        EXPECT_LT((s.c - riccati_closed_form(kRotation, s.t)).max_abs(), 1e-7) << s.t;
}

TEST(Riccati, OdeMatchesClosedFormOnRandomMatrices) {
    std::mt19937_64 rng(37);
    for (int k = 0; k < 100; ++k) {
        const Matrix c0 = random_matrix(rng, 3, 1.0);
        for (const auto& s : riccati_ode(c0, 0.5, 100))
            EXPECT_LT((s.c - riccati_closed_form(c0, s.t)).max_abs(), 1e-7);
    }
}

TEST(Riccati, CocycleProperty) {
    std::mt19937_64 rng(38);
    std::uniform_real_distribution<double> u(0, 0.4);
    for (int k = 0; k < 50; ++k) {
        const Matrix c0 = random_matrix(rng, 3, 1.0);
        const double t = u(rng), s = u(rng);
        const Matrix direct = riccati_closed_form(c0, t + s);
        const Matrix stepped = riccati_closed_form(riccati_closed_form(c0, t), s);
        EXPECT_LT((direct - stepped).max_abs(), 1e-9);
    }
}

TEST(TraceDet, Examples) {
    const auto [tr, det] = trace_det_evolution(0.0, 1.0, 1.0);
    EXPECT_NEAR(tr, -1.0, 1e-15);
    EXPECT_NEAR(det, 0.5, 1e-15);
    for (double t : {0.0, 0.3, 2.0}) EXPECT_EQ(trace_det_evolution(0.7, 0.0, t).second, 0.0);
    const auto [tr0, det0] = trace_det_evolution(1.3, -0.4, 0.0);
    EXPECT_EQ(tr0, 1.3);
    EXPECT_EQ(det0, -0.4);
    EXPECT_THROW(trace_det_evolution(2.0, 1.0, 1.0), BlowUpError);  // (1 - t)^2 = 0
}

TEST(TraceDet, AgreesWithClosedForm) {
    std::mt19937_64 rng(39);
    std::uniform_real_distribution<double> u(-1, 1), ut(0, 0.5);
    for (int k = 0; k < 50; ++k) {
        // 2x2 block padded with the kernel row, as for conullity-3 splitting tensors
        Matrix c0(3, 3, 0.0);
        for (int i = 0; i < 2; ++i)
            for (int j = 0; j < 2; ++j) c0(i, j) = u(rng);
        const double t = ut(rng);
        const Matrix c = riccati_closed_form(c0, t);
        const auto [tr, det] = trace_det_evolution(c0.trace(), det_block(c0), t);
        EXPECT_NEAR(c.trace(), tr, 1e-9);
        EXPECT_NEAR(det_block(c), det, 1e-9);
    }
}

TEST(Classify, Examples) {
    EXPECT_EQ(classify(Matrix(3, 3, 0.0)).classification, SplittingClass::zero);

    Matrix nil(3, 3, 0.0);
    nil(0, 2) = 1.5;
    const BlockInvariants n = classify(nil);
    EXPECT_EQ(n.classification, SplittingClass::nilpotent);
    EXPECT_EQ(n.det_block, 0.0);

    const BlockInvariants cp = classify(Matrix{{1, 2, 0}, {-2, 1, 0}, {0, 0, 0}});
    EXPECT_EQ(cp.classification, SplittingClass::complex_pair);
    EXPECT_NEAR(cp.trace, 2.0, 1e-15);
    EXPECT_NEAR(cp.det_block, 5.0, 1e-14);

    const BlockInvariants bad = classify(Matrix{{1, 0, 0}, {0, 0, 0}, {0, 0, 0}});
    EXPECT_EQ(bad.classification, SplittingClass::invalid);
    EXPECT_TRUE(bad.invalid);
    EXPECT_STREQ(to_string(SplittingClass::complex_pair), "complex_pair");
}

TEST(Classify, DetBlockIsPairwiseEigenvalueSum) {
    std::mt19937_64 rng(40);
    for (int k = 0; k < 50; ++k) {
        const Matrix c = random_matrix(rng, 3, 2.0);
        const auto ev = eigenvalues(c);
        const Complex s = ev[0] * ev[1] + ev[0] * ev[2] + ev[1] * ev[2];
        EXPECT_NEAR(det_block(c), s.real(), 1e-8);
        EXPECT_NEAR(s.imag(), 0.0, 1e-8);
    }
}

TEST(Classify, DetBlockIsSimilarityInvariant) {
    std::mt19937_64 rng(41);
    const Matrix c = random_matrix(rng, 3, 1.0);
    for (int k = 0; k < 20; ++k) {
        const Matrix q = random_orthogonal(rng, 3);
        EXPECT_NEAR(det_block(q.transpose() * c * q), det_block(c), 1e-9);
    }
}

TEST(Evolve, Conullity3FromOrigin) {
    const MetricField f = entry("conullity3").field;
    const EvolutionReport r = evolve_along_nullity_geodesic(f, Vec{0, 0, 0, 0}, 1.0, 16);
    EXPECT_FALSE(r.aborted) << r.abort_reason;
    EXPECT_EQ(r.nullity, 1);
    EXPECT_EQ(r.samples.size(), 17u);
    EXPECT_NEAR(r.c0(0, 1), std::numbers::sqrt2 / 5, 1e-5);
    EXPECT_LT(r.max_deviation, 1e-4);
    EXPECT_LT(r.max_trace_divergence_residual, 1e-4);
    for (const auto& s : r.samples) {
        EXPECT_EQ(s.classification, SplittingClass::nilpotent);
        EXPECT_LT((s.computed - r.c0).max_abs(), 1e-4);  // C0^2 = 0, so C(t) = C0
    }
}

TEST(Evolve, ProductStaysZero) {
    const MetricField f = entry("product").field;
    const EvolutionReport r = evolve_along_nullity_geodesic(f, Vec{1.2, 0.1, 0.0, 0.0}, 1.0, 16);
    EXPECT_FALSE(r.aborted) << r.abort_reason;
    EXPECT_EQ(r.nullity, 2);
    for (const auto& s : r.samples) EXPECT_LT(s.computed.max_abs(), 1e-6);
}

TEST(Evolve, SekigawaFollowsRiccati) {
    const MetricField f = entry("sekigawa", "2+u*u").field;
    const EvolutionReport r = evolve_along_nullity_geodesic(f, Vec{0.3, 0.5, -0.2}, 1.0, 16);
    EXPECT_FALSE(r.aborted) << r.abort_reason;
    EXPECT_LT(r.max_deviation, 1e-4);
    EXPECT_LT(r.max_trace_divergence_residual, 1e-4);
}
