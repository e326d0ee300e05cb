#pragma once

/**
 * @file metricspace.hpp
 * @brief Riemannian metrics on a single coordinate chart, with 2-jet access,
 * and the catalog of example metrics.
 *
 * A `MetricField` answers three questions at a point: is it in the chart's
 * domain, what is g there, and what are the first and second coordinate
 * derivatives of g. Catalog metrics are built from coframe 1-forms whose
 * coefficients are `Jet2` values, so their jets are exact; any metric can
 * instead be given value-only and differentiated by central differences.
 */

#include <geonull/error.hpp>
#include <geonull/exprcalc.hpp>
#include <geonull/numcore.hpp>
#include <geonull/tensor.hpp>

#include <cmath>
#include <functional>
#include <map>
#include <numbers>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace geonull {

inline constexpr int kMaxChartDim = 6;

/// g, dg(k, i, j) = d_k g_ij and ddg(k, l, i, j) = d_k d_l g_ij at one point.
struct MetricJet {
    Matrix g;
    Tensor3 dg;
    Tensor4 ddg;
};

enum class Provenance { analytic, finite_difference };

inline const char* to_string(Provenance p) {
    return p == Provenance::analytic ? "analytic" : "finite-difference";
}

class MetricField {
public:
    /// Row-major n*n metric coefficients as jets over the chart coordinates.
    using JetFn = std::function<std::vector<Jet2>(std::span<const double>)>;
    using ValueFn = std::function<Matrix(std::span<const double>)>;
    using DomainFn = std::function<bool(std::span<const double>)>;
    /// A g-orthonormal frame adapted to the geometry, if the metric has one.
    using FrameFn = std::function<std::vector<Vec>(std::span<const double>)>;

    MetricField() = default;

    static MetricField analytic(std::string name, std::vector<std::string> coordinates, JetFn jets, DomainFn domain) {
        MetricField f;
        f.name_ = std::move(name);
        f.coordinates_ = std::move(coordinates);
        f.jets_ = std::move(jets);
        f.domain_ = std::move(domain);
        f.provenance_ = Provenance::analytic;
        return f;
    }

    /// A metric known only by value; jets come from central differences with step h.
    static MetricField from_values(std::string name, std::vector<std::string> coordinates, ValueFn values,
                                   DomainFn domain, double h) {
        MetricField f;
        f.name_ = std::move(name);
        f.coordinates_ = std::move(coordinates);
        f.values_ = std::move(values);
        f.domain_ = std::move(domain);
        f.provenance_ = Provenance::finite_difference;
        f.fd_step_ = h;
        return f;
    }

    const std::string& name() const noexcept { return name_; }
    int dim() const noexcept { return static_cast<int>(coordinates_.size()); }
    const std::vector<std::string>& coordinates() const noexcept { return coordinates_; }
    Provenance provenance() const noexcept { return provenance_; }
    double fd_step() const noexcept { return fd_step_; }

    bool in_domain(std::span<const double> x) const {
        if (static_cast<int>(x.size()) != dim()) return false;
        for (double v : x)
            if (!std::isfinite(v)) return false;
        return !domain_ || domain_(x);
    }

    void require_domain(std::span<const double> x) const {
        if (static_cast<int>(x.size()) != dim())
            throw Error("point has dimension " + std::to_string(x.size()) + ", chart has " + std::to_string(dim()));
        if (!in_domain(x)) throw DomainError("point outside the domain of metric '" + name_ + "'");
    }

    Matrix g(std::span<const double> x) const {
        require_domain(x);
        if (values_) return values_(x);
        const auto e = jets_(x);
        const int n = dim();
        Matrix m(n, n);
        for (int i = 0; i < n; ++i)
            for (int j = 0; j < n; ++j) m(i, j) = e[static_cast<std::size_t>(i * n + j)].value();
        return m;
    }

    MetricJet jet(std::span<const double> x) const;

    /// Same metric values, jets replaced by central differences with step h.
    MetricField with_fd_jets(double h) const {
        MetricField f = *this;
        const MetricField base = *this;
        f.values_ = [base](std::span<const double> x) { return base.g(x); };
        f.jets_ = nullptr;
        f.provenance_ = Provenance::finite_difference;
        f.fd_step_ = h;
        return f;
    }

    void set_adapted_frame(FrameFn frame) { frame_ = std::move(frame); }
    bool has_adapted_frame() const noexcept { return static_cast<bool>(frame_); }
    std::vector<Vec> adapted_frame(std::span<const double> x) const {
        if (!frame_) throw Error("metric '" + name_ + "' has no adapted frame");
        return frame_(x);
    }

    const JetFn& jet_function() const noexcept { return jets_; }
    const DomainFn& domain_function() const noexcept { return domain_; }

private:
    std::string name_;
    std::vector<std::string> coordinates_;
    JetFn jets_;
    ValueFn values_;
    DomainFn domain_;
    FrameFn frame_;
    Provenance provenance_ = Provenance::analytic;
    double fd_step_ = 0.0;
};

/// Central-difference 2-jet of the metric values, second order in h. Every
/// stencil point must lie in the domain.
inline MetricJet fd_jet(const MetricField& field, std::span<const double> x, double h) {
    const int n = field.dim();
    field.require_domain(x);
    Vec p(x.begin(), x.end());
    auto at = [&](int a, double sa, int b, double sb) {
        Vec q = p;
        if (a >= 0) q[static_cast<std::size_t>(a)] += sa;
        if (b >= 0) q[static_cast<std::size_t>(b)] += sb;
        if (!field.in_domain(q)) throw DomainError("finite-difference stencil leaves the domain of '" + field.name() + "'");
        return field.g(q);
    };

    MetricJet j{at(-1, 0, -1, 0), Tensor3(n), Tensor4(n)};
    const double h2 = h * h;
    for (int k = 0; k < n; ++k) {
        const Matrix gp = at(k, h, -1, 0), gm = at(k, -h, -1, 0);
        for (int a = 0; a < n; ++a)
            for (int b = 0; b < n; ++b) {
                j.dg(k, a, b) = (gp(a, b) - gm(a, b)) / (2.0 * h);
                j.ddg(k, k, a, b) = (gp(a, b) - 2.0 * j.g(a, b) + gm(a, b)) / h2;
            }
        for (int l = k + 1; l < n; ++l) {
            const Matrix pp = at(k, h, l, h), pm = at(k, h, l, -h), mp = at(k, -h, l, h), mm = at(k, -h, l, -h);
            for (int a = 0; a < n; ++a)
                for (int b = 0; b < n; ++b) {
                    const double v = (pp(a, b) - pm(a, b) - mp(a, b) + mm(a, b)) / (4.0 * h2);
                    j.ddg(k, l, a, b) = v;
                    j.ddg(l, k, a, b) = v;
                }
        }
    }
    return j;
}

inline MetricJet MetricField::jet(std::span<const double> x) const {
    require_domain(x);
    if (!jets_) return fd_jet(*this, x, fd_step_);
    const auto e = jets_(x);
    const int n = dim();
    MetricJet j{Matrix(n, n), Tensor3(n), Tensor4(n)};
    for (int a = 0; a < n; ++a)
        for (int b = 0; b < n; ++b) {
            const Jet2& c = e[static_cast<std::size_t>(a * n + b)];
            j.g(a, b) = c.value();
            for (int k = 0; k < n; ++k) {
                j.dg(k, a, b) = c.d(k);
                for (int l = 0; l < n; ++l) j.ddg(k, l, a, b) = c.dd(k, l);
            }
        }
    return j;
}

/// Smallest eigenvalue of g(x); positive on the domain of a valid metric.
inline double smallest_metric_eigenvalue(const MetricField& field, std::span<const double> x) {
    return symmetric_eigenvalues(field.g(x)).front();
}

// ---------------------------------------------------------------------------
// Catalog
// ---------------------------------------------------------------------------

struct CatalogOptions {
    double box = 3.0;       // every coordinate restricted to |x_i| <= box
    double p_floor = 1e-3;  // warping functions must exceed this
};

namespace detail {

inline std::vector<Jet2> chart_variables(std::span<const double> x) {
    const int n = static_cast<int>(x.size());
    std::vector<Jet2> v;
    v.reserve(x.size());
    for (int i = 0; i < n; ++i) v.push_back(Jet2::variable(n, i, x[static_cast<std::size_t>(i)]));
    return v;
}

/// g = Theta^T Theta for a coframe matrix Theta (rows are 1-forms).
inline std::vector<Jet2> metric_from_coframe(const std::vector<std::vector<Jet2>>& theta, int n) {
    std::vector<Jet2> g(static_cast<std::size_t>(n * n));
    for (int i = 0; i < n; ++i)
        for (int j = i; j < n; ++j) {
            Jet2 s = Jet2::constant(n, 0.0);
            for (const auto& row : theta) s += row[static_cast<std::size_t>(i)] * row[static_cast<std::size_t>(j)];
            g[static_cast<std::size_t>(i * n + j)] = s;
            g[static_cast<std::size_t>(j * n + i)] = s;
        }
    return g;
}

inline bool in_box(std::span<const double> x, double box) {
    for (double v : x)
        if (std::abs(v) > box) return false;
    return true;
}

/// Evaluates p, declared over a subset of the chart coordinates, as a jet over the full chart.
inline Jet2 embedded_jet(const ExprAst& p, const std::vector<Jet2>& chart, const std::vector<int>& slots) {
    std::vector<Jet2> args;
    args.reserve(slots.size());
    for (int s : slots) args.push_back(chart[static_cast<std::size_t>(s)]);
    return eval_jet2(p, std::span<const Jet2>(args));
}

inline double embedded_value(const ExprAst& p, std::span<const double> x, const std::vector<int>& slots) {
    Vec args;
    args.reserve(slots.size());
    for (int s : slots) args.push_back(x[static_cast<std::size_t>(s)]);
    return eval(p, args);
}

inline bool warp_ok(const ExprAst& p, std::span<const double> x, const std::vector<int>& slots, double floor) {
    try {
        return embedded_value(p, x, slots) > floor;
    } catch (const DomainError&) {
        return false;
    }
}

} // namespace detail

inline MetricField catalog_euclidean(int n) {
    if (n < 1 || n > kMaxChartDim) throw Error("euclidean: dimension must be in [1, 6]");
    std::vector<std::string> names;
    for (int i = 1; i <= n; ++i) names.push_back("x" + std::to_string(i));
    auto jets = [n](std::span<const double>) {
        std::vector<Jet2> g(static_cast<std::size_t>(n * n), Jet2::constant(n, 0.0));
        for (int i = 0; i < n; ++i) g[static_cast<std::size_t>(i * n + i)] = Jet2::constant(n, 1.0);
        return g;
    };
    return MetricField::analytic("euclidean(" + std::to_string(n) + ")", std::move(names), jets, nullptr);
}

/// Round sphere of radius r in (theta, phi), theta kept 0.1 away from the poles.
inline MetricField catalog_sphere(double radius) {
    if (!(radius > 0.0)) throw Error("sphere: radius must be positive");
    auto jets = [radius](std::span<const double> x) {
        const auto v = detail::chart_variables(x);
        const Jet2 s = sin(v[0]);
        const double r2 = radius * radius;
        return std::vector<Jet2>{Jet2::constant(2, r2), Jet2::constant(2, 0.0), Jet2::constant(2, 0.0), r2 * (s * s)};
    };
    auto domain = [](std::span<const double> x) { return x[0] > 0.1 && x[0] < std::numbers::pi - 0.1; };
    char buf[64];
    std::snprintf(buf, sizeof buf, "sphere(%.17g)", radius);
    return MetricField::analytic(buf, {"theta", "phi"}, jets, domain);
}

/// The flat plane in polar coordinates (r, phi), r > 1e-3.
inline MetricField catalog_polar_plane() {
    auto jets = [](std::span<const double> x) {
        const auto v = detail::chart_variables(x);
        return std::vector<Jet2>{Jet2::constant(2, 1.0), Jet2::constant(2, 0.0), Jet2::constant(2, 0.0), v[0] * v[0]};
    };
    auto domain = [](std::span<const double> x) { return x[0] > 1e-3; };
    return MetricField::analytic("polar_plane", {"r", "phi"}, jets, domain);
}

/// Riemannian product: block-diagonal metric on the concatenated chart.
inline MetricField catalog_product(const MetricField& a, const MetricField& b) {
    const int na = a.dim(), nb = b.dim(), n = na + nb;
    if (n > kMaxChartDim) throw Error("product: total dimension exceeds 6");
    std::vector<std::string> names = a.coordinates();
    for (const auto& s : b.coordinates()) {
        std::string name = s;
        while (std::find(names.begin(), names.end(), name) != names.end()) name += "_b";
        names.push_back(name);
    }
    auto split = [na, n](std::span<const double> x) {
        return std::pair{Vec(x.begin(), x.begin() + na), Vec(x.begin() + na, x.begin() + n)};
    };
    auto domain = [a, b, split](std::span<const double> x) {
        const auto [xa, xb] = split(x);
        return a.in_domain(xa) && b.in_domain(xb);
    };
    const std::string name = a.name() + "x" + b.name();

    if (a.provenance() == Provenance::analytic && b.provenance() == Provenance::analytic) {
        auto jets = [a, b, na, nb, n, split](std::span<const double> x) {
            const auto [xa, xb] = split(x);
            const auto ja = a.jet_function()(xa);
            const auto jb = b.jet_function()(xb);
            std::vector<Jet2> g(static_cast<std::size_t>(n * n), Jet2::constant(n, 0.0));
            // re-home each factor's jets into the product chart's variable slots
            auto rehome = [n](const Jet2& src, int offset, int m) {
                Jet2 r = Jet2::constant(n, src.value());
                for (int i = 0; i < m; ++i) {
                    r.d_ref(offset + i) = src.d(i);
                    for (int j = i; j < m; ++j) r.dd_ref(offset + i, offset + j) = src.dd(i, j);
                }
                return r;
            };
            for (int i = 0; i < na; ++i)
                for (int j = 0; j < na; ++j)
                    g[static_cast<std::size_t>(i * n + j)] = rehome(ja[static_cast<std::size_t>(i * na + j)], 0, na);
            for (int i = 0; i < nb; ++i)
                for (int j = 0; j < nb; ++j)
                    g[static_cast<std::size_t>((na + i) * n + na + j)] =
                        rehome(jb[static_cast<std::size_t>(i * nb + j)], na, nb);
            return g;
        };
        return MetricField::analytic(name, names, jets, domain);
    }
    auto values = [a, b, split](std::span<const double> x) {
        const auto [xa, xb] = split(x);
        return block_diagonal(a.g(xa), b.g(xb));
    };
    return MetricField::from_values(name, names, values, domain, std::max(a.fd_step(), b.fd_step()));
}

/// g = p(x,u)^2 dx^2 + (du - v dx)^2 + (dv + u dx)^2 on the chart (x, u, v).
inline MetricField catalog_sekigawa(const ExprAst& p, CatalogOptions opts = {}) {
    if (p.variables() != std::vector<std::string>{"x", "u"})
        throw Error("sekigawa: p must be declared over the variables (x, u)");
    const std::vector<int> slots{0, 1};
    auto jets = [p, slots](std::span<const double> x) {
        const auto c = detail::chart_variables(x);
        const Jet2 pj = detail::embedded_jet(p, c, slots);
        if (!(pj.value() > 0.0)) throw DomainError("sekigawa: p is not positive at the evaluation point");
        const Jet2 zero = Jet2::constant(3, 0.0), one = Jet2::constant(3, 1.0);
        const std::vector<std::vector<Jet2>> theta{
            {pj, zero, zero},
            {-c[2], one, zero},
            {c[1], zero, one},
        };
        return detail::metric_from_coframe(theta, 3);
    };
    auto domain = [p, slots, opts](std::span<const double> x) {
        return detail::in_box(x, opts.box) && detail::warp_ok(p, x, slots, opts.p_floor);
    };
    return MetricField::analytic("sekigawa[p=" + p.source() + "]", {"x", "u", "v"}, jets, domain);
}

/// g = (p dx)^2 + (du - (v+w) dx)^2 + (dv + (u+w) dx)^2 + (dw - (v-u) dx)^2 on
/// the chart (x, u, v, w), with p = p(x, u, w).
///
/// The adapted frame is the orthonormal frame dual to the coframe, rotated in
/// the (u, w) plane: e1 = (d_u + d_w)/sqrt2, e2 = dual of p dx, e3 = (d_u - d_w)/sqrt2.
inline MetricField catalog_conullity3(const ExprAst& p, CatalogOptions opts = {}) {
    if (p.variables() != std::vector<std::string>{"x", "u", "w"})
        throw Error("conullity3: p must be declared over the variables (x, u, w)");
    const std::vector<int> slots{0, 1, 3};
    auto jets = [p, slots](std::span<const double> x) {
        const auto c = detail::chart_variables(x);
        const Jet2 pj = detail::embedded_jet(p, c, slots);
        if (!(pj.value() > 0.0)) throw DomainError("conullity3: p is not positive at the evaluation point");
        const Jet2 zero = Jet2::constant(4, 0.0), one = Jet2::constant(4, 1.0);
        const Jet2 &u = c[1], &v = c[2], &w = c[3];
        const std::vector<std::vector<Jet2>> theta{
            {pj, zero, zero, zero},
            {-(v + w), one, zero, zero},
            {u + w, zero, one, zero},
            {-(v - u), zero, zero, one},
        };
        return detail::metric_from_coframe(theta, 4);
    };
    auto domain = [p, slots, opts](std::span<const double> x) {
        return detail::in_box(x, opts.box) && detail::warp_ok(p, x, slots, opts.p_floor);
    };
    MetricField f = MetricField::analytic("conullity3[p=" + p.source() + "]", {"x", "u", "v", "w"}, jets, domain);
    f.set_adapted_frame([p, slots](std::span<const double> x) {
        const double pv = detail::embedded_value(p, x, slots);
        const double u = x[1], v = x[2], w = x[3];
        const double r = 1.0 / std::numbers::sqrt2;
        return std::vector<Vec>{
            {0.0, r, 0.0, r},
            {1.0 / pv, (v + w) / pv, -(u + w) / pv, (v - u) / pv},
            {0.0, r, 0.0, -r},
        };
    });
    return f;
}

inline MetricField catalog_sekigawa(std::string_view p, CatalogOptions opts = {}) {
    return catalog_sekigawa(parse(p, {"x", "u"}), opts);
}
inline MetricField catalog_conullity3(std::string_view p, CatalogOptions opts = {}) {
    return catalog_conullity3(parse(p, {"x", "u", "w"}), opts);
}

// ---------------------------------------------------------------------------
// Catalog entries with known-truth annotations
// ---------------------------------------------------------------------------

struct CatalogParams {
    int dim = 4;              // euclidean
    double radius = 1.0;      // sphere
    std::string p;            // sekigawa / conullity3 warping function
    int flat_dim = 2;         // product: sphere(radius) x euclidean(flat_dim)
    CatalogOptions options;
};

struct CatalogEntry {
    std::string name;
    std::map<std::string, std::string> parameters;
    MetricField field;
    std::optional<int> expected_conullity;     // where the curvature does not vanish
    std::vector<Vec> expected_kernel;          // coordinate components spanning ker R
    /// Closed-form sectional curvature of the non-flat plane (conullity 2) or
    /// the printed scalar-curvature formula (conullity 3), when one exists.
    std::function<double(std::span<const double>)> expected_scalar;
    std::string expected_scalar_text;
    std::optional<ExprAst> warp;
    double p_floor = 1e-3;
};

inline const std::vector<std::string>& catalog_names() {
    static const std::vector<std::string> names{"euclidean", "sphere", "product", "sekigawa", "conullity3"};
    return names;
}

inline CatalogEntry make_catalog_entry(const std::string& name, const CatalogParams& params) {
    CatalogEntry e;
    e.name = name;
    e.p_floor = params.options.p_floor;
    auto fmt = [](double v) { return detail::format_number(v); };
    if (name == "euclidean") {
        e.parameters["dim"] = std::to_string(params.dim);
        e.field = catalog_euclidean(params.dim);
        e.expected_conullity = 0;
        for (int i = 0; i < params.dim; ++i) {
            Vec v(static_cast<std::size_t>(params.dim), 0.0);
            v[static_cast<std::size_t>(i)] = 1.0;
            e.expected_kernel.push_back(v);
        }
        e.expected_scalar = [](std::span<const double>) { return 0.0; };
        e.expected_scalar_text = "0";
    } else if (name == "sphere") {
        e.parameters["radius"] = fmt(params.radius);
        e.field = catalog_sphere(params.radius);
        e.expected_conullity = 2;
        const double k = 1.0 / (params.radius * params.radius);
        e.expected_scalar = [k](std::span<const double>) { return k; };
        e.expected_scalar_text = "1/r^2";
    } else if (name == "product") {
        e.parameters["radius"] = fmt(params.radius);
        e.parameters["flat_dim"] = std::to_string(params.flat_dim);
        e.field = catalog_product(catalog_sphere(params.radius), catalog_euclidean(params.flat_dim));
        e.expected_conullity = 2;
        const int n = 2 + params.flat_dim;
        for (int i = 2; i < n; ++i) {
            Vec v(static_cast<std::size_t>(n), 0.0);
            v[static_cast<std::size_t>(i)] = 1.0;
            e.expected_kernel.push_back(v);
        }
        const double k = 1.0 / (params.radius * params.radius);
        e.expected_scalar = [k](std::span<const double>) { return k; };
        e.expected_scalar_text = "1/r^2";
    } else if (name == "sekigawa") {
        const std::string src = params.p.empty() ? "exp(u)" : params.p;
        e.parameters["p"] = src;
        ExprAst p = parse(src, {"x", "u"});
        e.field = catalog_sekigawa(p, params.options);
        e.warp = p;
        e.expected_conullity = 2;
        e.expected_kernel = {{0.0, 0.0, 1.0}};
        e.expected_scalar = [p](std::span<const double> x) {
            const Vec xu{x[0], x[1]};
            const Jet2 j = eval_jet2(p, xu);
            return -j.dd(1, 1) / j.value();
        };
        e.expected_scalar_text = "-(1/p) p_uu";
    } else if (name == "conullity3") {
        const std::string src = params.p.empty() ? "3 + cos(u) + cos(w)" : params.p;
        e.parameters["p"] = src;
        ExprAst p = parse(src, {"x", "u", "w"});
        e.field = catalog_conullity3(p, params.options);
        e.warp = p;
        e.expected_conullity = 3;
        e.expected_kernel = {{0.0, 0.0, 1.0, 0.0}};
        e.expected_scalar = [p](std::span<const double> x) {
            const Vec xuw{x[0], x[1], x[3]};
            const Jet2 j = eval_jet2(p, xuw);
            return -2.0 / j.value() * (j.dd(1, 1) + j.dd(2, 2));
        };
        e.expected_scalar_text = "-(2/p) (p_uu + p_ww)";
    } else {
        throw Error("unknown catalog metric '" + name + "'");
    }
    return e;
}

} // namespace geonull
