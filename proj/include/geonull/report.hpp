#pragma once

// Serialization: deterministic JSON (sorted keys, 17 significant digits) and
// RFC 4180 CSV, plus the single-point analysis report.

#include <geonull/curvature.hpp>
#include <geonull/metricspace.hpp>
#include <geonull/splitting.hpp>

#include <nlohmann/json.hpp>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <string>
#include <vector>

namespace geonull {

using Json = nlohmann::json;

inline constexpr const char* kSchema = "geonull/1";

namespace detail {

inline void write_json(const Json& j, std::string& out, int indent, int depth) {
    auto newline = [&](int d) {
        if (indent < 0) return;
        out += '\n';
        out.append(static_cast<std::size_t>(indent * d), ' ');
    };
    switch (j.type()) {
    case Json::value_t::object: {
        if (j.empty()) {
            out += "{}";
            return;
        }
        out += '{';
        bool first = true;
        for (auto it = j.begin(); it != j.end(); ++it) {  // std::map: keys already sorted
            if (!first) out += ',';
            first = false;
            newline(depth + 1);
            out += Json(it.key()).dump();
            out += indent < 0 ? ":" : ": ";
            write_json(it.value(), out, indent, depth + 1);
        }
        newline(depth);
        out += '}';
        return;
    }
    case Json::value_t::array: {
        if (j.empty()) {
            out += "[]";
            return;
        }
        // Arrays of scalars stay on one line.
        const bool flat = std::none_of(j.begin(), j.end(), [](const Json& v) { return v.is_structured(); });
        out += '[';
        bool first = true;
        for (const auto& v : j) {
            if (!first) out += flat && indent >= 0 ? ", " : ",";
            first = false;
            if (!flat) newline(depth + 1);
            write_json(v, out, indent, depth + 1);
        }
        if (!flat) newline(depth);
        out += ']';
        return;
    }
    case Json::value_t::number_float: {
        double v = j.get<double>();
        if (v == 0.0) v = 0.0;  // no "-0"
        if (!std::isfinite(v)) {
            out += "null";
            return;
        }
        char buf[40];
        std::snprintf(buf, sizeof buf, "%.17g", v);
        out += buf;
        return;
    }
    default: out += j.dump(); return;
    }
}

} // namespace detail

/// Deterministic JSON text: sorted keys, doubles with 17 significant digits,
/// non-finite doubles as null.
inline std::string to_json_text(const Json& j, int indent = 2) {
    std::string out;
    detail::write_json(j, out, indent, 0);
    out += '\n';
    return out;
}

inline Json to_json(const Matrix& m) {
    Json rows = Json::array();
    for (int i = 0; i < m.rows(); ++i) {
        Json r = Json::array();
        for (int j = 0; j < m.cols(); ++j) r.push_back(m(i, j));
        rows.push_back(r);
    }
    return rows;
}

inline Json to_json(const std::vector<Vec>& vs) {
    Json a = Json::array();
    for (const Vec& v : vs) a.push_back(v);
    return a;
}

inline Json to_json(const std::vector<Complex>& zs) {
    Json a = Json::array();
    for (const Complex& z : zs) a.push_back({z.real(), z.imag()});
    return a;
}

// ---------------------------------------------------------------------------
// CSV
// ---------------------------------------------------------------------------

inline std::string csv_field(const std::string& s) {
    if (s.find_first_of(",\"\r\n") == std::string::npos) return s;
    std::string q = "\"";
    for (char c : s) {
        if (c == '"') q += '"';
        q += c;
    }
    q += '"';
    return q;
}

inline std::string csv_row(const std::vector<std::string>& fields) {
    std::string line;
    for (std::size_t i = 0; i < fields.size(); ++i) {
        if (i) line += ',';
        line += csv_field(fields[i]);
    }
    line += "\r\n";
    return line;
}

inline std::string csv_number(double v) {
    if (!std::isfinite(v)) return "";
    return detail::format_number(v == 0.0 ? 0.0 : v);
}

// ---------------------------------------------------------------------------
// Analysis report
// ---------------------------------------------------------------------------

struct AnalysisOptions {
    std::optional<double> rel_tol;
    double splitting_step = 1e-3;
    double classify_tol = 1e-5;
    bool timings = false;  // wall-clock timings make output non-reproducible
};

inline Json metric_descriptor(const CatalogEntry& e) {
    Json m;
    m["name"] = e.name;
    m["chart"] = e.field.name();
    m["coordinates"] = e.field.coordinates();
    m["parameters"] = e.parameters;
    m["provenance"] = to_string(e.field.provenance());
    if (e.field.provenance() == Provenance::finite_difference) m["fd_step"] = e.field.fd_step();
    return m;
}

inline Json splitting_json(const SplittingTensor& st, const BlockInvariants& bi) {
    Json s;
    s["T"] = st.T;
    s["basis"] = to_json(st.basis);
    s["matrix"] = to_json(st.matrix);
    s["classification"] = to_string(bi.classification);
    s["trace"] = bi.trace;
    s["det_block"] = bi.det_block;
    s["eigenvalues"] = to_json(bi.eigenvalues);
    s["max_abs_real_eigenvalue"] = bi.max_abs_real_eigenvalue;
    if (st.a) s["normal_form"] = {{"a", *st.a}, {"b", *st.b}, {"c", *st.c}};
    return s;
}

/// Curvature, nullity and (when defined) the splitting tensor at one point.
inline Json analyze_point(const CatalogEntry& entry, std::span<const double> x, const AnalysisOptions& opts = {}) {
    using Clock = std::chrono::steady_clock;
    const auto t0 = Clock::now();
    const MetricField& field = entry.field;
    const double rel = opts.rel_tol.value_or(default_rel_tol(field));

    Json r;
    r["schema"] = kSchema;
    r["metric"] = metric_descriptor(entry);
    r["point"] = Vec(x.begin(), x.end());

    const CurvatureData d = curvature(field, x);
    const NullityResult nr = nullity(d, rel);
    const auto t1 = Clock::now();

    Json c;
    c["scalar_trace"] = d.scalar_trace;
    c["scalar_half_trace"] = d.half_trace;
    c["riemann_max_abs"] = riemann_norm(d);
    double smin = std::numeric_limits<double>::infinity(), smax = -smin;
    for (int a = 0; a < d.n; ++a)
        for (int b = a + 1; b < d.n; ++b) {
            const double s = sectional(d, d.frame.column(a), d.frame.column(b));
            smin = std::min(smin, s);
            smax = std::max(smax, s);
        }
    c["frame_sectional_min"] = d.n > 1 ? smin : 0.0;
    c["frame_sectional_max"] = d.n > 1 ? smax : 0.0;
    if (nr.conullity == 2 || nr.conullity == 3) c["complement_plane_curvatures"] = complement_plane_curvatures(d, nr);
    if (entry.expected_scalar) c["catalog_formula"] = {{"text", entry.expected_scalar_text}, {"value", entry.expected_scalar(x)}};
    r["curvature"] = c;

    Json n;
    n["nullity"] = nr.nullity;
    n["conullity"] = nr.conullity;
    n["kernel_basis"] = to_json(nr.kernel_basis);
    n["residuals"] = nr.residuals;
    n["singular_values"] = nr.singular_values;
    n["tolerance_used"] = nr.tolerance_used;
    r["nullity"] = n;

    SplittingOptions so;
    so.h = opts.splitting_step;
    so.rel_tol = rel;
    if (nr.nullity >= 1 && nr.conullity >= 1) {
        try {
            NullityVectorField tf;
            if (nr.nullity == 1) {
                tf = NullityField(field, x, so.h, rel).as_field();
            } else {
                Vec seed = nr.kernel_basis.front();
                detail::canonical_sign(seed);
                tf = kernel_projection_field(field, seed, rel);
            }
            const SplittingTensor st = splitting_tensor(field, x, tf, so);
            r["splitting"] = splitting_json(st, classify(st.matrix, opts.classify_tol));
        } catch (const DomainError&) {
            throw;
        } catch (const Error& e) {
            r["splitting"] = {{"error", e.what()}};
        }
    } else {
        r["splitting"] = nullptr;
    }
    r["tolerances"] = {{"rel_tol", rel}, {"splitting_step", opts.splitting_step}, {"classify_tol", opts.classify_tol}};
    if (opts.timings) {
        const auto t2 = Clock::now();
        r["timings_ms"] = {{"curvature", std::chrono::duration<double, std::milli>(t1 - t0).count()},
                           {"total", std::chrono::duration<double, std::milli>(t2 - t0).count()}};
    }
    return r;
}

} // namespace geonull
