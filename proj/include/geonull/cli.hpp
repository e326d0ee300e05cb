#pragma once

// Command-line front end: geonull {analyze|scan|flow|verify|catalog}.
//
// Exit codes: 0 success, 1 usage error, 2 domain error (point outside the
// chart, nullity preconditions violated), 3 verification failure.

#include <geonull/flows.hpp>
#include <geonull/metricspace.hpp>
#include <geonull/report.hpp>
#include <geonull/splitting.hpp>
#include <geonull/verify.hpp>

#include <CLI11.hpp>

#include <algorithm>
#include <atomic>
#include <cstdlib>
#include <fstream>
#include <ostream>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

namespace geonull {

enum ExitCode : int { kExitOk = 0, kExitUsage = 1, kExitDomain = 2, kExitVerify = 3 };

/// A flag value the command cannot use; reported with exit code 1.
class UsageError : public Error {
public:
    using Error::Error;
};

struct GridAxis {
    std::string variable;
    int index = 0;
    double lo = 0.0, hi = 0.0;
    int count = 1;

    double at(int i) const { return count == 1 ? lo : lo + (hi - lo) * i / (count - 1); }
};

namespace detail {

inline std::vector<std::string> split(const std::string& s, char sep) {
    std::vector<std::string> out;
    std::string cur;
    std::istringstream in(s);
    while (std::getline(in, cur, sep)) out.push_back(cur);
    if (!s.empty() && s.back() == sep) out.emplace_back();
    return out;
}

inline std::string trim(const std::string& s) {
    const auto b = s.find_first_not_of(" \t");
    if (b == std::string::npos) return {};
    return s.substr(b, s.find_last_not_of(" \t") - b + 1);
}

/// A constant expression such as "0.5", "-pi/2" or "1e-3".
inline double parse_number(const std::string& text, const std::string& what) {
    try {
        return eval(parse(text, {}), {});
    } catch (const Error& e) {
        throw UsageError(what + ": cannot read '" + text + "' as a number (" + e.what() + ")");
    }
}

inline Vec parse_point(const std::string& text) {
    Vec x;
    for (const auto& part : split(text, ',')) x.push_back(parse_number(trim(part), "--point"));
    return x;
}

} // namespace detail

/// Parses "var=lo:hi:n,..." against the chart's coordinate names.
inline std::vector<GridAxis> parse_grid(const std::string& text, const std::vector<std::string>& coordinates) {
    std::vector<GridAxis> axes;
    for (const auto& raw : detail::split(text, ',')) {
        const std::string item = detail::trim(raw);
        const auto eq = item.find('=');
        if (eq == std::string::npos) throw UsageError("--grid: expected var=lo:hi:n, got '" + item + "'");
        GridAxis a;
        a.variable = detail::trim(item.substr(0, eq));
        const auto it = std::find(coordinates.begin(), coordinates.end(), a.variable);
        if (it == coordinates.end()) throw UsageError("--grid: unknown coordinate '" + a.variable + "'");
        a.index = static_cast<int>(it - coordinates.begin());
        for (const auto& b : axes)
            if (b.index == a.index) throw UsageError("--grid: coordinate '" + a.variable + "' given twice");
        const auto parts = detail::split(item.substr(eq + 1), ':');
        if (parts.size() != 3) throw UsageError("--grid: expected lo:hi:n for '" + a.variable + "'");
        a.lo = detail::parse_number(detail::trim(parts[0]), "--grid");
        a.hi = detail::parse_number(detail::trim(parts[1]), "--grid");
        const double n = detail::parse_number(detail::trim(parts[2]), "--grid");
        if (n < 1 || n != std::floor(n) || n > 1e6) throw UsageError("--grid: point count must be a positive integer");
        a.count = static_cast<int>(n);
        axes.push_back(a);
    }
    if (axes.empty()) throw UsageError("--grid: no axes given");
    return axes;
}

/// Worker count for grid scans: GEONULL_THREADS if set, else the hardware count.
inline int scan_thread_count() {
    int n = static_cast<int>(std::thread::hardware_concurrency());
    if (const char* env = std::getenv("GEONULL_THREADS")) {
        char* end = nullptr;
        const long v = std::strtol(env, &end, 10);
        if (end != env && *end == '\0' && v >= 1) n = static_cast<int>(std::min<long>(v, 256));
    }
    return std::max(n, 1);
}

struct ScanRow {
    Vec point;
    double scal_trace = std::numeric_limits<double>::quiet_NaN();
    double scal_half = std::numeric_limits<double>::quiet_NaN();
    int nullity = -1;
    int conullity = -1;
    std::string classification;
    std::string status;
};

inline ScanRow scan_point(const MetricField& field, const Vec& x, double rel_tol) {
    ScanRow row;
    row.point = x;
    if (!field.in_domain(x)) {
        row.status = "domain";
        return row;
    }
    try {
        const CurvatureData d = curvature(field, x);
        const NullityResult nr = nullity(d, rel_tol);
        row.scal_trace = d.scalar_trace;
        row.scal_half = d.half_trace;
        row.nullity = nr.nullity;
        row.conullity = nr.conullity;
        row.classification = "none";
        row.status = "ok";
        if (nr.nullity >= 1 && nr.conullity >= 1) {
            try {
                SplittingOptions so;
                so.rel_tol = rel_tol;
                NullityVectorField tf;
                if (nr.nullity == 1) {
                    tf = NullityField(field, x, so.h, rel_tol).as_field();
                } else {
                    Vec seed = nr.kernel_basis.front();
                    detail::canonical_sign(seed);
                    tf = kernel_projection_field(field, seed, rel_tol);
                }
                row.classification = to_string(classify(splitting_tensor(field, x, tf, so).matrix).classification);
            } catch (const DomainError&) {
                row.classification = "none";
                row.status = "domain";  // the differentiation stencil left the chart
            } catch (const Error&) {
                row.classification = "undetermined";
            }
        }
    } catch (const DomainError&) {
        row = ScanRow{};
        row.point = x;
        row.status = "domain";
    }
    return row;
}

/// All grid points in lexicographic order (first axis slowest); coordinates
/// without an axis take their value from `base`.
inline std::vector<ScanRow> scan_grid(const MetricField& field, const std::vector<GridAxis>& axes, const Vec& base,
                                      double rel_tol, int threads) {
    std::size_t total = 1;
    for (const auto& a : axes) total *= static_cast<std::size_t>(a.count);
    std::vector<Vec> points;
    points.reserve(total);
    for (std::size_t flat = 0; flat < total; ++flat) {
        Vec x = base;
        std::size_t rem = flat;
        for (std::size_t k = axes.size(); k-- > 0;) {
            const auto c = static_cast<std::size_t>(axes[k].count);
            x[static_cast<std::size_t>(axes[k].index)] = axes[k].at(static_cast<int>(rem % c));
            rem /= c;
        }
        points.push_back(std::move(x));
    }
    std::vector<ScanRow> rows(total);
    std::atomic<std::size_t> next{0};
    auto worker = [&] {
        for (std::size_t i = next++; i < total; i = next++) rows[i] = scan_point(field, points[i], rel_tol);
    };
    const int n = std::max(1, std::min(threads, static_cast<int>(total)));
    std::vector<std::thread> pool;
    for (int t = 1; t < n; ++t) pool.emplace_back(worker);
    worker();
    for (auto& t : pool) t.join();
    return rows;
}

inline std::string scan_csv(const std::vector<std::string>& coordinates, const std::vector<ScanRow>& rows) {
    std::vector<std::string> header = coordinates;
    for (const char* h : {"scal_trace", "scal_half", "nullity", "conullity", "classification", "status"}) header.emplace_back(h);
    std::string out = csv_row(header);
    for (const auto& r : rows) {
        std::vector<std::string> f;
        for (double v : r.point) f.push_back(csv_number(v));
        f.push_back(csv_number(r.scal_trace));
        f.push_back(csv_number(r.scal_half));
        f.push_back(r.nullity < 0 ? "" : std::to_string(r.nullity));
        f.push_back(r.conullity < 0 ? "" : std::to_string(r.conullity));
        f.push_back(r.classification);
        f.push_back(r.status);
        out += csv_row(f);
    }
    return out;
}

inline Json scan_json(const CatalogEntry& entry, const std::vector<ScanRow>& rows) {
    Json j;
    j["schema"] = kSchema;
    j["metric"] = metric_descriptor(entry);
    Json a = Json::array();
    for (const auto& r : rows) {
        Json o;
        o["point"] = r.point;
        o["status"] = r.status;
        if (r.status == "ok") {
            o["scal_trace"] = r.scal_trace;
            o["scal_half"] = r.scal_half;
            o["nullity"] = r.nullity;
            o["conullity"] = r.conullity;
            o["classification"] = r.classification;
        }
        a.push_back(o);
    }
    j["rows"] = a;
    return j;
}

inline Json flow_json_nullity(const CatalogEntry& entry, const Vec& x0, double t_max, int steps, const SplittingOptions& so) {
    const EvolutionReport ev = evolve_along_nullity_geodesic(entry.field, x0, t_max, steps, so);
    Json j;
    j["schema"] = kSchema;
    j["metric"] = metric_descriptor(entry);
    j["mode"] = "nullity";
    j["start"] = x0;
    j["t_max"] = t_max;
    j["steps"] = steps;
    j["nullity"] = ev.nullity;
    j["c0"] = to_json(ev.c0);
    Json samples = Json::array();
    for (const auto& s : ev.samples) {
        samples.push_back({{"t", s.t},
                           {"position", s.position},
                           {"computed", to_json(s.computed)},
                           {"predicted", to_json(s.predicted)},
                           {"deviation", s.deviation},
                           {"trace", s.trace},
                           {"divergence", s.divergence},
                           {"classification", to_string(s.classification)}});
    }
    j["samples"] = samples;
    j["max_deviation"] = ev.max_deviation;
    j["max_trace_plus_divergence"] = ev.max_trace_divergence_residual;
    j["aborted"] = ev.aborted;
    j["abort_reason"] = ev.abort_reason;
    return j;
}

inline Json flow_json_custom(const CatalogEntry& entry, const Vec& x0, Vec v0, double t_max, int steps, double rel_tol) {
    const MetricField& f = entry.field;
    const Matrix g = f.g(x0);
    const double nv = std::sqrt(inner(g, v0, v0));
    if (nv == 0.0) throw UsageError("--direction: zero vector");
    for (double& c : v0) c /= nv;
    const GeodesicPath path = geodesic(f, x0, v0, t_max, steps);
    const NullityGeodesicReport chk = nullity_geodesic_check(f, path, 1e-6, rel_tol);
    Json j;
    j["schema"] = kSchema;
    j["metric"] = metric_descriptor(entry);
    j["mode"] = "custom";
    j["start"] = x0;
    j["direction"] = v0;
    j["t_max"] = t_max;
    j["steps"] = steps;
    Json samples = Json::array();
    for (const auto& s : path.samples) samples.push_back({{"t", s.t}, {"position", s.position}, {"velocity", s.velocity}});
    j["samples"] = samples;
    j["truncated"] = path.truncated;
    j["convergence_delta"] = path.convergence_delta;
    j["nullity_geodesic"] = {{"pass", chk.pass},
                             {"max_residual", chk.max_residual},
                             {"worst_t", chk.worst_t},
                             {"samples_checked", chk.samples_checked}};
    j["annotation"] = chk.pass ? "tangent stays in ker R: nullity geodesic"
                               : "tangent leaves ker R: not a nullity geodesic";
    return j;
}

inline Json catalog_json() {
    Json j;
    j["schema"] = kSchema;
    Json a = Json::array();
    for (const auto& name : catalog_names()) {
        const CatalogEntry e = make_catalog_entry(name, {});
        Json o = metric_descriptor(e);
        o["expected_conullity"] = e.expected_conullity ? Json(*e.expected_conullity) : Json(nullptr);
        o["expected_scalar"] = e.expected_scalar_text;
        a.push_back(o);
    }
    j["metrics"] = a;
    return j;
}

inline std::string catalog_text() {
    std::string out;
    for (const auto& name : catalog_names()) {
        const CatalogEntry e = make_catalog_entry(name, {});
        out += name + "  chart (";
        for (std::size_t i = 0; i < e.field.coordinates().size(); ++i) out += (i ? "," : "") + e.field.coordinates()[i];
        out += ")";
        for (const auto& [k, v] : e.parameters) out += "  " + k + "=" + v;
        if (e.expected_conullity) out += "  conullity " + std::to_string(*e.expected_conullity);
        if (!e.expected_scalar_text.empty()) out += "  curvature " + e.expected_scalar_text;
        out += "\n";
    }
    return out;
}

inline int verify_exit_code(const VerifySuiteResult& r) { return r.pass ? kExitOk : kExitVerify; }

/// Runs the CLI. Output goes to `out` (or the --out file), diagnostics to `err`.
inline int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
    CLI::App app{"geonull: curvature, nullity and splitting tensors of coordinate metrics", "geonull"};
    app.require_subcommand(1);

    struct Flags {
        std::string metric, p, point, grid, direction = "nullity", suite = "all", out_file;
        double radius = 1.0, tmax = 1.0, rel_tol = 0.0, fd_step = 0.0;
        int dim = -1, steps = 20;
        std::uint64_t seed = kDefaultSeed;
        bool json = false, timings = false;
    } fl;

    auto metric_opts = [&](CLI::App* s) {
        s->add_option("--metric", fl.metric, "catalog metric")->required()->check(CLI::IsMember(catalog_names()));
        s->add_option("--p", fl.p, "warping function p (sekigawa: x,u; conullity3: x,u,w)");
        s->add_option("--radius", fl.radius, "sphere radius")->check(CLI::PositiveNumber);
        s->add_option("--dim", fl.dim, "euclidean dimension, or flat factor dimension for product")->check(CLI::Range(1, kMaxChartDim));
        s->add_option("--rel-tol", fl.rel_tol, "relative rank tolerance for ker R")->check(CLI::Range(1e-15, 0.5));
        s->add_option("--fd-step", fl.fd_step, "use central-difference metric jets with this step")->check(CLI::Range(1e-8, 0.1));
        s->add_option("--out", fl.out_file, "write output to FILE");
        s->add_flag("--json", fl.json, "JSON output");
    };

    CLI::App* analyze = app.add_subcommand("analyze", "curvature, nullity and splitting tensor at one point");
    metric_opts(analyze);
    analyze->add_option("--point", fl.point, "comma-separated chart coordinates")->required();
    analyze->add_flag("--timings", fl.timings, "include wall-clock timings (output is then not reproducible)");

    CLI::App* scan = app.add_subcommand("scan", "CSV of scalar curvature, nullity and classification over a grid");
    metric_opts(scan);
    scan->add_option("--grid", fl.grid, "var=lo:hi:n,...")->required();
    scan->add_option("--point", fl.point, "values of coordinates not on the grid (default 0)");

    CLI::App* flow = app.add_subcommand("flow", "splitting tensor along a geodesic");
    metric_opts(flow);
    flow->add_option("--point", fl.point, "start point")->required();
    flow->add_option("--direction", fl.direction, "nullity, a coordinate name, or comma-separated components");
    flow->add_option("--tmax", fl.tmax, "final parameter")->check(CLI::PositiveNumber);
    flow->add_option("--steps", fl.steps, "integration steps")->check(CLI::Range(16, 1000000));

    CLI::App* verify = app.add_subcommand("verify", "run a verification suite");
    verify->add_option("--suite", fl.suite, "suite name")->check(CLI::IsMember(verify_suite_names()));
    verify->add_option("--seed", fl.seed, "seed for random sample points");
    verify->add_option("--out", fl.out_file, "write output to FILE");
    verify->add_flag("--json", fl.json, "JSON output");

    CLI::App* catalog = app.add_subcommand("catalog", "list the catalog metrics");
    catalog->add_option("--out", fl.out_file, "write output to FILE");
    catalog->add_flag("--json", fl.json, "JSON output");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        std::ostringstream o, er;
        const int code = app.exit(e, o, er);
        out << o.str();
        err << er.str();
        return code == 0 ? kExitOk : kExitUsage;
    }

    auto emit = [&](const std::string& text) -> int {
        if (fl.out_file.empty()) {
            out << text;
            return kExitOk;
        }
        std::ofstream f(fl.out_file, std::ios::binary);
        if (!f) {
            err << "error: cannot open '" << fl.out_file << "' for writing\n";
            return kExitUsage;
        }
        f << text;
        return f ? kExitOk : kExitUsage;
    };

    auto entry_from_flags = [&] {
        CatalogParams params;
        params.p = fl.p;
        params.radius = fl.radius;
        if (fl.metric == "euclidean" && fl.dim > 0) params.dim = fl.dim;
        if (fl.metric == "product" && fl.dim > 0) params.flat_dim = fl.dim;
        if (!fl.p.empty() && fl.metric != "sekigawa" && fl.metric != "conullity3")
            throw UsageError("--p applies to sekigawa and conullity3 only");
        CatalogEntry e;
        try {
            e = make_catalog_entry(fl.metric, params);
        } catch (const ParseError& pe) {
            throw UsageError("--p: " + std::string(pe.what()));
        }
        if (fl.fd_step > 0.0) e.field = e.field.with_fd_jets(fl.fd_step);
        return e;
    };
    auto rel_tol_for = [&](const MetricField& f) { return fl.rel_tol > 0.0 ? fl.rel_tol : default_rel_tol(f); };
    auto point_for = [&](const MetricField& f) {
        const Vec x = detail::parse_point(fl.point);
        if (static_cast<int>(x.size()) != f.dim())
            throw UsageError("--point has " + std::to_string(x.size()) + " coordinates, chart (" + f.name() + ") has " +
                             std::to_string(f.dim()));
        return x;
    };

    try {
        if (analyze->parsed()) {
            const CatalogEntry e = entry_from_flags();
            const Vec x = point_for(e.field);
            AnalysisOptions ao;
            ao.rel_tol = rel_tol_for(e.field);
            ao.timings = fl.timings;
            return emit(to_json_text(analyze_point(e, x, ao)));
        }
        if (scan->parsed()) {
            const CatalogEntry e = entry_from_flags();
            const auto axes = parse_grid(fl.grid, e.field.coordinates());
            const Vec base = fl.point.empty() ? Vec(static_cast<std::size_t>(e.field.dim()), 0.0) : point_for(e.field);
            const auto rows = scan_grid(e.field, axes, base, rel_tol_for(e.field), scan_thread_count());
            return emit(fl.json ? to_json_text(scan_json(e, rows)) : scan_csv(e.field.coordinates(), rows));
        }
        if (flow->parsed()) {
            const CatalogEntry e = entry_from_flags();
            const Vec x = point_for(e.field);
            e.field.require_domain(x);
            if (fl.direction == "nullity") {
                SplittingOptions so;
                so.rel_tol = rel_tol_for(e.field);
                return emit(to_json_text(flow_json_nullity(e, x, fl.tmax, fl.steps, so)));
            }
            Vec v(static_cast<std::size_t>(e.field.dim()), 0.0);
            const auto& coords = e.field.coordinates();
            const auto it = std::find(coords.begin(), coords.end(), fl.direction);
            if (it != coords.end()) {
                v[static_cast<std::size_t>(it - coords.begin())] = 1.0;
            } else {
                v = detail::parse_point(fl.direction);
                if (static_cast<int>(v.size()) != e.field.dim())
                    throw UsageError("--direction must be 'nullity', a coordinate name, or " + std::to_string(e.field.dim()) +
                                     " components");
            }
            return emit(to_json_text(flow_json_custom(e, x, v, fl.tmax, fl.steps, rel_tol_for(e.field))));
        }
        if (verify->parsed()) {
            const VerifySuiteResult r = run_verify_suite(fl.suite, fl.seed);
            const int code = emit(fl.json ? to_json_text(to_json(r)) : to_text(r));
            if (code != kExitOk) return code;
            return verify_exit_code(r);
        }
        if (catalog->parsed()) return emit(fl.json ? to_json_text(catalog_json()) : catalog_text());
    } catch (const UsageError& e) {
        err << "error: " << e.what() << "\n";
        return kExitUsage;
    } catch (const Error& e) {
        err << "error: " << e.what() << "\n";
        return kExitDomain;
    }
    return kExitUsage;
}

} // namespace geonull
