#include "mrlab/cli.hpp"

#include "mrlab/discrete_lw.hpp"
#include "mrlab/geometry.hpp"
#include "mrlab/lattice.hpp"
#include "mrlab/sparse.hpp"

#include <algorithm>
#include <charconv>
#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <functional>
#include <limits>
#include <ostream>
#include <set>
#include <sstream>

#ifndef MRLAB_VERSION
#define MRLAB_VERSION "0.0.0"
#endif

namespace mrlab {

namespace fs = std::filesystem;

// ---------------------------------------------------------------- numbers and CSV

std::string format_number(double v) {
    if (std::isnan(v)) return "nan";
    if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
    char buf[64];
    const auto r = std::to_chars(buf, buf + sizeof buf, v);
    return std::string(buf, r.ptr);
}

double parse_number(std::string_view s) {
    if (s == "nan") return std::numeric_limits<double>::quiet_NaN();
    if (s == "inf") return std::numeric_limits<double>::infinity();
    if (s == "-inf") return -std::numeric_limits<double>::infinity();
    double v = 0.0;
    const auto r = std::from_chars(s.data(), s.data() + s.size(), v);
    if (r.ec != std::errc() || r.ptr != s.data() + s.size())
        throw InvalidArgument("not a number: '" + std::string(s) + "'");
    return v;
}

namespace {

std::string csv_field(const std::string& s) {
    if (s.find_first_of(",\"\n") == std::string::npos) return s;
    std::string out = "\"";
    for (char c : s) {
        if (c == '"') out += '"';
        out += c;
    }
    return out + "\"";
}

std::string num(double v) { return format_number(v); }
std::string num(std::size_t v) { return std::to_string(v); }

}  // namespace

void CsvTable::add_row(std::vector<std::string> row) {
    require(row.size() == header.size(), "CsvTable: row width differs from the header");
    rows.push_back(std::move(row));
}

std::string CsvTable::str() const {
    std::string out;
    auto line = [&](const std::vector<std::string>& r) {
        for (std::size_t i = 0; i < r.size(); ++i) {
            if (i) out += ',';
            out += csv_field(r[i]);
        }
        out += '\n';
    };
    line(header);
    for (const auto& r : rows) line(r);
    return out;
}

CsvTable CsvTable::parse(std::string_view text) {
    std::vector<std::vector<std::string>> lines;
    std::vector<std::string> cur;
    std::string field;
    bool quoted = false, any = false;
    for (std::size_t i = 0; i < text.size(); ++i) {
        const char c = text[i];
        if (quoted) {
            if (c == '"' && i + 1 < text.size() && text[i + 1] == '"') {
                field += '"';
                ++i;
            } else if (c == '"') {
                quoted = false;
            } else {
                field += c;
            }
            continue;
        }
        if (c == '"') {
            quoted = true;
            any = true;
        } else if (c == ',') {
            cur.push_back(std::move(field));
            field.clear();
            any = true;
        } else if (c == '\n') {
            if (any || !field.empty()) {
                cur.push_back(std::move(field));
                lines.push_back(std::move(cur));
            }
            cur.clear();
            field.clear();
            any = false;
        } else if (c != '\r') {
            field += c;
        }
    }
    if (quoted) throw InvalidArgument("CsvTable: unterminated quote");
    if (any || !field.empty()) {
        cur.push_back(std::move(field));
        lines.push_back(std::move(cur));
    }
    if (lines.empty()) throw InvalidArgument("CsvTable: empty input");
    CsvTable t;
    t.header = std::move(lines.front());
    for (std::size_t i = 1; i < lines.size(); ++i) {
        if (lines[i].size() != t.header.size())
            throw InvalidArgument("CsvTable: row " + std::to_string(i) + " has the wrong number of fields");
        t.rows.push_back(std::move(lines[i]));
    }
    return t;
}

// ---------------------------------------------------------------- plot data

PlotSeries plot_series(const GainCurve& curve) {
    PlotSeries s;
    s.x = curve.mu;
    s.y = curve.A_hat;
    s.y_lo = curve.mean;
    s.y_hi = curve.A_hat;
    s.reference_slope = curve.reference;
    return s;
}

PlotSeries plot_series(const DecayEstimate& fit, const TypeResult& type) {
    PlotSeries s;
    s.x = fit.radii;
    s.y = fit.magnitudes;
    s.y_lo = fit.magnitudes;
    s.y_hi = fit.magnitudes;
    s.reference_slope = type.finite && type.order > 0 ? 1.0 / type.order : 0.0;
    return s;
}

PlotSeries plot_series(const ConstantLedger& ledger) {
    PlotSeries s;
    for (const auto& e : ledger.entries) {
        s.x.push_back(e.R);
        s.y.push_back(e.A_hat);
        s.y_lo.push_back(e.per_trial.empty() ? e.A_hat : *std::min_element(e.per_trial.begin(), e.per_trial.end()));
        s.y_hi.push_back(e.A_hat);
    }
    return s;
}

CsvTable emit_plot_data(const PlotSeries& s) {
    if (s.x.empty()) throw InvalidArgument("emit_plot_data: empty input");
    require(s.y.size() == s.x.size() && s.y_lo.size() == s.x.size() && s.y_hi.size() == s.x.size(),
            "emit_plot_data: column lengths differ");
    CsvTable t;
    t.header = {"x", "y", "y_lo", "y_hi", "reference_slope"};
    for (std::size_t i = 0; i < s.x.size(); ++i)
        t.add_row({num(s.x[i]), num(s.y[i]), num(s.y_lo[i]), num(s.y_hi[i]), num(s.reference_slope)});
    return t;
}

PlotSeries parse_plot_data(const CsvTable& t) {
    const std::vector<std::string> expected{"x", "y", "y_lo", "y_hi", "reference_slope"};
    if (t.header != expected) throw InvalidArgument("parse_plot_data: unexpected columns");
    if (t.rows.empty()) throw InvalidArgument("parse_plot_data: empty input");
    PlotSeries s;
    for (const auto& r : t.rows) {
        s.x.push_back(parse_number(r[0]));
        s.y.push_back(parse_number(r[1]));
        s.y_lo.push_back(parse_number(r[2]));
        s.y_hi.push_back(parse_number(r[3]));
    }
    s.reference_slope = parse_number(t.rows.front()[4]);
    return s;
}

// ---------------------------------------------------------------- configuration

const std::vector<std::string>& experiment_kinds() {
    static const std::vector<std::string> kinds{"transversality",     "decay-fit",       "lw-check",
                                                "partition-check",    "constant-sweep",  "localization-sweep",
                                                "recursion-check",    "eps-removal",     "sparse-cover"};
    return kinds;
}

namespace {

const std::set<std::string> kGlobalKeys{"experiment", "seed", "jobs", "out_dir", "out", "verbose"};

// Typed access to one parameter table; unread keys are rejected by finish().
class Params {
public:
    Params(Json j, std::string ctx) : j_(std::move(j)), ctx_(std::move(ctx)) {
        if (!j_.is_object()) fail("", "must be a table");
    }

    [[noreturn]] void fail(const std::string& key, const std::string& msg) const {
        throw InvalidArgument(ctx_ + (key.empty() ? "" : ": parameter '" + key + "'") + " " + msg);
    }
    bool has(const std::string& key) {
        used_.insert(key);
        return j_.contains(key);
    }
    const Json& raw(const std::string& key) {
        used_.insert(key);
        return j_.at(key);
    }

    double number(const std::string& key, double def) {
        if (!has(key)) return def;
        return as_number(key, j_.at(key));
    }
    double positive(const std::string& key, double def) {
        const double v = number(key, def);
        if (!(v > 0.0) || !std::isfinite(v)) fail(key, "must be positive and finite");
        return v;
    }
    std::size_t count(const std::string& key, std::size_t def, std::size_t min = 0) {
        if (!has(key)) return def;
        const std::size_t v = as_count(key, j_.at(key));
        if (v < min) fail(key, "must be at least " + std::to_string(min));
        return v;
    }
    bool flag(const std::string& key, bool def) {
        if (!has(key)) return def;
        if (!j_.at(key).is_boolean()) fail(key, "must be true or false");
        return j_.at(key).get<bool>();
    }
    std::string text(const std::string& key, const std::string& def) {
        if (!has(key)) return def;
        if (!j_.at(key).is_string()) fail(key, "must be a string");
        return j_.at(key).get<std::string>();
    }
    std::vector<double> numbers(const std::string& key, std::vector<double> def) {
        if (!has(key)) return def;
        const Json& v = j_.at(key);
        if (v.is_number()) return {as_number(key, v)};
        if (!v.is_array() || v.empty()) fail(key, "must be a non-empty array of numbers");
        std::vector<double> out;
        for (const auto& e : v) out.push_back(as_number(key, e));
        return out;
    }
    std::vector<std::size_t> counts(const std::string& key, std::vector<std::size_t> def) {
        if (!has(key)) return def;
        const Json& v = j_.at(key);
        if (v.is_number()) return {as_count(key, v)};
        if (!v.is_array()) fail(key, "must be an array of non-negative integers");
        std::vector<std::size_t> out;
        for (const auto& e : v) out.push_back(as_count(key, e));
        return out;
    }

    void finish() const {
        for (const auto& [k, v] : j_.items())
            if (!used_.count(k)) throw InvalidArgument(ctx_ + ": unknown parameter '" + k + "'");
    }
    const std::string& context() const { return ctx_; }

private:
    double as_number(const std::string& key, const Json& v) const {
        if (!v.is_number()) fail(key, "must be a number");
        return v.get<double>();
    }
    std::size_t as_count(const std::string& key, const Json& v) const {
        if (v.is_number_unsigned()) return v.get<std::size_t>();
        if (v.is_number_integer()) {
            if (v.get<std::int64_t>() < 0) fail(key, "must be non-negative");
            return static_cast<std::size_t>(v.get<std::int64_t>());
        }
        fail(key, "must be a non-negative integer");
    }

    Json j_;
    std::string ctx_;
    std::set<std::string> used_;
};

Polynomial coefficient_table(Params& p, const std::string& key, const Json& table, std::size_t vars) {
    if (!table.is_array()) p.fail(key, "must be an array of [coefficient, exponents...] rows");
    Polynomial poly(vars);
    for (const auto& row : table) {
        if (!row.is_array() || row.size() != vars + 1 || !row[0].is_number())
            p.fail(key, "rows must read [coefficient, e_1, ..., e_" + std::to_string(vars) + "]");
        std::vector<int> e;
        for (std::size_t i = 1; i <= vars; ++i) {
            if (!row[i].is_number_integer() || row[i].get<int>() < 0) p.fail(key, "exponents must be non-negative integers");
            e.push_back(row[i].get<int>());
        }
        poly.add_term(row[0].get<double>(), e);
    }
    return poly;
}

// Surface preset: "flat", "paraboloid", "monomial" (with l, or "monomial:l"), "sphere-cap"
// (with rho, or "sphere-cap:rho") or "polynomial" with a coefficient table.
PatchPtr build_patch(Params& p, std::size_t default_n, std::size_t default_axis, double default_hw,
                     double default_delta_geom) {
    std::string preset = p.text("preset", "flat");
    std::string arg;
    if (const auto colon = preset.find(':'); colon != std::string::npos) {
        arg = preset.substr(colon + 1);
        preset = preset.substr(0, colon);
    }
    const std::size_t n = p.count("n", default_n, 2);
    const std::size_t axis = p.count("normal_axis", std::min(default_axis, n - 1));
    if (axis >= n) p.fail("normal_axis", "must be below n = " + std::to_string(n));
    const double hw = p.positive("half_width", default_hw);
    const double dg = p.positive("delta_geom", default_delta_geom);
    HypersurfacePatch patch = [&] {
        if (preset == "flat") return HypersurfacePatch::flat(n, axis, hw, dg);
        if (preset == "paraboloid") return HypersurfacePatch::paraboloid(n, axis, hw, dg);
        if (preset == "monomial") {
            const std::size_t l = arg.empty() ? p.count("l", 2, 2) : static_cast<std::size_t>(parse_number(arg));
            if (l < 2) p.fail("l", "must be at least 2");
            return HypersurfacePatch::monomial(n, axis, int(l), hw, dg);
        }
        if (preset == "sphere-cap") {
            const double rho = arg.empty() ? p.positive("rho", 1.0) : parse_number(arg);
            return HypersurfacePatch::sphere_cap(n, axis, rho, hw, dg);
        }
        if (preset == "polynomial") {
            if (!p.has("coefficients")) p.fail("coefficients", "is required for preset 'polynomial'");
            Polynomial phi = coefficient_table(p, "coefficients", p.raw("coefficients"), n - 1);
            return HypersurfacePatch(n, Box::centered(n - 1, hw), std::move(phi), axis, dg);
        }
        p.fail("preset", "must be one of flat, paraboloid, monomial, sphere-cap, polynomial (got '" + preset + "')");
    }();
    return std::make_shared<const HypersurfacePatch>(std::move(patch));
}

SubmanifoldSpec build_spec(Params& p, PatchPtr patch) {
    const double mu = p.number("mu", 0.0);
    if (mu < 0.0) p.fail("mu", "must be non-negative");
    if (!p.has("submanifold")) return SubmanifoldSpec(patch, 0, {}, mu);
    Params sub(p.raw("submanifold"), p.context() + ".submanifold");
    const std::size_t c = sub.count("codim", 1);
    std::vector<std::size_t> axes = sub.counts("graph_axes", {});
    const std::size_t free = patch->param_dim() >= c ? patch->param_dim() - c : 0;
    std::vector<Polynomial> maps;
    if (sub.has("maps")) {
        const Json& m = sub.raw("maps");
        if (!m.is_array() || m.size() != c) sub.fail("maps", "needs one coefficient table per graph coordinate");
        for (const auto& t : m) maps.push_back(coefficient_table(sub, "maps", t, free));
    } else {
        maps.assign(c, Polynomial::zero(free));
    }
    sub.finish();
    return SubmanifoldSpec(patch, c, std::move(maps), mu, std::move(axes));
}

void check_family(const Family& fam, const std::string& ctx) {
    const std::size_t n = fam.front().parent->n, k = fam.size();
    std::size_t csum = 0;
    for (const auto& s : fam) {
        if (s.parent->n != n) throw InvalidArgument(ctx + ": surfaces live in different ambient dimensions");
        csum += s.codim;
    }
    if (k > n)
        throw InvalidArgument(ctx + ": k = " + std::to_string(k) + " exceeds n = " + std::to_string(n) +
                              " (requires k <= n)");
    if (csum > n - k)
        throw InvalidArgument(ctx + ": sum of codimensions " + std::to_string(csum) + " exceeds n - k = " +
                              std::to_string(n - k));
}

// [[surface]] entries, or a [family] table describing flat coordinate patches.
Family parse_family(Params& p, std::vector<std::size_t> default_codims = {0, 0, 0}, double default_hw = 1.0) {
    Family fam;
    if (p.has("surface")) {
        const Json& list = p.raw("surface");
        if (!list.is_array() || list.empty()) p.fail("surface", "must be a non-empty array of tables");
        for (std::size_t i = 0; i < list.size(); ++i) {
            Params s(list[i], p.context() + ".surface[" + std::to_string(i) + "]");
            auto patch = build_patch(s, 3, i, 0.1, 0.5);
            fam.push_back(build_spec(s, patch));
            s.finish();
        }
    } else {
        Params f(p.has("family") ? p.raw("family") : Json::object(), p.context() + ".family");
        const std::size_t n = f.count("n", 3, 1);
        if (n != 3 && default_codims == std::vector<std::size_t>{0, 0, 0}) default_codims.assign(n, 0);
        const auto codims = f.counts("codims", default_codims);
        if (codims.empty()) f.fail("codims", "must list at least one surface");
        if (codims.size() > n)
            throw InvalidArgument(f.context() + ": k = " + std::to_string(codims.size()) + " exceeds n = " +
                                  std::to_string(n) + " (requires k <= n)");
        const double hw = f.positive("half_width", default_hw);
        const double mu = f.number("mu", 0.0);
        if (mu < 0.0) f.fail("mu", "must be non-negative");
        const double dg = f.positive("delta_geom", 4.0 * hw * std::sqrt(double(std::max<std::size_t>(n, 2) - 1)));
        f.finish();
        fam = coordinate_family(n, codims, hw, mu, dg);
    }
    check_family(fam, p.context());
    return fam;
}

ConstantOptions parse_constant_options(Params& p, const ExperimentConfig& cfg) {
    ConstantOptions o;
    o.trials = p.count("trials", 8, 1);
    o.seed = cfg.seed;
    o.resolution = p.count("resolution", 0);
    o.oversample = p.positive("oversample", 2.0);
    o.min_resolution = p.count("min_resolution", 24, 2);
    o.padded_width = p.flag("padded_width", true);
    o.refine_steps = p.count("refine_steps", 0);
    o.jobs = cfg.jobs;
    return o;
}

std::vector<double> default_ladder() {
    std::vector<double> l;
    for (int e = 3; e <= 7; ++e) l.push_back(std::ldexp(1.0, -e));
    return l;
}

std::vector<Vec> read_centers(Params& p, const std::string& key) {
    if (!p.has(key)) p.fail(key, "is required");
    const Json& v = p.raw(key);
    std::vector<Vec> out;
    auto add = [&](const std::vector<double>& row) {
        if (row.empty()) return;
        if (!out.empty() && std::size_t(out.front().size()) != row.size()) p.fail(key, "centres have mixed dimensions");
        out.push_back(Eigen::Map<const Vec>(row.data(), Eigen::Index(row.size())));
    };
    if (v.is_string()) {
        std::ifstream in(v.get<std::string>());
        if (!in) p.fail(key, "cannot open '" + v.get<std::string>() + "'");
        std::string line;
        while (std::getline(in, line)) {
            line = line.substr(0, line.find('#'));
            for (char& c : line)
                if (c == ',' || c == ';' || c == '\t' || c == '\r') c = ' ';
            std::istringstream ls(line);
            std::vector<double> row;
            std::string tok;
            while (ls >> tok) row.push_back(parse_number(tok));
            add(row);
        }
    } else if (v.is_array()) {
        for (const auto& r : v) {
            if (!r.is_array()) p.fail(key, "must be a file name or an array of coordinate arrays");
            std::vector<double> row;
            for (const auto& x : r) {
                if (!x.is_number()) p.fail(key, "coordinates must be numbers");
                row.push_back(x.get<double>());
            }
            add(row);
        }
    } else {
        p.fail(key, "must be a file name or an array of coordinate arrays");
    }
    if (out.empty()) p.fail(key, "contains no centres");
    return out;
}

std::vector<std::vector<std::size_t>> parse_splits(Params& p, std::size_t k, std::size_t n) {
    std::vector<std::vector<std::size_t>> splits;
    if (!p.has("splits")) return splits;
    const Json& v = p.raw("splits");
    if (v.is_string()) {
        // "a,b;c" : one ';'-separated group of axes per function
        std::string s = v.get<std::string>();
        std::size_t start = 0;
        while (true) {
            const auto end = s.find(';', start);
            std::string group = s.substr(start, end == std::string::npos ? std::string::npos : end - start);
            std::vector<std::size_t> axes;
            for (char& c : group)
                if (c == ',') c = ' ';
            std::istringstream gs(group);
            std::string tok;
            while (gs >> tok) axes.push_back(static_cast<std::size_t>(parse_number(tok)));
            splits.push_back(axes);
            if (end == std::string::npos) break;
            start = end + 1;
        }
    } else if (v.is_array()) {
        for (const auto& g : v) {
            if (!g.is_array()) p.fail("splits", "must be an array of axis arrays");
            std::vector<std::size_t> axes;
            for (const auto& a : g) {
                if (!a.is_number_integer() || a.get<long>() < 0) p.fail("splits", "axes must be non-negative integers");
                axes.push_back(a.get<std::size_t>());
            }
            splits.push_back(axes);
        }
    } else {
        p.fail("splits", "must be a string like \"3;2\" or an array of axis arrays");
    }
    if (splits.size() != k) p.fail("splits", "needs one group per function (k = " + std::to_string(k) + ")");
    for (const auto& g : splits)
        for (auto a : g)
            if (a >= n) p.fail("splits", "axis " + std::to_string(a) + " is out of range for n = " + std::to_string(n));
    return splits;
}

std::uint64_t fnv1a(std::string_view s) {
    std::uint64_t h = 1469598103934665603ull;
    for (unsigned char c : s) {
        h ^= c;
        h *= 1099511628211ull;
    }
    return h;
}

void note(std::ostream* log, const std::string& msg) {
    if (log) *log << msg << '\n';
}

using Job = std::function<ExperimentOutput(std::ostream*)>;

// ---------------------------------------------------------------- experiment kinds

Job prepare_transversality(const ExperimentConfig&, Params& p) {
    Family fam = parse_family(p);
    const std::size_t samples = p.count("samples", 16, 1);
    return [fam, samples](std::ostream* log) {
        ExperimentOutput out;
        CsvTable t;
        t.header = {"samples_per_surface", "nu"};
        double nu = 0.0;
        for (std::size_t s = 1;; s = std::min(2 * s, samples)) {
            nu = check_transversality(std::span<const SubmanifoldSpec>(fam), s);
            t.add_row({num(s), num(nu)});
            note(log, "samples " + std::to_string(s) + ": nu = " + num(nu));
            if (s == samples) break;
        }
        out.tables.emplace_back("", std::move(t));
        out.summary["nu"] = nu;
        out.summary["transversal"] = nu > 0.0;
        return out;
    };
}

Job prepare_decay_fit(const ExperimentConfig&, Params& p) {
    PatchPtr patch;
    if (p.has("surface") && p.raw("surface").is_string()) {
        Params s(Json{{"preset", p.raw("surface").get<std::string>()}}, p.context() + ".surface");
        patch = build_patch(s, 2, 1, 1.0, 16.0);
    } else {
        Params s(p.has("surface") ? p.raw("surface") : Json::object(), p.context() + ".surface");
        patch = build_patch(s, 2, 1, 1.0, 16.0);
        s.finish();
    }
    const std::size_t n = patch->n;
    std::vector<double> dir = p.numbers("direction", {});
    if (dir.empty()) {
        dir.assign(n, 0.0);
        dir[patch->normal_axis] = 1.0;
    }
    if (dir.size() != n) p.fail("direction", "must have n = " + std::to_string(n) + " components");
    Vec direction = Eigen::Map<const Vec>(dir.data(), Eigen::Index(n));
    if (!(direction.norm() > 0.0)) p.fail("direction", "must be nonzero");
    direction /= direction.norm();
    const double r_min = p.positive("radii_min", 10.0);
    double r_max = p.positive("radii_max", 1000.0);
    if (p.has("octaves")) r_max = r_min * std::ldexp(1.0, int(p.count("octaves", 0, 1)));
    if (!(r_max > r_min)) p.fail("radii_max", "must exceed radii_min");
    const std::size_t per_octave = p.count("per_octave", 16, 1);
    const int max_order = int(p.count("max_order", 8, 2));
    return [=](std::ostream* log) {
        // C^infinity bump exp(-1 / (1 - t^2)) per parameter axis over the whole domain
        const Box dom = patch->domain;
        DensityFn bump = [dom](std::span<const double> x) {
            double v = 1.0;
            for (std::size_t a = 0; a < x.size(); ++a) {
                const double t = (2.0 * x[a] - dom.lo[a] - dom.hi[a]) / dom.side(a);
                if (std::abs(t) >= 1.0) return cplx(0.0);
                v *= std::exp(-1.0 / (1.0 - t * t));
            }
            return cplx(v);
        };
        const auto psi = SampledDensity::from_function(patch, dom, bump, 1.01 * r_max);
        const auto radii = geometric_radii(r_min, r_max, per_octave);
        const DecayEstimate fit = decay_fit(psi, direction, radii);
        const std::vector<double> x0(patch->param_dim(), 0.0);
        const TypeResult type = finite_type_order(*patch, x0, max_order);
        ExperimentOutput out;
        CsvTable t;
        t.header = {"r", "magnitude", "running_slope"};
        for (std::size_t i = 0; i < fit.radii.size(); ++i)
            t.add_row({num(fit.radii[i]), num(fit.magnitudes[i]), num(fit.running_slope[i])});
        out.tables.emplace_back("", std::move(t));
        out.tables.emplace_back(".plot", emit_plot_data(plot_series(fit, type)));
        out.summary["alpha_hat"] = fit.alpha_hat;
        out.summary["fit_residual"] = fit.fit_residual;
        out.summary["degenerate"] = fit.degenerate;
        out.summary["truncated"] = fit.truncated;
        out.summary["type_finite"] = type.finite;
        out.summary["type_order"] = type.order;
        note(log, "alpha_hat = " + num(fit.alpha_hat) + (fit.degenerate ? " (degenerate direction)" : ""));
        return out;
    };
}

Job prepare_lw_check(const ExperimentConfig& cfg, Params& p) {
    const std::size_t n = p.count("n", 3, 1);
    const std::size_t k = p.count("k", n, 1);
    if (k > n)
        p.fail("k", "= " + std::to_string(k) + " exceeds n = " + std::to_string(n) + " (requires k <= n)");
    std::vector<std::size_t> box = p.counts("box", {4});
    if (box.size() == 1) box.assign(n, box.front());
    if (box.size() != n) p.fail("box", "must give one side or n sides");
    for (auto b : box)
        if (b == 0) p.fail("box", "sides must be positive");
    const LWConfig lw = LWConfig::standard(box, k);
    const auto splits = parse_splits(p, k, n);
    const std::size_t trials = p.count("trials", 10, 1);
    const double zero_fraction = p.number("zero_fraction", 0.3);
    if (zero_fraction < 0.0 || zero_fraction >= 1.0) p.fail("zero_fraction", "must lie in [0, 1)");
    if (!splits.empty()) {
        // run the refined checks once on a tiny instance so malformed splits fail before computing
        (void)lw_refined_ratio(random_lw_instance(lw, splits, 0, 0.0), lw);
    }
    const std::uint64_t seed = cfg.seed;
    const std::size_t jobs = cfg.jobs;
    return [=](std::ostream* log) {
        std::vector<LWResult> res(trials);
        parallel_for(trials, jobs, [&](std::size_t t) {
            const auto g = random_lw_instance(lw, splits, seed * 1000003ull + t, zero_fraction);
            res[t] = splits.empty() ? lw_ratio(g, lw) : lw_refined_ratio(g, lw);
        });
        ExperimentOutput out;
        CsvTable tab;
        tab.header = {"trial", "lhs", "rhs", "ratio"};
        double worst = 0.0;
        for (std::size_t t = 0; t < trials; ++t) {
            tab.add_row({num(t), num(res[t].lhs), num(res[t].rhs), num(res[t].ratio)});
            worst = std::max(worst, res[t].ratio);
        }
        out.tables.emplace_back("", std::move(tab));
        out.summary["max_ratio"] = worst;
        note(log, "max ratio " + num(worst));
        return out;
    };
}

Job prepare_partition_check(const ExperimentConfig&, Params& p) {
    const std::size_t dim = p.count("dim", 1, 1);
    const double scale = p.positive("scale", 1.0);
    const int order = int(p.count("order", 8, 1));
    const double T = p.positive("truncation", 20.0);
    const std::size_t grid = p.count("grid", 64, 1);
    const BumpFamily fam(CubeLattice(dim, scale), order);
    return [=](std::ostream* log) {
        const auto rep = partition_check(fam, Box::centered(dim, scale), grid, T);
        ExperimentOutput out;
        CsvTable t;
        for (std::size_t a = 0; a < dim; ++a) t.header.push_back("x" + std::to_string(a + 1));
        t.header.push_back("deviation");
        std::vector<double> x(dim);
        for (std::size_t j = 0; j < rep.deviation.values.size(); ++j) {
            rep.deviation.point(j, x);
            std::vector<std::string> row;
            for (double v : x) row.push_back(num(v));
            row.push_back(num(rep.deviation.values[j].real()));
            t.add_row(std::move(row));
        }
        out.tables.emplace_back("", std::move(t));
        out.summary["max_deviation"] = rep.max_deviation;
        out.summary["spectral_leakage"] = bump_spectrum_check(fam);
        note(log, "max deviation " + num(rep.max_deviation));
        return out;
    };
}

CsvTable ledger_table(const Family& fam, const ConstantLedger& ledger) {
    CsvTable t;
    t.header = {"R", "delta"};
    for (std::size_t i = 0; i < fam.size(); ++i) t.header.push_back("mu_" + std::to_string(i + 1));
    for (const char* h : {"A_hat", "trials", "seed_best"}) t.header.push_back(h);
    for (const auto& e : ledger.entries) {
        std::vector<std::string> row{num(e.R), num(e.delta)};
        for (double m : e.mu) row.push_back(num(m));
        row.push_back(num(e.A_hat));
        row.push_back(num(e.trials));
        row.push_back(std::to_string(e.seed_best));
        t.add_row(std::move(row));
    }
    return t;
}

Job prepare_constant_sweep(const ExperimentConfig& cfg, Params& p) {
    Family fam = parse_family(p);
    const auto Rs = p.numbers("R", {8.0, 16.0, 32.0});
    for (double R : Rs)
        if (!(R > 0.0)) p.fail("R", "entries must be positive");
    const double delta = p.positive("delta", 0.0625);
    const ConstantOptions opt = parse_constant_options(p, cfg);
    return [=](std::ostream* log) {
        ConstantLedger ledger;
        for (double R : Rs) {
            ledger.add(best_constant_estimate(fam, R, delta, opt));
            note(log, "R = " + num(R) + ": A_hat = " + num(ledger.entries.back().A_hat));
        }
        ExperimentOutput out;
        CsvTable t = ledger_table(fam, ledger);
        const double growth = Rs.size() >= 2 ? ledger.fitted_growth() : std::numeric_limits<double>::quiet_NaN();
        // summary row: fitted growth exponent in the A_hat column
        std::vector<std::string> fit(t.header.size());
        fit[0] = "fit";
        fit[t.header.size() - 3] = num(growth);
        t.add_row(std::move(fit));
        out.tables.emplace_back("", std::move(t));
        out.tables.emplace_back(".plot", emit_plot_data(plot_series(ledger)));
        out.summary["fitted_growth"] = growth;
        return out;
    };
}

Job prepare_localization_sweep(const ExperimentConfig& cfg, Params& p) {
    Family fam = parse_family(p, {1, 0}, 2.0);
    std::vector<std::size_t> localized;
    for (std::size_t i = 0; i < fam.size(); ++i)
        if (fam[i].codim > 0) localized.push_back(i);
    localized = p.counts("localized", localized);
    if (localized.empty()) p.fail("localized", "must name at least one surface with a submanifold");
    for (auto i : localized)
        if (i >= fam.size()) p.fail("localized", "index " + std::to_string(i) + " is out of range");
    const auto ladder = p.numbers("mu", default_ladder());
    for (double m : ladder)
        if (!(m > 0.0)) p.fail("mu", "ladder entries must be positive");
    const double R = p.positive("R", 1.0 / *std::min_element(ladder.begin(), ladder.end()));
    const double delta = p.positive("delta", 0.0625);
    ConstantOptions opt = parse_constant_options(p, cfg);
    return [=](std::ostream* log) {
        const GainCurve g = localization_gain_curve(fam, localized, ladder, R, delta, opt);
        ExperimentOutput out;
        CsvTable t;
        t.header = {"mu", "A_hat", "mean"};
        for (std::size_t i = 0; i < g.mu.size(); ++i) t.add_row({num(g.mu[i]), num(g.A_hat[i]), num(g.mean[i])});
        out.tables.emplace_back("", std::move(t));
        out.tables.emplace_back(".plot", emit_plot_data(plot_series(g)));
        out.summary["slope"] = g.slope;
        out.summary["mean_slope"] = g.mean_slope;
        out.summary["band_lo"] = g.band_lo;
        out.summary["band_hi"] = g.band_hi;
        out.summary["reference"] = g.reference;
        note(log, "slope " + num(g.slope) + " (reference " + num(g.reference) + ")");
        return out;
    };
}

Job prepare_recursion_check(const ExperimentConfig& cfg, Params& p) {
    Family fam = parse_family(p);
    const double R = p.positive("R", 256.0);
    const double delta = p.positive("delta", 0.0625);
    const double kappa = p.positive("kappa_rec", 10.0);
    const ConstantOptions opt = parse_constant_options(p, cfg);
    return [=](std::ostream* log) {
        const RecursionCheck r = recursion_check(fam, R, delta, opt, kappa);
        ExperimentOutput out;
        CsvTable t;
        t.header = {"R", "delta", "A_R", "A_lhs", "factor", "rhs", "ratio", "within"};
        t.add_row({num(R), num(delta), num(r.A_R), num(r.lhs), num(r.factor), num(r.rhs), num(r.ratio),
                   r.within ? "1" : "0"});
        out.tables.emplace_back("", std::move(t));
        CsvTable c;
        c.header = {"surface", "mu", "delta", "c", "N", "product", "kappa0", "envelope", "holds"};
        for (std::size_t i = 0; i < fam.size(); ++i) {
            if (fam[i].codim == 0 || !(fam[i].mu > 0.0)) continue;
            const CuantCheck q = cuant_check(fam[i].mu, delta, double(fam[i].codim));
            c.add_row({num(i), num(fam[i].mu), num(delta), num(fam[i].codim), std::to_string(q.N), num(q.product),
                       num(q.kappa0), num(q.envelope), q.holds ? "1" : "0"});
        }
        if (!c.rows.empty()) out.tables.emplace_back(".cuant", std::move(c));
        out.summary["ratio"] = r.ratio;
        out.summary["within"] = r.within;
        note(log, "ratio " + num(r.ratio));
        return out;
    };
}

Job prepare_eps_removal(const ExperimentConfig&, Params& p) {
    const double pp = p.positive("p", 1.0);
    const std::size_t n = p.count("n", 3, 1);
    const double C = p.positive("C", 2.01);
    if (p.has("eps") && p.has("log_inv_eps")) p.fail("eps", "conflicts with log_inv_eps");
    const double eps = p.has("eps") ? p.positive("eps", 0.0) : std::exp(-p.positive("log_inv_eps", 100.0));
    const std::size_t grid = p.count("beta_grid", 1000, 1);
    (void)eps_removal_exponent(pp, n, eps, C);  // preconditions
    return [=](std::ostream*) {
        const EpsRemovalPlan plan = eps_removal_exponent(pp, n, eps, C);
        ExperimentOutput out;
        CsvTable t;
        t.header = {"quantity", "value"};
        const std::vector<std::pair<const char*, double>> rows{
            {"p", plan.p},         {"n", double(plan.n)},       {"C", plan.C},
            {"eps", plan.eps},     {"log_inv_eps", plan.log_inv_eps}, {"N", plan.N},
            {"beta", plan.beta},   {"beta_lo", plan.beta_lo},   {"beta_hi", plan.beta_hi},
            {"q_bound", plan.q_bound}, {"q_bound_statement", plan.q_bound_statement},
            {"beta_limit", plan.beta_limit}, {"beta_in_range", plan.beta_in_range ? 1.0 : 0.0},
            {"chain_holds", plan.chain_holds ? 1.0 : 0.0}};
        for (const auto& [k, v] : rows) t.add_row({k, num(v)});
        out.tables.emplace_back("", std::move(t));
        CsvTable c;
        c.header = {"beta", "lhs", "rhs", "holds"};
        std::size_t wrong = 0;
        for (std::size_t j = 0; j < grid; ++j) {
            const double b = 2.0 * plan.beta_limit * (double(j) + 0.5) / double(grid);
            const double lhs = (pp + double(n) * b) / (1.0 - b), rhs = pp + (double(n) + pp + 1.0) * b;
            const bool holds = chain_inequality(pp, n, b);
            if (holds != (b < plan.beta_limit)) ++wrong;
            c.add_row({num(b), num(lhs), num(rhs), holds ? "1" : "0"});
        }
        out.tables.emplace_back(".chain", std::move(c));
        out.summary["N"] = plan.N;
        out.summary["beta"] = plan.beta;
        out.summary["q_bound"] = plan.q_bound;
        out.summary["q_bound_statement"] = plan.q_bound_statement;
        out.summary["chain_mismatches"] = wrong;
        if (!plan.diagnostic.empty()) out.summary["diagnostic"] = plan.diagnostic;
        return out;
    };
}

Job prepare_sparse_cover(const ExperimentConfig&, Params& p) {
    const auto centers = read_centers(p, "cubes");
    const std::size_t N = p.count("depth", 2, 1);
    const double C = p.positive("sep_exponent", 2.0);
    return [=](std::ostream* log) {
        const SparseCollectionSet set = sparse_cover(centers, N, C);
        ExperimentOutput out;
        CsvTable t;
        t.header = {"collection_id", "radius"};
        const std::size_t d = std::size_t(centers.front().size());
        for (std::size_t a = 0; a < d; ++a) t.header.push_back("center_" + std::to_string(a + 1));
        bool all_sparse = true;
        for (std::size_t i = 0; i < set.collections.size(); ++i) {
            const auto& col = set.collections[i];
            all_sparse = all_sparse && is_sparse(col.centers, col.radius, N, C).sparse;
            for (const auto& c : col.centers) {
                std::vector<std::string> row{num(i), num(col.radius)};
                for (Eigen::Index a = 0; a < c.size(); ++a) row.push_back(num(c[a]));
                t.add_row(std::move(row));
            }
        }
        out.tables.emplace_back("", std::move(t));
        out.summary["collections"] = set.collections.size();
        out.summary["all_sparse"] = all_sparse;
        out.summary["covers"] = covers(set, centers);
        out.summary["kappa_cover"] = set.kappa_cover;
        out.summary["radii_within_cap"] = set.radii_within_cap;
        note(log, std::to_string(set.collections.size()) + " collections");
        return out;
    };
}

Job prepare(const ExperimentConfig& cfg) {
    Params p(cfg.params, cfg.kind);
    Job job;
    if (cfg.kind == "transversality") job = prepare_transversality(cfg, p);
    else if (cfg.kind == "decay-fit") job = prepare_decay_fit(cfg, p);
    else if (cfg.kind == "lw-check") job = prepare_lw_check(cfg, p);
    else if (cfg.kind == "partition-check") job = prepare_partition_check(cfg, p);
    else if (cfg.kind == "constant-sweep") job = prepare_constant_sweep(cfg, p);
    else if (cfg.kind == "localization-sweep") job = prepare_localization_sweep(cfg, p);
    else if (cfg.kind == "recursion-check") job = prepare_recursion_check(cfg, p);
    else if (cfg.kind == "eps-removal") job = prepare_eps_removal(cfg, p);
    else if (cfg.kind == "sparse-cover") job = prepare_sparse_cover(cfg, p);
    else throw InvalidArgument("unknown experiment kind '" + cfg.kind + "'");
    p.finish();
    return job;
}

}  // namespace

std::string ExperimentConfig::run_id() const {
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx",
                  static_cast<unsigned long long>(fnv1a(kind + '\n' + std::to_string(seed) + '\n' + params.dump())));
    return buf;
}

Json ExperimentConfig::echo() const {
    Json j = Json::object();
    j["experiment"] = kind;
    j["seed"] = seed;
    j["jobs"] = jobs;
    j["out_dir"] = out_dir;
    j["out"] = out;
    j["verbose"] = verbose;
    j["params"] = params;
    return j;
}

ExperimentConfig make_config(const std::string& kind, const Json& file, const Json& overrides) {
    ExperimentConfig cfg;
    if (!file.is_object() || !overrides.is_object()) throw InvalidArgument("configuration must be a table");
    const std::string file_kind = file.value("experiment", std::string());
    cfg.kind = kind.empty() ? file_kind : kind;
    if (cfg.kind.empty()) throw InvalidArgument("no experiment kind given");
    if (std::find(experiment_kinds().begin(), experiment_kinds().end(), cfg.kind) == experiment_kinds().end())
        throw InvalidArgument("unknown experiment kind '" + cfg.kind + "'");
    if (!file_kind.empty() && file_kind != cfg.kind)
        throw InvalidArgument("config file is for '" + file_kind + "', not '" + cfg.kind + "'");
    Json merged = file;
    for (const auto& [k, v] : overrides.items()) merged[k] = v;
    for (const auto& [k, v] : merged.items()) {
        if (!kGlobalKeys.count(k)) {
            cfg.params[k] = v;
            continue;
        }
        auto bad = [&](const char* what) { throw InvalidArgument("global option '" + k + "' must be " + what); };
        if (k == "seed") {
            if (!v.is_number_integer() || v.get<std::int64_t>() < 0) bad("a non-negative integer");
            cfg.seed = v.get<std::uint64_t>();
        } else if (k == "jobs") {
            if (!v.is_number_integer() || v.get<std::int64_t>() < 0) bad("a non-negative integer");
            cfg.jobs = v.get<std::size_t>();
        } else if (k == "out_dir" || k == "out") {
            if (!v.is_string()) bad("a string");
            (k == "out" ? cfg.out : cfg.out_dir) = v.get<std::string>();
        } else if (k == "verbose") {
            if (!v.is_boolean()) bad("true or false");
            cfg.verbose = v.get<bool>();
        }
    }
    return cfg;
}

void validate(const ExperimentConfig& cfg) { (void)prepare(cfg); }

ExperimentOutput run_experiment(const ExperimentConfig& cfg, std::ostream* log) { return prepare(cfg)(log); }

int exit_code_for_current_exception(std::string& message) {
    try {
        throw;
    } catch (const InvalidArgument& e) {
        message = std::string("invalid configuration: ") + e.what();
        return 1;
    } catch (const nlohmann::json::exception& e) {
        message = std::string("invalid configuration: ") + e.what();
        return 1;
    } catch (const ResolutionError& e) {
        message = std::string("resolution refused: ") + e.what();
        return 2;
    } catch (const NumericError& e) {
        message = std::string("numeric failure: ") + e.what();
        return 3;
    } catch (const std::exception& e) {
        message = std::string("numeric failure: ") + e.what();
        return 3;
    }
}

RunStatus run(const ExperimentConfig& cfg, std::ostream& log) {
    RunStatus st;
    const auto t0 = std::chrono::steady_clock::now();
    try {
        Job job = prepare(cfg);
        ExperimentOutput out = job(cfg.verbose ? &log : nullptr);
        const fs::path dir(cfg.out_dir.empty() ? "." : cfg.out_dir);
        fs::create_directories(dir);
        fs::path main = cfg.out.empty() ? fs::path(cfg.kind + "-" + cfg.run_id() + ".csv") : fs::path(cfg.out);
        if (main.is_relative()) main = dir / main;
        if (main.has_parent_path()) fs::create_directories(main.parent_path());
        for (const auto& [suffix, table] : out.tables) {
            fs::path path = main;
            if (!suffix.empty()) path.replace_filename(main.stem().string() + suffix + ".csv");
            std::ofstream f(path, std::ios::binary);
            f << table.str();
            if (!f) throw NumericError("cannot write '" + path.string() + "'");
            st.files.push_back(path.string());
        }
        const double wall = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        Json manifest = Json::object();
        manifest["run_id"] = cfg.run_id();
        manifest["version"] = MRLAB_VERSION;
        manifest["config"] = cfg.echo();
        manifest["outputs"] = st.files;
        manifest["summary"] = out.summary;
        manifest["wall_time_seconds"] = wall;
        fs::path mpath = main;
        mpath.replace_extension(".manifest.json");
        std::ofstream mf(mpath, std::ios::binary);
        mf << manifest.dump(2) << '\n';
        st.files.push_back(mpath.string());
        st.message = "wrote " + st.files.front();
    } catch (...) {
        st.exit_code = exit_code_for_current_exception(st.message);
    }
    return st;
}

}  // namespace mrlab
