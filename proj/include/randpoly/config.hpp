#pragma once

// Experiment configuration: JSON parsing and validation with line-numbered
// error messages.

#include <cstdint>
#include <fstream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "bodies.hpp"
#include "error.hpp"
#include "functionals.hpp"
#include "malliavin.hpp"

namespace randpoly {

using json = nlohmann::json;

/// Invalid configuration; `line` is 0 when unknown.
class ConfigError : public InputError
{
public:
    ConfigError(const std::string& source, int line, const std::string& msg)
        : InputError(format(source, line, msg)), line_(line)
    {
    }

    [[nodiscard]] int line() const { return line_; }

private:
    static std::string format(const std::string& source, int line, const std::string& msg)
    {
        std::string out = source.empty() ? std::string("config") : source;
        if (line > 0) {
            out += ":" + std::to_string(line);
        }
        return out + ": " + msg;
    }

    int line_ = 0;
};

namespace detail {

/// Maps JSON pointers of a syntactically valid document to the line on which
/// each value starts.
class LineIndex
{
public:
    explicit LineIndex(const std::string& text) : s_(text)
    {
        value("");
    }

    [[nodiscard]] int line_of(std::string pointer) const
    {
        while (true) {
            const auto it = lines_.find(pointer);
            if (it != lines_.end()) {
                return it->second;
            }
            const auto slash = pointer.rfind('/');
            if (slash == std::string::npos) {
                return 0;
            }
            pointer.erase(slash);
        }
    }

private:
    void ws()
    {
        while (i_ < s_.size() && (s_[i_] == ' ' || s_[i_] == '\t' || s_[i_] == '\r' || s_[i_] == '\n')) {
            line_ += s_[i_] == '\n' ? 1 : 0;
            ++i_;
        }
    }

    std::string str()
    {
        std::string out;
        ++i_;
        while (i_ < s_.size() && s_[i_] != '"') {
            if (s_[i_] == '\\' && i_ + 1 < s_.size()) {
                ++i_;
            }
            out += s_[i_++];
        }
        ++i_;
        return out;
    }

    static std::string escape(const std::string& key)
    {
        std::string out;
        for (char c : key) {
            if (c == '~') {
                out += "~0";
            } else if (c == '/') {
                out += "~1";
            } else {
                out += c;
            }
        }
        return out;
    }

    void value(const std::string& path)
    {
        ws();
        if (i_ >= s_.size()) {
            return;
        }
        lines_.emplace(path, line_);
        const char c = s_[i_];
        if (c == '{' || c == '[') {
            const char close = c == '{' ? '}' : ']';
            ++i_;
            ws();
            int index = 0;
            while (i_ < s_.size() && s_[i_] != close) {
                if (c == '{') {
                    const std::string key = str();
                    ws();
                    ++i_;
                    value(path + "/" + escape(key));
                } else {
                    value(path + "/" + std::to_string(index++));
                }
                ws();
                if (i_ < s_.size() && s_[i_] == ',') {
                    ++i_;
                    ws();
                }
            }
            ++i_;
        } else if (c == '"') {
            str();
        } else {
            while (i_ < s_.size() && std::string_view(",]} \t\r\n").find(s_[i_]) == std::string_view::npos) {
                ++i_;
            }
        }
    }

    const std::string& s_;
    std::size_t i_ = 0;
    int line_ = 1;
    std::map<std::string, int> lines_;
};

} // namespace detail

struct FunctionalRequest
{
    enum class Kind { intrinsic_all, intrinsic, f_vector, f, wills, oracle, multivariate, valuation };

    Kind kind = Kind::intrinsic_all;
    int index = 0;
    ValuationSpec spec;
};

struct MalliavinConfig
{
    double t = 0.0;
    /// a column name, or "multivariate" for the gamma terms
    std::string functional = "V_2";
    MomentOptions options;
    int n_reps = 0;
};

struct SandwichConfig
{
    double c = 2.0;
    int n_reps = 1000;
    std::vector<double> t_grid;
};

struct Assertion
{
    std::string id;
    std::string kind;
    json params;
};

struct ExperimentConfig
{
    std::string name = "experiment";
    json body_json;
    ConvexBody body = ConvexBody::ball(2);
    std::vector<double> t_grid;
    int n_reps = 0;
    std::vector<FunctionalRequest> functionals;
    EvalMode mode;
    std::uint64_t seed = 0;
    int workers = 1;
    bool allow_nonsmooth = false;
    std::optional<MalliavinConfig> malliavin;
    std::optional<SandwichConfig> sandwich;
    std::vector<std::string> correlation_columns;
    int n_boot = 200;
    std::string outputs;
    std::vector<Assertion> assertions;
    /// the document as parsed, for hashing and persistence
    json source;
};

inline const std::vector<std::string>& assertion_kinds()
{
    static const std::vector<std::string> kinds{
        "mean_within",        "variance_within",   "rate_slope",     "variance_identity", "w1_decreasing",
        "w1_at_most",         "correlation_nonnegative", "rank_at_most", "sandwich_at_least",
        "sandwich_nondecreasing", "ms_domination",  "euler_poincare"};
    return kinds;
}

/// Column names produced by the requested functionals, in table order.
inline std::vector<std::string> column_names(const ExperimentConfig& cfg)
{
    const int d = cfg.body.dim();
    std::vector<std::string> out{"n_points"};
    auto add = [&out](const std::string& name) {
        if (std::find(out.begin(), out.end(), name) == out.end()) {
            out.push_back(name);
        }
    };
    for (const auto& f : cfg.functionals) {
        switch (f.kind) {
        case FunctionalRequest::Kind::intrinsic_all:
            for (int j = 0; j <= d; ++j) {
                add("V_" + std::to_string(j));
            }
            break;
        case FunctionalRequest::Kind::intrinsic:
            add("V_" + std::to_string(f.index));
            break;
        case FunctionalRequest::Kind::f_vector:
            for (int k = 0; k < d; ++k) {
                add("f_" + std::to_string(k));
            }
            break;
        case FunctionalRequest::Kind::f:
            add("f_" + std::to_string(f.index));
            break;
        case FunctionalRequest::Kind::wills:
            add("wills");
            break;
        case FunctionalRequest::Kind::oracle:
            add("oracle");
            add("missed_volume");
            break;
        case FunctionalRequest::Kind::multivariate:
            for (int j = 1; j <= d; ++j) {
                add("V_" + std::to_string(j));
            }
            for (int k = 0; k < d; ++k) {
                add("f_" + std::to_string(k));
            }
            break;
        case FunctionalRequest::Kind::valuation:
            add(f.spec.label);
            break;
        }
    }
    return out;
}

/// (V_1..V_d, f_0..f_{d-1}): the multivariate vector.
inline std::vector<std::string> multivariate_columns(int d)
{
    std::vector<std::string> out;
    for (int j = 1; j <= d; ++j) {
        out.push_back("V_" + std::to_string(j));
    }
    for (int k = 0; k < d; ++k) {
        out.push_back("f_" + std::to_string(k));
    }
    return out;
}

namespace detail {

class ConfigReader
{
public:
    ConfigReader(const json& doc, const LineIndex& lines, std::string source)
        : doc_(doc), lines_(lines), source_(std::move(source))
    {
    }

    [[noreturn]] void fail(const std::string& pointer, const std::string& msg) const
    {
        throw ConfigError(source_, lines_.line_of(pointer), msg);
    }

    void check(bool cond, const std::string& pointer, const std::string& msg) const
    {
        if (!cond) {
            fail(pointer, msg);
        }
    }

    void only_keys(const json& obj, const std::string& pointer, const std::vector<std::string>& allowed) const
    {
        check(obj.is_object(), pointer, "expected an object");
        for (const auto& [key, value] : obj.items()) {
            if (std::find(allowed.begin(), allowed.end(), key) == allowed.end()) {
                fail(pointer + "/" + key, "unknown key '" + key + "'");
            }
        }
    }

    double number(const json& v, const std::string& pointer, const std::string& what) const
    {
        check(v.is_number(), pointer, what + " must be a number");
        const double x = v.get<double>();
        check(std::isfinite(x), pointer, what + " must be finite");
        return x;
    }

    double positive(const json& v, const std::string& pointer, const std::string& what) const
    {
        const double x = number(v, pointer, what);
        check(x > 0.0, pointer, what + " must be positive");
        return x;
    }

    long integer(const json& v, const std::string& pointer, const std::string& what, long lo) const
    {
        check(v.is_number_integer(), pointer, what + " must be an integer");
        const long x = v.get<long>();
        check(x >= lo, pointer, what + " must be >= " + std::to_string(lo));
        return x;
    }

    bool boolean(const json& v, const std::string& pointer, const std::string& what) const
    {
        check(v.is_boolean(), pointer, what + " must be true or false");
        return v.get<bool>();
    }

    Vec vector(const json& v, const std::string& pointer, const std::string& what) const
    {
        check(v.is_array() && !v.empty(), pointer, what + " must be a non-empty list of numbers");
        Vec out(static_cast<Eigen::Index>(v.size()));
        for (std::size_t i = 0; i < v.size(); ++i) {
            out[static_cast<Eigen::Index>(i)] = number(v[i], pointer + "/" + std::to_string(i), what + " entry");
        }
        return out;
    }

    std::vector<double> t_list(const json& v, const std::string& pointer) const
    {
        check(v.is_array() && !v.empty(), pointer, "t_grid must be a non-empty list");
        std::vector<double> out;
        for (std::size_t i = 0; i < v.size(); ++i) {
            const std::string p = pointer + "/" + std::to_string(i);
            out.push_back(positive(v[i], p, "t"));
            check(i == 0 || out[i] > out[i - 1], p, "t_grid must be strictly increasing");
        }
        return out;
    }

    ConvexBody body(const json& b, const std::string& p) const
    {
        check(b.is_object() && b.contains("kind"), p, "body needs a 'kind' (ball, ellipsoid or cube)");
        const json& kind = b["kind"];
        check(kind.is_string(), p + "/kind", "body kind must be a string");
        const std::string k = kind.get<std::string>();
        if (k == "ball") {
            only_keys(b, p, {"kind", "dim", "radius", "center"});
            const double radius = b.contains("radius") ? positive(b["radius"], p + "/radius", "radius") : 1.0;
            if (b.contains("center")) {
                const Vec c = vector(b["center"], p + "/center", "center");
                if (b.contains("dim")) {
                    check(integer(b["dim"], p + "/dim", "dim", 1) == c.size(), p + "/dim",
                          "dim does not match the center");
                }
                return ConvexBody::ball(c, radius);
            }
            check(b.contains("dim"), p, "ball needs 'dim' or 'center'");
            return ConvexBody::ball(static_cast<int>(integer(b["dim"], p + "/dim", "dim", 1)), radius);
        }
        if (k == "ellipsoid") {
            only_keys(b, p, {"kind", "center", "semi_axes"});
            check(b.contains("semi_axes"), p, "ellipsoid needs 'semi_axes'");
            const Vec axes = vector(b["semi_axes"], p + "/semi_axes", "semi_axes");
            for (Eigen::Index i = 0; i < axes.size(); ++i) {
                check(axes[i] > 0.0, p + "/semi_axes/" + std::to_string(i), "semi-axes must be positive");
            }
            const Vec c = b.contains("center") ? vector(b["center"], p + "/center", "center") : Vec(Vec::Zero(axes.size()));
            check(c.size() == axes.size(), p + "/center", "center and semi_axes differ in dimension");
            return ConvexBody::ellipsoid(c, axes);
        }
        if (k == "cube") {
            only_keys(b, p, {"kind", "dim", "side"});
            check(b.contains("dim"), p, "cube needs 'dim'");
            const double side = b.contains("side") ? positive(b["side"], p + "/side", "side") : 1.0;
            return ConvexBody::cube(static_cast<int>(integer(b["dim"], p + "/dim", "dim", 1)), side);
        }
        fail(p + "/kind", "unknown body kind '" + k + "'");
    }

    FunctionalRequest functional(const json& f, const std::string& p, int d) const
    {
        FunctionalRequest r;
        if (f.is_string()) {
            const std::string s = f.get<std::string>();
            if (s == "intrinsic") {
                r.kind = FunctionalRequest::Kind::intrinsic_all;
            } else if (s == "f_vector") {
                r.kind = FunctionalRequest::Kind::f_vector;
            } else if (s == "wills") {
                r.kind = FunctionalRequest::Kind::wills;
            } else if (s == "oracle") {
                r.kind = FunctionalRequest::Kind::oracle;
            } else if (s == "multivariate") {
                r.kind = FunctionalRequest::Kind::multivariate;
            } else {
                fail(p, "unknown functional '" + s + "'");
            }
            return r;
        }
        check(f.is_object(), p, "functional must be a name or an object");
        if (f.contains("intrinsic")) {
            only_keys(f, p, {"intrinsic"});
            r.kind = FunctionalRequest::Kind::intrinsic;
            r.index = static_cast<int>(integer(f["intrinsic"], p + "/intrinsic", "intrinsic index", 0));
            check(r.index <= d, p + "/intrinsic", "intrinsic index exceeds the dimension");
            return r;
        }
        if (f.contains("f")) {
            only_keys(f, p, {"f"});
            r.kind = FunctionalRequest::Kind::f;
            r.index = static_cast<int>(integer(f["f"], p + "/f", "face dimension", 0));
            check(r.index < d, p + "/f", "face dimension must be below the ambient dimension");
            return r;
        }
        only_keys(f, p, {"label", "coeffs", "allow_non_clt"});
        check(f.contains("label") && f["label"].is_string(), p, "valuation needs a string 'label'");
        check(f.contains("coeffs"), p, "valuation needs 'coeffs'");
        r.kind = FunctionalRequest::Kind::valuation;
        r.spec.label = f["label"].get<std::string>();
        check(!r.spec.label.empty() && r.spec.label.find_first_of(",\"\n") == std::string::npos, p + "/label",
              "label must be non-empty and free of commas, quotes and newlines");
        const Vec c = vector(f["coeffs"], p + "/coeffs", "coeffs");
        check(c.size() == d + 1, p + "/coeffs", "coeffs must have d + 1 = " + std::to_string(d + 1) + " entries");
        r.spec.coeffs.assign(c.data(), c.data() + c.size());
        const bool override_gate = f.contains("allow_non_clt") && boolean(f["allow_non_clt"], p + "/allow_non_clt", "allow_non_clt");
        check(override_gate || r.spec.satisfies_clt_gate(), p + "/coeffs",
              "coefficients must share a sign with some c_k != 0 for k >= 1 (set allow_non_clt to override)");
        return r;
    }

    const json& doc_;
    const LineIndex& lines_;
    std::string source_;
};

} // namespace detail

/// Parse and validate a configuration document. `source` names it in messages.
inline ExperimentConfig parse_config(const std::string& text, const std::string& source = "config")
{
    json doc;
    try {
        doc = json::parse(text);
    } catch (const json::parse_error& e) {
        // the byte offset points at the offending character
        int line = 1;
        for (std::size_t i = 0; i + 1 < e.byte && i < text.size(); ++i) {
            line += text[i] == '\n' ? 1 : 0;
        }
        std::string what = e.what();
        const auto pos = what.find("syntax error");
        throw ConfigError(source, line, pos == std::string::npos ? what : what.substr(pos));
    }
    const detail::LineIndex lines(text);
    const detail::ConfigReader r(doc, lines, source);
    r.only_keys(doc, "",
                {"name", "body", "t_grid", "n_reps", "functionals", "mode", "seed", "workers", "allow_nonsmooth",
                 "malliavin", "sandwich", "correlation_columns", "n_boot", "outputs", "assertions", "description"});

    ExperimentConfig cfg;
    cfg.source = doc;
    if (doc.contains("name")) {
        r.check(doc["name"].is_string(), "/name", "name must be a string");
        cfg.name = doc["name"].get<std::string>();
    }
    r.check(doc.contains("body"), "", "missing 'body'");
    cfg.body_json = doc["body"];
    cfg.body = r.body(doc["body"], "/body");
    const int d = cfg.body.dim();

    if (doc.contains("allow_nonsmooth")) {
        cfg.allow_nonsmooth = r.boolean(doc["allow_nonsmooth"], "/allow_nonsmooth", "allow_nonsmooth");
    }
    r.check(cfg.body.is_smooth() || cfg.allow_nonsmooth, "/body",
            "the cube is not a smooth body; set allow_nonsmooth to use it");

    r.check(doc.contains("t_grid"), "", "missing 't_grid'");
    cfg.t_grid = r.t_list(doc["t_grid"], "/t_grid");
    r.check(doc.contains("n_reps"), "", "missing 'n_reps'");
    cfg.n_reps = static_cast<int>(r.integer(doc["n_reps"], "/n_reps", "n_reps", 2));

    r.check(doc.contains("functionals"), "", "missing 'functionals'");
    const json& fs = doc["functionals"];
    r.check(fs.is_array() && !fs.empty(), "/functionals", "functionals must be a non-empty list");
    for (std::size_t i = 0; i < fs.size(); ++i) {
        cfg.functionals.push_back(r.functional(fs[i], "/functionals/" + std::to_string(i), d));
    }
    {
        const std::vector<std::string> names = column_names(cfg);
        std::vector<std::string> labels;
        for (std::size_t i = 0; i < cfg.functionals.size(); ++i) {
            const auto& f = cfg.functionals[i];
            if (f.kind != FunctionalRequest::Kind::valuation) {
                continue;
            }
            const std::string p = "/functionals/" + std::to_string(i) + "/label";
            r.check(std::find(labels.begin(), labels.end(), f.spec.label) == labels.end(), p, "duplicate label");
            r.check(std::count(names.begin(), names.end(), f.spec.label) == 1 &&
                        f.spec.label != "n_points" && f.spec.label.rfind("V_", 0) != 0 && f.spec.label.rfind("f_", 0) != 0 &&
                        f.spec.label != "wills" && f.spec.label != "oracle" && f.spec.label != "missed_volume",
                    p, "label collides with a built-in column name");
            labels.push_back(f.spec.label);
        }
    }

    cfg.mode = EvalMode::exact();
    if (doc.contains("mode")) {
        const json& m = doc["mode"];
        if (m.is_string() && m.get<std::string>() == "exact") {
            cfg.mode = EvalMode::exact();
        } else if (m.is_object()) {
            r.only_keys(m, "/mode", {"mc"});
            r.check(m.contains("mc"), "/mode", "mode object needs 'mc'");
            cfg.mode = EvalMode::mc(static_cast<int>(r.integer(m["mc"], "/mode/mc", "n_dirs", 2)));
        } else {
            r.fail("/mode", "mode must be \"exact\" or {\"mc\": n_dirs}");
        }
    }
    r.check(cfg.mode.monte_carlo || d <= 3, doc.contains("mode") ? "/mode" : "/body",
            "exact intrinsic volumes need d <= 3; use {\"mc\": n_dirs}");

    r.check(doc.contains("seed"), "", "missing 'seed'");
    r.check(doc["seed"].is_number_unsigned() || (doc["seed"].is_number_integer() && doc["seed"].get<long long>() >= 0),
            "/seed", "seed must be a non-negative integer");
    cfg.seed = doc["seed"].get<std::uint64_t>();
    if (doc.contains("workers")) {
        cfg.workers = static_cast<int>(r.integer(doc["workers"], "/workers", "workers", 1));
    }
    if (doc.contains("n_boot")) {
        cfg.n_boot = static_cast<int>(r.integer(doc["n_boot"], "/n_boot", "n_boot", 10));
    }
    if (doc.contains("outputs")) {
        r.check(doc["outputs"].is_string(), "/outputs", "outputs must be a directory path");
        cfg.outputs = doc["outputs"].get<std::string>();
    }

    const std::vector<std::string> names = column_names(cfg);
    auto has_column = [&names](const std::string& c) { return std::find(names.begin(), names.end(), c) != names.end(); };

    if (doc.contains("correlation_columns")) {
        const json& cc = doc["correlation_columns"];
        r.check(cc.is_array() && cc.size() >= 2, "/correlation_columns", "correlation_columns must list at least two columns");
        for (std::size_t i = 0; i < cc.size(); ++i) {
            const std::string p = "/correlation_columns/" + std::to_string(i);
            r.check(cc[i].is_string() && has_column(cc[i].get<std::string>()), p, "not a column of this experiment");
            cfg.correlation_columns.push_back(cc[i].get<std::string>());
        }
    } else {
        for (const auto& c : names) {
            if (c != "n_points" && c != "V_0" && c != "missed_volume") {
                cfg.correlation_columns.push_back(c);
            }
        }
    }

    if (doc.contains("malliavin")) {
        const json& m = doc["malliavin"];
        r.only_keys(m, "/malliavin", {"t", "functional", "n_outer", "n_inner", "sampling", "c", "width", "n_reps"});
        MalliavinConfig mc;
        mc.t = m.contains("t") ? r.positive(m["t"], "/malliavin/t", "t") : cfg.t_grid.front();
        if (m.contains("functional")) {
            r.check(m["functional"].is_string(), "/malliavin/functional", "functional must be a column name");
            mc.functional = m["functional"].get<std::string>();
        }
        if (mc.functional == "multivariate") {
            for (const auto& c : multivariate_columns(d)) {
                r.check(has_column(c), "/malliavin/functional", "multivariate needs the multivariate functionals");
            }
        } else {
            r.check(has_column(mc.functional) && mc.functional != "n_points", "/malliavin/functional",
                    "'" + mc.functional + "' is not a functional column of this experiment");
        }
        if (m.contains("n_outer")) {
            mc.options.n_outer = static_cast<int>(r.integer(m["n_outer"], "/malliavin/n_outer", "n_outer", 2));
        }
        if (m.contains("n_inner")) {
            mc.options.n_inner = static_cast<int>(r.integer(m["n_inner"], "/malliavin/n_inner", "n_inner", 2));
        }
        mc.options.sampling = cfg.body.is_ball() ? Sampling::shell() : Sampling::plain();
        if (m.contains("sampling")) {
            const json& s = m["sampling"];
            r.check(s.is_string() && (s == "plain" || s == "boundary_shell"), "/malliavin/sampling",
                    "sampling must be \"plain\" or \"boundary_shell\"");
            mc.options.sampling.kind = s == "plain" ? Sampling::Kind::plain : Sampling::Kind::boundary_shell;
        }
        r.check(mc.options.sampling.kind == Sampling::Kind::plain || cfg.body.is_ball(), "/malliavin/sampling",
                "boundary_shell sampling needs a ball body");
        if (m.contains("c")) {
            mc.options.sampling.c = r.positive(m["c"], "/malliavin/c", "c");
        }
        if (m.contains("width")) {
            mc.options.sampling.width = r.positive(m["width"], "/malliavin/width", "width");
        }
        mc.n_reps = m.contains("n_reps") ? static_cast<int>(r.integer(m["n_reps"], "/malliavin/n_reps", "n_reps", 2))
                                         : cfg.n_reps;
        mc.options.workers = cfg.workers;
        cfg.malliavin = mc;
    }

    if (doc.contains("sandwich")) {
        const json& s = doc["sandwich"];
        r.only_keys(s, "/sandwich", {"c", "n_reps", "t_grid"});
        r.check(cfg.body.is_ball(), "/sandwich", "the sandwich check needs a ball body");
        SandwichConfig sc;
        if (s.contains("c")) {
            sc.c = r.positive(s["c"], "/sandwich/c", "c");
        }
        sc.n_reps = s.contains("n_reps") ? static_cast<int>(r.integer(s["n_reps"], "/sandwich/n_reps", "n_reps", 1))
                                         : cfg.n_reps;
        sc.t_grid = s.contains("t_grid") ? r.t_list(s["t_grid"], "/sandwich/t_grid") : cfg.t_grid;
        for (std::size_t i = 0; i < sc.t_grid.size(); ++i) {
            const double eps = sc.c * std::log(sc.t_grid[i]) / sc.t_grid[i];
            r.check(sc.t_grid[i] > 1.0 && eps < 0.5 * cfg.body.volume(), "/sandwich",
                    "c log(t)/t must lie below half the body volume at every t");
        }
        cfg.sandwich = sc;
    }

    if (doc.contains("assertions")) {
        const json& as = doc["assertions"];
        r.check(as.is_array(), "/assertions", "assertions must be a list");
        const auto& kinds = assertion_kinds();
        for (std::size_t i = 0; i < as.size(); ++i) {
            const std::string p = "/assertions/" + std::to_string(i);
            const json& a = as[i];
            r.check(a.is_object() && a.contains("kind") && a["kind"].is_string(), p, "assertion needs a string 'kind'");
            const std::string kind = a["kind"].get<std::string>();
            r.check(std::find(kinds.begin(), kinds.end(), kind) != kinds.end(), p + "/kind",
                    "unknown assertion kind '" + kind + "'");
            Assertion out;
            out.kind = kind;
            out.id = a.contains("id") && a["id"].is_string() ? a["id"].get<std::string>() : kind + "_" + std::to_string(i);
            out.params = a;
            if (a.contains("column")) {
                r.check(a["column"].is_string() && has_column(a["column"].get<std::string>()), p + "/column",
                        "not a column of this experiment");
            }
            if (a.contains("t")) {
                const double t = r.positive(a["t"], p + "/t", "t");
                const bool in_grid = std::find(cfg.t_grid.begin(), cfg.t_grid.end(), t) != cfg.t_grid.end();
                const bool in_sandwich = cfg.sandwich && std::find(cfg.sandwich->t_grid.begin(), cfg.sandwich->t_grid.end(), t) != cfg.sandwich->t_grid.end();
                r.check(in_grid || in_sandwich, p + "/t", "t is not on the experiment grid");
            }
            for (const char* key : {"target", "tol", "value", "n_se", "max", "min", "lo", "hi"}) {
                if (a.contains(key)) {
                    r.number(a[key], p + "/" + key, key);
                }
            }
            auto need = [&](std::initializer_list<const char*> keys) {
                for (const char* key : keys) {
                    r.check(a.contains(key), p, "assertion '" + kind + "' needs '" + key + "'");
                }
            };
            if (kind == "mean_within" || kind == "variance_within") {
                need({"column", "t", "value", "n_se"});
            } else if (kind == "rate_slope") {
                need({"column", "target", "tol"});
                r.check(cfg.t_grid.size() >= 3, p, "rate_slope needs at least three grid points");
            } else if (kind == "variance_identity") {
                need({"t", "lo", "hi"});
                r.check(has_column("oracle"), p, "variance_identity needs the oracle functional");
            } else if (kind == "w1_decreasing") {
                need({"column"});
            } else if (kind == "w1_at_most") {
                need({"column", "t", "max"});
            } else if (kind == "correlation_nonnegative") {
                need({"t", "n_se"});
            } else if (kind == "rank_at_most") {
                need({"t", "max"});
            } else if (kind == "sandwich_at_least") {
                need({"t", "min"});
                r.check(cfg.sandwich.has_value(), p, "sandwich assertions need a 'sandwich' section");
            } else if (kind == "sandwich_nondecreasing") {
                r.check(cfg.sandwich.has_value(), p, "sandwich assertions need a 'sandwich' section");
            } else if (kind == "ms_domination") {
                need({"n_se"});
                r.check(cfg.malliavin.has_value() && cfg.malliavin->functional != "multivariate", p,
                        "ms_domination needs a univariate 'malliavin' section");
                r.check(std::find(cfg.t_grid.begin(), cfg.t_grid.end(), cfg.malliavin->t) != cfg.t_grid.end(), p,
                        "ms_domination needs the malliavin t on the experiment grid");
            }
            cfg.assertions.push_back(std::move(out));
        }
    }
    return cfg;
}

inline ExperimentConfig load_config(const std::string& path)
{
    std::ifstream in(path);
    if (!in) {
        throw InputError("cannot read config file '" + path + "'");
    }
    std::ostringstream ss;
    ss << in.rdbuf();
    return parse_config(ss.str(), path);
}

} // namespace randpoly
