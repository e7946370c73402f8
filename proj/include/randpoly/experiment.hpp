#pragma once

// Experiment orchestration: replications over the t-grid, persisted tables,
// derived reports and plot data, acceptance assertions, and verification of a
// finished run against its manifest.

#include <chrono>
#include <cstdint>
#include <cstdio>
#include <cstdlib>
#include <limits>
#include <map>
#include <optional>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <sstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "config.hpp"
#include "functionals.hpp"
#include "hull.hpp"
#include "malliavin.hpp"
#include "parallel.hpp"
#include "rng.hpp"
#include "stats.hpp"

#ifndef RANDPOLY_VERSION
#define RANDPOLY_VERSION "0.0.0"
#endif

namespace randpoly {

namespace fs = std::filesystem;

/// Environment variable naming the default output directory.
inline constexpr const char* kOutputDirEnv = "RANDPOLY_OUTPUT_DIR";

inline std::string fnv1a_hex(std::string_view bytes)
{
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char c : bytes) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    std::ostringstream os;
    os << std::hex << std::setw(16) << std::setfill('0') << h;
    return os.str();
}

inline std::string config_hash(const ExperimentConfig& cfg)
{
    return fnv1a_hex(cfg.source.dump());
}

inline std::string read_file(const fs::path& p)
{
    std::ifstream in(p, std::ios::binary);
    if (!in) {
        throw InputError("cannot read '" + p.string() + "'");
    }
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

inline void write_file(const fs::path& p, const std::string& bytes)
{
    if (p.has_parent_path()) {
        fs::create_directories(p.parent_path());
    }
    std::ofstream out(p, std::ios::binary);
    out << bytes;
    if (!out) {
        throw std::runtime_error("cannot write '" + p.string() + "'");
    }
}

inline std::string format_double(double x)
{
    std::ostringstream os;
    os << std::setprecision(17) << x;
    return os.str();
}

// ---- tables ---------------------------------------------------------------

inline std::string table_to_csv(const ReplicationTable& t)
{
    std::ostringstream os;
    os << std::setprecision(17);
    const auto& names = t.names();
    for (std::size_t j = 0; j < names.size(); ++j) {
        os << (j ? "," : "") << names[j];
    }
    os << "\n";
    for (std::size_t i = 0; i < t.n_reps(); ++i) {
        for (std::size_t j = 0; j < names.size(); ++j) {
            os << (j ? "," : "") << t.columns()[j][i];
        }
        os << "\n";
    }
    return os.str();
}

inline ReplicationTable table_from_csv(const std::string& text, const std::string& source)
{
    std::istringstream in(text);
    std::string line;
    if (!std::getline(in, line) || line.empty()) {
        throw InputError(source + ": missing CSV header");
    }
    std::vector<std::string> names;
    {
        std::istringstream hs(line);
        std::string cell;
        while (std::getline(hs, cell, ',')) {
            names.push_back(cell);
        }
    }
    std::vector<Column> cols(names.size());
    int row = 1;
    while (std::getline(in, line)) {
        ++row;
        if (line.empty()) {
            continue;
        }
        std::istringstream rs(line);
        std::string cell;
        std::size_t j = 0;
        while (std::getline(rs, cell, ',')) {
            char* end = nullptr;
            const double v = std::strtod(cell.c_str(), &end);
            if (j >= names.size() || end == cell.c_str() || *end != '\0') {
                throw InputError(source + ":" + std::to_string(row) + ": malformed CSV row");
            }
            cols[j++].push_back(v);
        }
        if (j != names.size()) {
            throw InputError(source + ":" + std::to_string(row) + ": wrong number of fields");
        }
    }
    ReplicationTable t;
    for (std::size_t j = 0; j < names.size(); ++j) {
        t.add_column(names[j], std::move(cols[j]));
    }
    return t;
}

// ---- replication ----------------------------------------------------------

namespace detail {

/// Seeds of the independent stages of a run.
struct StageSeeds
{
    std::uint64_t replications = 0;
    std::uint64_t sandwich = 0;
    std::uint64_t malliavin = 0;
    std::uint64_t bootstrap = 0;
    std::uint64_t functional = 0;
};

inline std::uint64_t draw64(Philox rng)
{
    const std::uint64_t hi = rng();
    return (hi << 32) | rng();
}

inline StageSeeds stage_seeds(std::uint64_t seed)
{
    const Philox root(seed);
    return {seed, draw64(root.split(1)), draw64(root.split(2)), draw64(root.split(3)), draw64(root.split(4))};
}

inline bool is_check_column(const std::string& name)
{
    return name == "n_points" || name == "euler_defect" || name == "edge_facet_defect";
}

} // namespace detail

/// All persisted columns: the functional columns plus per-hull identity checks.
inline std::vector<std::string> table_columns(const ExperimentConfig& cfg)
{
    std::vector<std::string> names = column_names(cfg);
    names.push_back("euler_defect");
    if (cfg.body.dim() == 3) {
        names.push_back("edge_facet_defect");
    }
    return names;
}

/// One replication row in table_columns order. Replication `rep` at grid index
/// `t_index` always draws from the stream (seed, t_index, rep).
inline std::vector<double> replication_row(const ExperimentConfig& cfg, double t, std::uint64_t t_index,
                                           std::uint64_t rep, const std::vector<std::string>& names)
{
    const int d = cfg.body.dim();
    Philox rng = Philox::stream(cfg.seed, t_index, rep);
    const PointCloud cloud = sample_poisson_process(cfg.body, t, rng);
    const Polytope poly = convex_hull(cloud);
    const FVector f = f_vector(poly);

    bool need_volumes = false;
    for (const auto& r : cfg.functionals) {
        need_volumes = need_volumes || (r.kind != FunctionalRequest::Kind::f_vector && r.kind != FunctionalRequest::Kind::f &&
                                           r.kind != FunctionalRequest::Kind::oracle);
    }
    std::vector<double> vols;
    if (need_volumes) {
        vols = intrinsic_volumes(poly, cfg.mode, &rng);
    }

    std::vector<double> row;
    row.reserve(names.size());
    for (const auto& name : names) {
        if (name == "n_points") {
            row.push_back(static_cast<double>(cloud.size()));
        } else if (name.rfind("V_", 0) == 0) {
            row.push_back(vols[static_cast<std::size_t>(std::stoi(name.substr(2)))]);
        } else if (name.rfind("f_", 0) == 0) {
            const auto k = static_cast<std::size_t>(std::stoi(name.substr(2)));
            row.push_back(k < f.size() ? static_cast<double>(f[k]) : 0.0);
        } else if (name == "wills") {
            row.push_back(valuation_from(vols, ValuationSpec::wills(d)));
        } else if (name == "oracle") {
            row.push_back(oracle_estimate(poly, t));
        } else if (name == "missed_volume") {
            row.push_back(cfg.body.volume() - poly.volume());
        } else if (name == "euler_defect") {
            long defect = 0;
            if (poly.full_dimensional()) {
                defect = f.euler_characteristic() - (d % 2 == 0 ? 0 : 2);
            }
            row.push_back(static_cast<double>(defect));
        } else if (name == "edge_facet_defect") {
            row.push_back(poly.full_dimensional() ? static_cast<double>(2 * f[1] - 3 * f[2]) : 0.0);
        } else {
            const auto it = std::find_if(cfg.functionals.begin(), cfg.functionals.end(), [&](const FunctionalRequest& r) {
                return r.kind == FunctionalRequest::Kind::valuation && r.spec.label == name;
            });
            require(it != cfg.functionals.end(), "unknown column '" + name + "'");
            row.push_back(valuation_from(vols, it->spec));
        }
    }
    return row;
}

inline ReplicationTable run_replications(const ExperimentConfig& cfg, double t, std::uint64_t t_index, int n_reps)
{
    const std::vector<std::string> names = table_columns(cfg);
    std::vector<std::vector<double>> rows(static_cast<std::size_t>(n_reps));
    parallel_for(rows.size(), cfg.workers, [&](std::size_t rep) { rows[rep] = replication_row(cfg, t, t_index, rep, names); });
    ReplicationTable table;
    table.t = t;
    table.body = cfg.body_json.dump();
    table.seed = cfg.seed;
    for (std::size_t j = 0; j < names.size(); ++j) {
        Column c(rows.size());
        for (std::size_t i = 0; i < rows.size(); ++i) {
            c[i] = rows[i][j];
        }
        table.add_column(names[j], std::move(c));
    }
    return table;
}

inline ReplicationTable run_replications(const ExperimentConfig& cfg, std::size_t t_index)
{
    return run_replications(cfg, cfg.t_grid.at(t_index), t_index, cfg.n_reps);
}

/// Evaluator for a column, usable inside difference operators. Monte Carlo
/// intrinsic volumes reuse one fixed stream per call so that differences of
/// equal hulls vanish exactly.
inline Functional column_functional(const ExperimentConfig& cfg, const std::string& name, double t)
{
    const int d = cfg.body.dim();
    const EvalMode mode = cfg.mode;
    const std::uint64_t fseed = detail::stage_seeds(cfg.seed).functional;
    auto volumes = [mode, fseed](const Polytope& p) {
        Philox rng(fseed);
        return intrinsic_volumes(p, mode, &rng);
    };
    if (name.rfind("V_", 0) == 0) {
        const auto j = static_cast<std::size_t>(std::stoi(name.substr(2)));
        return [volumes, j](const Polytope& p) { return volumes(p)[j]; };
    }
    if (name.rfind("f_", 0) == 0) {
        const auto k = static_cast<std::size_t>(std::stoi(name.substr(2)));
        return [k](const Polytope& p) {
            const FVector f = f_vector(p);
            return k < f.size() ? static_cast<double>(f[k]) : 0.0;
        };
    }
    if (name == "wills") {
        return [volumes, d](const Polytope& p) { return valuation_from(volumes(p), ValuationSpec::wills(d)); };
    }
    if (name == "oracle") {
        return [t](const Polytope& p) { return oracle_estimate(p, t); };
    }
    if (name == "missed_volume") {
        const double v = cfg.body.volume();
        return [v](const Polytope& p) { return v - p.volume(); };
    }
    for (const auto& r : cfg.functionals) {
        if (r.kind == FunctionalRequest::Kind::valuation && r.spec.label == name) {
            const ValuationSpec spec = r.spec;
            return [volumes, spec](const Polytope& p) { return valuation_from(volumes(p), spec); };
        }
    }
    throw InputError("no evaluator for column '" + name + "'");
}

inline VectorFunctional multivariate_functional(const ExperimentConfig& cfg)
{
    const EvalMode mode = cfg.mode;
    const std::uint64_t fseed = detail::stage_seeds(cfg.seed).functional;
    return [mode, fseed](const Polytope& p) {
        Philox rng(fseed);
        return multivariate_raw(p, mode, &rng);
    };
}

// ---- malliavin stage --------------------------------------------------------

struct MalliavinRun
{
    MomentSamples samples;
    /// replications at the malliavin t used for standardisation
    ReplicationTable reference;
    bool reference_on_grid = false;
};

inline MalliavinRun run_malliavin(const ExperimentConfig& cfg, const std::vector<ReplicationTable>& tables)
{
    require(cfg.malliavin.has_value(), "config has no malliavin section");
    const MalliavinConfig& mc = *cfg.malliavin;
    MalliavinRun out;
    const auto it = std::find(cfg.t_grid.begin(), cfg.t_grid.end(), mc.t);
    if (it != cfg.t_grid.end() && static_cast<std::size_t>(it - cfg.t_grid.begin()) < tables.size()) {
        out.reference = tables[static_cast<std::size_t>(it - cfg.t_grid.begin())];
        out.reference_on_grid = true;
    } else {
        // stream index past the grid keeps these draws disjoint from grid tables
        out.reference = run_replications(cfg, mc.t, cfg.t_grid.size(), mc.n_reps);
    }
    Philox rng(detail::stage_seeds(cfg.seed).malliavin);
    MomentOptions opt = mc.options;
    opt.workers = cfg.workers;
    if (mc.functional == "multivariate") {
        const auto cols = multivariate_columns(cfg.body.dim());
        Eigen::MatrixXd cov = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(cols.size()), static_cast<Eigen::Index>(cols.size()));
        for (std::size_t i = 0; i < cols.size(); ++i) {
            cov(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(i)) = variance(out.reference.column(cols[i]));
        }
        estimate_gammas(cfg.body, mc.t, multivariate_functional(cfg), cov, opt, rng, &out.samples);
    } else {
        const double var = variance(out.reference.column(mc.functional));
        estimate_taus(cfg.body, mc.t, column_functional(cfg, mc.functional, mc.t), var, opt, rng, mc.functional,
                      &out.samples);
    }
    return out;
}

inline ReplicationTable samples_table(const MomentSamples& s)
{
    ReplicationTable t;
    t.add_column("g1", s.g1);
    t.add_column("g2", s.g2);
    t.add_column("g3", s.g3);
    return t;
}

// ---- derived reports ------------------------------------------------------

/// Everything a run persists as raw data; reports are a pure function of this.
struct RunData
{
    std::vector<ReplicationTable> tables;
    std::vector<ReplicationTable> sandwich;
    std::optional<ReplicationTable> malliavin_samples;
    std::optional<ReplicationTable> malliavin_reference;
};

struct Reports
{
    json summary;
    json rate_fits;
    json assertions;
    bool all_pass = true;
    /// plot file name -> CSV text
    std::vector<std::pair<std::string, std::string>> plots;
};

namespace detail {

inline json nullable(double x)
{
    return std::isfinite(x) ? json(x) : json(nullptr);
}

inline bool varies(const Column& c)
{
    return c.size() >= 2 && std::adjacent_find(c.begin(), c.end(), std::not_equal_to<>()) != c.end();
}

inline std::optional<double> reference_slope(const ExperimentConfig& cfg, const std::string& name)
{
    if (!cfg.body.is_smooth()) {
        return std::nullopt;
    }
    const double d = cfg.body.dim();
    if ((name.rfind("V_", 0) == 0 && name != "V_0") || name == "oracle" || name == "missed_volume") {
        return -1.0 - 2.0 / (d + 1.0);
    }
    if (name.rfind("f_", 0) == 0) {
        return 1.0 - 2.0 / (d + 1.0);
    }
    return std::nullopt;
}

inline std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t a, std::uint64_t b)
{
    return draw64(Philox::stream(seed, a, b));
}

struct CorrelationBlock
{
    std::vector<std::string> names;
    Eigen::MatrixXd matrix;
};

inline CorrelationBlock correlation_block(const ReplicationTable& t, const std::vector<std::string>& wanted)
{
    CorrelationBlock b;
    std::vector<Column> cols;
    for (const auto& n : wanted) {
        if (t.has(n) && varies(t.column(n))) {
            b.names.push_back(n);
            cols.push_back(t.column(n));
        }
    }
    if (!cols.empty()) {
        b.matrix = correlation_matrix(cols);
    }
    return b;
}

inline std::string plot_csv(const std::vector<std::vector<std::string>>& rows, const std::string& header)
{
    std::string out = header + "\n";
    for (const auto& r : rows) {
        for (std::size_t i = 0; i < r.size(); ++i) {
            out += (i ? "," : "") + r[i];
        }
        out += "\n";
    }
    return out;
}

} // namespace detail

namespace detail {

struct ColumnStats
{
    double mean = 0.0;
    double se = 0.0;
    double variance = 0.0;
    double variance_se = 0.0;
    double w1 = std::nan("");
    double w1_se = std::nan("");
};

struct TableStats
{
    double t = 0.0;
    std::size_t n = 0;
    std::map<std::string, ColumnStats> columns;
    CorrelationBlock correlation;
    RankResult rank;
    std::vector<Interval> pair_ci;
    long euler_checked = 0;
    long euler_violations = 0;
    std::optional<double> oracle_ratio;
    std::optional<MardiaResult> mardia;
    std::vector<std::string> mardia_columns;
};

inline TableStats table_stats(const ExperimentConfig& cfg, const ReplicationTable& table, std::size_t k,
                              std::uint64_t boot_seed)
{
    TableStats ts;
    ts.t = table.t;
    ts.n = table.n_reps();
    const auto& names = table.names();
    for (std::size_t j = 0; j < names.size(); ++j) {
        const Column& c = table.columns()[j];
        ColumnStats cs;
        cs.mean = mean(c);
        cs.se = standard_error(c);
        cs.variance = variance(c);
        cs.variance_se = variance_standard_error(c);
        if (!is_check_column(names[j]) && varies(c)) {
            cs.w1 = w1_to_normal(standardize(c));
            cs.w1_se = w1_bootstrap_se(c, cfg.n_boot, mix_seed(boot_seed, k, j));
        }
        ts.columns.emplace(names[j], cs);
    }
    for (const char* check : {"euler_defect", "edge_facet_defect"}) {
        if (table.has(check)) {
            for (double v : table.column(check)) {
                ts.euler_violations += v != 0.0 ? 1 : 0;
            }
        }
    }
    // lower-dimensional hulls carry no identity to check
    const Column& n_points = table.column("n_points");
    ts.euler_checked = std::count_if(n_points.begin(), n_points.end(),
                                     [&](double n) { return n >= static_cast<double>(cfg.body.dim() + 1); });
    ts.correlation = correlation_block(table, cfg.correlation_columns);
    if (ts.correlation.names.size() >= 1) {
        ts.rank = numeric_rank(ts.correlation.matrix);
    }
    const auto& cn = ts.correlation.names;
    std::size_t pair = 0;
    for (std::size_t a = 0; a < cn.size(); ++a) {
        for (std::size_t b = a + 1; b < cn.size(); ++b, ++pair) {
            ts.pair_ci.push_back(bootstrap_correlation_ci(table.column(cn[a]), table.column(cn[b]), cfg.n_boot,
                                                          mix_seed(boot_seed, 1000 + k, pair)));
        }
    }
    // multivariate normality proxy over (V_1..V_d, f_0..f_{d-1}) when present
    {
        std::vector<Column> cols;
        std::vector<std::string> names_used;
        for (const auto& c : multivariate_columns(cfg.body.dim())) {
            if (table.has(c) && varies(table.column(c))) {
                cols.push_back(table.column(c));
                names_used.push_back(c);
            }
        }
        if (cols.size() == multivariate_columns(cfg.body.dim()).size() && table.n_reps() >= 20 * cols.size()) {
            ts.mardia = mardia_normality(cols);
            for (std::size_t i : ts.mardia->used_columns) {
                ts.mardia_columns.push_back(names_used[i]);
            }
        }
    }
    if (table.has("oracle") && table.has("missed_volume")) {
        ts.oracle_ratio = variance_identity_check(table.column("oracle"), table.column("missed_volume"), table.t);
    }
    return ts;
}

struct MalliavinStats
{
    GammaEstimate gammas;
    double bound = 0.0;
    double bound_se = 0.0;
    double variance_estimate = 0.0;
    double w1 = std::nan("");
    double w1_se = std::nan("");
};

} // namespace detail

inline Reports derive_reports(const ExperimentConfig& cfg, const RunData& data)
{
    using detail::nullable;
    const detail::StageSeeds seeds = detail::stage_seeds(cfg.seed);
    Reports rep;

    std::vector<detail::TableStats> stats;
    for (std::size_t k = 0; k < data.tables.size(); ++k) {
        stats.push_back(detail::table_stats(cfg, data.tables[k], k, seeds.bootstrap));
    }

    json per_t = json::array();
    for (const auto& ts : stats) {
        json cols = json::object();
        for (const auto& [name, cs] : ts.columns) {
            cols[name] = {{"mean", cs.mean},         {"se", cs.se},       {"variance", cs.variance},
                          {"variance_se", cs.variance_se}, {"w1", nullable(cs.w1)}, {"w1_se", nullable(cs.w1_se)}};
        }
        json corr = json::object();
        corr["columns"] = ts.correlation.names;
        json matrix = json::array();
        for (Eigen::Index i = 0; i < ts.correlation.matrix.rows(); ++i) {
            json row = json::array();
            for (Eigen::Index j = 0; j < ts.correlation.matrix.cols(); ++j) {
                row.push_back(ts.correlation.matrix(i, j));
            }
            matrix.push_back(row);
        }
        corr["matrix"] = matrix;
        corr["rank"] = ts.rank.rank;
        corr["rank_tolerance"] = 1e-8;
        corr["eigenvalues"] = ts.rank.eigenvalues;
        json cis = json::object();
        std::size_t pair = 0;
        for (std::size_t a = 0; a < ts.correlation.names.size(); ++a) {
            for (std::size_t b = a + 1; b < ts.correlation.names.size(); ++b, ++pair) {
                cis[ts.correlation.names[a] + "~" + ts.correlation.names[b]] = {ts.pair_ci[pair].lo, ts.pair_ci[pair].hi};
            }
        }
        corr["bootstrap_ci95"] = cis;
        json entry = {{"t", ts.t},
                      {"n_reps", ts.n},
                      {"columns", cols},
                      {"correlation", corr},
                      {"euler_poincare", {{"checked", ts.euler_checked}, {"violations", ts.euler_violations}}}};
        if (ts.oracle_ratio) {
            entry["oracle_variance_ratio"] = *ts.oracle_ratio;
        }
        if (ts.mardia) {
            entry["mardia"] = {{"columns", ts.mardia_columns},
                               {"skewness", ts.mardia->skewness},
                               {"skewness_p", ts.mardia->skewness_p},
                               {"kurtosis", ts.mardia->kurtosis},
                               {"kurtosis_p", ts.mardia->kurtosis_p},
                               {"alpha", 0.01},
                               {"pass", ts.mardia->pass}};
        }
        per_t.push_back(entry);
    }

    long euler_checked = 0;
    long euler_violations = 0;
    for (const auto& ts : stats) {
        euler_checked += ts.euler_checked;
        euler_violations += ts.euler_violations;
    }

    rep.summary = {{"name", cfg.name},
                   {"body", cfg.body_json},
                   {"dim", cfg.body.dim()},
                   {"seed", cfg.seed},
                   {"mode", cfg.mode.monte_carlo ? json{{"mc", cfg.mode.n_dirs}} : json("exact")},
                   {"per_t", per_t},
                   {"euler_poincare", {{"checked", euler_checked}, {"violations", euler_violations}}}};

    // rate fits of variance against t
    rep.rate_fits = json::object();
    if (data.tables.size() >= 3) {
        for (const auto& name : data.tables.front().names()) {
            if (detail::is_check_column(name)) {
                continue;
            }
            std::vector<double> ts;
            std::vector<double> vs;
            bool ok = true;
            for (const auto& s : stats) {
                const auto& cs = s.columns.at(name);
                ok = ok && cs.variance > 0.0;
                ts.push_back(s.t);
                vs.push_back(cs.variance);
            }
            if (!ok) {
                continue;
            }
            const RateFit fit = rate_fit(ts, vs);
            json j = {{"slope", fit.slope},         {"intercept", fit.intercept}, {"r_squared", fit.r_squared},
                      {"slope_se", fit.slope_se},   {"t_grid", fit.t_grid},       {"statistic", "variance"}};
            const auto ref = detail::reference_slope(cfg, name);
            j["reference_slope"] = ref ? json(*ref) : json(nullptr);
            rep.rate_fits[name] = j;
        }
    }

    // floating-body containment
    std::vector<double> sandwich_p;
    if (cfg.sandwich && !data.sandwich.empty()) {
        json sw = json::array();
        for (std::size_t k = 0; k < data.sandwich.size(); ++k) {
            const Column& c = data.sandwich[k].column("contained");
            const double p = mean(c);
            sandwich_p.push_back(p);
            sw.push_back({{"t", cfg.sandwich->t_grid[k]},
                          {"c", cfg.sandwich->c},
                          {"n_reps", c.size()},
                          {"probability", p},
                          {"se", std::sqrt(p * (1.0 - p) / static_cast<double>(c.size()))}});
        }
        rep.summary["sandwich"] = sw;
    }

    // Malliavin-Stein terms
    std::optional<detail::MalliavinStats> ms;
    if (cfg.malliavin && data.malliavin_samples && data.malliavin_reference) {
        const MalliavinConfig& mc = *cfg.malliavin;
        MomentSamples s{data.malliavin_samples->column("g1"), data.malliavin_samples->column("g2"),
                        data.malliavin_samples->column("g3")};
        detail::MalliavinStats m;
        m.gammas = gammas_from_samples(s);
        json j = {{"t", mc.t},
                  {"functional", mc.functional},
                  {"n_outer", m.gammas.n_outer},
                  {"n_inner", mc.options.n_inner},
                  {"sampling", mc.options.sampling.kind == Sampling::Kind::plain ? "plain" : "boundary_shell"},
                  {"reference_reps", data.malliavin_reference->n_reps()}};
        if (mc.options.sampling.kind == Sampling::Kind::boundary_shell) {
            j["c"] = mc.options.sampling.c;
            j["shell_inner_radius"] = shell_inner_radius(cfg.body, mc.t, mc.options.sampling);
        }
        if (mc.functional == "multivariate") {
            m.gammas.m = static_cast<int>(multivariate_columns(cfg.body.dim()).size());
            m.bound = ms_bound_multivariate(m.gammas);
            j.update({{"gamma1", m.gammas.gamma1},
                      {"gamma2", m.gammas.gamma2},
                      {"gamma3", m.gammas.gamma3},
                      {"gamma1_se", m.gammas.gamma1_se},
                      {"gamma2_se", m.gammas.gamma2_se},
                      {"gamma3_se", m.gammas.gamma3_se},
                      {"m", m.gammas.m},
                      {"bound_without_covariance_term", m.bound}});
        } else {
            TauEstimate tau;
            tau.tau1 = m.gammas.gamma1;
            tau.tau2 = m.gammas.gamma2;
            tau.tau3 = m.gammas.gamma3;
            tau.tau1_se = m.gammas.gamma1_se;
            tau.tau2_se = m.gammas.gamma2_se;
            tau.tau3_se = m.gammas.gamma3_se;
            m.bound = ms_bound_univariate(tau);
            m.bound_se = ms_bound_univariate_se(tau);
            const Column& ref = data.malliavin_reference->column(mc.functional);
            m.variance_estimate = variance(ref);
            m.w1 = w1_to_normal(standardize(ref));
            m.w1_se = w1_bootstrap_se(ref, cfg.n_boot, detail::mix_seed(seeds.bootstrap, 2000, 0));
            j.update({{"tau1", tau.tau1},
                      {"tau2", tau.tau2},
                      {"tau3", tau.tau3},
                      {"tau1_se", tau.tau1_se},
                      {"tau2_se", tau.tau2_se},
                      {"tau3_se", tau.tau3_se},
                      {"bound", m.bound},
                      {"bound_se", m.bound_se},
                      {"variance_estimate", m.variance_estimate},
                      {"w1", m.w1},
                      {"w1_se", m.w1_se}});
        }
        rep.summary["malliavin_stein"] = j;
        ms = m;
    }

    // assertions
    auto t_index = [&](double t) -> std::size_t {
        const auto it = std::find(cfg.t_grid.begin(), cfg.t_grid.end(), t);
        require(it != cfg.t_grid.end(), "assertion t is not on the grid");
        return static_cast<std::size_t>(it - cfg.t_grid.begin());
    };
    rep.assertions = json::array();
    for (const auto& a : cfg.assertions) {
        const json& p = a.params;
        bool pass = false;
        json value;
        std::string detail;
        auto col_stats = [&](const std::string& col, double t) -> const detail::ColumnStats& {
            return stats.at(t_index(t)).columns.at(col);
        };
        auto default_columns = [&](const detail::TableStats& ts) {
            std::vector<std::string> out;
            if (p.contains("columns")) {
                out = p["columns"].get<std::vector<std::string>>();
            } else {
                for (int j = 1; j <= cfg.body.dim(); ++j) {
                    out.push_back("V_" + std::to_string(j));
                }
            }
            std::vector<std::string> present;
            for (const auto& c : out) {
                if (ts.columns.count(c) != 0) {
                    present.push_back(c);
                }
            }
            return present;
        };
        if (stats.empty() && a.kind != "sandwich_at_least" && a.kind != "sandwich_nondecreasing") {
            detail = "no tables";
        } else if (a.kind == "mean_within" || a.kind == "variance_within") {
            const auto& cs = col_stats(p["column"], p["t"]);
            const bool is_mean = a.kind == "mean_within";
            const double est = is_mean ? cs.mean : cs.variance;
            const double se = is_mean ? cs.se : cs.variance_se;
            const double target = p["value"].get<double>();
            value = est;
            pass = std::abs(est - target) <= p["n_se"].get<double>() * se;
            detail = format_double(est) + " vs " + format_double(target) + " (se " + format_double(se) + ")";
        } else if (a.kind == "rate_slope") {
            const std::string col = p["column"];
            if (rep.rate_fits.contains(col)) {
                const double slope = rep.rate_fits[col]["slope"];
                value = slope;
                pass = std::abs(slope - p["target"].get<double>()) <= p["tol"].get<double>();
                detail = "slope " + format_double(slope) + ", target " + format_double(p["target"].get<double>()) +
                         " +- " + format_double(p["tol"].get<double>());
            } else {
                detail = "no rate fit for " + col;
            }
        } else if (a.kind == "variance_identity") {
            const auto& ts = stats.at(t_index(p["t"]));
            if (ts.oracle_ratio) {
                value = *ts.oracle_ratio;
                pass = *ts.oracle_ratio >= p["lo"].get<double>() && *ts.oracle_ratio <= p["hi"].get<double>();
                detail = "ratio " + format_double(*ts.oracle_ratio);
            }
        } else if (a.kind == "w1_decreasing") {
            const std::string col = p["column"];
            const double t0 = p.contains("t_from") ? p["t_from"].get<double>() : cfg.t_grid.front();
            const double t1 = p.contains("t_to") ? p["t_to"].get<double>() : cfg.t_grid.back();
            const double w0 = col_stats(col, t0).w1;
            const double w1 = col_stats(col, t1).w1;
            value = {nullable(w0), nullable(w1)};
            pass = std::isfinite(w0) && std::isfinite(w1) && w1 < w0;
            detail = "W1 " + format_double(w0) + " at t=" + format_double(t0) + " -> " + format_double(w1) +
                     " at t=" + format_double(t1);
        } else if (a.kind == "w1_at_most") {
            const double w = col_stats(p["column"], p["t"]).w1;
            value = nullable(w);
            pass = std::isfinite(w) && w <= p["max"].get<double>();
            detail = "W1 " + format_double(w);
        } else if (a.kind == "correlation_nonnegative") {
            const auto& ts = stats.at(t_index(p["t"]));
            const ReplicationTable& table = data.tables.at(t_index(p["t"]));
            const auto cols = default_columns(ts);
            const detail::CorrelationBlock block = detail::correlation_block(table, cols);
            double worst = std::numeric_limits<double>::infinity();
            pass = block.names.size() >= 2;
            for (Eigen::Index i = 0; i < block.matrix.rows(); ++i) {
                for (Eigen::Index j = i + 1; j < block.matrix.cols(); ++j) {
                    const double r = block.matrix(i, j);
                    const double se = correlation_standard_error(r, table.n_reps());
                    worst = std::min(worst, r / se);
                    pass = pass && r >= -p["n_se"].get<double>() * se;
                }
            }
            value = nullable(worst);
            detail = "smallest correlation in SE units " + format_double(worst);
        } else if (a.kind == "rank_at_most") {
            const auto& ts = stats.at(t_index(p["t"]));
            std::vector<std::string> cols = p.contains("columns") ? p["columns"].get<std::vector<std::string>>()
                                                                  : multivariate_columns(cfg.body.dim());
            const ReplicationTable& table = data.tables.at(t_index(p["t"]));
            std::vector<Column> cc;
            for (const auto& c : cols) {
                require(table.has(c), "rank assertion column '" + c + "' is missing");
                cc.push_back(table.column(c));
            }
            (void)ts;
            const double tol = p.contains("tol") ? p["tol"].get<double>() : 1e-8;
            const RankResult r = numeric_rank(correlation_matrix(cc), tol);
            value = r.rank;
            pass = r.rank <= p["max"].get<int>();
            detail = "rank " + std::to_string(r.rank) + " of " + std::to_string(cols.size());
        } else if (a.kind == "sandwich_at_least") {
            const auto& grid = cfg.sandwich->t_grid;
            const auto it = std::find(grid.begin(), grid.end(), p["t"].get<double>());
            if (it != grid.end() && static_cast<std::size_t>(it - grid.begin()) < sandwich_p.size()) {
                const double pr = sandwich_p[static_cast<std::size_t>(it - grid.begin())];
                value = pr;
                pass = pr >= p["min"].get<double>();
                detail = "containment frequency " + format_double(pr);
            } else {
                detail = "t is not on the sandwich grid";
            }
        } else if (a.kind == "sandwich_nondecreasing") {
            pass = !sandwich_p.empty() && std::is_sorted(sandwich_p.begin(), sandwich_p.end());
            value = sandwich_p;
            detail = "frequencies along the sandwich grid";
        } else if (a.kind == "ms_domination") {
            if (ms) {
                const double gap = ms->bound - ms->w1;
                const double se = std::hypot(ms->bound_se, ms->w1_se);
                value = gap;
                pass = gap >= -p["n_se"].get<double>() * se;
                detail = "bound " + format_double(ms->bound) + " vs W1 " + format_double(ms->w1);
            } else {
                detail = "no Malliavin-Stein estimate";
            }
        } else if (a.kind == "euler_poincare") {
            value = euler_violations;
            pass = euler_violations == 0 && euler_checked > 0;
            detail = std::to_string(euler_checked) + " hulls checked, " + std::to_string(euler_violations) + " violations";
        }
        rep.all_pass = rep.all_pass && pass;
        rep.assertions.push_back({{"id", a.id}, {"kind", a.kind}, {"pass", pass}, {"value", value}, {"detail", detail}});
    }

    // plot data
    {
        std::vector<std::vector<std::string>> var_rows;
        std::vector<std::vector<std::string>> w1_rows;
        std::vector<std::vector<std::string>> corr_rows;
        std::vector<std::vector<std::string>> eig_rows;
        for (const auto& ts : stats) {
            for (const auto& [name, cs] : ts.columns) {
                if (detail::is_check_column(name)) {
                    continue;
                }
                var_rows.push_back({name, format_double(ts.t), format_double(cs.variance), format_double(cs.variance_se)});
                if (std::isfinite(cs.w1)) {
                    w1_rows.push_back({name, format_double(ts.t), format_double(cs.w1), format_double(cs.w1_se)});
                }
            }
            std::size_t pair = 0;
            const auto& cn = ts.correlation.names;
            for (std::size_t a = 0; a < cn.size(); ++a) {
                for (std::size_t b = a + 1; b < cn.size(); ++b, ++pair) {
                    const Interval ci = ts.pair_ci[pair];
                    corr_rows.push_back({cn[a] + "~" + cn[b], format_double(ts.t),
                                         format_double(ts.correlation.matrix(static_cast<Eigen::Index>(a), static_cast<Eigen::Index>(b))),
                                         format_double(0.5 * (ci.hi - ci.lo)), format_double(ci.lo), format_double(ci.hi)});
                }
            }
            for (std::size_t i = 0; i < ts.rank.eigenvalues.size(); ++i) {
                eig_rows.push_back({"t=" + format_double(ts.t), std::to_string(i + 1), format_double(ts.rank.eigenvalues[i]), "0"});
            }
        }
        rep.plots.emplace_back("variance_vs_t.csv", detail::plot_csv(var_rows, "series,x,y,yerr"));
        rep.plots.emplace_back("w1_vs_t.csv", detail::plot_csv(w1_rows, "series,x,y,yerr"));
        rep.plots.emplace_back("correlation_trajectories.csv", detail::plot_csv(corr_rows, "series,x,y,yerr,lo,hi"));
        rep.plots.emplace_back("eigenvalues.csv", detail::plot_csv(eig_rows, "series,x,y,yerr"));
        if (!sandwich_p.empty()) {
            std::vector<std::vector<std::string>> rows;
            for (std::size_t k = 0; k < sandwich_p.size(); ++k) {
                const double n = static_cast<double>(data.sandwich[k].n_reps());
                rows.push_back({"containment", format_double(cfg.sandwich->t_grid[k]), format_double(sandwich_p[k]),
                                format_double(std::sqrt(sandwich_p[k] * (1.0 - sandwich_p[k]) / n))});
            }
            rep.plots.emplace_back("sandwich_vs_t.csv", detail::plot_csv(rows, "series,x,y,yerr"));
        }
    }
    rep.summary["assertions"] = rep.assertions;
    rep.summary["all_assertions_pass"] = rep.all_pass;
    return rep;
}

// ---- run and verify -------------------------------------------------------

struct RunOutcome
{
    fs::path out_dir;
    json manifest;
    Reports reports;
    bool complete = false;
};

/// Output directory: explicit argument, else the config's, else the environment
/// variable, else ./randpoly-out/<name>.
inline fs::path resolve_output_dir(const ExperimentConfig& cfg, const std::string& override_dir = {})
{
    if (!override_dir.empty()) {
        return override_dir;
    }
    if (!cfg.outputs.empty()) {
        return cfg.outputs;
    }
    if (const char* env = std::getenv(kOutputDirEnv); env != nullptr && *env != '\0') {
        return fs::path(env) / cfg.name;
    }
    return fs::path("randpoly-out") / cfg.name;
}

namespace detail {

class ManifestWriter
{
public:
    ManifestWriter(fs::path dir, const ExperimentConfig& cfg) : dir_(std::move(dir))
    {
        const StageSeeds s = stage_seeds(cfg.seed);
        manifest_ = {{"tool", "randpoly"},
                     {"version", RANDPOLY_VERSION},
                     {"config", "config.json"},
                     {"config_hash", config_hash(cfg)},
                     {"workers", cfg.workers},
                     {"seeds",
                      {{"replications", s.replications},
                       {"sandwich", s.sandwich},
                       {"malliavin", s.malliavin},
                       {"bootstrap", s.bootstrap},
                       {"functional", s.functional}}},
                     {"files", json::array()},
                     {"status", "running"}};
    }

    void add(const std::string& rel, const std::string& bytes, const std::string& role, json extra = json::object())
    {
        write_file(dir_ / rel, bytes);
        extra["path"] = rel;
        extra["role"] = role;
        extra["checksum"] = fnv1a_hex(bytes);
        manifest_["files"].push_back(extra);
    }

    json& manifest() { return manifest_; }

    void finish(const std::string& status, double seconds)
    {
        manifest_["status"] = status;
        manifest_["wall_clock_seconds"] = seconds;
        write_file(dir_ / "manifest.json", manifest_.dump(2) + "\n");
    }

private:
    fs::path dir_;
    json manifest_;
};

inline std::string table_name(std::size_t k)
{
    std::ostringstream os;
    os << "tables/t_" << std::setw(3) << std::setfill('0') << k;
    return os.str();
}

inline json sidecar(const ExperimentConfig& cfg, const ReplicationTable& t, const std::string& role, std::uint64_t stream)
{
    return {{"t", t.t},
            {"body", cfg.body_json},
            {"seed", cfg.seed},
            {"n_reps", t.n_reps()},
            {"columns", t.names()},
            {"provenance",
             {{"tool", "randpoly"},
              {"version", RANDPOLY_VERSION},
              {"config_hash", config_hash(cfg)},
              {"role", role},
              {"stream", stream}}}};
}

inline void write_reports(ManifestWriter& w, const Reports& r)
{
    w.add("summary.json", r.summary.dump(2) + "\n", "report");
    w.add("rate_fits.json", r.rate_fits.dump(2) + "\n", "report");
    for (const auto& [name, text] : r.plots) {
        w.add("plots/" + name, text, "plot");
    }
}

} // namespace detail

/// Execute the experiment and write tables, reports and the manifest. On a
/// failure midway the manifest records status "failed" and the tables finished
/// so far, and the exception propagates.
inline RunOutcome run_experiment(const ExperimentConfig& cfg, const std::string& override_dir = {})
{
    const auto start = std::chrono::steady_clock::now();
    RunOutcome out;
    out.out_dir = resolve_output_dir(cfg, override_dir);
    fs::create_directories(out.out_dir);
    detail::ManifestWriter w(out.out_dir, cfg);
    auto seconds = [&] { return std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count(); };
    RunData data;
    try {
        w.add("config.json", cfg.source.dump(2) + "\n", "config");
        for (std::size_t k = 0; k < cfg.t_grid.size(); ++k) {
            data.tables.push_back(run_replications(cfg, k));
            const std::string base = detail::table_name(k);
            w.add(base + ".csv", table_to_csv(data.tables.back()), "table", {{"t", cfg.t_grid[k]}, {"index", k}});
            w.add(base + ".json", detail::sidecar(cfg, data.tables.back(), "replications", k).dump(2) + "\n", "sidecar");
        }
        if (cfg.sandwich) {
            const detail::StageSeeds s = detail::stage_seeds(cfg.seed);
            for (std::size_t k = 0; k < cfg.sandwich->t_grid.size(); ++k) {
                ReplicationTable t;
                t.t = cfg.sandwich->t_grid[k];
                t.body = cfg.body_json.dump();
                t.seed = s.sandwich;
                t.add_column("contained",
                             sandwich_indicators(cfg.body, t.t, cfg.sandwich->c, cfg.sandwich->n_reps, s.sandwich, k,
                                                 [&](std::size_t n, auto&& fn) { parallel_for(n, cfg.workers, fn); }));
                std::ostringstream name;
                name << "tables/sandwich_" << std::setw(3) << std::setfill('0') << k;
                w.add(name.str() + ".csv", table_to_csv(t), "sandwich", {{"t", t.t}, {"index", k}});
                w.add(name.str() + ".json", detail::sidecar(cfg, t, "sandwich", k).dump(2) + "\n", "sidecar");
                data.sandwich.push_back(std::move(t));
            }
        }
        if (cfg.malliavin) {
            MalliavinRun m = run_malliavin(cfg, data.tables);
            ReplicationTable st = samples_table(m.samples);
            st.t = cfg.malliavin->t;
            w.add("tables/malliavin_samples.csv", table_to_csv(st), "malliavin_samples", {{"t", st.t}});
            if (!m.reference_on_grid) {
                w.add("tables/malliavin_reference.csv", table_to_csv(m.reference), "malliavin_reference",
                      {{"t", m.reference.t}, {"index", cfg.t_grid.size()}});
            }
            data.malliavin_samples = std::move(st);
            data.malliavin_reference = std::move(m.reference);
        }
        out.reports = derive_reports(cfg, data);
        detail::write_reports(w, out.reports);
        w.manifest()["assertions_pass"] = out.reports.all_pass;
        w.finish("complete", seconds());
        out.complete = true;
    } catch (const std::exception& e) {
        w.manifest()["error"] = e.what();
        w.finish("failed", seconds());
        throw;
    }
    out.manifest = w.manifest();
    return out;
}

struct VerifyReport
{
    /// problems with files: missing, checksum mismatch, drift in derived reports
    std::vector<std::string> integrity_failures;
    json assertions = json::array();
    bool assertions_pass = true;

    [[nodiscard]] bool ok() const { return integrity_failures.empty() && assertions_pass; }
};

/// Re-derive every report from the stored tables, compare against the stored
/// files and checksums, and evaluate the config's assertions.
inline VerifyReport verify_run(const fs::path& manifest_path)
{
    VerifyReport vr;
    const json manifest = json::parse(read_file(manifest_path));
    const fs::path dir = manifest_path.parent_path();
    if (manifest.value("status", "") != "complete") {
        vr.integrity_failures.push_back("manifest status is '" + manifest.value("status", "") + "'");
    }
    std::map<std::string, std::string> contents;
    for (const auto& f : manifest.at("files")) {
        const std::string rel = f.at("path");
        if (!fs::exists(dir / rel)) {
            throw InputError("missing file '" + (dir / rel).string() + "'");
        }
        const std::string bytes = read_file(dir / rel);
        if (fnv1a_hex(bytes) != f.at("checksum").get<std::string>()) {
            vr.integrity_failures.push_back("checksum mismatch: " + rel);
        }
        contents[rel] = bytes;
    }
    const std::string cfg_rel = manifest.value("config", "config.json");
    require(contents.count(cfg_rel) != 0, "manifest does not list the config");
    const ExperimentConfig cfg = parse_config(contents[cfg_rel], (dir / cfg_rel).string());
    if (config_hash(cfg) != manifest.value("config_hash", "")) {
        vr.integrity_failures.push_back("config hash mismatch");
    }

    RunData data;
    for (const auto& f : manifest.at("files")) {
        const std::string role = f.at("role");
        const std::string rel = f.at("path");
        if (role == "table") {
            ReplicationTable t = table_from_csv(contents[rel], rel);
            t.t = f.at("t");
            data.tables.push_back(std::move(t));
        } else if (role == "sandwich") {
            ReplicationTable t = table_from_csv(contents[rel], rel);
            t.t = f.at("t");
            data.sandwich.push_back(std::move(t));
        } else if (role == "malliavin_samples") {
            data.malliavin_samples = table_from_csv(contents[rel], rel);
        } else if (role == "malliavin_reference") {
            ReplicationTable t = table_from_csv(contents[rel], rel);
            t.t = f.at("t");
            data.malliavin_reference = std::move(t);
        }
    }
    if (cfg.malliavin && !data.malliavin_reference) {
        const auto it = std::find(cfg.t_grid.begin(), cfg.t_grid.end(), cfg.malliavin->t);
        if (it != cfg.t_grid.end() && static_cast<std::size_t>(it - cfg.t_grid.begin()) < data.tables.size()) {
            data.malliavin_reference = data.tables[static_cast<std::size_t>(it - cfg.t_grid.begin())];
        }
    }
    if (data.tables.size() != cfg.t_grid.size()) {
        vr.integrity_failures.push_back("expected " + std::to_string(cfg.t_grid.size()) + " tables, found " +
                                        std::to_string(data.tables.size()));
    }
    for (std::size_t k = 0; k < data.tables.size(); ++k) {
        if (data.tables[k].names() != table_columns(cfg) || data.tables[k].n_reps() != static_cast<std::size_t>(cfg.n_reps)) {
            vr.integrity_failures.push_back("table " + std::to_string(k) + " does not match the config layout");
        }
    }

    Reports r;
    try {
        r = derive_reports(cfg, data);
    } catch (const std::exception& e) {
        vr.integrity_failures.push_back(std::string("cannot re-derive reports: ") + e.what());
        return vr;
    }
    auto compare = [&](const std::string& rel, const std::string& expected) {
        const auto it = contents.find(rel);
        if (it == contents.end()) {
            vr.integrity_failures.push_back("missing report " + rel);
        } else if (it->second != expected) {
            vr.integrity_failures.push_back("stored " + rel + " differs from the re-derived report");
        }
    };
    compare("summary.json", r.summary.dump(2) + "\n");
    compare("rate_fits.json", r.rate_fits.dump(2) + "\n");
    for (const auto& [name, text] : r.plots) {
        compare("plots/" + name, text);
    }
    vr.assertions = r.assertions;
    vr.assertions_pass = r.all_pass;
    return vr;
}

} // namespace randpoly
