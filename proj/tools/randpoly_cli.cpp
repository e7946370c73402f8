// randpoly command line: run, verify, taus, presets.

#if __has_include(<CLI/CLI.hpp>)
#include <CLI/CLI.hpp>
#else
#include <CLI11.hpp>
#endif

#include <iostream>
#include <string>

#include <randpoly/experiment.hpp>
#include <randpoly/presets.hpp>

namespace {

using namespace randpoly;

constexpr int kOk = 0;
constexpr int kInvalid = 1;
constexpr int kFailed = 2;

struct Source
{
    std::string path;
    std::string preset;
};

ExperimentConfig load(const Source& src, int workers)
{
    ExperimentConfig cfg = src.preset.empty()
                               ? load_config(src.path)
                               : parse_config(std::string(find_preset(src.preset).text), "preset:" + src.preset);
    if (workers > 0) {
        cfg.workers = workers;
        if (cfg.malliavin) {
            cfg.malliavin->options.workers = workers;
        }
    }
    return cfg;
}

void print_assertions(const json& assertions)
{
    for (const auto& a : assertions) {
        std::cout << (a.at("pass").get<bool>() ? "PASS " : "FAIL ") << a.at("id").get<std::string>() << ": "
                  << a.at("detail").get<std::string>() << "\n";
    }
}

int cmd_run(const Source& src, int workers, const std::string& out)
{
    const ExperimentConfig cfg = load(src, workers);
    const RunOutcome r = run_experiment(cfg, out);
    std::cout << "wrote " << (r.out_dir / "manifest.json").string() << "\n";
    print_assertions(r.reports.assertions);
    return r.reports.all_pass ? kOk : kFailed;
}

int cmd_verify(const std::string& manifest)
{
    const VerifyReport v = verify_run(manifest);
    for (const auto& f : v.integrity_failures) {
        std::cout << "FAIL integrity: " << f << "\n";
    }
    if (v.integrity_failures.empty()) {
        std::cout << "PASS integrity: checksums and re-derived reports match\n";
    }
    print_assertions(v.assertions);
    return v.ok() ? kOk : kFailed;
}

int cmd_taus(const Source& src, int workers, double t, const std::string& functional, int n_outer, int n_inner,
             const std::string& sampling)
{
    const ExperimentConfig base = load(src, workers);
    json doc = base.source;
    json m = doc.contains("malliavin") ? doc["malliavin"] : json::object();
    if (t > 0) {
        m["t"] = t;
    }
    if (!functional.empty()) {
        m["functional"] = functional;
    } else if (!m.contains("functional")) {
        const auto names = column_names(base);
        m["functional"] = names.size() > 1 ? names[1] : "V_2";
    }
    if (n_outer > 0) {
        m["n_outer"] = n_outer;
    }
    if (n_inner > 0) {
        m["n_inner"] = n_inner;
    }
    if (!sampling.empty()) {
        m["sampling"] = sampling;
    }
    doc["malliavin"] = m;
    doc.erase("assertions");
    doc.erase("sandwich");
    ExperimentConfig cfg = parse_config(doc.dump(2), src.preset.empty() ? src.path : "preset:" + src.preset);
    if (workers > 0) {
        cfg.workers = workers;
    }
    const MalliavinRun mr = run_malliavin(cfg, {});
    RunData data;
    data.malliavin_samples = samples_table(mr.samples);
    data.malliavin_reference = mr.reference;
    const Reports rep = derive_reports(cfg, data);
    std::cout << rep.summary.at("malliavin_stein").dump(2) << "\n";
    return kOk;
}

} // namespace

int main(int argc, char** argv)
{
    CLI::App app{"Monte Carlo experiments on random polytopes in smooth convex bodies"};
    app.require_subcommand(1);
    app.set_version_flag("--version", std::string(RANDPOLY_VERSION));

    Source src;
    int workers = 0;
    std::string out;

    auto* run = app.add_subcommand("run", "run an experiment and write tables, reports and a manifest");
    run->add_option("config", src.path, "JSON config file");
    run->add_option("--preset", src.preset, "use a bundled preset instead of a file");
    run->add_option("-w,--workers", workers, "worker threads (overrides the config)")->check(CLI::PositiveNumber);
    run->add_option("-o,--out", out, std::string("output directory (default: config 'outputs', then $") + kOutputDirEnv +
                                         "/<name>, then ./randpoly-out/<name>)");

    std::string manifest;
    auto* ver = app.add_subcommand("verify", "check a finished run and evaluate its assertions");
    ver->add_option("manifest", manifest, "manifest.json of a run")->required();

    double t = 0;
    std::string functional;
    std::string sampling;
    int n_outer = 0;
    int n_inner = 0;
    auto* taus = app.add_subcommand("taus", "estimate the difference-operator moments and the normal approximation bound");
    taus->add_option("config", src.path, "JSON config file");
    taus->add_option("--preset", src.preset, "use a bundled preset instead of a file");
    taus->add_option("-w,--workers", workers, "worker threads")->check(CLI::PositiveNumber);
    taus->add_option("--t", t, "intensity")->check(CLI::PositiveNumber);
    taus->add_option("--functional", functional, "column name, or multivariate");
    taus->add_option("--n-outer", n_outer, "outer samples")->check(CLI::PositiveNumber);
    taus->add_option("--n-inner", n_inner, "inner draws per outer sample")->check(CLI::PositiveNumber);
    taus->add_option("--sampling", sampling, "plain or boundary_shell");

    auto* pre = app.add_subcommand("presets", "bundled configurations");
    pre->require_subcommand(1);
    pre->add_subcommand("list", "list presets");
    std::string show_name;
    auto* show = pre->add_subcommand("show", "print a preset config");
    show->add_option("name", show_name)->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int rc = app.exit(e);
        return rc == 0 ? kOk : kInvalid;
    }

    try {
        if (run->parsed() || taus->parsed()) {
            if (src.path.empty() == src.preset.empty()) {
                std::cerr << "error: give either a config file or --preset\n";
                return kInvalid;
            }
        }
        if (run->parsed()) {
            return cmd_run(src, workers, out);
        }
        if (ver->parsed()) {
            return cmd_verify(manifest);
        }
        if (taus->parsed()) {
            return cmd_taus(src, workers, t, functional, n_outer, n_inner, sampling);
        }
        if (show->parsed()) {
            std::cout << find_preset(show_name).text;
            return kOk;
        }
        for (const auto& p : presets()) {
            std::cout << p.name << "\t" << p.summary << "\n";
        }
        return kOk;
    } catch (const InputError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kInvalid;
    } catch (const json::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kInvalid;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kInvalid;
    }
}
