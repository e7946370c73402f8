#include <gtest/gtest.h>

#include <cstdlib>
#include <filesystem>
#include <string>

#include <unistd.h>

#include <randpoly/experiment.hpp>

using namespace randpoly;

namespace {

fs::path scratch(const std::string& name)
{
    const fs::path p = fs::temp_directory_path() / ("randpoly_exp_" + std::to_string(::getpid())) / name;
    fs::remove_all(p);
    return p;
}

const char* kSmall = R"({
  "name": "small",
  "body": {"kind": "ball", "dim": 2},
  "t_grid": [100, 200, 400],
  "n_reps": 30,
  "functionals": ["intrinsic", "f_vector", "oracle"],
  "seed": 11,
  "n_boot": 20,
  "malliavin": {"t": 200, "functional": "V_2", "n_outer": 40, "n_inner": 4},
  "sandwich": {"n_reps": 50, "t_grid": [200, 400]},
  "assertions": [
    {"id": "euler", "kind": "euler_poincare"},
    {"id": "slope", "kind": "rate_slope", "column": "V_2", "target": -1.6666666666666667, "tol": 5},
    {"id": "dom", "kind": "ms_domination", "n_se": 4}
  ]
})";

} // namespace

TEST(Experiment, MinimalRunWritesOneTable)
{
    const ExperimentConfig cfg = parse_config(R"({"name": "minimal", "body": {"kind": "ball", "dim": 2},
        "t_grid": [100], "n_reps": 10, "functionals": ["intrinsic", "f_vector"], "seed": 1})");
    const fs::path dir = scratch("minimal");
    const RunOutcome r = run_experiment(cfg, dir.string());
    EXPECT_TRUE(r.complete);
    EXPECT_TRUE(fs::exists(dir / "manifest.json"));
    const ReplicationTable t = table_from_csv(read_file(dir / "tables/t_000.csv"), "t_000.csv");
    EXPECT_EQ(t.n_reps(), 10u);
    EXPECT_EQ(t.names(), table_columns(cfg));
    const json m = json::parse(read_file(dir / "manifest.json"));
    EXPECT_EQ(m["status"], "complete");
    EXPECT_EQ(m["config_hash"], config_hash(cfg));
    EXPECT_TRUE(m.contains("wall_clock_seconds"));
    EXPECT_TRUE(m["seeds"].contains("malliavin"));
}

TEST(Experiment, SameSeedSameBytes)
{
    const ExperimentConfig cfg = parse_config(kSmall);
    const fs::path a = scratch("a");
    const fs::path b = scratch("b");
    run_experiment(cfg, a.string());
    run_experiment(cfg, b.string());
    for (const auto& e : fs::recursive_directory_iterator(a)) {
        if (e.is_regular_file() && e.path().filename() != "manifest.json") {
            const fs::path rel = fs::relative(e.path(), a);
            EXPECT_EQ(read_file(e.path()), read_file(b / rel)) << rel;
        }
    }
}

TEST(Experiment, WorkerCountDoesNotChangeTables)
{
    ExperimentConfig one = parse_config(kSmall);
    ExperimentConfig eight = one;
    eight.workers = 8;
    eight.malliavin->options.workers = 8;
    const fs::path a = scratch("w1");
    const fs::path b = scratch("w8");
    run_experiment(one, a.string());
    run_experiment(eight, b.string());
    for (const auto& e : fs::directory_iterator(a / "tables")) {
        EXPECT_EQ(read_file(e.path()), read_file(b / "tables" / e.path().filename())) << e.path();
    }
    EXPECT_EQ(read_file(a / "summary.json"), read_file(b / "summary.json"));
}

TEST(Experiment, ReportsCarryRateFitsAndMalliavin)
{
    const ExperimentConfig cfg = parse_config(kSmall);
    const fs::path dir = scratch("reports");
    const RunOutcome r = run_experiment(cfg, dir.string());
    const json fits = json::parse(read_file(dir / "rate_fits.json"));
    for (const char* c : {"V_1", "V_2", "f_0", "oracle", "missed_volume"}) {
        ASSERT_TRUE(fits.contains(c)) << c;
        EXPECT_TRUE(fits[c]["slope"].is_number());
        EXPECT_TRUE(fits[c]["slope_se"].is_number());
        EXPECT_TRUE(fits[c]["reference_slope"].is_number());
    }
    EXPECT_FALSE(fits.contains("V_0"));
    const json s = json::parse(read_file(dir / "summary.json"));
    const json& ms = s["malliavin_stein"];
    EXPECT_GE(ms["tau1"].get<double>(), 0.0);
    EXPECT_GT(ms["tau3"].get<double>(), 0.0);
    EXPECT_GT(ms["bound"].get<double>(), 0.0);
    EXPECT_EQ(ms["sampling"], "boundary_shell");
    EXPECT_EQ(s["per_t"].size(), 3u);
    EXPECT_EQ(s["sandwich"].size(), 2u);
    EXPECT_EQ(s["euler_poincare"]["violations"], 0);
    EXPECT_EQ(r.reports.assertions.size(), 3u);
    for (const char* p : {"variance_vs_t.csv", "w1_vs_t.csv", "correlation_trajectories.csv", "eigenvalues.csv",
                          "sandwich_vs_t.csv"}) {
        const std::string text = read_file(dir / "plots" / p);
        EXPECT_EQ(text.rfind("series,x,y,yerr", 0), 0u) << p;
    }
}

TEST(Experiment, VerifyPassesOnUntouchedRun)
{
    const ExperimentConfig cfg = parse_config(kSmall);
    const fs::path dir = scratch("verify");
    run_experiment(cfg, dir.string());
    const VerifyReport v = verify_run(dir / "manifest.json");
    EXPECT_TRUE(v.integrity_failures.empty()) << v.integrity_failures.front();
    EXPECT_TRUE(v.ok());
    EXPECT_EQ(v.assertions.size(), 3u);
}

TEST(Experiment, VerifyDetectsEditedCell)
{
    const ExperimentConfig cfg = parse_config(kSmall);
    const fs::path dir = scratch("tamper");
    run_experiment(cfg, dir.string());
    const fs::path table = dir / "tables/t_001.csv";
    std::string text = read_file(table);
    const auto pos = text.find('\n') + 1;
    text[pos] = text[pos] == '9' ? '8' : '9';
    write_file(table, text);
    const VerifyReport v = verify_run(dir / "manifest.json");
    EXPECT_FALSE(v.ok());
    ASSERT_FALSE(v.integrity_failures.empty());
    EXPECT_NE(v.integrity_failures.front().find("checksum mismatch: tables/t_001.csv"), std::string::npos);
}

TEST(Experiment, VerifyDetectsReportDrift)
{
    const ExperimentConfig cfg = parse_config(kSmall);
    const fs::path dir = scratch("drift");
    run_experiment(cfg, dir.string());
    // rewrite the summary and its checksum so only re-derivation can notice
    json s = json::parse(read_file(dir / "summary.json"));
    s["per_t"][0]["columns"]["V_2"]["variance"] = 1.0;
    const std::string bytes = s.dump(2) + "\n";
    write_file(dir / "summary.json", bytes);
    json m = json::parse(read_file(dir / "manifest.json"));
    for (auto& f : m["files"]) {
        if (f["path"] == "summary.json") {
            f["checksum"] = fnv1a_hex(bytes);
        }
    }
    write_file(dir / "manifest.json", m.dump(2));
    const VerifyReport v = verify_run(dir / "manifest.json");
    ASSERT_EQ(v.integrity_failures.size(), 1u);
    EXPECT_NE(v.integrity_failures.front().find("summary.json"), std::string::npos);
}

TEST(Experiment, VerifyMissingFileIsInputError)
{
    const ExperimentConfig cfg = parse_config(kSmall);
    const fs::path dir = scratch("missing");
    run_experiment(cfg, dir.string());
    fs::remove(dir / "tables/t_000.csv");
    EXPECT_THROW(verify_run(dir / "manifest.json"), InputError);
    EXPECT_THROW(verify_run(dir / "nope.json"), InputError);
}

TEST(Experiment, OffGridMalliavinReferenceIsPersisted)
{
    const ExperimentConfig cfg = parse_config(R"({"name": "off", "body": {"kind": "ball", "dim": 2},
        "t_grid": [100], "n_reps": 10, "functionals": [{"intrinsic": 2}], "seed": 5, "n_boot": 10,
        "malliavin": {"t": 150, "functional": "V_2", "n_outer": 20, "n_inner": 2, "n_reps": 12}})");
    const fs::path dir = scratch("offgrid");
    run_experiment(cfg, dir.string());
    const ReplicationTable ref = table_from_csv(read_file(dir / "tables/malliavin_reference.csv"), "ref");
    EXPECT_EQ(ref.n_reps(), 12u);
    EXPECT_TRUE(verify_run(dir / "manifest.json").ok());
}

TEST(Experiment, FailedRunKeepsPartialResults)
{
    const ExperimentConfig cfg = parse_config(R"({"name": "fails", "body": {"kind": "ball", "dim": 2},
        "t_grid": [100, 200], "n_reps": 5, "functionals": [{"intrinsic": 2}], "seed": 5,
        "assertions": [{"kind": "w1_decreasing", "column": "V_2", "t_from": 150}]})");
    const fs::path dir = scratch("failed");
    EXPECT_THROW(run_experiment(cfg, dir.string()), InputError);
    const json m = json::parse(read_file(dir / "manifest.json"));
    EXPECT_EQ(m["status"], "failed");
    EXPECT_TRUE(m.contains("error"));
    EXPECT_TRUE(fs::exists(dir / "tables/t_001.csv"));
    const VerifyReport v = verify_run(dir / "manifest.json");
    EXPECT_FALSE(v.ok());
}

TEST(Experiment, FailingAssertionIsReported)
{
    const ExperimentConfig cfg = parse_config(R"({"name": "strict", "body": {"kind": "ball", "dim": 2},
        "t_grid": [100], "n_reps": 20, "functionals": [{"intrinsic": 2}], "seed": 5, "n_boot": 10,
        "assertions": [{"id": "w1", "kind": "w1_at_most", "column": "V_2", "t": 100, "max": 0}]})");
    const RunOutcome r = run_experiment(cfg, scratch("strict").string());
    EXPECT_FALSE(r.reports.all_pass);
    EXPECT_FALSE(r.reports.assertions[0]["pass"].get<bool>());
}

TEST(Experiment, OutputDirectoryPrecedence)
{
    ExperimentConfig cfg = parse_config(R"({"name": "n", "body": {"kind": "ball", "dim": 2},
        "t_grid": [100], "n_reps": 2, "functionals": ["wills"], "seed": 1})");
    ::unsetenv(kOutputDirEnv);
    EXPECT_EQ(resolve_output_dir(cfg), fs::path("randpoly-out") / "n");
    ::setenv(kOutputDirEnv, "/tmp/env-out", 1);
    EXPECT_EQ(resolve_output_dir(cfg), fs::path("/tmp/env-out") / "n");
    cfg.outputs = "/tmp/cfg-out";
    EXPECT_EQ(resolve_output_dir(cfg), fs::path("/tmp/cfg-out"));
    EXPECT_EQ(resolve_output_dir(cfg, "/tmp/flag-out"), fs::path("/tmp/flag-out"));
    ::unsetenv(kOutputDirEnv);
}

TEST(Experiment, CsvRoundTrip)
{
    ReplicationTable t;
    t.add_column("a", {0.1, 1.0 / 3.0, -2e-300});
    t.add_column("b", {1, 2, 3});
    const ReplicationTable back = table_from_csv(table_to_csv(t), "x");
    EXPECT_EQ(back.columns(), t.columns());
    EXPECT_EQ(back.names(), t.names());
    EXPECT_THROW(table_from_csv("a,b\n1,2\n3\n", "bad.csv"), InputError);
    EXPECT_THROW(table_from_csv("a\nfoo\n", "bad.csv"), InputError);
}

TEST(Experiment, StageSeedsDiffer)
{
    const detail::StageSeeds s = detail::stage_seeds(42);
    EXPECT_EQ(s.replications, 42u);
    const std::set<std::uint64_t> all{s.replications, s.sandwich, s.malliavin, s.bootstrap, s.functional};
    EXPECT_EQ(all.size(), 5u);
}

TEST(Experiment, ReplicationRowDependsOnlyOnStreamKey)
{
    const ExperimentConfig cfg = parse_config(kSmall);
    const auto names = table_columns(cfg);
    EXPECT_EQ(replication_row(cfg, 200, 1, 7, names), replication_row(cfg, 200, 1, 7, names));
    EXPECT_NE(replication_row(cfg, 200, 1, 7, names), replication_row(cfg, 200, 1, 8, names));
}

TEST(Experiment, MultivariateVectorPassesMardiaProxy)
{
    const ExperimentConfig cfg = parse_config(R"({"name": "mv", "body": {"kind": "ball", "dim": 2},
        "t_grid": [4000], "n_reps": 400, "functionals": ["multivariate"], "seed": 77, "n_boot": 10})");
    RunData data;
    data.tables.push_back(run_replications(cfg, 0));
    const Reports r = derive_reports(cfg, data);
    const json& m = r.summary["per_t"][0]["mardia"];
    ASSERT_TRUE(m.is_object());
    // f_1 duplicates f_0 in the plane and is dropped
    EXPECT_EQ(m["columns"], json({"V_1", "V_2", "f_0"}));
    EXPECT_TRUE(m["pass"].get<bool>()) << m.dump();
}

TEST(Experiment, PerSampleIdentitiesAcrossPipeline)
{
    const ExperimentConfig cfg = parse_config(kSmall);
    for (std::size_t k = 0; k < cfg.t_grid.size(); ++k) {
        const ReplicationTable t = run_replications(cfg, k);
        for (std::size_t i = 0; i < t.n_reps(); ++i) {
            EXPECT_LE(t.column("f_0")[i], t.column("n_points")[i]);
            EXPECT_EQ(t.column("f_0")[i], t.column("f_1")[i]);
            EXPECT_GE(t.column("oracle")[i], t.column("V_2")[i]);
            EXPECT_EQ(t.column("euler_defect")[i], 0.0);
            EXPECT_NEAR(t.column("missed_volume")[i], cfg.body.volume() - t.column("V_2")[i], 1e-12);
        }
    }
}
