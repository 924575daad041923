#include <gtest/gtest.h>

#include <atomic>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "toadfront/csv.hpp"
#include "toadfront/errors.hpp"
#include "toadfront/experiment.hpp"

using namespace toadfront;
namespace fs = std::filesystem;

namespace {

const char* kSmoke = R"(
name: smoke
seed: 5
model:
  kind: local
  theta: {min: 0, max: 1, n: 1}
  D: const 1
  grid: {x_min: -20, x_max: 60, dx: 0.1, dt: 0.05, t_end: 80,
         window: {kind: follow_front, margin_left: 20, margin_right: 30}}
  init: {kind: left_filled, amplitude: 1, cutoff_x: 0}
snapshots: {every: 1, dump_every: 7}
analysis:
  - kind: fit
    level: 0.5
    t0: 20
  - kind: tail
)";

fs::path scratch(const std::string& name) {
    const auto p = fs::temp_directory_path() / ("toadfront_test_" + name);
    fs::remove_all(p);
    return p;
}

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

ErrorCode code_of(const std::function<void()>& f) {
    try {
        f();
    } catch (const Error& e) {
        return e.code();
    }
    ADD_FAILURE() << "no toadfront::Error thrown";
    return ErrorCode::InvalidArgument;
}

}  // namespace

TEST(Config, ParsesModelAndAnalyses) {
    const auto cfg = parse_config_text(kSmoke);
    EXPECT_EQ(cfg.name, "smoke");
    EXPECT_EQ(cfg.seed, 5u);
    EXPECT_TRUE(cfg.runnable);
    EXPECT_EQ(cfg.model.kind, ModelKind::local_general);
    EXPECT_DOUBLE_EQ(cfg.model.grid.dx, 0.1);
    EXPECT_EQ(cfg.model.grid.window.kind, WindowKind::follow_front);
    ASSERT_EQ(cfg.analyses.size(), 2u);
    EXPECT_EQ(cfg.analyses[0].kind, "fit");
    EXPECT_DOUBLE_EQ(cfg.analyses[0].get("t0", 0.0), 20.0);
    EXPECT_EQ(cfg.snapshots.dump_every, 7);
    EXPECT_EQ(cfg.config_hash.size(), 16u);
}

TEST(Config, HashIgnoresCommentsAndLayout) {
    const auto a = parse_config_text("name: x\nseed: 1\nprobe: {p: 1.5, R: 1}\n");
    const auto b = parse_config_text("# comment\nname:   x\nseed: 1\nprobe:\n  p: 1.5\n  R: 1\n");
    const auto c = parse_config_text("name: x\nseed: 2\nprobe: {p: 1.5, R: 1}\n");
    EXPECT_EQ(a.config_hash, b.config_hash);
    EXPECT_NE(a.config_hash, c.config_hash);
}

TEST(Config, ErrorsAreParseErrors) {
    EXPECT_EQ(code_of([] { parse_config_text("name: [unclosed"); }), ErrorCode::ConfigParseError);
    EXPECT_EQ(code_of([] { parse_config_text("- a\n- b\n"); }), ErrorCode::ConfigParseError);
    EXPECT_EQ(code_of([] { parse_config_text("model: {kind: warp, grid: {t_end: 1}}\n"); }), ErrorCode::ConfigParseError);
    EXPECT_EQ(code_of([] { parse_config_text("model: {grid: {dx: fast}}\n"); }), ErrorCode::ConfigParseError);
    EXPECT_EQ(code_of([] { parse_config_text("model: {D: wobbly, grid: {t_end: 1}}\n"); }), ErrorCode::ConfigParseError);
    EXPECT_EQ(code_of([] { load_config("/nonexistent/config.yaml"); }), ErrorCode::ConfigParseError);
}

TEST(Config, OutputDirectoryResolution) {
    const auto cfg = parse_config_text("name: run7\noutput_dir: somewhere\n");
    ::unsetenv("TOADFRONT_OUT");
    EXPECT_EQ(resolve_output_dir(cfg, ""), "somewhere");
    ::setenv("TOADFRONT_OUT", "/tmp/base", 1);
    EXPECT_EQ(resolve_output_dir(cfg, ""), "/tmp/base/run7");
    EXPECT_EQ(resolve_output_dir(cfg, "explicit"), "explicit");
    ::unsetenv("TOADFRONT_OUT");
}

TEST(Snapshot, RoundTripIsExact) {
    const auto dir = scratch("snap");
    fs::create_directories(dir);
    auto f = Field::zeros(13, -2.5, 0.125, ThetaDomain::make(1.0, 2.0, 4), FieldRole::n);
    f.t = 12.375;
    for (std::size_t k = 0; k < f.values.size(); ++k) f.values[k] = std::sin(0.37 * k) / 3.0;
    f.bc_left = {BcKind::dirichlet, 1.0};
    const auto path = (dir / "s.dat").string();
    write_snapshot(path, f, "00ff");
    const auto g = read_snapshot(path);
    EXPECT_EQ(g.t, f.t);
    EXPECT_EQ(g.x_offset, f.x_offset);
    EXPECT_EQ(g.n_x, f.n_x);
    EXPECT_EQ(g.role, FieldRole::n);
    EXPECT_EQ(g.bc_left.kind, BcKind::dirichlet);
    EXPECT_EQ(g.values, f.values);
    EXPECT_EQ(g.checksum(), f.checksum());

    auto bytes = slurp(path);
    bytes[bytes.size() - 3] ^= 0x10;
    std::ofstream(path, std::ios::binary) << bytes;
    EXPECT_EQ(code_of([&] { read_snapshot(path); }), ErrorCode::ChecksumMismatch);
}

TEST(Manifest, RoundTrip) {
    const auto dir = scratch("manifest");
    fs::create_directories(dir);
    RunManifest m;
    m.name = "n";
    m.config_hash = "abc";
    m.code_version = code_version();
    m.seed = 9;
    m.status = "ok";
    m.exit_code = 0;
    m.snapshots.push_back({1.0 / 3.0, 0xfedcba9876543210ULL, "snapshots/x.dat", {{"rho@0.3", 12.0 / 7.0}}});
    const auto path = (dir / "manifest.json").string();
    write_manifest(path, m);
    const auto r = read_manifest(path);
    ASSERT_EQ(r.snapshots.size(), 1u);
    EXPECT_EQ(r.snapshots[0].t, 1.0 / 3.0);
    EXPECT_EQ(r.snapshots[0].checksum, 0xfedcba9876543210ULL);
    EXPECT_EQ(r.snapshots[0].levels.at("rho@0.3"), 12.0 / 7.0);
    EXPECT_EQ(r.seed, 9u);
}

TEST(Experiment, DeterministicOutputs) {
    const auto cfg = parse_config_text(kSmoke);
    const auto a = scratch("det_a"), b = scratch("det_b");
    RunContext ctx;
    ctx.out_dir = a.string();
    ASSERT_EQ(run_experiment(cfg, ctx), 0);
    ctx.out_dir = b.string();
    ASSERT_EQ(run_experiment(cfg, ctx), 0);
    for (const char* f : {"trace.csv", "fit.csv", "tail.csv"}) {
        ASSERT_TRUE(fs::exists(a / f)) << f;
        EXPECT_EQ(slurp(a / f), slurp(b / f)) << f;
    }
    const auto fit = read_csv((a / "fit.csv").string());
    EXPECT_EQ(fit.meta_value("config_hash"), cfg.config_hash);
    EXPECT_EQ(fit.meta_value("seed"), "5");
    const auto m = read_manifest((a / "manifest.json").string());
    EXPECT_EQ(m.status, "ok");
    EXPECT_EQ(m.snapshots.size(), 81u);
}

TEST(Experiment, ResumeContinuesBitIdentically) {
    const auto cfg = parse_config_text(kSmoke);
    const auto ref = scratch("res_ref"), part = scratch("res_part");
    RunContext ctx;
    ctx.out_dir = ref.string();
    ASSERT_EQ(run_experiment(cfg, ctx), 0);
    ctx.out_dir = part.string();
    ctx.until = 43.0;
    ASSERT_EQ(run_experiment(cfg, ctx), 0);
    EXPECT_EQ(read_manifest((part / "manifest.json").string()).status, "interrupted");
    // drop the checkpoint at the stop time so the resume starts from an earlier dump
    auto m = read_manifest((part / "manifest.json").string());
    m.snapshots.back().file.clear();
    write_manifest((part / "manifest.json").string(), m);
    ctx.until = 0.0;
    ctx.resume = true;
    ASSERT_EQ(run_experiment(cfg, ctx), 0);
    for (const char* f : {"trace.csv", "fit.csv", "tail.csv"}) EXPECT_EQ(slurp(ref / f), slurp(part / f)) << f;
    const auto a = read_manifest((ref / "manifest.json").string());
    const auto b = read_manifest((part / "manifest.json").string());
    ASSERT_EQ(a.snapshots.size(), b.snapshots.size());
    for (std::size_t k = 0; k < a.snapshots.size(); ++k) EXPECT_EQ(a.snapshots[k].checksum, b.snapshots[k].checksum);
}

TEST(Experiment, ResumeRejectsChangedConfigOrData) {
    const auto cfg = parse_config_text(kSmoke);
    const auto dir = scratch("res_bad");
    RunContext ctx;
    ctx.out_dir = dir.string();
    ctx.until = 15.0;
    ASSERT_EQ(run_experiment(cfg, ctx), 0);
    ctx.until = 0.0;
    ctx.resume = true;
    auto other = parse_config_text(std::string(kSmoke) + "# still the same\n");
    EXPECT_EQ(other.config_hash, cfg.config_hash);
    other = parse_config_text(std::string(kSmoke).replace(std::string(kSmoke).find("seed: 5"), 7, "seed: 6"));
    EXPECT_EQ(code_of([&] { run_experiment(other, ctx); }), ErrorCode::ChecksumMismatch);
    auto m = read_manifest((dir / "manifest.json").string());
    m.snapshots.back().checksum ^= 1;
    write_manifest((dir / "manifest.json").string(), m);
    EXPECT_EQ(code_of([&] { run_experiment(cfg, ctx); }), ErrorCode::ChecksumMismatch);
}

TEST(Experiment, FailedExpectationExitsTwo) {
    auto text = std::string(kSmoke) + "  - kind: tail\n    expect_lambda_ratio_min: 5\n";
    const auto cfg = parse_config_text(text);
    RunContext ctx;
    ctx.out_dir = scratch("assert").string();
    EXPECT_EQ(run_experiment(cfg, ctx), 2);
    const auto m = read_manifest(ctx.out_dir + "/manifest.json");
    EXPECT_EQ(m.status, "assertion_failed");
    ASSERT_EQ(m.failures.size(), 1u);
}

TEST(Experiment, NotRunnableWithoutGrid) {
    const auto cfg = parse_config_text("name: g\nmodel: {D: theta, theta: {min: 1, max: 2, n: 8}}\n");
    EXPECT_FALSE(cfg.runnable);
    RunContext ctx;
    ctx.out_dir = scratch("nogrid").string();
    EXPECT_EQ(code_of([&] { run_experiment(cfg, ctx); }), ErrorCode::ConfigParseError);
}

TEST(Expectations, BoundsAndUnknownNames) {
    AnalysisTask t;
    t.kind = "x";
    t.num = {{"expect_a_min", 1.0}, {"expect_b_max", 2.0}};
    std::vector<std::string> failures;
    check_expectations(t, {{"a", 1.0}, {"b", 2.0}}, failures);
    EXPECT_TRUE(failures.empty());
    check_expectations(t, {{"a", 0.5}, {"b", NAN}}, failures);
    EXPECT_EQ(failures.size(), 2u);
    EXPECT_EQ(code_of([&] { check_expectations(t, {{"a", 1.0}}, failures); }), ErrorCode::ConfigParseError);
}

TEST(PlotData, DelayAndResidualFiles) {
    const auto dir = scratch("plot");
    fs::create_directories(dir);
    {
        CsvWriter w((dir / "fit.csv").string(), {"t", "X_m", "residual"}, "h1",
                    {{"c_hat", "2"}, {"r_hat", "1.5"}, {"x_hat", "0.25"}});
        for (double t : {10.0, 20.0}) w.row({t, 2.0 * t - 1.5 * std::log(t) + 0.25, 0.0});
        w.close();
        CsvWriter r((dir / "residual.csv").string(), {"tau", "terms", "sup_residual", "gaussian_gap"}, "h1");
        for (double tau : {100.0, 200.0, 400.0}) r.row({tau, 4.0, 7.0 * std::pow(tau, -3.0), 0.0});
        r.close();
    }
    const auto files = emit_plotdata(dir.string());
    EXPECT_EQ(files.size(), 2u);
    std::ifstream in(dir / "delay_plot.dat");
    std::string line;
    std::getline(in, line);
    EXPECT_EQ(line, "# config_hash: h1");
    while (std::getline(in, line) && line[0] == '#') {
    }
    std::istringstream row(line);
    double t, d, model;
    row >> t >> d >> model;
    EXPECT_DOUBLE_EQ(t, 10.0);
    EXPECT_NEAR(d, model, 1e-12);
    const auto res = slurp(dir / "residual.dat");
    const auto at = res.find("slope terms=4: ");
    ASSERT_NE(at, std::string::npos);
    EXPECT_NEAR(std::stod(res.substr(at + 15)), -3.0, 1e-9);
}

TEST(PlotData, MissingColumn) {
    const auto dir = scratch("plot_missing");
    fs::create_directories(dir);
    CsvWriter w((dir / "fit.csv").string(), {"t", "position"}, "h", {{"c_hat", "2"}, {"r_hat", "1"}, {"x_hat", "0"}});
    w.row({1.0, 2.0});
    w.close();
    EXPECT_EQ(code_of([&] { emit_plotdata(dir.string()); }), ErrorCode::MissingColumn);
}

TEST(ParallelFor, VisitsEveryIndexAndRethrows) {
    std::vector<std::atomic<int>> hits(50);
    parallel_for(50, 4, [&](int i) { ++hits[i]; });
    for (const auto& h : hits) EXPECT_EQ(h.load(), 1);
    EXPECT_THROW(parallel_for(10, 3, [](int i) {
                     if (i == 7) throw Error(ErrorCode::InvalidArgument, "boom");
                 }),
                 Error);
}
