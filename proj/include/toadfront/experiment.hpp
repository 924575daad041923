#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <string>
#include <vector>

#include "toadfront/core_model.hpp"
#include "toadfront/pde_solver.hpp"

namespace toadfront {

/// One analysis entry of a config: a kind plus flat scalar parameters.
struct AnalysisTask {
    std::string kind;  // fit | tail | harnack | dispersion
    std::map<std::string, double> num;
    std::map<std::string, std::string> str;

    double get(const std::string& key, double fallback) const;
    std::string get(const std::string& key, const std::string& fallback) const;
    bool has(const std::string& key) const { return num.count(key) || str.count(key); }
};

struct SnapshotSchedule {
    double every = 1.0;   // record every `every` time units (rounded to steps)
    int dump_every = 10;  // write a snapshot dump every k-th recorded snapshot (0: never)
};

struct ExperimentConfig {
    std::string name;
    std::uint64_t seed = 0;
    std::string output_dir;
    std::string config_hash;  // 16 hex digits over the canonical form of the document
    std::string model_kind;   // nonlocal | local | linearized | p_equation
    TraitProfile profile;
    bool runnable = false;    // model.grid given, so `model` is complete
    ModelSpec model;
    SnapshotSchedule snapshots;
    std::vector<AnalysisTask> analyses;
    /// Raw sections for subcommands that need more than the model (probe, asym, criticality).
    std::map<std::string, AnalysisTask> sections;
};

/// Parse a YAML config. Throws ConfigParseError with the offending key.
ExperimentConfig parse_config_text(const std::string& text);
ExperimentConfig load_config(const std::string& path);

/// Output directory: the explicit override, else TOADFRONT_OUT/<name>, else the config's output_dir.
std::string resolve_output_dir(const ExperimentConfig& cfg, const std::string& override_dir);

/// Snapshot dump: '#'-prefixed text header, a line "data", then raw little-endian doubles row-major.
void write_snapshot(const std::string& path, const Field& field, const std::string& config_hash);
Field read_snapshot(const std::string& path);

struct ManifestSnapshot {
    double t = 0.0;
    std::uint64_t checksum = 0;
    std::string file;  // empty if not dumped
    std::map<std::string, double> levels;  // "quantity@level" -> position, for the fit analyses
};

struct RunManifest {
    std::string name;
    std::string config_hash;
    std::string code_version;
    std::uint64_t seed = 0;
    std::string started, finished;  // ISO-8601 UTC
    std::vector<ManifestSnapshot> snapshots;
    std::vector<std::string> failures;  // failed assertions
    std::string status = "running";     // running | interrupted | ok | assertion_failed | solver_error
    int exit_code = -1;
};

void write_manifest(const std::string& path, const RunManifest& m);
RunManifest read_manifest(const std::string& path);

struct RunContext {
    std::string out_dir;
    bool resume = false;
    bool strict = false;
    double until = 0.0;  // > 0: stop at this time and mark the run interrupted
    std::function<void(const std::string&)> log;
};

/// Execute the model run and analyses of `cfg`: manifest.json, trace.csv, fit.csv, tail.csv, harnack.csv,
/// snapshot dumps. Exit codes: 0 ok, 2 failed assertion, 3 solver or I/O error.
int run_experiment(const ExperimentConfig& cfg, const RunContext& ctx);

/// Append a message to `failures` for every expect_<name>_min / expect_<name>_max key of `task` that
/// `values` violates. Throws ConfigParseError for an expectation on an unknown value.
void check_expectations(const AnalysisTask& task, const std::map<std::string, double>& values,
                        std::vector<std::string>& failures);

/// Exit status for an exception escaping a subcommand.
int exit_code_for(const std::exception& e);

/// Plot-ready files from CSVs in `dir`: delay_plot.dat from fit.csv, c_lambda.dat from c_lambda.csv,
/// residual.dat (with the fitted log-log slope) from residual.csv. Returns the files written.
/// Throws MissingColumn if a present input lacks a required column.
std::vector<std::string> emit_plotdata(const std::string& dir);

/// Run fn(0..n-1) on at most `workers` threads; the first exception is rethrown after all finish.
void parallel_for(int n, int workers, const std::function<void(int)>& fn);

std::string hex64(std::uint64_t v);
const char* code_version();

}  // namespace toadfront
