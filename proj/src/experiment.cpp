#include "toadfront/experiment.hpp"

#include <yaml-cpp/yaml.h>

#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdlib>
#include <cstring>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <json.hpp>
#include <mutex>
#include <optional>
#include <sstream>
#include <thread>

#include "toadfront/csv.hpp"
#include "toadfront/dispersion.hpp"
#include "toadfront/errors.hpp"
#include "toadfront/front_analysis.hpp"
#include "toadfront/linalg.hpp"

namespace fs = std::filesystem;

namespace toadfront {

#ifndef TOADFRONT_VERSION
#define TOADFRONT_VERSION "0.0.0"
#endif

const char* code_version() { return TOADFRONT_VERSION; }

std::string hex64(std::uint64_t v) {
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
    return buf;
}

double AnalysisTask::get(const std::string& key, double fallback) const {
    const auto it = num.find(key);
    return it == num.end() ? fallback : it->second;
}

std::string AnalysisTask::get(const std::string& key, const std::string& fallback) const {
    const auto it = str.find(key);
    return it == str.end() ? fallback : it->second;
}

namespace {

[[noreturn]] void parse_error(const std::string& where, const std::string& what) {
    throw Error(ErrorCode::ConfigParseError, where + ": " + what);
}

double as_number(const YAML::Node& n, const std::string& where) {
    try {
        return n.as<double>();
    } catch (const YAML::Exception&) {
        parse_error(where, "expected a number");
    }
}

double number_or(const YAML::Node& parent, const char* key, double fallback, const std::string& where) {
    const auto n = parent[key];
    return n ? as_number(n, where + "." + key) : fallback;
}

std::string string_or(const YAML::Node& parent, const char* key, const std::string& fallback) {
    const auto n = parent[key];
    return n ? n.as<std::string>() : fallback;
}

// Flat map of scalars; sequences of numbers become key.0, key.1, ...
AnalysisTask flat_task(const YAML::Node& node, const std::string& where) {
    if (!node.IsMap()) parse_error(where, "expected a mapping");
    AnalysisTask t;
    for (const auto& kv : node) {
        const auto key = kv.first.as<std::string>();
        const auto& v = kv.second;
        if (v.IsScalar()) {
            double d;
            if (YAML::convert<double>::decode(v, d))
                t.num[key] = d;
            else
                t.str[key] = v.as<std::string>();
        } else if (v.IsSequence()) {
            for (std::size_t i = 0; i < v.size(); ++i) t.num[key + "." + std::to_string(i)] = as_number(v[i], where + "." + key);
            t.num[key + ".size"] = static_cast<double>(v.size());
        } else {
            parse_error(where + "." + key, "nested mappings are not allowed here");
        }
    }
    t.kind = t.get("kind", std::string{});
    return t;
}

InitSpec parse_init(const YAML::Node& n, const std::string& where) {
    if (!n) return InitSpec{};
    const auto kind = string_or(n, "kind", "zero");
    InitSpec s;
    if (kind == "zero") {
    } else if (kind == "block") {
        s = InitSpec::block(number_or(n, "x_left", 0.0, where), number_or(n, "x_right", 1.0, where),
                            number_or(n, "amplitude", 1.0, where));
    } else if (kind == "left_filled") {
        s = InitSpec::left_filled(number_or(n, "amplitude", 1.0, where), number_or(n, "cutoff_x", 0.0, where));
    } else if (kind == "delta_approx") {
        s = InitSpec::delta_approx(number_or(n, "x0", 0.0, where), number_or(n, "width", 0.1, where));
    } else {
        parse_error(where + ".kind", "unknown init kind '" + kind + "'");
    }
    s.scale = number_or(n, "scale", 1.0, where);
    return s;
}

ReactionLaw parse_reaction(const YAML::Node& n, const std::string& where) {
    if (!n) return ReactionLaw::kpp();
    const auto kind = string_or(n, "kind", "kpp");
    if (kind == "kpp") return ReactionLaw::kpp();
    if (kind == "bounded") return ReactionLaw::bounded(number_or(n, "M_delta", 1.0, where), number_or(n, "delta", 1.0, where));
    if (kind == "modified") return ReactionLaw::modified(number_or(n, "m_bar", 1.0, where));
    parse_error(where + ".kind", "unknown reaction '" + kind + "'");
}

SpaceTimeGrid parse_grid(const YAML::Node& n, const std::string& where) {
    if (!n) parse_error(where, "missing");
    SpaceTimeGrid g;
    g.x_min = number_or(n, "x_min", g.x_min, where);
    g.x_max = number_or(n, "x_max", g.x_max, where);
    g.dx = number_or(n, "dx", g.dx, where);
    g.dt = number_or(n, "dt", g.dt, where);
    g.t_end = number_or(n, "t_end", g.t_end, where);
    if (const auto w = n["window"]) {
        const auto kind = string_or(w, "kind", "fixed");
        if (kind == "follow_front")
            g.window.kind = WindowKind::follow_front;
        else if (kind != "fixed")
            parse_error(where + ".window.kind", "unknown window kind '" + kind + "'");
        g.window.margin_left = number_or(w, "margin_left", 0.0, where + ".window");
        g.window.margin_right = number_or(w, "margin_right", 0.0, where + ".window");
    }
    return g;
}

void parse_model(const YAML::Node& n, ExperimentConfig& cfg) {
    const std::string where = "model";
    cfg.model_kind = string_or(n, "kind", "local");
    const auto th = n["theta"];
    const auto dom = ThetaDomain::make(th ? number_or(th, "min", 0.0, "model.theta") : 0.0,
                                       th ? number_or(th, "max", 1.0, "model.theta") : 1.0,
                                       th ? static_cast<int>(number_or(th, "n", 1, "model.theta")) : 1);
    const auto profile = sample_profile(string_or(n, "D", "const 1"), dom, string_or(n, "A", "const 0"));
    cfg.profile = profile;
    if (!n["grid"]) return;
    cfg.runnable = true;
    const auto grid = parse_grid(n["grid"], where + ".grid");
    const auto init = parse_init(n["init"], where + ".init");
    if (cfg.model_kind == "nonlocal") {
        cfg.model = make_nonlocal_model(profile, grid, init, number_or(n, "rate", 1.0, where));
    } else if (cfg.model_kind == "local") {
        cfg.model = make_local_model(profile, parse_reaction(n["reaction"], where + ".reaction"), grid, init);
    } else if (cfg.model_kind == "linearized") {
        const auto s = n["shift"];
        const auto sd = compute_spectral_data(profile);
        LogShift shift{s ? number_or(s, "c", sd.c_star, where + ".shift") : sd.c_star,
                       s ? number_or(s, "r", 0.0, where + ".shift") : 0.0,
                       s ? number_or(s, "T", 1.0, where + ".shift") : 1.0};
        cfg.model = make_linearized_model(profile, shift, grid, init);
    } else if (cfg.model_kind == "p_equation") {
        const auto sd = compute_spectral_data(profile);
        cfg.model = make_p_equation_model(profile, sd, OmegaSpec::harmonic(number_or(n, "omega_bar", 0.0, where)), grid,
                                          init);
    } else {
        parse_error(where + ".kind", "unknown model kind '" + cfg.model_kind + "'");
    }
    cfg.model.t_start = number_or(n, "t_start", 0.0, where);
    cfg.model.validate();
}

std::string now_utc() {
    const auto t = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
    std::tm tm{};
    gmtime_r(&t, &tm);
    char buf[32];
    std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
    return buf;
}

// Same content in flow or block layout must hash the same.
YAML::Node block_style(YAML::Node n) {
    n.SetStyle(YAML::EmitterStyle::Block);
    if (n.IsMap())
        for (auto it : n) block_style(it.second);
    else if (n.IsSequence())
        for (auto it : n) block_style(it);
    return n;
}

}  // namespace

ExperimentConfig parse_config_text(const std::string& text) {
    YAML::Node root;
    try {
        root = YAML::Load(text);
    } catch (const YAML::Exception& e) {
        parse_error("config", e.what());
    }
    if (!root.IsMap()) parse_error("config", "top level must be a mapping");
    ExperimentConfig cfg;
    try {
        YAML::Emitter canon;
        canon << block_style(YAML::Clone(root));
        cfg.config_hash = hex64(fnv1a(canon.c_str(), canon.size()));
        cfg.name = string_or(root, "name", "experiment");
        cfg.seed = static_cast<std::uint64_t>(number_or(root, "seed", 0.0, "seed"));
        cfg.output_dir = string_or(root, "output_dir", "out/" + cfg.name);
        if (const auto s = root["snapshots"]) {
            cfg.snapshots.every = number_or(s, "every", 1.0, "snapshots");
            cfg.snapshots.dump_every = static_cast<int>(number_or(s, "dump_every", 10, "snapshots"));
        }
        if (!(cfg.snapshots.every > 0.0)) parse_error("snapshots.every", "must be positive");
        if (const auto m = root["model"]) parse_model(m, cfg);
        if (const auto a = root["analysis"]) {
            if (!a.IsSequence()) parse_error("analysis", "expected a list");
            for (std::size_t i = 0; i < a.size(); ++i) {
                auto t = flat_task(a[i], "analysis[" + std::to_string(i) + "]");
                if (t.kind.empty()) parse_error("analysis[" + std::to_string(i) + "]", "missing kind");
                cfg.analyses.push_back(std::move(t));
            }
        }
        for (const char* sec : {"probe", "asym", "criticality", "dispersion"})
            if (const auto s = root[sec]) cfg.sections[sec] = flat_task(s, sec);
    } catch (const YAML::Exception& e) {
        parse_error("config", e.what());
    } catch (const Error& e) {
        if (e.code() == ErrorCode::ConfigParseError) throw;
        parse_error("config", e.what());
    }
    return cfg;
}

ExperimentConfig load_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw Error(ErrorCode::ConfigParseError, "cannot read config " + path);
    std::stringstream ss;
    ss << in.rdbuf();
    return parse_config_text(ss.str());
}

std::string resolve_output_dir(const ExperimentConfig& cfg, const std::string& override_dir) {
    if (!override_dir.empty()) return override_dir;
    if (const char* env = std::getenv("TOADFRONT_OUT"); env && *env) return (fs::path(env) / cfg.name).string();
    return cfg.output_dir;
}

void write_snapshot(const std::string& path, const Field& f, const std::string& config_hash) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw Error(ErrorCode::IoError, "cannot open " + path);
    out << "# config_hash: " << config_hash << '\n'
        << "# role: " << to_string(f.role) << '\n'
        << "# t: " << format_double(f.t) << '\n'
        << "# x_offset: " << format_double(f.x_offset) << '\n'
        << "# dx: " << format_double(f.dx) << '\n'
        << "# n_x: " << f.n_x << '\n'
        << "# theta: " << format_double(f.theta.theta_min) << ' ' << format_double(f.theta.theta_max) << ' '
        << f.theta.n_theta << '\n'
        << "# bc: " << static_cast<int>(f.bc_left.kind) << ' ' << format_double(f.bc_left.value) << ' '
        << static_cast<int>(f.bc_right.kind) << ' ' << format_double(f.bc_right.value) << '\n'
        << "# checksum: " << hex64(f.checksum()) << '\n'
        << "data\n";
    out.write(reinterpret_cast<const char*>(f.values.data()), static_cast<std::streamsize>(f.values.size() * sizeof(double)));
    if (!out) throw Error(ErrorCode::IoError, "write failed for " + path);
}

Field read_snapshot(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error(ErrorCode::IoError, "cannot open " + path);
    std::map<std::string, std::string> h;
    std::string line;
    while (std::getline(in, line) && line != "data") {
        if (line.size() < 2 || line[0] != '#') throw Error(ErrorCode::IoError, path + ": malformed header");
        const auto colon = line.find(':');
        if (colon == std::string::npos) throw Error(ErrorCode::IoError, path + ": malformed header");
        h[line.substr(2, colon - 2)] = line.substr(colon + 2);
    }
    for (const char* k : {"role", "t", "x_offset", "dx", "n_x", "theta", "bc", "checksum"})
        if (!h.count(k)) throw Error(ErrorCode::IoError, path + ": header lacks " + k);
    std::istringstream th(h["theta"]), bc(h["bc"]);
    ThetaDomain dom;
    th >> dom.theta_min >> dom.theta_max >> dom.n_theta;
    static const std::map<std::string, FieldRole> roles{{"n", FieldRole::n}, {"u", FieldRole::u}, {"z", FieldRole::z},
                                                        {"p", FieldRole::p}, {"w", FieldRole::w}, {"xi", FieldRole::xi}};
    Field f = Field::zeros(std::stoi(h["n_x"]), std::stod(h["x_offset"]), std::stod(h["dx"]), dom, roles.at(h["role"]));
    f.t = std::stod(h["t"]);
    int lk, rk;
    bc >> lk >> f.bc_left.value >> rk >> f.bc_right.value;
    f.bc_left.kind = static_cast<BcKind>(lk);
    f.bc_right.kind = static_cast<BcKind>(rk);
    in.read(reinterpret_cast<char*>(f.values.data()), static_cast<std::streamsize>(f.values.size() * sizeof(double)));
    if (!in) throw Error(ErrorCode::IoError, path + ": truncated data");
    if (hex64(f.checksum()) != h["checksum"])
        throw Error(ErrorCode::ChecksumMismatch, path + ": data does not match its header checksum");
    return f;
}

void write_manifest(const std::string& path, const RunManifest& m) {
    nlohmann::ordered_json j;
    j["name"] = m.name;
    j["config_hash"] = m.config_hash;
    j["code_version"] = m.code_version;
    j["seed"] = m.seed;
    j["started"] = m.started;
    j["finished"] = m.finished;
    j["status"] = m.status;
    j["exit_code"] = m.exit_code;
    j["failures"] = m.failures;
    auto& snaps = j["snapshots"] = nlohmann::ordered_json::array();
    for (const auto& s : m.snapshots) {
        nlohmann::ordered_json e{{"t", s.t}, {"checksum", hex64(s.checksum)}, {"file", s.file}};
        for (const auto& [k, v] : s.levels) e["levels"][k] = v;
        snaps.push_back(std::move(e));
    }
    const auto tmp = path + ".tmp";
    {
        std::ofstream out(tmp);
        if (!out) throw Error(ErrorCode::IoError, "cannot open " + tmp);
        out << j.dump(2) << '\n';
    }
    fs::rename(tmp, path);
}

RunManifest read_manifest(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw Error(ErrorCode::IoError, "cannot open " + path);
    nlohmann::json j;
    try {
        in >> j;
        RunManifest m;
        m.name = j.at("name");
        m.config_hash = j.at("config_hash");
        m.code_version = j.at("code_version");
        m.seed = j.at("seed");
        m.started = j.at("started");
        m.finished = j.at("finished");
        m.status = j.at("status");
        m.exit_code = j.at("exit_code");
        m.failures = j.at("failures").get<std::vector<std::string>>();
        for (const auto& s : j.at("snapshots")) {
            ManifestSnapshot ms{s.at("t").get<double>(), std::stoull(s.at("checksum").get<std::string>(), nullptr, 16),
                                s.at("file").get<std::string>(), {}};
            if (s.contains("levels"))
                for (const auto& [k, v] : s.at("levels").items()) ms.levels[k] = v.get<double>();
            m.snapshots.push_back(std::move(ms));
        }
        return m;
    } catch (const nlohmann::json::exception& e) {
        throw Error(ErrorCode::IoError, path + ": " + e.what());
    }
}

namespace {

TrackedQuantity parse_quantity(const std::string& s) {
    if (s == "rho") return TrackedQuantity::rho;
    if (s == "max_theta") return TrackedQuantity::max_theta;
    throw Error(ErrorCode::ConfigParseError, "unknown tracked quantity '" + s + "'");
}

std::string level_key(const AnalysisTask& t) {
    return t.get("quantity", std::string("max_theta")) + "@" + format_double(t.get("level", 0.5));
}

const SpectralData& spectral_of(const TraitProfile& p, std::optional<SpectralData>& cache) {
    if (!cache) cache = compute_spectral_data(p);
    return *cache;
}

}  // namespace

// Check expect_<name>_min / expect_<name>_max against computed values.
void check_expectations(const AnalysisTask& t, const std::map<std::string, double>& values,
                        std::vector<std::string>& failures) {
    for (const auto& [key, bound] : t.num) {
        if (key.rfind("expect_", 0) != 0) continue;
        const bool is_min = key.size() > 11 && key.compare(key.size() - 4, 4, "_min") == 0;
        const bool is_max = key.size() > 11 && key.compare(key.size() - 4, 4, "_max") == 0;
        if (!is_min && !is_max) throw Error(ErrorCode::ConfigParseError, t.kind + "." + key + ": needs _min or _max");
        const auto name = key.substr(7, key.size() - 11);
        const auto it = values.find(name);
        if (it == values.end()) throw Error(ErrorCode::ConfigParseError, t.kind + "." + key + ": no value '" + name + "'");
        if ((is_min && !(it->second >= bound)) || (is_max && !(it->second <= bound)))
            failures.push_back(t.kind + ": " + name + " = " + format_double(it->second) + (is_min ? " < " : " > ") +
                               format_double(bound));
    }
}

int exit_code_for(const std::exception& e) {
    if (const auto* err = dynamic_cast<const Error*>(&e))
        if (err->code() == ErrorCode::ConfigParseError) return 1;
    return 3;
}

int run_experiment(const ExperimentConfig& cfg, const RunContext& ctx) {
    if (!cfg.runnable) throw Error(ErrorCode::ConfigParseError, cfg.name + ": model.grid is required for a run");
    auto log = [&](const std::string& s) {
        if (ctx.log) ctx.log(s);
    };
    const fs::path dir = ctx.out_dir.empty() ? fs::path(cfg.output_dir) : fs::path(ctx.out_dir);
    fs::create_directories(dir / "snapshots");
    const auto manifest_path = (dir / "manifest.json").string();
    const std::vector<std::pair<std::string, std::string>> meta{{"seed", std::to_string(cfg.seed)},
                                                                {"name", cfg.name}};

    for (const auto& a : cfg.analyses)
        if (a.kind != "fit" && a.kind != "tail" && a.kind != "harnack" && a.kind != "dispersion")
            throw Error(ErrorCode::ConfigParseError, "unknown analysis kind '" + a.kind + "'");

    RunManifest man;
    Field resume_field;
    bool resumed = false;
    if (ctx.resume && fs::exists(manifest_path)) {
        man = read_manifest(manifest_path);
        if (man.config_hash != cfg.config_hash)
            throw Error(ErrorCode::ChecksumMismatch,
                        "config hash " + cfg.config_hash + " differs from the manifest's " + man.config_hash);
        for (auto it = man.snapshots.rbegin(); it != man.snapshots.rend(); ++it) {
            if (it->file.empty()) continue;
            resume_field = read_snapshot((dir / it->file).string());
            if (resume_field.checksum() != it->checksum)
                throw Error(ErrorCode::ChecksumMismatch, it->file + " does not match the manifest checksum");
            resumed = true;
            break;
        }
        if (resumed) {
            const double t_res = resume_field.t;
            std::erase_if(man.snapshots, [t_res](const ManifestSnapshot& s) { return s.t > t_res; });
            log("resuming " + cfg.name + " from t = " + format_double(t_res));
        }
    }
    if (!resumed) {
        man = RunManifest{};
        man.started = now_utc();
    }
    man.name = cfg.name;
    man.config_hash = cfg.config_hash;
    man.code_version = code_version();
    man.seed = cfg.seed;
    man.status = "running";
    man.exit_code = -1;
    man.failures.clear();

    auto model = cfg.model;
    const double t_stop = ctx.until > 0.0 ? std::min(ctx.until, model.grid.t_end) : model.grid.t_end;
    const bool interrupted = t_stop < model.grid.t_end;
    model.grid.t_end = t_stop;

    const double dt = model.grid.dt;
    const long stride = std::max(1L, std::lround(cfg.snapshots.every / dt));
    std::vector<double> times;
    for (long k = 0;; k += stride) {
        const double t = model.t_start + k * dt;
        if (t > t_stop + 1e-9 * dt) break;
        times.push_back(t);
    }
    if (std::abs(times.back() - t_stop) > 0.5 * dt) times.push_back(t_stop);
    if (resumed) std::erase_if(times, [&](double t) { return t <= resume_field.t + 0.5 * dt; });

    std::map<std::string, std::pair<TrackedQuantity, double>> levels;
    for (const auto& a : cfg.analyses)
        if (a.kind == "fit")
            levels[level_key(a)] = {parse_quantity(a.get("quantity", std::string("max_theta"))), a.get("level", 0.5)};
    double harnack_from = INFINITY, harnack_to = -INFINITY;
    for (const auto& a : cfg.analyses)
        if (a.kind == "harnack") {
            harnack_from = std::min(harnack_from, a.get("t_from", 1.0));
            harnack_to = std::max(harnack_to, a.get("t_to", cfg.model.grid.t_end));
        }
    auto in_harnack_window = [&](double t) { return t >= harnack_from - 1e-9 && t <= harnack_to + 1e-9; };

    std::vector<Field> window_snaps;
    if (resumed)
        for (const auto& s : man.snapshots)
            if (!s.file.empty() && in_harnack_window(s.t)) window_snaps.push_back(read_snapshot((dir / s.file).string()));

    long recorded = static_cast<long>(man.snapshots.size());
    const int dump_every = cfg.snapshots.dump_every;
    RunOptions ro;
    ro.keep_snapshots = false;
    ro.snapshot_times = times;
    ro.on_snapshot = [&](const Field& f, const SnapshotRecord& rec) {
        ManifestSnapshot ms{f.t, rec.checksum, {}, {}};
        for (const auto& [key, lq] : levels) {
            try {
                ms.levels[key] = level_position(f, lq.second, lq.first);
            } catch (const Error& e) {
                if (e.code() != ErrorCode::LevelNotAttained) throw;
            }
        }
        const bool last = std::abs(f.t - t_stop) < 0.5 * dt;
        if ((dump_every > 0 && recorded % dump_every == 0) || last) {
            char name[64];
            std::snprintf(name, sizeof name, "snapshots/snap_%06ld.dat", recorded);
            ms.file = name;
            write_snapshot((dir / name).string(), f, cfg.config_hash);
        }
        man.snapshots.push_back(std::move(ms));
        ++recorded;
        if (in_harnack_window(f.t)) window_snaps.push_back(f);
        if (!man.snapshots.back().file.empty()) write_manifest(manifest_path, man);
    };
    RunResult res;
    try {
        res = run(model, ro, resumed ? &resume_field : nullptr);
    } catch (const Error& e) {
        man.status = "solver_error";
        man.exit_code = 3;
        man.failures.push_back(e.what());
        man.finished = now_utc();
        write_manifest(manifest_path, man);
        throw;
    }
    if (interrupted) {
        man.status = "interrupted";
        man.exit_code = 0;
        write_manifest(manifest_path, man);
        log(cfg.name + ": stopped at t = " + format_double(t_stop));
        return 0;
    }

    std::optional<SpectralData> spectral;
    std::vector<std::string> failures;
    int fit_index = 0;
    for (const auto& a : cfg.analyses) {
        std::map<std::string, double> values;
        if (a.kind == "fit") {
            const auto key = level_key(a);
            FrontTrace tr;
            tr.quantity = levels.at(key).first;
            tr.level = levels.at(key).second;
            for (const auto& s : man.snapshots) {
                const auto it = s.levels.find(key);
                if (it == s.levels.end()) {
                    tr.skipped_times.push_back(s.t);
                } else {
                    tr.times.push_back(s.t);
                    tr.positions.push_back(it->second);
                }
            }
            const std::string suffix = fit_index == 0 ? "" : "_" + std::to_string(fit_index);
            ++fit_index;
            write_trace_csv((dir / ("trace" + suffix + ".csv")).string(), tr, cfg.config_hash, meta);
            FitSpec fs_;
            fs_.mode = a.get("mode", std::string("fixed_c")) == "free_c" ? FitMode::free_c : FitMode::fixed_c;
            fs_.c_star = a.has("c") ? a.get("c", 0.0) : spectral_of(cfg.profile, spectral).c_star;
            fs_.t0 = a.get("t0", 0.0);
            fs_.t1 = a.get("t1", 0.0);
            const auto fit = fit_bramson(tr, fs_);
            write_fit_csv((dir / ("fit" + suffix + ".csv")).string(), fit, cfg.config_hash, meta);
            const auto& sd = spectral_of(cfg.profile, spectral);
            values = {{"r_hat", fit.r_hat}, {"c_hat", fit.c_hat}, {"x_hat", fit.x_hat},
                      {"residual_sup", fit.residual_sup}, {"r_ratio", fit.r_hat * 2.0 * sd.lambda_star / 3.0}};
            // drift of X - (c* t - 3/(2 lambda*) log t) over the fit window
            std::vector<double> ts, ds;
            for (std::size_t k = 0; k < fit.times.size(); ++k) {
                ts.push_back(fit.times[k]);
                ds.push_back(fit.positions[k] - (sd.c_star * fit.times[k] - 1.5 / sd.lambda_star * std::log(fit.times[k])));
            }
            if (ts.size() >= 2) {
                const auto line = linalg::fit_line(ts, ds);
                values["theory_slope"] = line.coef[0];
                values["theory_residual"] = line.max_abs_residual;
            }
        } else if (a.kind == "tail") {
            const auto& sd = spectral_of(cfg.profile, spectral);
            const auto tf = tail_decay_rate(res.final_state, a.get("level", 0.01), a.get("from", 5.0), a.get("to", 15.0));
            CsvWriter w((dir / "tail.csv").string(), {"t", "lambda_hat", "lambda_star", "x_level", "x_from", "x_to"},
                        cfg.config_hash, meta);
            w.row({res.final_state.t, tf.lambda_hat, sd.lambda_star, tf.x_level, tf.x_from, tf.x_to});
            w.close();
            values = {{"lambda_hat", tf.lambda_hat}, {"lambda_ratio", tf.lambda_hat / sd.lambda_star}};
        } else if (a.kind == "harnack") {
            const double from = a.get("t_from", 1.0), to = a.get("t_to", cfg.model.grid.t_end);
            std::vector<Field> snaps;
            for (const auto& f : window_snaps)
                if (f.t >= from - 1e-9 && f.t <= to + 1e-9) snaps.push_back(f);
            std::sort(snaps.begin(), snaps.end(), [](const Field& x, const Field& y) { return x.t < y.t; });
            HarnackFieldOptions ho;
            ho.cutoff_level = a.get("cutoff_level", ho.cutoff_level);
            const auto hr = harnack_ratio_field(snaps, a.get("p", 1.25), a.get("R", 1.0), ho);
            CsvWriter w((dir / "harnack.csv").string(), {"t", "C", "pairs"}, cfg.config_hash, meta);
            for (std::size_t k = 0; k < hr.times.size(); ++k)
                w.row({hr.times[k], hr.C_per_snapshot[k], static_cast<double>(hr.pairs_per_snapshot[k])});
            w.close();
            values = {{"C_emp", hr.C_emp}};
            if (a.has("t_split")) {
                const double split = a.get("t_split", 0.0);
                double c1 = 0.0, c2 = 0.0;
                for (std::size_t k = 0; k < hr.times.size(); ++k)
                    (hr.times[k] <= split + 1e-9 ? c1 : c2) = std::max(hr.times[k] <= split + 1e-9 ? c1 : c2, hr.C_per_snapshot[k]);
                values["C_first"] = c1;
                values["C_second"] = c2;
                values["C_drift"] = std::abs(c2 - c1) / std::max(c1, c2);
            }
        } else if (a.kind == "dispersion") {
            const auto rep = dispersion_report(cfg.profile);
            spectral = rep.spectral;
            CsvWriter w((dir / "c_lambda.csv").string(), {"lambda", "mu", "c"}, cfg.config_hash, meta);
            for (std::size_t k = 0; k < rep.curve.lambdas.size(); ++k)
                w.row({rep.curve.lambdas[k], rep.curve.mus[k], rep.curve.speeds[k]});
            w.close();
            values = {{"c_star", rep.spectral.c_star}, {"lambda_star", rep.spectral.lambda_star},
                      {"D_bar", rep.spectral.D_bar}, {"rel3", rep.rel3_residual}};
        }
        {
            CsvWriter w((dir / ("summary_" + a.kind + ".csv")).string(), {"value"}, cfg.config_hash, [&] {
                auto m = meta;
                for (const auto& [k, v] : values) m.emplace_back(k, format_double(v));
                return m;
            }());
            w.close();
        }
        for (const auto& [k, v] : values) log(cfg.name + ": " + a.kind + "." + k + " = " + format_double(v));
        const auto before = failures.size();
        check_expectations(a, values, failures);
        for (std::size_t k = before; k < failures.size(); ++k) log(cfg.name + ": ASSERTION " + failures[k]);
        if (ctx.strict && failures.size() > before) break;
    }
    man.failures = failures;
    man.finished = now_utc();
    man.status = failures.empty() ? "ok" : "assertion_failed";
    man.exit_code = failures.empty() ? 0 : 2;
    write_manifest(manifest_path, man);
    return man.exit_code;
}

std::vector<std::string> emit_plotdata(const std::string& dir_s) {
    const fs::path dir(dir_s);
    std::vector<std::string> written;
    auto header = [](std::ofstream& out, const CsvTable& t, const std::string& columns) {
        out << "# config_hash: " << t.meta_value("config_hash") << '\n';
        const auto seed = t.meta_value("seed");
        if (!seed.empty()) out << "# seed: " << seed << '\n';
        out << "# columns: " << columns << '\n';
    };
    if (fs::exists(dir / "fit.csv")) {
        const auto t = read_csv((dir / "fit.csv").string());
        const double c = std::stod(t.meta_value("c_hat")), r = std::stod(t.meta_value("r_hat")),
                     x = std::stod(t.meta_value("x_hat"));
        const auto ts = t.values("t"), X = t.values("X_m");
        std::ofstream out(dir / "delay_plot.dat");
        header(out, t, "t X-c*t -r_hat*log(t)+x_hat");
        for (std::size_t k = 0; k < ts.size(); ++k)
            out << format_double(ts[k]) << ' ' << format_double(X[k] - c * ts[k]) << ' '
                << format_double(-r * std::log(ts[k]) + x) << '\n';
        written.push_back((dir / "delay_plot.dat").string());
    }
    if (fs::exists(dir / "c_lambda.csv")) {
        const auto t = read_csv((dir / "c_lambda.csv").string());
        const auto l = t.values("lambda"), mu = t.values("mu"), c = t.values("c");
        std::ofstream out(dir / "c_lambda.dat");
        header(out, t, "lambda mu c");
        for (std::size_t k = 0; k < l.size(); ++k)
            out << format_double(l[k]) << ' ' << format_double(mu[k]) << ' ' << format_double(c[k]) << '\n';
        written.push_back((dir / "c_lambda.dat").string());
    }
    if (fs::exists(dir / "residual.csv")) {
        const auto t = read_csv((dir / "residual.csv").string());
        const auto tau = t.values("tau"), res = t.values("sup_residual"), terms = t.values("terms");
        std::ofstream out(dir / "residual.dat");
        header(out, t, "log(tau) log(sup_residual) terms");
        std::map<int, std::pair<std::vector<double>, std::vector<double>>> by_terms;
        for (std::size_t k = 0; k < tau.size(); ++k) {
            if (!(res[k] > 0.0)) continue;
            by_terms[static_cast<int>(terms[k])].first.push_back(std::log(tau[k]));
            by_terms[static_cast<int>(terms[k])].second.push_back(std::log(res[k]));
        }
        for (const auto& [m, xy] : by_terms)
            if (xy.first.size() >= 2) out << "# slope terms=" << m << ": " << format_double(linalg::fit_line(xy.first, xy.second).coef[0]) << '\n';
        for (std::size_t k = 0; k < tau.size(); ++k)
            if (res[k] > 0.0)
                out << format_double(std::log(tau[k])) << ' ' << format_double(std::log(res[k])) << ' ' << terms[k] << '\n';
        written.push_back((dir / "residual.dat").string());
    }
    for (const auto& entry : fs::directory_iterator(dir)) {
        const auto name = entry.path().filename().string();
        if (name.rfind("probe_", 0) != 0 || entry.path().extension() != ".csv") continue;
        const auto t = read_csv(entry.path().string());
        auto out_path = entry.path();
        out_path.replace_extension(".dat");
        std::ofstream out(out_path);
        std::string cols;
        for (const auto& c : t.columns) cols += (cols.empty() ? "" : " ") + c;
        header(out, t, cols);
        for (const auto& row : t.rows) {
            for (std::size_t i = 0; i < row.size(); ++i) out << (i ? " " : "") << format_double(row[i]);
            out << '\n';
        }
        written.push_back(out_path.string());
    }
    return written;
}

void parallel_for(int n, int workers, const std::function<void(int)>& fn) {
    workers = std::max(1, std::min(workers, n));
    std::atomic<int> next{0};
    std::exception_ptr first;
    std::mutex mu;
    auto body = [&] {
        for (int i = next++; i < n; i = next++) {
            try {
                fn(i);
            } catch (...) {
                std::lock_guard<std::mutex> lock(mu);
                if (!first) first = std::current_exception();
            }
        }
    };
    std::vector<std::thread> pool;
    for (int w = 1; w < workers; ++w) pool.emplace_back(body);
    body();
    for (auto& t : pool) t.join();
    if (first) std::rethrow_exception(first);
}

}  // namespace toadfront
