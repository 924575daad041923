// Command-line driver: one subcommand per module entry point.
#include <CLI11.hpp>

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <iostream>
#include <mutex>

#include "toadfront/asymptotics.hpp"
#include "toadfront/csv.hpp"
#include "toadfront/dispersion.hpp"
#include "toadfront/errors.hpp"
#include "toadfront/experiment.hpp"
#include "toadfront/front_analysis.hpp"
#include "toadfront/kernel_probes.hpp"

namespace fs = std::filesystem;
using namespace toadfront;

namespace {

struct Globals {
    std::vector<std::string> configs;
    std::string out;
    int workers = 1;
    bool resume = false;
    bool strict = false;
};

std::mutex log_mu;

void say(const std::string& s) {
    std::lock_guard<std::mutex> lock(log_mu);
    std::cout << s << '\n';
}

const ExperimentConfig& only_config(const std::vector<ExperimentConfig>& cfgs) {
    if (cfgs.size() != 1) throw Error(ErrorCode::ConfigParseError, "this subcommand takes exactly one --config");
    return cfgs.front();
}

const AnalysisTask& section(const ExperimentConfig& cfg, const std::string& name) {
    static const AnalysisTask empty;
    const auto it = cfg.sections.find(name);
    return it == cfg.sections.end() ? empty : it->second;
}

std::vector<double> list(const AnalysisTask& t, const std::string& key, std::vector<double> fallback) {
    if (!t.num.count(key + ".size")) return t.num.count(key) ? std::vector<double>{t.num.at(key)} : fallback;
    std::vector<double> v;
    for (int i = 0; i < static_cast<int>(t.num.at(key + ".size")); ++i) v.push_back(t.num.at(key + "." + std::to_string(i)));
    return v;
}

std::vector<std::pair<std::string, std::string>> meta_of(const ExperimentConfig& cfg) {
    return {{"seed", std::to_string(cfg.seed)}, {"name", cfg.name}};
}

// "const c" or "sin b a" (b + a sin x).
Coefficient parse_coefficient(const std::string& spec) {
    std::istringstream in(spec);
    std::string kind;
    double b = 1.0, a = 0.0;
    in >> kind >> b;
    if (kind == "const") return [b](double) { return b; };
    if (kind == "sin") {
        in >> a;
        if (!(b > std::abs(a))) throw Error(ErrorCode::ConfigParseError, "coefficient '" + spec + "' is not positive");
        return [b, a](double x) { return b + a * std::sin(x); };
    }
    throw Error(ErrorCode::ConfigParseError, "unknown coefficient '" + spec + "'");
}

int finish(const ExperimentConfig& cfg, const AnalysisTask& task, const std::map<std::string, double>& values,
           const std::string& what) {
    for (const auto& [k, v] : values) say(cfg.name + ": " + what + "." + k + " = " + format_double(v));
    std::vector<std::string> failures;
    check_expectations(task, values, failures);
    for (const auto& f : failures) say(cfg.name + ": ASSERTION " + f);
    return failures.empty() ? 0 : 2;
}

int cmd_dispersion(const ExperimentConfig& cfg, const fs::path& dir) {
    const auto& sec = section(cfg, "dispersion");
    MinimizeOptions mo;
    mo.lambda_lo = sec.get("lambda_lo", mo.lambda_lo);
    mo.lambda_hi = sec.get("lambda_hi", mo.lambda_hi);
    mo.n_lambda = static_cast<int>(sec.get("n_lambda", mo.n_lambda));
    const auto rep = dispersion_report(cfg.profile, mo);
    const auto& sd = rep.spectral;
    const auto meta = meta_of(cfg);
    CsvWriter c((dir / "c_lambda.csv").string(), {"lambda", "mu", "c"}, cfg.config_hash, meta);
    for (std::size_t k = 0; k < rep.curve.lambdas.size(); ++k) c.row({rep.curve.lambdas[k], rep.curve.mus[k], rep.curve.speeds[k]});
    c.close();
    auto m = meta;
    m.insert(m.end(), {{"c_star", format_double(sd.c_star)},
                       {"lambda_star", format_double(sd.lambda_star)},
                       {"mu_star", format_double(sd.mu_star)},
                       {"D_bar", format_double(sd.D_bar)},
                       {"c_second_deriv", format_double(sd.c_second_deriv)},
                       {"rel3_residual", format_double(rep.rel3_residual)}});
    CsvWriter s((dir / "spectral.csv").string(), {"theta", "D", "A", "Q_star", "chi", "beta", "weight_mu"}, cfg.config_hash, m);
    const auto& p = cfg.profile;
    for (int j = 0; j < p.size(); ++j)
        s.row({p.domain.center(j), p.D[j], p.A[j], sd.Q_star[j], sd.chi[j], sd.beta[j], sd.weight_mu[j]});
    s.close();
    double rel4 = 0.0;
    for (double r : rep.rel4_residuals) rel4 = std::max(rel4, r);
    const double dbar_identity = std::abs(sd.D_bar - sd.lambda_star * sd.c_second_deriv / 2.0) / sd.D_bar;
    return finish(cfg, sec,
                  {{"c_star", sd.c_star}, {"lambda_star", sd.lambda_star}, {"D_bar", sd.D_bar},
                   {"rel3", rep.rel3_residual}, {"rel4", rel4}, {"dbar_identity", dbar_identity}},
                  "dispersion");
}

int cmd_front(const ExperimentConfig& cfg, const fs::path& dir) {
    int code = 0;
    for (const auto& a : cfg.analyses) {
        if (a.kind != "fit") continue;
        const auto trace_path = dir / "trace.csv";
        const auto t = read_csv(trace_path.string());
        FrontTrace tr;
        tr.times = t.values("t");
        tr.positions = t.values("X_m");
        tr.level = a.get("level", 0.5);
        FitSpec spec;
        spec.mode = a.get("mode", std::string("fixed_c")) == "free_c" ? FitMode::free_c : FitMode::fixed_c;
        const auto sd = compute_spectral_data(cfg.profile);
        spec.c_star = a.has("c") ? a.get("c", 0.0) : sd.c_star;
        spec.t0 = a.get("t0", 0.0);
        spec.t1 = a.get("t1", 0.0);
        const auto fit = fit_bramson(tr, spec);
        write_fit_csv((dir / "fit.csv").string(), fit, cfg.config_hash, meta_of(cfg));
        emit_plotdata(dir.string());
        code = std::max(code, finish(cfg, a,
                                     {{"r_hat", fit.r_hat}, {"c_hat", fit.c_hat}, {"residual_sup", fit.residual_sup},
                                      {"r_ratio", fit.r_hat * 2.0 * sd.lambda_star / 3.0}},
                                     "fit"));
        break;
    }
    return code;
}

int cmd_probe(const std::string& which, const ExperimentConfig& cfg, const fs::path& dir, int workers) {
    const auto& sec = section(cfg, "probe");
    const auto a = parse_coefficient(sec.get("a", std::string("const 1")));
    const auto meta = meta_of(cfg);
    std::map<std::string, double> values;
    if (which == "harnack") {
        const double p = sec.get("p", 1.5), R = sec.get("R", 1.0), t0 = sec.get("t0", 1.0);
        HarnackProbeOptions opt;
        opt.window = sec.get("window", opt.window);
        auto u0 = [](double x) { return std::exp(-0.5 * x * x); };
        const auto r1 = harnack_constant(u0, a, t0, R, p, opt);
        opt.domain_factor *= 2.0;
        const auto r2 = harnack_constant(u0, a, t0, R, p, opt);
        CsvWriter w((dir / "probe_harnack.csv").string(), {"t", "C"}, cfg.config_hash, meta);
        for (std::size_t k = 0; k < r1.times.size(); ++k) w.row({r1.times[k], r1.C_per_time[k]});
        w.close();
        values = {{"C_emp", r1.C_emp}, {"C_doubled", r2.C_emp}, {"domain_drift", std::abs(r2.C_emp - r1.C_emp) / r1.C_emp}};
    } else if (which == "varadhan") {
        const auto tab = varadhan_check(a, list(sec, "t", {0.1, 0.05, 0.025}));
        CsvWriter w((dir / "probe_varadhan.csv").string(), {"t", "max_error", "x", "y", "d", "minus_4t_log_G"},
                    cfg.config_hash, meta);
        for (const auto& r : tab.rows) w.row({r.t, r.max_error, r.x, r.y, r.d, r.minus_4t_log_G});
        w.close();
        values = {{"final_error", tab.rows.back().max_error}, {"decreasing", tab.decreasing ? 1.0 : 0.0}};
    } else if (which == "nash") {
        const auto ks = list(sec, "k", {1.0}), ds = list(sec, "d", {1.0});
        if (ks.size() != ds.size()) throw Error(ErrorCode::ConfigParseError, "probe.k and probe.d must have equal length");
        const long trials = static_cast<long>(sec.get("trials", 10000.0));
        std::vector<NashReport> reps(ks.size());
        parallel_for(static_cast<int>(ks.size()), workers, [&](int i) {
            reps[i] = nash_check(static_cast<int>(ks[i]), static_cast<int>(ds[i]), trials, cfg.seed);
        });
        CsvWriter w((dir / "probe_nash.csv").string(), {"k", "d", "trials", "C_emp", "C_emp_half", "drift"}, cfg.config_hash,
                    meta);
        double drift = 0.0, cmin = INFINITY;
        for (const auto& r : reps) {
            w.row({double(r.k), double(r.d), double(r.trials), r.C_emp, r.C_emp_half, r.drift});
            say(cfg.name + ": nash (" + std::to_string(r.k) + "," + std::to_string(r.d) + ") argmin " + r.argmin_description);
            drift = std::max(drift, r.drift);
            cmin = std::min(cmin, r.C_emp);
        }
        w.close();
        values = {{"max_drift", drift}, {"min_C", cmin}};
    } else if (which == "kernel-power") {
        const double s = sec.get("s", 0.8), p = sec.get("p", 1.5), t0 = sec.get("t0", 0.5), R = sec.get("R", 1.0);
        KernelPowerOptions opt;
        opt.half_width = sec.get("half_width", opt.half_width);
        const auto r1 = kernel_power_bound_check(a, t0, R, s, p, opt);
        opt.half_width *= 2.0;
        const auto r2 = kernel_power_bound_check(a, t0, R, s, p, opt);
        CsvWriter w((dir / "probe_kernel_power.csv").string(), {"half_width", "C_emp", "x", "y", "boundary_ratio"},
                    cfg.config_hash, meta);
        w.row({opt.half_width / 2.0, r1.C_emp, r1.x, r1.y, r1.boundary_ratio});
        w.row({opt.half_width, r2.C_emp, r2.x, r2.y, r2.boundary_ratio});
        w.close();
        values = {{"C_emp", r1.C_emp}, {"domain_drift", std::abs(r2.C_emp - r1.C_emp) / r1.C_emp}};
    } else {
        throw Error(ErrorCode::ConfigParseError, "unknown probe '" + which + "'");
    }
    return finish(cfg, sec, values, "probe_" + which);
}

int cmd_asym(const ExperimentConfig& cfg, const fs::path& dir) {
    const auto& sec = section(cfg, "asym");
    const auto sd = compute_spectral_data(cfg.profile);
    std::optional<double> chi_bar;
    if (sec.has("chi_bar")) chi_bar = sec.get("chi_bar", 0.0);
    const auto e = build_expansion(cfg.profile, sd, chi_bar, sec.get("omega_bar", 0.0), sec.get("sigma", 3.0));
    const auto taus = list(sec, "tau", {200.0, 400.0, 800.0, 1600.0});
    const auto full = residual_of_S(e, taus, 4);
    const auto lead = residual_of_S(e, taus, 1);
    auto m = meta_of(cfg);
    m.insert(m.end(), {{"beta1", format_double(e.beta1)},
                       {"beta2", format_double(e.beta2)},
                       {"chi_bar", format_double(e.chi_bar)},
                       {"C_phi", format_double(e.C_phi)}});
    CsvWriter w((dir / "residual.csv").string(), {"tau", "terms", "sup_residual", "gaussian_gap"}, cfg.config_hash, m);
    for (const auto* r : {&full, &lead})
        for (std::size_t k = 0; k < r->taus.size(); ++k) w.row({r->taus[k], double(r->terms), r->sup_residual[k], r->gaussian_gap[k]});
    w.close();
    auto minmax = [](const std::vector<double>& v) {
        return std::pair{*std::min_element(v.begin(), v.end()), *std::max_element(v.begin(), v.end())};
    };
    std::map<std::string, double> values;
    if (!full.ratios.empty()) {
        std::tie(values["full_ratio_min"], values["full_ratio_max"]) = minmax(full.ratios);
        std::tie(values["lead_ratio_min"], values["lead_ratio_max"]) = minmax(lead.ratios);
    }
    if (sec.has("tau0")) {
        ProximityOptions po;
        po.dx = sec.get("dx", po.dx);
        po.dt = sec.get("dt", po.dt);
        const auto tr = compare_xi_S(e, sec.get("tau0", 100.0), po);
        CsvWriter p((dir / "proximity.csv").string(), {"tau", "weighted_deviation"}, cfg.config_hash, meta_of(cfg));
        for (std::size_t k = 0; k < tr.taus.size(); ++k) p.row({tr.taus[k], tr.weighted_deviation[k]});
        p.close();
        values["proximity_max_over_min"] = tr.max_over_min;
    }
    emit_plotdata(dir.string());
    return finish(cfg, sec, values, "asym");
}

int cmd_criticality(const ExperimentConfig& cfg, const fs::path& dir, int workers) {
    const auto& sec = section(cfg, "criticality");
    const auto sd = compute_spectral_data(cfg.profile);
    // shifts in units of 1/lambda*
    const auto factors = list(sec, "r_lambda", {0.0, 1.5, 3.0});
    const auto Ts = list(sec, "T", {10.0, 20.0});
    CriticalityOptions opt;
    opt.t_end = sec.get("t_end", opt.t_end);
    opt.dx = sec.get("dx", opt.dx);
    opt.dt = sec.get("dt", opt.dt);
    opt.sigma = sec.get("sigma", opt.sigma);
    std::vector<CriticalityRow> rows(factors.size() * Ts.size());
    parallel_for(static_cast<int>(rows.size()), workers, [&](int i) {
        const double r = factors[i % factors.size()] / sd.lambda_star;
        rows[i] = moving_boundary_criticality(cfg.profile, sd, {r}, Ts[i / factors.size()], opt).front();
    });
    CsvWriter w((dir / "criticality.csv").string(), {"r_shift", "T_big", "A_early", "A_end", "ratio", "verdict"},
                cfg.config_hash, meta_of(cfg));
    // verdict codes: 0 decaying, 1 bounded, 2 growing
    std::map<std::string, double> values;
    for (const auto& r : rows) {
        w.row({r.r_shift, r.T_big, r.A_early, r.A_end, r.ratio, static_cast<double>(r.verdict)});
        say(cfg.name + ": r = " + format_double(r.r_shift) + " T = " + format_double(r.T_big) + " ratio " +
            format_double(r.ratio) + " " + to_string(r.verdict));
    }
    w.close();
    // verdicts agree across T_big
    bool robust = true;
    for (std::size_t i = 0; i < factors.size(); ++i)
        for (std::size_t k = 1; k < Ts.size(); ++k) robust = robust && rows[i].verdict == rows[k * factors.size() + i].verdict;
    values["robust"] = robust ? 1.0 : 0.0;
    for (std::size_t i = 0; i < factors.size(); ++i) values["verdict_" + std::to_string(i)] = static_cast<double>(rows[i].verdict);
    return finish(cfg, sec, values, "criticality");
}

int cmd_report(const fs::path& dir) {
    for (const auto& f : emit_plotdata(dir.string())) say("wrote " + f);
    if (fs::exists(dir / "manifest.json")) {
        const auto m = read_manifest((dir / "manifest.json").string());
        say(m.name + ": status " + m.status + ", " + std::to_string(m.snapshots.size()) + " snapshots, config " +
            m.config_hash);
        for (const auto& f : m.failures) say("  failure: " + f);
        return m.exit_code < 0 ? 0 : m.exit_code;
    }
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Front propagation experiments for trait-structured reaction-diffusion models"};
    app.require_subcommand(1);
    app.fallthrough();
    Globals g;
    app.add_option("--config", g.configs, "YAML experiment config (repeatable for simulate)");
    app.add_option("--out", g.out, "output directory (default: TOADFRONT_OUT/<name> or the config's output_dir)");
    app.add_option("--workers", g.workers, "bounded worker pool size")->check(CLI::PositiveNumber);
    app.add_flag("--resume", g.resume, "continue from the last checkpoint in the output directory");
    app.add_flag("--strict", g.strict, "stop at the first failed assertion");

    auto* dispersion = app.add_subcommand("dispersion", "dispersion curve and spectral data");
    auto* simulate = app.add_subcommand("simulate", "model run with the configured analyses");
    double until = 0.0;
    simulate->add_option("--until", until, "stop at this time and leave a resumable checkpoint");
    auto* front = app.add_subcommand("front", "refit the delay from an existing trace.csv");
    auto* probe = app.add_subcommand("probe", "empirical inequality probes");
    std::string which;
    probe->add_option("which", which, "harnack | varadhan | nash | kernel-power")
        ->required()
        ->check(CLI::IsMember({"harnack", "varadhan", "nash", "kernel-power"}));
    auto* asym = app.add_subcommand("asym", "approximate solution residuals and proximity");
    auto* criticality = app.add_subcommand("criticality", "moving-boundary amplitude verdicts");
    auto* report = app.add_subcommand("report", "plot-ready files and run summary for an output directory");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        return app.exit(e) == 0 ? 0 : 1;
    }

    try {
        if (report->parsed()) {
            if (g.out.empty()) throw Error(ErrorCode::ConfigParseError, "report needs --out DIR");
            return cmd_report(g.out);
        }
        if (g.configs.empty()) throw Error(ErrorCode::ConfigParseError, "--config is required");
        std::vector<ExperimentConfig> cfgs;
        for (const auto& path : g.configs) cfgs.push_back(load_config(path));
        if (simulate->parsed()) {
            if (cfgs.size() > 1 && !g.out.empty())
                throw Error(ErrorCode::ConfigParseError, "--out cannot be shared by several configs");
            std::vector<int> codes(cfgs.size(), 0);
            parallel_for(static_cast<int>(cfgs.size()), g.workers, [&](int i) {
                RunContext ctx;
                ctx.out_dir = resolve_output_dir(cfgs[i], g.out);
                ctx.resume = g.resume;
                ctx.strict = g.strict;
                ctx.until = until;
                ctx.log = say;
                try {
                    codes[i] = run_experiment(cfgs[i], ctx);
                } catch (const std::exception& e) {
                    say(cfgs[i].name + ": error: " + e.what());
                    codes[i] = exit_code_for(e);
                }
            });
            return *std::max_element(codes.begin(), codes.end());
        }
        const auto& cfg = only_config(cfgs);
        const fs::path dir = resolve_output_dir(cfg, g.out);
        fs::create_directories(dir);
        if (dispersion->parsed()) return cmd_dispersion(cfg, dir);
        if (front->parsed()) return cmd_front(cfg, dir);
        if (probe->parsed()) return cmd_probe(which, cfg, dir, g.workers);
        if (asym->parsed()) return cmd_asym(cfg, dir);
        if (criticality->parsed()) return cmd_criticality(cfg, dir, g.workers);
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return exit_code_for(e);
    }
    return 0;
}
