#include "toadfront/front_analysis.hpp"

#include <algorithm>
#include <cmath>
#include <set>

#include "toadfront/csv.hpp"
#include "toadfront/linalg.hpp"

namespace toadfront {

const char* to_string(TrackedQuantity q) { return q == TrackedQuantity::rho ? "rho" : "max_theta"; }

std::vector<double> tracked_profile(const Field& field, TrackedQuantity q) {
    return q == TrackedQuantity::rho ? total_density(field) : max_over_theta(field);
}

namespace {

double crossing(const std::vector<double>& q, const Field& f, double m) {
    const int n = static_cast<int>(q.size());
    int i = n - 1;
    while (i >= 0 && !(q[i] >= m)) --i;
    if (i < 0) throw Error(ErrorCode::LevelNotAttained, "level " + std::to_string(m) + " not attained at t = " + std::to_string(f.t));
    if (i == n - 1)
        throw Error(ErrorCode::WindowOutsideGrid, "level " + std::to_string(m) + " reaches the right edge at t = " + std::to_string(f.t));
    return f.x(i) + (q[i] - m) / (q[i] - q[i + 1]) * f.dx;
}

}  // namespace

double level_position(const Field& field, double m, TrackedQuantity q) {
    return crossing(tracked_profile(field, q), field, m);
}

FrontTrace extract_level_set(const std::vector<Field>& snapshots, double m, TrackedQuantity q) {
    FrontTrace tr;
    tr.level = m;
    tr.quantity = q;
    for (std::size_t k = 0; k < snapshots.size(); ++k) {
        const auto& f = snapshots[k];
        if (k > 0 && !(f.t > snapshots[k - 1].t))
            throw Error(ErrorCode::InvalidArgument, "snapshots must be ordered in time");
        try {
            const double x = level_position(f, m, q);
            tr.times.push_back(f.t);
            tr.positions.push_back(x);
        } catch (const Error& e) {
            if (e.code() != ErrorCode::LevelNotAttained) throw;
            tr.skipped_times.push_back(f.t);
        }
    }
    return tr;
}

DelayFit fit_bramson(const FrontTrace& trace, const FitSpec& spec) {
    if (trace.times.empty()) throw Error(ErrorCode::InvalidArgument, "fit_bramson: empty trace");
    DelayFit fit;
    fit.mode = spec.mode;
    fit.t0 = spec.t0;
    fit.t1 = spec.t1 > 0.0 ? spec.t1 : trace.times.back();
    const double t_end = trace.times.back();
    if (spec.enforce_window_rule && spec.t0 < std::max(20.0, t_end / 4.0) - 1e-12)
        throw Error(ErrorCode::InvalidArgument, "fit window must start at t0 >= max(20, t_end/4)");
    if (!(fit.t0 > 0.0) || !(fit.t1 > fit.t0)) throw Error(ErrorCode::InvalidArgument, "fit window is empty");

    std::vector<double> t, y, xs;
    for (std::size_t k = 0; k < trace.times.size(); ++k) {
        const double tk = trace.times[k];
        if (tk < fit.t0 - 1e-12 || tk > fit.t1 + 1e-12) continue;
        t.push_back(tk);
        xs.push_back(trace.positions[k]);
        y.push_back(spec.mode == FitMode::fixed_c ? trace.positions[k] - spec.c_star * tk : trace.positions[k]);
    }
    fit.samples = static_cast<int>(t.size());
    if (fit.samples < spec.min_samples)
        throw Error(ErrorCode::InvalidArgument, "fit_bramson: " + std::to_string(fit.samples) + " samples in window, need " +
                                                    std::to_string(spec.min_samples));

    // columns are scaled to unit norm so the condition number reflects collinearity, not units
    const int cols = spec.mode == FitMode::free_c ? 3 : 2;
    std::vector<std::vector<double>> basis;
    if (spec.mode == FitMode::free_c) basis.push_back(t);
    std::vector<double> mlog(t.size()), one(t.size(), 1.0);
    for (std::size_t k = 0; k < t.size(); ++k) mlog[k] = -std::log(t[k]);
    basis.push_back(mlog);
    basis.push_back(one);
    std::vector<double> scale(cols);
    for (int c = 0; c < cols; ++c) {
        double s = 0.0;
        for (double v : basis[c]) s += v * v;
        scale[c] = std::sqrt(s);
    }
    std::vector<double> X(t.size() * cols);
    for (std::size_t k = 0; k < t.size(); ++k)
        for (int c = 0; c < cols; ++c) X[k * cols + c] = basis[c][k] / scale[c];
    const auto ls = linalg::least_squares(X, cols, y);
    fit.condition_number = ls.condition_number;
    if (!(ls.condition_number <= spec.max_condition))
        throw Error(ErrorCode::IllConditioned, "normal-equation condition number " + std::to_string(ls.condition_number));
    std::vector<double> coef(cols);
    for (int c = 0; c < cols; ++c) coef[c] = ls.coef[c] / scale[c];
    if (spec.mode == FitMode::free_c) {
        fit.c_hat = coef[0];
        fit.r_hat = coef[1];
        fit.x_hat = coef[2];
    } else {
        fit.c_hat = spec.c_star;
        fit.r_hat = coef[0];
        fit.x_hat = coef[1];
    }
    fit.times = t;
    fit.positions = xs;
    fit.residuals = ls.residuals;
    fit.residual_sup = ls.max_abs_residual;
    return fit;
}

TailFit tail_decay_rate(const Field& field, double level, double from, double to) {
    const auto q = max_over_theta(field);
    TailFit out;
    out.x_level = crossing(q, field, level);
    out.x_from = out.x_level + from;
    out.x_to = out.x_level + to;
    if (out.x_to > field.x(field.n_x - 1))
        throw Error(ErrorCode::WindowOutsideGrid, "tail window ends beyond the grid at t = " + std::to_string(field.t));
    std::vector<double> xs, ys;
    for (int i = 0; i < field.n_x; ++i) {
        const double x = field.x(i);
        if (x < out.x_from || x > out.x_to) continue;
        if (!(q[i] > 0.0)) throw Error(ErrorCode::NonPositiveSample, "tail window contains a non-positive value");
        xs.push_back(x);
        ys.push_back(std::log(q[i]));
    }
    out.samples = static_cast<int>(xs.size());
    if (out.samples < 2) throw Error(ErrorCode::WindowOutsideGrid, "tail window holds fewer than two cells");
    out.lambda_hat = -linalg::fit_line(xs, ys).coef[0];
    return out;
}

HarnackFieldResult harnack_ratio_field(const std::vector<Field>& snapshots, double p, double R,
                                       const HarnackFieldOptions& opt) {
    if (!(p > 1.0) || !(R > 0.0)) throw Error(ErrorCode::InvalidArgument, "harnack_ratio_field: need p > 1, R > 0");
    HarnackFieldResult res;
    const double ip = 1.0 / p;
    for (const auto& f : snapshots) {
        const int J = f.n_theta();
        const double dth = f.theta.dtheta();
        int ic = f.n_x - 1;
        try {
            const double xc = level_position(f, opt.cutoff_level, opt.cutoff_quantity);
            ic = std::min(ic, static_cast<int>(std::floor((xc - f.x_offset) / f.dx - 0.5)));
        } catch (const Error& e) {
            // the cutoff level is not crossed inside the window: every cell is behind the front
            if (e.code() != ErrorCode::WindowOutsideGrid) throw;
        }
        if (ic < 0) throw Error(ErrorCode::WindowOutsideGrid, "no cells behind the cutoff level");

        // offsets (dk, dj) inside the L1 ball; x-offsets on a stride that always includes +-kmax,
        // refined to every cell when that would give fewer than min_pairs pairs
        const int kmax = static_cast<int>(std::floor(R / f.dx + 1e-9));
        auto offsets = [&](int nk) {
            std::set<int> ks;
            for (int s = -nk; s <= nk; ++s) ks.insert(static_cast<int>(std::lround(static_cast<double>(s) * kmax / nk)));
            std::vector<std::pair<int, int>> offs;
            for (int dk : ks) {
                const double rest = R - std::abs(dk) * f.dx;
                const int jmax = J > 1 ? static_cast<int>(std::floor(rest / dth + 1e-9)) : 0;
                for (int dj = -std::min(jmax, J - 1); dj <= std::min(jmax, J - 1); ++dj)
                    if (dk != 0 || dj != 0) offs.emplace_back(dk, dj);
            }
            return offs;
        };
        auto offs = offsets(std::max(1, std::min(opt.x_offsets, std::max(kmax, 1))));
        if (static_cast<long>(ic + 1) * J * static_cast<long>(offs.size()) < opt.min_pairs && kmax > opt.x_offsets)
            offs = offsets(kmax);

        // every anchor is used: a sparse anchor set misses the narrow front interface where the ratio peaks
        std::vector<double> root(static_cast<std::size_t>(ic + 1) * J);
        for (int i = 0; i <= ic; ++i)
            for (int j = 0; j < J; ++j) {
                const double b = f.at(i, j);
                if (!(b > 0.0)) throw Error(ErrorCode::NonPositiveSample, "non-positive value behind the front");
                root[static_cast<std::size_t>(i) * J + j] = std::pow(b, ip);
            }

        double best = 0.0;
        HarnackWitness w;
        long pairs = 0;
        for (int i = 0; i <= ic; ++i) {
            for (int j = 0; j < J; ++j) {
                const double a = f.at(i, j);
                for (const auto& [dk, dj] : offs) {
                    const int i2 = i + dk, j2 = j + dj;
                    if (i2 < 0 || i2 > ic || j2 < 0 || j2 >= J) continue;
                    const double r = a / root[static_cast<std::size_t>(i2) * J + j2];
                    ++pairs;
                    if (r > best) {
                        best = r;
                        w = {f.t, f.x(i), f.theta.center(j), f.x(i2), f.theta.center(j2)};
                    }
                }
            }
        }
        res.times.push_back(f.t);
        res.C_per_snapshot.push_back(best);
        res.pairs_per_snapshot.push_back(pairs);
        if (best > res.C_emp) {
            res.C_emp = best;
            res.witness = w;
        }
    }
    return res;
}

void write_trace_csv(const std::string& path, const FrontTrace& trace, const std::string& config_hash,
                     const std::vector<std::pair<std::string, std::string>>& meta) {
    std::vector<std::pair<std::string, std::string>> m = meta;
    m.emplace_back("quantity", to_string(trace.quantity));
    m.emplace_back("level", format_double(trace.level));
    CsvWriter w(path, {"t", "X_m", "m"}, config_hash, m);
    for (std::size_t k = 0; k < trace.times.size(); ++k) w.row({trace.times[k], trace.positions[k], trace.level});
    w.close();
}

void write_fit_csv(const std::string& path, const DelayFit& fit, const std::string& config_hash,
                   const std::vector<std::pair<std::string, std::string>>& meta) {
    std::vector<std::pair<std::string, std::string>> m = meta;
    m.insert(m.end(),
                {{"mode", fit.mode == FitMode::fixed_c ? "fixed_c" : "free_c"},
                 {"c_hat", format_double(fit.c_hat)},
                 {"r_hat", format_double(fit.r_hat)},
                 {"x_hat", format_double(fit.x_hat)},
                 {"t0", format_double(fit.t0)},
                 {"t1", format_double(fit.t1)},
                 {"residual_sup", format_double(fit.residual_sup)},
                 {"condition_number", format_double(fit.condition_number)}});
    CsvWriter w(path, {"t", "X_m", "residual"}, config_hash, m);
    for (std::size_t k = 0; k < fit.times.size(); ++k) w.row({fit.times[k], fit.positions[k], fit.residuals[k]});
    w.close();
}

}  // namespace toadfront
