#include "toadfront/kernel_probes.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <map>
#include <random>
#include <sstream>

#include "toadfront/errors.hpp"
#include "toadfront/linalg.hpp"

namespace toadfront {

namespace {

constexpr double kPi = 3.14159265358979323846;

int grid_size(double lo, double hi, double dx) {
    if (!(hi > lo) || !(dx > 0.0)) throw Error(ErrorCode::InvalidArgument, "kernel grid needs x_max > x_min and dx > 0");
    return static_cast<int>(std::lround((hi - lo) / dx)) + 1;
}

double sampled_max(const Coefficient& a, const std::vector<double>& x) {
    double m = 0.0;
    for (double xi : x) {
        const double v = a(xi);
        if (!(v > 0.0)) throw Error(ErrorCode::NonPositiveDiffusivity, "a(x) must be positive");
        m = std::max(m, v);
    }
    return m;
}

// Crank-Nicolson for u_t = M u with M the three-point a(x) u_xx (Neumann ghosts), or its transpose.
class CrankNicolson {
public:
    CrankNicolson(const Coefficient& a, const std::vector<double>& x, double dx, bool adjoint) : n_(static_cast<int>(x.size())) {
        lo_.assign(n_, 0.0);
        di_.assign(n_, 0.0);
        up_.assign(n_, 0.0);
        const double idx2 = 1.0 / (dx * dx);
        std::vector<double> l(n_, 0.0), d(n_), u(n_, 0.0);
        for (int i = 0; i < n_; ++i) {
            const double ai = a(x[i]) * idx2;
            d[i] = -2.0 * ai;
            if (i > 0) l[i] = i == n_ - 1 ? 2.0 * ai : ai;
            if (i < n_ - 1) u[i] = i == 0 ? 2.0 * ai : ai;
        }
        if (adjoint) {
            for (int i = 0; i < n_; ++i) {
                lo_[i] = i > 0 ? u[i - 1] : 0.0;
                up_[i] = i < n_ - 1 ? l[i + 1] : 0.0;
                di_[i] = d[i];
            }
        } else {
            lo_ = l;
            di_ = d;
            up_ = u;
        }
    }

    void advance(std::vector<double>& v, double duration, double dt_max) {
        if (!(duration > 0.0)) return;
        const long steps = std::max(1L, static_cast<long>(std::ceil(duration / dt_max - 1e-9)));
        const double h = 0.5 * duration / static_cast<double>(steps);
        auto it = lu_.find(h);
        if (it == lu_.end()) {
            std::vector<double> a(n_), b(n_), c(n_);
            for (int i = 0; i < n_; ++i) {
                a[i] = -h * lo_[i];
                b[i] = 1.0 - h * di_[i];
                c[i] = -h * up_[i];
            }
            it = lu_.emplace(h, linalg::TridiagonalLU(a, b, c)).first;
        }
        std::vector<double> r(n_);
        for (long s = 0; s < steps; ++s) {
            for (int i = 0; i < n_; ++i) {
                double m = di_[i] * v[i];
                if (i > 0) m += lo_[i] * v[i - 1];
                if (i < n_ - 1) m += up_[i] * v[i + 1];
                r[i] = v[i] + h * m;
            }
            it->second.solve(r.data());
            v.swap(r);
        }
    }

private:
    int n_;
    std::vector<double> lo_, di_, up_;
    std::map<double, linalg::TridiagonalLU> lu_;
};

// Narrow Gaussian of unit discrete mass centred at c.
std::vector<double> gaussian_source(const std::vector<double>& x, double dx, double c, double w) {
    std::vector<double> v(x.size());
    double mass = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        const double z = (x[i] - c) / w;
        v[i] = std::exp(-0.5 * z * z);
        mass += v[i] * dx;
    }
    for (double& e : v) e /= mass;
    return v;
}

// Fraction of mass held by the outer 2% of cells on either side.
double boundary_fraction(const std::vector<double>& v) {
    const std::size_t n = v.size();
    const std::size_t edge = std::max<std::size_t>(1, n / 50);
    double total = 0.0, outer = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        total += std::abs(v[i]);
        if (i < edge || i >= n - edge) outer += std::abs(v[i]);
    }
    return total > 0.0 ? outer / total : 0.0;
}

double simpson(double a, double b, double fa, double fm, double fb) {
    return (b - a) / 6.0 * (fa + 4.0 * fm + fb);
}

double adaptive_simpson(const Coefficient& f, double a, double b, double fa, double fm, double fb, double whole, double tol,
                        int depth) {
    const double m = 0.5 * (a + b);
    const double lm = 0.5 * (a + m), rm = 0.5 * (m + b);
    const double flm = f(lm), frm = f(rm);
    const double left = simpson(a, m, fa, flm, fm);
    const double right = simpson(m, b, fm, frm, fb);
    const double diff = left + right - whole;
    if (depth <= 0 || std::abs(diff) <= 15.0 * tol) return left + right + diff / 15.0;
    return adaptive_simpson(f, a, m, fa, flm, fm, left, 0.5 * tol, depth - 1) +
           adaptive_simpson(f, m, b, fm, frm, fb, right, 0.5 * tol, depth - 1);
}

}  // namespace

int KernelGrid::n_x() const { return grid_size(x_min, x_max, dx); }

KernelEstimate estimate_kernel(const Coefficient& a, double t, const KernelGrid& grid, const std::vector<double>& sources,
                               bool adjoint) {
    if (!(t > 0.0)) throw Error(ErrorCode::InvalidArgument, "estimate_kernel: t must be positive");
    const int n = grid.n_x();
    KernelEstimate est;
    est.t = t;
    est.adjoint = adjoint;
    est.sources = sources;
    est.x.resize(n);
    for (int i = 0; i < n; ++i) est.x[i] = grid.x(i);
    const double amax = sampled_max(a, est.x);
    const double dt = grid.dt > 0.0 ? grid.dt : grid.dx * grid.dx / amax;
    const double w0 = grid.width_factor * std::sqrt(t);
    CrankNicolson cn(a, est.x, grid.dx, adjoint);
    for (double s : sources) {
        if (s < grid.x_min || s > grid.x_max) throw Error(ErrorCode::InvalidArgument, "kernel source outside the grid");
        // the Gaussian of variance w0^2 is the exact kernel at time w0^2 / (2 a) for frozen a
        const double t_start = std::min(0.5 * t, w0 * w0 / (2.0 * a(s)));
        auto v = gaussian_source(est.x, grid.dx, s, w0);
        cn.advance(v, t - t_start, dt);
        const double frac = boundary_fraction(v);
        est.max_boundary_mass = std::max(est.max_boundary_mass, frac);
        if (frac > 1e-8)
            throw Error(ErrorCode::DomainTooSmall, "kernel mass near the boundary is " + std::to_string(frac) + " for source " +
                                                       std::to_string(s));
        est.G.push_back(std::move(v));
    }
    return est;
}

double riemannian_distance(const Coefficient& a, double x, double y, double tol) {
    if (x == y) return 0.0;
    const double lo = std::min(x, y), hi = std::max(x, y);
    Coefficient f = [&a](double s) {
        const double v = a(s);
        if (!(v > 0.0)) throw Error(ErrorCode::NonPositiveDiffusivity, "a(x) must be positive");
        return 1.0 / std::sqrt(v);
    };
    // split into unit pieces so oscillating coefficients are resolved before the adaptive test
    const int pieces = std::max(1, static_cast<int>(std::ceil(hi - lo)));
    const double h = (hi - lo) / pieces;
    double sum = 0.0;
    for (int k = 0; k < pieces; ++k) {
        const double a0 = lo + k * h, b0 = k == pieces - 1 ? hi : lo + (k + 1) * h;
        const double fa = f(a0), fb = f(b0), fm = f(0.5 * (a0 + b0));
        sum += adaptive_simpson(f, a0, b0, fa, fm, fb, simpson(a0, b0, fa, fm, fb), tol / pieces, 40);
    }
    return sum;
}

VaradhanTable varadhan_check(const Coefficient& a, const std::vector<double>& t_list, const VaradhanOptions& opt) {
    if (t_list.empty()) throw Error(ErrorCode::InvalidArgument, "varadhan_check: empty t list");
    VaradhanTable table;
    for (double t : t_list) {
        VaradhanRow row;
        row.t = t;
        for (double y : opt.sources) {
            KernelGrid g;
            g.dx = opt.dx_factor * std::sqrt(t);
            double amax = opt.a_max;
            if (!(amax > 0.0)) {
                std::vector<double> probe;
                for (int k = 0; k <= 2000; ++k) probe.push_back(y - opt.r_max - 10.0 + k * (2.0 * opt.r_max + 20.0) / 2000.0);
                amax = sampled_max(a, probe);
            }
            const double half = opt.r_max + opt.margin_sigmas * std::sqrt(amax * t);
            const int cells = static_cast<int>(std::ceil(half / g.dx));
            g.x_min = y - cells * g.dx;
            g.x_max = y + cells * g.dx;
            const auto est = estimate_kernel(a, t, g, {y});
            const auto& G = est.G[0];
            // distances from y by cumulative quadrature between nodes
            std::vector<double> dist(est.x.size(), 0.0);
            for (int i = cells + 1; i < static_cast<int>(est.x.size()); ++i)
                dist[i] = dist[i - 1] + riemannian_distance(a, est.x[i - 1], est.x[i], 1e-13);
            for (int i = cells - 1; i >= 0; --i) dist[i] = dist[i + 1] + riemannian_distance(a, est.x[i], est.x[i + 1], 1e-13);
            for (std::size_t i = 0; i < est.x.size(); ++i) {
                const double sep = std::abs(est.x[i] - y);
                if (sep < opt.r_min - 1e-12 || sep > opt.r_max + 1e-12) continue;
                if (!(G[i] > 0.0)) throw Error(ErrorCode::NonPositive, "kernel underflow in the Varadhan window");
                const double lhs = -4.0 * t * std::log(G[i]);
                const double d2 = dist[i] * dist[i];
                const double err = std::abs(lhs - d2) / std::max(d2, opt.eps_floor);
                if (err > row.max_error) row = {t, err, est.x[i], y, dist[i], lhs};
            }
        }
        table.rows.push_back(row);
    }
    table.decreasing = true;
    for (std::size_t k = 1; k < table.rows.size(); ++k)
        if (!(table.rows[k].max_error < table.rows[k - 1].max_error)) table.decreasing = false;
    return table;
}

HarnackProbeResult harnack_constant(const std::function<double(double)>& u0, const Coefficient& a, double t0, double R,
                                    double p, const HarnackProbeOptions& opt) {
    if (!(p >= 1.0) || !(R > 0.0) || !(t0 > 0.0)) throw Error(ErrorCode::InvalidArgument, "harnack_constant: need p >= 1, R > 0, t0 > 0");
    const double L = opt.domain_factor * opt.window;
    const int n = grid_size(-L, L, opt.dx);
    std::vector<double> x(n), u(n);
    double sup = 0.0;
    for (int i = 0; i < n; ++i) {
        x[i] = -L + i * opt.dx;
        u[i] = u0(x[i]);
        if (u[i] < 0.0) throw Error(ErrorCode::InvalidArgument, "harnack_constant: u0 must be nonnegative");
        sup = std::max(sup, u[i]);
    }
    if (!(sup > 0.0)) throw Error(ErrorCode::InvalidArgument, "harnack_constant: u0 vanishes");
    const double dt = opt.dt > 0.0 ? opt.dt : opt.dx * opt.dx / sampled_max(a, x);
    std::vector<double> times = opt.times.empty() ? std::vector<double>{t0, 2.0 * t0, 4.0 * t0} : opt.times;
    std::sort(times.begin(), times.end());
    if (times.front() < t0 - 1e-12) throw Error(ErrorCode::InvalidArgument, "harnack_constant: sample times must be >= t0");

    int i0 = 0, i1 = n - 1;
    while (x[i0] < -opt.window - 1e-12) ++i0;
    while (x[i1] > opt.window + 1e-12) --i1;
    const int K = static_cast<int>(std::floor(R / opt.dx + 1e-9));
    const double pre = std::pow(sup, 1.0 - 1.0 / p);

    CrankNicolson cn(a, x, opt.dx, false);
    HarnackProbeResult res;
    double t_now = 0.0;
    for (double ts : times) {
        cn.advance(u, ts - t_now, dt);
        t_now = ts;
        for (int i = i0; i <= i1; ++i)
            if (!(u[i] >= opt.floor)) throw Error(ErrorCode::NonPositive, "u(t, y) below floor at x = " + std::to_string(x[i]));
        // sliding minimum of u over [i - K, i + K] inside the window
        std::deque<int> dq;
        int next = i0;
        double best = 0.0;
        int bx = i0, by = i0;
        for (int i = i0; i <= i1; ++i) {
            const int hi = std::min(i1, i + K);
            while (next <= hi) {
                while (!dq.empty() && u[dq.back()] >= u[next]) dq.pop_back();
                dq.push_back(next++);
            }
            while (dq.front() < i - K) dq.pop_front();
            const double r = u[i] / (pre * std::pow(u[dq.front()], 1.0 / p));
            if (r > best) {
                best = r;
                bx = i;
                by = dq.front();
            }
        }
        res.times.push_back(ts);
        res.C_per_time.push_back(best);
        if (best > res.C_emp) {
            res.C_emp = best;
            res.t = ts;
            res.x = x[bx];
            res.y = x[by];
        }
    }
    return res;
}

KernelPowerResult kernel_power_bound_check(const Coefficient& a, double t0, double R, double s, double p,
                                           const KernelPowerOptions& opt) {
    if (!(s > 0.0) || !(p > 0.0) || !(R > 0.0) || !(t0 > 0.0))
        throw Error(ErrorCode::InvalidArgument, "kernel_power_bound_check: need s, p, R, t0 > 0");
    KernelGrid g;
    g.dx = opt.dx > 0.0 ? opt.dx : std::sqrt(t0) / 60.0;
    const int cells = static_cast<int>(std::ceil(opt.half_width / g.dx));
    g.x_min = -cells * g.dx;
    g.x_max = cells * g.dx;
    const int m = std::max(3, opt.x_sources | 1);  // odd, so 0 is a source
    std::vector<double> src(m);
    for (int k = 0; k < m; ++k) src[k] = -R + 2.0 * R * k / (m - 1);
    src[m / 2] = 0.0;
    const auto est = estimate_kernel(a, t0, g, src, true);
    const auto& G0 = est.G[m / 2];
    const double sp = s * p;
    const int n = static_cast<int>(est.x.size());
    const int edge = std::max(1, n / 50);
    KernelPowerResult res;
    for (int k = 0; k < m; ++k) {
        for (int i = 0; i < n; ++i) {
            if (!(G0[i] > 0.0) || !(est.G[k][i] > 0.0)) throw Error(ErrorCode::NonPositive, "kernel underflow");
            const double r = std::exp(sp * std::log(est.G[k][i]) - std::log(G0[i]));
            if (r > res.C_emp) {
                res.C_emp = r;
                res.x = src[k];
                res.y = est.x[i];
            }
            if (i < edge || i >= n - edge) res.boundary_ratio = std::max(res.boundary_ratio, r);
        }
    }
    return res;
}

double nash_ratio(const NashNorms& n, int k, int d) {
    if (k < 1 || d < 0) throw Error(ErrorCode::InvalidArgument, "nash_ratio: need k >= 1, d >= 0");
    const double rho = std::sqrt(n.l2_sq) / n.l1;
    const double e = 2.0 * d * (k + 2.0) / (k * (k + d + 0.0));
    return n.grad_sq * (1.0 + std::pow(rho, e)) / (n.l2_sq * std::pow(rho, 4.0 / k));
}

namespace {

struct Factor1D {
    double l1 = 0.0, l2_sq = 0.0, grad_sq = 0.0;
};

double gauss(double x, double c, double w) {
    const double z = (x - c) / w;
    return std::exp(-0.5 * z * z);
}

void eval_x(const NashTrial::XFactor& f, double x, double& v, double& dv) {
    using K = NashTrial::XKind;
    switch (f.kind) {
        case K::gaussian: {
            v = gauss(x, f.center, f.width);
            dv = -(x - f.center) / (f.width * f.width) * v;
            return;
        }
        case K::bump: {
            const double r = (x - f.center) / f.width;
            if (std::abs(r) >= 1.0) {
                v = dv = 0.0;
                return;
            }
            const double q = 1.0 - r * r;
            v = std::pow(q, f.bump_power);
            dv = f.bump_power * std::pow(q, f.bump_power - 1) * (-2.0 * r / f.width);
            return;
        }
        case K::gaussian_pair: {
            const double g1 = gauss(x, f.center, f.width), g2 = gauss(x, f.center2, f.width2);
            v = g1 + f.weight2 * g2;
            dv = -(x - f.center) / (f.width * f.width) * g1 - f.weight2 * (x - f.center2) / (f.width2 * f.width2) * g2;
            return;
        }
        case K::modulated_gaussian: {
            const double g = gauss(x, f.center, f.width);
            const double ph = f.freq * (x - f.center) + f.phase;
            v = g * std::cos(ph);
            dv = -(x - f.center) / (f.width * f.width) * v - g * f.freq * std::sin(ph);
            return;
        }
    }
}

// Trapezoid sums; the outer 2% of nodes are tallied separately for the truncation test.
Factor1D x_norms(const NashTrial::XFactor& f, const NashQuadrature& q) {
    double lo, hi;
    if (f.span > 0.0) {
        lo = f.center - f.span;
        hi = f.center + f.span;
    } else if (f.kind == NashTrial::XKind::bump) {
        lo = f.center - 1.05 * f.width;
        hi = f.center + 1.05 * f.width;
    } else {
        lo = f.center - 12.0 * f.width;
        hi = f.center + 12.0 * f.width;
        if (f.kind == NashTrial::XKind::gaussian_pair) {
            lo = std::min(lo, f.center2 - 12.0 * f.width2);
            hi = std::max(hi, f.center2 + 12.0 * f.width2);
        }
    }
    const int n = std::max(3, q.x_points);
    const double h = (hi - lo) / (n - 1);
    const int edge = std::max(1, n / 50);
    Factor1D in, out;
    for (int i = 0; i < n; ++i) {
        double v = 0.0, dv = 0.0;
        eval_x(f, lo + i * h, v, dv);
        const double w = (i == 0 || i == n - 1) ? 0.5 * h : h;
        Factor1D& acc = (i < edge || i >= n - edge) ? out : in;
        acc.l1 += w * std::abs(v);
        acc.l2_sq += w * v * v;
        acc.grad_sq += w * dv * dv;
    }
    Factor1D tot{in.l1 + out.l1, in.l2_sq + out.l2_sq, in.grad_sq + out.grad_sq};
    auto frac = [](double o, double t) { return t > 0.0 ? o / t : 0.0; };
    if (frac(out.l1, tot.l1) > q.truncation_tol || frac(out.l2_sq, tot.l2_sq) > q.truncation_tol ||
        frac(out.grad_sq, tot.grad_sq) > q.truncation_tol)
        throw Error(ErrorCode::TruncationError, "trial mass reaches the x-truncation boundary");
    return tot;
}

Factor1D theta_norms(const NashTrial::ThetaFactor& g, const NashQuadrature& q) {
    const int n = std::max(3, q.theta_points);
    const double h = 1.0 / (n - 1);
    Factor1D r;
    for (int i = 0; i < n; ++i) {
        const double th = i * h;
        double v = g.cos_coef.empty() ? 1.0 : g.cos_coef[0], dv = 0.0;
        for (std::size_t m = 1; m < g.cos_coef.size(); ++m) {
            v += g.cos_coef[m] * std::cos(kPi * m * th);
            dv -= g.cos_coef[m] * kPi * m * std::sin(kPi * m * th);
        }
        const double w = (i == 0 || i == n - 1) ? 0.5 * h : h;
        r.l1 += w * std::abs(v);
        r.l2_sq += w * v * v;
        r.grad_sq += w * dv * dv;
    }
    return r;
}

}  // namespace

NashNorms nash_norms(const NashTrial& trial, const NashQuadrature& q) {
    if (trial.x.empty()) throw Error(ErrorCode::InvalidArgument, "nash_norms: need at least one x factor");
    std::vector<Factor1D> fs;
    for (const auto& f : trial.x) fs.push_back(x_norms(f, q));
    for (const auto& g : trial.theta) fs.push_back(theta_norms(g, q));
    NashNorms out{1.0, 1.0, 0.0};
    for (const auto& f : fs) {
        out.l1 *= f.l1;
        out.l2_sq *= f.l2_sq;
    }
    for (std::size_t i = 0; i < fs.size(); ++i) {
        double term = fs[i].grad_sq;
        for (std::size_t j = 0; j < fs.size(); ++j)
            if (j != i) term *= fs[j].l2_sq;
        out.grad_sq += term;
    }
    return out;
}

std::string NashTrial::describe() const {
    static const char* names[] = {"gaussian", "bump", "gaussian_pair", "modulated_gaussian"};
    std::ostringstream s;
    for (std::size_t i = 0; i < x.size(); ++i) {
        const auto& f = x[i];
        s << (i ? " * " : "") << names[static_cast<int>(f.kind)] << "(c=" << f.center << ",w=" << f.width;
        if (f.kind == XKind::gaussian_pair) s << ",c2=" << f.center2 << ",w2=" << f.width2 << ",a2=" << f.weight2;
        if (f.kind == XKind::modulated_gaussian) s << ",k=" << f.freq << ",phase=" << f.phase;
        if (f.kind == XKind::bump) s << ",m=" << f.bump_power;
        s << ")";
    }
    for (const auto& g : theta) {
        s << " * cos[";
        for (std::size_t m = 0; m < g.cos_coef.size(); ++m) s << (m ? "," : "") << g.cos_coef[m];
        s << "]";
    }
    return s.str();
}

NashTrial random_nash_trial(int k, int d, std::uint64_t seed, long index) {
    // per-trial stream, so the first N trials do not depend on the total count
    std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                      static_cast<std::uint32_t>(index), static_cast<std::uint32_t>(static_cast<std::uint64_t>(index) >> 32)};
    std::mt19937_64 rng(seq);
    std::uniform_real_distribution<double> U(0.0, 1.0);
    auto log_uniform = [&](double lo, double hi) { return std::exp(std::log(lo) + U(rng) * (std::log(hi) - std::log(lo))); };
    NashTrial t;
    // half of the trials are near-isotropic in x, where the ratio is smallest for k >= 2
    const bool isotropic = U(rng) < 0.5;
    const double base = log_uniform(0.05, 20.0);
    for (int i = 0; i < k; ++i) {
        NashTrial::XFactor f;
        f.kind = static_cast<NashTrial::XKind>(static_cast<int>(U(rng) * 4.0) % 4);
        f.center = -3.0 + 6.0 * U(rng);
        f.width = isotropic ? base * log_uniform(0.8, 1.25) : log_uniform(0.05, 20.0);
        if (f.kind == NashTrial::XKind::gaussian_pair) {
            f.center2 = f.center + (U(rng) - 0.5) * 6.0 * f.width;
            f.width2 = f.width * log_uniform(0.2, 5.0);
            f.weight2 = -1.0 + 2.0 * U(rng);
        } else if (f.kind == NashTrial::XKind::modulated_gaussian) {
            f.freq = U(rng) * 4.0 / f.width;
            f.phase = U(rng) * 2.0 * kPi;
        } else if (f.kind == NashTrial::XKind::bump) {
            f.bump_power = 2 + static_cast<int>(U(rng) * 4.0);
        }
        t.x.push_back(f);
    }
    for (int l = 0; l < d; ++l) {
        NashTrial::ThetaFactor g;
        g.cos_coef.push_back(1.0);
        if (U(rng) > 1.0 / 3.0) {
            const double scale = log_uniform(0.01, 2.0);
            for (int m = 1; m <= 4; ++m) g.cos_coef.push_back(scale * (-1.0 + 2.0 * U(rng)));
        }
        t.theta.push_back(g);
    }
    return t;
}

NashReport nash_check(int k, int d, long trial_count, std::uint64_t seed, const NashQuadrature& q) {
    if (k < 1 || d < 0 || trial_count < 2) throw Error(ErrorCode::InvalidArgument, "nash_check: need k >= 1, d >= 0, trials >= 2");
    NashReport rep;
    rep.k = k;
    rep.d = d;
    rep.trials = trial_count;
    rep.seed = seed;
    rep.C_emp = rep.C_emp_half = INFINITY;
    for (long i = 0; i < trial_count; ++i) {
        const auto trial = random_nash_trial(k, d, seed, i);
        const double r = nash_ratio(nash_norms(trial, q), k, d);
        if (r < rep.C_emp) {
            rep.C_emp = r;
            rep.argmin = i;
            rep.argmin_description = trial.describe();
        }
        if (i < trial_count / 2) rep.C_emp_half = std::min(rep.C_emp_half, r);
    }
    rep.drift = (rep.C_emp_half - rep.C_emp) / rep.C_emp_half;
    return rep;
}

}  // namespace toadfront
