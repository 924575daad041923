#include "toadfront/asymptotics.hpp"

#include <algorithm>
#include <cmath>
#include <iostream>

#include "toadfront/errors.hpp"

namespace toadfront {

namespace {

constexpr double kPi = 3.14159265358979323846;
constexpr double kTauMinAssemble = 50.0;

double weighted_mean(const std::vector<double>& f, const std::vector<double>& w) {
    double s = 0.0, n = 0.0;
    for (std::size_t j = 0; j < f.size(); ++j) {
        s += w[j] * f[j];
        n += w[j];
    }
    return s / n;
}

// S0^{(k)} = P_k(z) exp(-z^2 / (4 Dbar)) with P_0 = z, P_{k+1} = P_k' - z P_k / (2 Dbar).
void s0_derivatives(double z, double Dbar, double out[6]) {
    double P[8] = {0.0, 1.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0};
    const double e = std::exp(-z * z / (4.0 * Dbar));
    for (int k = 0; k < 6; ++k) {
        double v = 0.0;
        for (int d = 7; d >= 0; --d) v = v * z + P[d];
        out[k] = v * e;
        double next[8] = {};
        for (int d = 1; d < 8; ++d) next[d - 1] += d * P[d];
        for (int d = 0; d < 7; ++d) next[d + 1] -= P[d] / (2.0 * Dbar);
        std::copy(next, next + 8, P);
    }
}

// Right side R of -3/2 phi - z/2 phi' - Dbar phi'' = R and its first two derivatives.
void phi_forcing(const ExpansionData& e, double z, const double s0[6], double R[3]) {
    const double a1 = 3.0 * e.beta1 - e.omega_bar * e.c_star;
    R[0] = a1 * s0[1] + e.beta1 * z * s0[2] + e.beta2 * s0[3];
    R[1] = (a1 + e.beta1) * s0[2] + e.beta1 * z * s0[3] + e.beta2 * s0[4];
    R[2] = (a1 + 2.0 * e.beta1) * s0[3] + e.beta1 * z * s0[4] + e.beta2 * s0[5];
}

double phi_second(const ExpansionData& e, double z, double phi, double dphi, const double s0[6]) {
    double R[3];
    phi_forcing(e, z, s0, R);
    return -(1.5 * phi + 0.5 * z * dphi + R[0]) / e.D_bar;
}

}  // namespace

ExpansionData build_expansion(const TraitProfile& profile, const SpectralData& sd, std::optional<double> chi_bar,
                              double omega_bar, double sigma) {
    profile.validate();
    const int J = profile.size();
    if (static_cast<int>(sd.Q_star.size()) != J || static_cast<int>(sd.chi.size()) != J)
        throw Error(ErrorCode::InvalidArgument, "build_expansion: spectral data incomplete");
    if (!(sd.D_bar > 0.0)) throw Error(ErrorCode::NonPositiveDbar, "build_expansion: D_bar must be positive");
    if (!(sigma >= 0.0)) throw Error(ErrorCode::InvalidArgument, "build_expansion: sigma must be nonnegative");

    ExpansionData e;
    e.profile = profile;
    e.c_star = sd.c_star;
    e.lambda_star = sd.lambda_star;
    e.D_bar = sd.D_bar;
    e.omega_bar = omega_bar;
    e.sigma = sigma;
    e.z_max = sigma + 2.0;
    e.Q_star = sd.Q_star;
    double chi_sup = 0.0;
    for (double c : sd.chi) chi_sup = std::max(chi_sup, std::abs(c));
    e.chi_bar = chi_bar ? *chi_bar : -(1.0 + chi_sup);

    const auto L = ground_state_operator(sd.Q_star, profile.domain);
    const auto& w = L.cell_w;
    std::vector<double> b(J);
    for (int j = 0; j < J; ++j) b[j] = 2.0 * sd.lambda_star * profile.D[j] + profile.A[j] - sd.c_star;

    e.chi0.resize(J);
    for (int j = 0; j < J; ++j) e.chi0[j] = sd.chi[j] + e.chi_bar;

    // L S2_hat = (b - c*) chi0 - D + Dbar; solvable exactly when Dbar is the weighted mean of D - (b - c*) chi0
    std::vector<double> rhs(J);
    for (int j = 0; j < J; ++j) rhs[j] = b[j] * e.chi0[j] - profile.D[j] + sd.D_bar;
    auto s2 = solve_neumann(L, rhs);
    e.solvability_residual = std::abs(s2.projected_out);
    if (e.solvability_residual > 1e-8)
        throw Error(ErrorCode::SolvabilityViolation,
                    "weighted mean of the S2 source is " + std::to_string(s2.projected_out) + " (inconsistent D_bar)");
    e.S2_hat = std::move(s2.f);

    e.beta1 = 0.5 * weighted_mean(e.chi0, w);
    std::vector<double> g(J);
    for (int j = 0; j < J; ++j) g[j] = profile.D[j] * e.chi0[j] - b[j] * e.S2_hat[j];
    e.beta2 = weighted_mean(g, w);

    // theta factors of S3; their weighted means cancel through the phi1 equation
    auto mean_free_solve = [&](std::vector<double> f) { return solve_neumann(L, f).f; };
    e.h_chi = mean_free_solve(e.chi0);
    for (int j = 0; j < J; ++j) g[j] = -profile.D[j] + b[j] * e.chi0[j];
    e.h_phi = mean_free_solve(g);
    for (int j = 0; j < J; ++j) g[j] = -profile.D[j] * e.chi0[j] + b[j] * e.S2_hat[j];
    e.h_S = mean_free_solve(g);

    e.L_chi0 = L.apply(e.chi0);
    e.L_S2_hat = L.apply(e.S2_hat);
    e.L_h_chi = L.apply(e.h_chi);
    e.L_h_phi = L.apply(e.h_phi);
    e.L_h_S = L.apply(e.h_S);

    // phi1 by classical RK4 from phi1(0) = phi1'(0) = 0
    const int n = static_cast<int>(std::ceil(e.z_max / e.dz - 1e-9));
    e.phi1.assign(n + 1, 0.0);
    e.dphi1.assign(n + 1, 0.0);
    auto rhs_ode = [&](double z, double p, double dp, double& fp, double& fdp) {
        double s0[6];
        s0_derivatives(z, e.D_bar, s0);
        fp = dp;
        fdp = phi_second(e, z, p, dp, s0);
    };
    double p = 0.0, dp = 0.0;
    for (int k = 0; k < n; ++k) {
        const double z = k * e.dz, h = e.dz;
        double k1p, k1d, k2p, k2d, k3p, k3d, k4p, k4d;
        rhs_ode(z, p, dp, k1p, k1d);
        rhs_ode(z + 0.5 * h, p + 0.5 * h * k1p, dp + 0.5 * h * k1d, k2p, k2d);
        rhs_ode(z + 0.5 * h, p + 0.5 * h * k2p, dp + 0.5 * h * k2d, k3p, k3d);
        rhs_ode(z + h, p + h * k3p, dp + h * k3d, k4p, k4d);
        p += h / 6.0 * (k1p + 2.0 * k2p + 2.0 * k3p + k4p);
        dp += h / 6.0 * (k1d + 2.0 * k2d + 2.0 * k3d + k4d);
        e.phi1[k + 1] = p;
        e.dphi1[k + 1] = dp;
    }
    for (int k = 1; k <= n; ++k) {
        const double z = k * e.dz;
        if (z > sigma + 1e-12) break;
        e.C_phi = std::max(e.C_phi, std::abs(e.phi1[k]) / (z * z));
    }
    return e;
}

ZFactors z_factors(const ExpansionData& e, double z) {
    if (z < -1e-12 || z > e.z_max + 1e-12)
        throw Error(ErrorCode::InvalidArgument, "expansion evaluated outside z in [0, z_max]");
    z = std::clamp(z, 0.0, e.z_max);
    ZFactors f;
    s0_derivatives(z, e.D_bar, f.S0);
    // cubic Hermite interpolation of (phi1, phi1') between RK4 nodes
    const int n = static_cast<int>(e.phi1.size()) - 1;
    int k = std::min(n - 1, static_cast<int>(z / e.dz));
    const double h = e.dz, s = (z - k * h) / h;
    const double p0 = e.phi1[k], p1 = e.phi1[k + 1], m0 = e.dphi1[k] * h, m1 = e.dphi1[k + 1] * h;
    const double s2 = s * s, s3 = s2 * s;
    f.phi[0] = (2 * s3 - 3 * s2 + 1) * p0 + (s3 - 2 * s2 + s) * m0 + (-2 * s3 + 3 * s2) * p1 + (s3 - s2) * m1;
    f.phi[1] = ((6 * s2 - 6 * s) * p0 + (3 * s2 - 4 * s + 1) * m0 + (-6 * s2 + 6 * s) * p1 + (3 * s2 - 2 * s) * m1) / h;
    double R[3];
    phi_forcing(e, z, f.S0, R);
    f.phi[2] = -(1.5 * f.phi[0] + 0.5 * z * f.phi[1] + R[0]) / e.D_bar;
    f.phi[3] = -(2.0 * f.phi[1] + 0.5 * z * f.phi[2] + R[1]) / e.D_bar;
    f.phi[4] = -(2.5 * f.phi[2] + 0.5 * z * f.phi[3] + R[2]) / e.D_bar;
    return f;
}

namespace {

// F_m, F_m,z, F_m,zz and (L F_m) at one z for theta index j.
struct Orders {
    double F[4], Fz[4], Fzz[4], LF[4];
};

Orders orders_at(const ExpansionData& e, const ZFactors& f, double z, int j) {
    const double* s = f.S0;
    const double* ph = f.phi;
    const double c0 = e.chi0[j], sh = e.S2_hat[j];
    Orders o;
    o.F[0] = s[0];
    o.Fz[0] = s[1];
    o.Fzz[0] = s[2];
    o.LF[0] = 0.0;
    o.F[1] = c0 * s[1] + ph[0];
    o.Fz[1] = c0 * s[2] + ph[1];
    o.Fzz[1] = c0 * s[3] + ph[2];
    o.LF[1] = e.L_chi0[j] * s[1];
    o.F[2] = c0 * ph[1] + sh * s[2];
    o.Fz[2] = c0 * ph[2] + sh * s[3];
    o.Fzz[2] = c0 * ph[3] + sh * s[4];
    o.LF[2] = e.L_chi0[j] * ph[1] + e.L_S2_hat[j] * s[2];
    const double K = -1.5 * s[1] - 0.5 * z * s[2];
    const double Kz = -2.0 * s[2] - 0.5 * z * s[3];
    const double Kzz = -2.5 * s[3] - 0.5 * z * s[4];
    o.F[3] = e.h_chi[j] * K + e.h_phi[j] * ph[2] + e.h_S[j] * s[3];
    o.Fz[3] = e.h_chi[j] * Kz + e.h_phi[j] * ph[3] + e.h_S[j] * s[4];
    o.Fzz[3] = e.h_chi[j] * Kzz + e.h_phi[j] * ph[4] + e.h_S[j] * s[5];
    o.LF[3] = e.L_h_chi[j] * K + e.L_h_phi[j] * ph[2] + e.L_h_S[j] * s[3];
    return o;
}

void check_terms(int terms) {
    if (terms < 1 || terms > 4) throw Error(ErrorCode::InvalidArgument, "expansion terms must be in 1..4");
}

void warn_small_tau(double tau) {
    if (tau < kTauMinAssemble)
        std::cerr << "warning: S assembled at tau = " << tau << " < " << kTauMinAssemble
                  << "; the expansion ordering is not meaningful there\n";
}

}  // namespace

std::vector<double> evaluate_S(const ExpansionData& e, double tau, double y, int terms) {
    check_terms(terms);
    if (!(tau > 0.0)) throw Error(ErrorCode::InvalidArgument, "evaluate_S: tau must be positive");
    const double st = std::sqrt(tau);
    const double z = y / st;
    const auto f = z_factors(e, z);
    const int J = e.profile.size();
    std::vector<double> out(J);
    for (int j = 0; j < J; ++j) {
        const auto o = orders_at(e, f, z, j);
        double v = 0.0, scale = 1.0 / tau;
        for (int m = 0; m < terms; ++m, scale /= st) v += scale * o.F[m];
        out[j] = v;
    }
    return out;
}

Field assemble_S(const ExpansionData& e, double tau, double y_min, double dy, int n_y, int terms) {
    warn_small_tau(tau);
    Field f = Field::zeros(n_y, y_min, dy, e.profile.domain, FieldRole::p);
    f.t = tau;
    for (int i = 0; i < n_y; ++i) {
        const auto col = evaluate_S(e, tau, f.x(i), terms);
        std::copy(col.begin(), col.end(), f.row(i));
    }
    return f;
}

ResidualReport residual_of_S(const ExpansionData& e, const std::vector<double>& taus, int terms, int n_z) {
    check_terms(terms);
    if (n_z < 2) throw Error(ErrorCode::InvalidArgument, "residual_of_S: need n_z >= 2");
    ResidualReport rep;
    rep.terms = terms;
    rep.taus = taus;
    const int J = e.profile.size();
    for (double tau : taus) {
        warn_small_tau(tau);
        const double st = std::sqrt(tau);
        const double om = e.omega_bar / tau;
        double sup = 0.0, gap = 0.0, gap_scaled = 0.0;
        for (int k = 0; k < n_z; ++k) {
            const double z = e.sigma * k / (n_z - 1);
            const auto f = z_factors(e, z);
            const double gauss = std::exp(-z * z / (4.0 * e.D_bar));
            for (int j = 0; j < J; ++j) {
                const auto o = orders_at(e, f, z, j);
                double S = 0.0, St = 0.0, Sx = 0.0, Sxx = 0.0, LS = 0.0;
                double scale = 1.0 / tau;
                for (int m = 0; m < terms; ++m, scale /= st) {
                    S += scale * o.F[m];
                    St += scale * (-(1.0 + 0.5 * m) * o.F[m] / tau - e.c_star * o.Fz[m] / st - 0.5 * z * o.Fz[m] / tau);
                    Sx += scale * o.Fz[m] / st;
                    Sxx += scale * o.Fzz[m] / tau;
                    LS += scale * o.LF[m];
                }
                const double bj = 2.0 * e.lambda_star * e.profile.D[j] + e.profile.A[j];
                const double E = (1.0 - om) * St - e.profile.D[j] * Sxx - LS + bj * Sx;
                sup = std::max(sup, std::abs(E));
                const double G = (z * st + e.chi0[j]) / (tau * st) * gauss;
                const double d = std::abs(S - G);
                gap = std::max(gap, d);
                gap_scaled = std::max(gap_scaled, d * tau * st / (z * z + 1.0 / st));
            }
        }
        rep.sup_residual.push_back(sup);
        rep.gaussian_gap.push_back(gap);
        rep.gaussian_gap_scaled.push_back(gap_scaled);
    }
    for (std::size_t a = 0; a < taus.size(); ++a)
        for (std::size_t b = 0; b < taus.size(); ++b)
            if (std::abs(taus[b] - 2.0 * taus[a]) < 1e-9 * taus[a]) {
                rep.ratio_taus.push_back(taus[a]);
                rep.ratios.push_back(rep.sup_residual[a] / rep.sup_residual[b]);
            }
    return rep;
}

ProximityTrace compare_xi_S(const ExpansionData& e, double tau0, const ProximityOptions& opt) {
    warn_small_tau(tau0);
    ProximityTrace tr;
    const double tau_end = opt.tau_end_factor * tau0;
    if (!(tau_end > tau0)) throw Error(ErrorCode::InvalidArgument, "compare_xi_S: need tau_end_factor > 1");
    const double width_end = e.sigma * std::sqrt(tau_end);
    if (width_end < 6.0 * opt.dx) {
        // degenerate strip: xi is its own boundary data
        for (double t = tau0; t <= tau_end + 1e-9; t += opt.sample_every) {
            tr.taus.push_back(t);
            tr.weighted_deviation.push_back(0.0);
        }
        tr.max_over_min = 1.0;
        return tr;
    }

    SpectralData sd;
    sd.Q_star = e.Q_star;
    sd.c_star = e.c_star;
    sd.lambda_star = e.lambda_star;
    SpaceTimeGrid g;
    g.x_min = 0.0;
    g.dx = opt.dx;
    g.x_max = std::ceil((width_end + 1.0) / opt.dx) * opt.dx;
    g.dt = opt.dt;
    g.t_end = tau_end;
    auto m = make_p_equation_model(e.profile, sd, OmegaSpec::harmonic(e.omega_bar), g, InitSpec{});
    m.t_start = tau0;
    m.nonnegative = false;
    const double sigma = e.sigma;
    m.left.kind = BcKind::dirichlet;
    m.left.data = [&e](double t, double* v) {
        const auto s = evaluate_S(e, t, 0.0);
        std::copy(s.begin(), s.end(), v);
    };
    m.right.kind = BcKind::moving_dirichlet;
    m.right.position = [sigma](double t) { return sigma * std::sqrt(t); };
    m.right.data = [&e, sigma](double t, double* v) {
        const auto s = evaluate_S(e, t, sigma * std::sqrt(t));
        std::copy(s.begin(), s.end(), v);
    };
    m.validate();

    Field f = initial_field(m);
    f.t = tau0;
    const int J = f.n_theta();
    const double edge0 = sigma * std::sqrt(tau0);
    const double amp = opt.perturbation / std::pow(tau0, 1.5);
    for (int i = 0; i < f.n_x; ++i) {
        const double y = f.x(i);
        if (y >= edge0) break;
        const auto s = evaluate_S(e, tau0, y);
        const double bump = amp * std::sin(kPi * y / edge0);
        for (int j = 0; j < J; ++j) f.at(i, j) = s[j] + bump;
    }

    RunOptions ro;
    ro.keep_snapshots = false;
    for (double t = tau0; t <= tau_end + 1e-9; t += opt.sample_every) ro.snapshot_times.push_back(t);
    ro.on_snapshot = [&](const Field& s, const SnapshotRecord&) {
        const double edge = sigma * std::sqrt(s.t);
        double dev = 0.0;
        for (int i = 0; i < s.n_x; ++i) {
            const double y = s.x(i);
            if (y >= edge) break;
            const auto S = evaluate_S(e, s.t, y);
            for (int j = 0; j < J; ++j) dev = std::max(dev, std::abs(s.at(i, j) - S[j]));
        }
        tr.taus.push_back(s.t);
        tr.weighted_deviation.push_back(dev * std::pow(s.t, 1.5));
    };
    run(m, ro, &f);
    const auto [lo, hi] = std::minmax_element(tr.weighted_deviation.begin(), tr.weighted_deviation.end());
    tr.max_over_min = *lo > 0.0 ? *hi / *lo : INFINITY;
    return tr;
}

namespace {

// Linear interpolation of the theta integral of a field along x at position y.
double theta_integral_at(const Field& f, double y) {
    const double r = (y - f.x_offset) / f.dx - 0.5;
    const int i = static_cast<int>(std::floor(r));
    if (i < 0 || i + 1 >= f.n_x) throw Error(ErrorCode::WindowOutsideGrid, "sample point outside the snapshot window");
    const double s = r - i;
    const double a = theta_integral(f.row(i), f.theta), b = theta_integral(f.row(i + 1), f.theta);
    return (1.0 - s) * a + s * b;
}

}  // namespace

AmplitudeTrace front_interior_amplitude(const std::vector<Field>& snapshots, double sigma, double tau_from,
                                        double tau_to) {
    AmplitudeTrace tr;
    double lo = INFINITY, hi = 0.0;
    bool any = false;
    for (const auto& f : snapshots) {
        if (!(f.t > 0.0)) continue;
        const double a = f.t * theta_integral_at(f, sigma * std::sqrt(f.t));
        tr.taus.push_back(f.t);
        tr.amplitude.push_back(a);
        if (a != 0.0) any = true;
        if (f.t >= tau_from - 1e-9 && f.t <= tau_to + 1e-9) {
            lo = std::min(lo, a);
            hi = std::max(hi, a);
        }
    }
    tr.vacuous = !any;
    tr.band_ratio = lo > 0.0 ? hi / lo : INFINITY;
    return tr;
}

PDecayBand p_decay_band(const Field& f, double sigma) {
    PDecayBand band;
    band.tau = f.t;
    const double edge = sigma * std::sqrt(f.t);
    if (f.x(f.n_x - 1) < edge) throw Error(ErrorCode::WindowOutsideGrid, "band window extends beyond the snapshot");
    band.lo = INFINITY;
    const double w = std::pow(f.t, 1.5);
    for (int i = 0; i < f.n_x; ++i) {
        const double y = f.x(i);
        if (y < 1.0 || y > edge) continue;
        for (int j = 0; j < f.n_theta(); ++j) {
            const double v = w * f.at(i, j) / y;
            band.lo = std::min(band.lo, v);
            band.hi = std::max(band.hi, v);
        }
    }
    return band;
}

const char* to_string(AmplitudeVerdict v) {
    switch (v) {
        case AmplitudeVerdict::decaying: return "decaying";
        case AmplitudeVerdict::bounded: return "bounded";
        case AmplitudeVerdict::growing: return "growing";
    }
    return "?";
}

std::vector<CriticalityRow> moving_boundary_criticality(const TraitProfile& profile, const SpectralData& sd,
                                                        const std::vector<double>& r_shifts, double T_big,
                                                        const CriticalityOptions& opt) {
    if (!(T_big > 0.0) || !(opt.t_end > 0.0)) throw Error(ErrorCode::InvalidArgument, "criticality: need T_big, t_end > 0");
    double dmax = 0.0;
    for (double d : profile.D) dmax = std::max(dmax, d);
    std::vector<CriticalityRow> rows;
    for (double r : r_shifts) {
        const LogShift shift{sd.c_star, r, T_big};
        const double back = r * std::log1p(opt.t_end / T_big);
        const double extent = opt.right_extent > 0.0 ? opt.right_extent
                                                     : opt.sigma * std::sqrt(opt.t_end) + 10.0 * std::sqrt(dmax * opt.t_end);
        SpaceTimeGrid g;
        g.dx = opt.dx;
        g.x_min = -std::ceil((back + 2.0) / opt.dx) * opt.dx;
        g.x_max = std::ceil(extent / opt.dx) * opt.dx;
        g.dt = opt.dt;
        g.t_end = opt.t_end;
        auto m = make_linearized_model(profile, shift, g, InitSpec::block(0.0, opt.init_width, 1.0));

        auto amplitude = [&](const Field& f) {
            const double X = shift.position(f.t) - sd.c_star * f.t;
            const double hi = opt.sigma * std::sqrt(f.t);
            double A = 0.0;
            for (int i = 0; i < f.n_x; ++i) {
                const double xi = f.x(i) - X;
                if (xi < 1.0 || xi > hi) continue;
                for (int j = 0; j < f.n_theta(); ++j) A = std::max(A, f.at(i, j) * std::exp(sd.lambda_star * xi) / xi);
            }
            return A;
        };
        CriticalityRow row;
        row.r_shift = r;
        row.T_big = T_big;
        RunOptions ro;
        ro.keep_snapshots = false;
        ro.snapshot_times = {opt.t_end / 8.0, opt.t_end};
        ro.on_snapshot = [&](const Field& f, const SnapshotRecord&) {
            (f.t < 0.5 * opt.t_end ? row.A_early : row.A_end) = amplitude(f);
        };
        run(m, ro);
        row.ratio = row.A_end / row.A_early;
        row.verdict = row.ratio < 0.2 ? AmplitudeVerdict::decaying
                      : row.ratio > 5.0 ? AmplitudeVerdict::growing
                                        : AmplitudeVerdict::bounded;
        rows.push_back(row);
    }
    return rows;
}

}  // namespace toadfront
