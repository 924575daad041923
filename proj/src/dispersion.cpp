#include "toadfront/dispersion.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "toadfront/linalg.hpp"

namespace toadfront {

void ThetaOperator::apply(const double* f, double* out) const {
    const int n = size();
    for (int j = 0; j < n; ++j) {
        const double right = j + 1 < n ? face_w[j] * (f[j + 1] - f[j]) : 0.0;
        const double left = j > 0 ? face_w[j - 1] * (f[j] - f[j - 1]) : 0.0;
        out[j] = (right - left) * inv_dth2 / cell_w[j];
    }
}

std::vector<double> ThetaOperator::apply(const std::vector<double>& f) const {
    std::vector<double> out(f.size());
    apply(f.data(), out.data());
    return out;
}

double ThetaOperator::weighted_mean(const std::vector<double>& f) const {
    double num = 0.0, den = 0.0;
    for (int j = 0; j < size(); ++j) {
        num += cell_w[j] * f[j];
        den += cell_w[j];
    }
    return num / den;
}

ThetaOperator laplacian_operator(const ThetaDomain& domain) {
    ThetaOperator L;
    const int n = domain.n_theta;
    L.face_w.assign(std::max(n - 1, 0), 1.0);
    L.cell_w.assign(n, 1.0);
    L.inv_dth2 = 1.0 / (domain.dtheta() * domain.dtheta());
    return L;
}

ThetaOperator ground_state_operator(const std::vector<double>& Q, const ThetaDomain& domain) {
    ThetaOperator L = laplacian_operator(domain);
    const int n = domain.n_theta;
    if (static_cast<int>(Q.size()) != n) throw Error(ErrorCode::InvalidArgument, "ground_state_operator: size");
    for (int j = 0; j + 1 < n; ++j) L.face_w[j] = Q[j] * Q[j + 1];
    for (int j = 0; j < n; ++j) L.cell_w[j] = Q[j] * Q[j];
    return L;
}

NeumannSolve solve_neumann(const ThetaOperator& L, const std::vector<double>& rhs) {
    const int n = L.size();
    NeumannSolve out;
    out.projected_out = L.weighted_mean(rhs);
    out.f.assign(n, 0.0);
    // Integrate the flux from the left wall: W_{j+1/2}(f_{j+1}-f_j) = dtheta^2 sum_{k<=j} w_k rhs_k.
    double flux = 0.0;
    for (int j = 0; j + 1 < n; ++j) {
        flux += L.cell_w[j] * (rhs[j] - out.projected_out) / L.inv_dth2;
        out.f[j + 1] = out.f[j] + flux / L.face_w[j];
    }
    const double m = L.weighted_mean(out.f);
    for (double& v : out.f) v -= m;
    return out;
}

EigenPair principal_eigenpair(double lambda, const TraitProfile& profile, const EigenOptions& opt) {
    profile.validate();
    if (!(lambda > 0.0) || !std::isfinite(lambda))
        throw Error(ErrorCode::InvalidArgument, "principal_eigenpair: lambda must be positive");
    const int n = profile.domain.n_theta;
    const double dth = profile.domain.dtheta();
    const double h2 = 1.0 / (dth * dth);

    std::vector<double> V(n);
    for (int j = 0; j < n; ++j) V[j] = lambda * lambda * profile.D[j] + lambda * profile.A[j];

    EigenPair ep;
    ep.lambda = lambda;
    if (n == 1) {
        ep.mu = V[0];
        ep.Q = {1.0 / dth};
        return ep;
    }

    auto degree = [n](int j) { return (j == 0 || j == n - 1) ? 1.0 : 2.0; };
    auto apply_M = [&](const std::vector<double>& x, std::vector<double>& y) {
        for (int j = 0; j < n; ++j) {
            double s = (V[j] - h2 * degree(j)) * x[j];
            if (j > 0) s += h2 * x[j - 1];
            if (j + 1 < n) s += h2 * x[j + 1];
            y[j] = s;
        }
    };
    // Summation by parts keeps the large h2 terms from cancelling.
    auto rayleigh = [&](const std::vector<double>& x, std::vector<double>& Mx) {
        apply_M(x, Mx);
        double pot = 0.0, grad = 0.0, den = 0.0;
        for (int j = 0; j < n; ++j) {
            pot += V[j] * x[j] * x[j];
            den += x[j] * x[j];
            if (j + 1 < n) grad += (x[j + 1] - x[j]) * (x[j + 1] - x[j]);
        }
        return (pot - h2 * grad) / den;
    };
    auto factor = [&](double shift) {
        std::vector<double> a(n, -h2), b(n), c(n, -h2);
        for (int j = 0; j < n; ++j) b[j] = shift - V[j] + h2 * degree(j);
        return linalg::TridiagonalLU(a, b, c);
    };
    auto normalize_inf = [](std::vector<double>& x) {
        double m = 0.0;
        for (double v : x) m = std::max(m, std::abs(v));
        for (double& v : x) v /= m;
    };

    std::vector<double> x(n, 1.0), Mx(n);
    const double vmax = *std::max_element(V.begin(), V.end());

    // Phase 1: shift above the spectrum, so s - M is an M-matrix and the iteration stays positive.
    double rho = rayleigh(x, Mx);
    double prev = std::numeric_limits<double>::infinity();
    int it = 0;
    {
        const auto lu = factor(vmax + 1.0);
        for (; it < opt.max_iterations; ++it) {
            lu.solve(x.data());
            normalize_inf(x);
            rho = rayleigh(x, Mx);
            if (std::abs(rho - prev) <= 1e-12 * (1.0 + std::abs(rho)) && it > 2) break;
            prev = rho;
        }
    }
    // Phase 2: shift just above the current estimate; a handful of steps reach rounding level.
    {
        const double shift = rho + 1e-7 * (1.0 + std::abs(rho));
        const auto lu = factor(shift);
        std::vector<double> old;
        for (int k = 0; k < 12; ++k, ++it) {
            old = x;
            lu.solve(x.data());
            normalize_inf(x);
            double change = 0.0;
            for (int j = 0; j < n; ++j) change = std::max(change, std::abs(x[j] - old[j]));
            if (change <= 1e-15) break;
        }
        rho = rayleigh(x, Mx);
    }

    double res = 0.0, xmax = 0.0;
    for (int j = 0; j < n; ++j) {
        res = std::max(res, std::abs(Mx[j] - rho * x[j]));
        xmax = std::max(xmax, std::abs(x[j]));
    }
    ep.residual = res / xmax;
    ep.iterations = it;
    ep.mu = rho;
    const double scale = std::abs(rho) + 4.0 * h2 + vmax;
    if (!(ep.residual <= opt.tol_eig * scale) || !std::isfinite(rho))
        throw Error(ErrorCode::EigenSolverFailure, "inverse iteration did not converge");

    double sum = 0.0;
    for (double v : x) sum += v;
    if (sum < 0.0)
        for (double& v : x) v = -v;
    for (double v : x)
        if (!(v > 0.0)) throw Error(ErrorCode::EigenSolverFailure, "principal eigenvector is not positive");
    const double integral = std::abs(sum) * dth;
    ep.Q.resize(n);
    for (int j = 0; j < n; ++j) ep.Q[j] = x[j] / integral;
    return ep;
}

DispersionCurve dispersion_curve(const TraitProfile& profile, double lambda_lo, double lambda_hi, int n_lambda,
                                 bool log_spacing) {
    if (!(lambda_lo > 0.0 && lambda_hi > lambda_lo && n_lambda >= 3))
        throw Error(ErrorCode::InvalidArgument, "dispersion_curve: need 0 < lo < hi and n >= 3");
    DispersionCurve curve;
    for (int i = 0; i < n_lambda; ++i) {
        const double s = static_cast<double>(i) / (n_lambda - 1);
        const double lam = log_spacing ? lambda_lo * std::pow(lambda_hi / lambda_lo, s)
                                       : lambda_lo + s * (lambda_hi - lambda_lo);
        const auto ep = principal_eigenpair(lam, profile);
        curve.lambdas.push_back(lam);
        curve.mus.push_back(ep.mu);
        curve.speeds.push_back((1.0 + ep.mu) / lam);
    }
    return curve;
}

namespace {

double speed_at(double lambda, const TraitProfile& profile) {
    return (1.0 + principal_eigenpair(lambda, profile).mu) / lambda;
}

// c'(lambda) through the Hellmann-Feynman derivative of the symmetric discrete eigenvalue.
double speed_slope(double lambda, const TraitProfile& profile) {
    const auto ep = principal_eigenpair(lambda, profile);
    double num = 0.0, den = 0.0;
    for (int j = 0; j < profile.size(); ++j) {
        const double q2 = ep.Q[j] * ep.Q[j];
        num += (2.0 * lambda * profile.D[j] + profile.A[j]) * q2;
        den += q2;
    }
    const double dmu = num / den;
    return (lambda * dmu - 1.0 - ep.mu) / (lambda * lambda);
}

}  // namespace

SpectralData minimize_speed(const DispersionCurve& curve, const TraitProfile& profile, const MinimizeOptions& opt) {
    const auto n = curve.speeds.size();
    if (n < 3) throw Error(ErrorCode::NoBracket, "curve too short");
    const auto k = static_cast<std::size_t>(
        std::min_element(curve.speeds.begin(), curve.speeds.end()) - curve.speeds.begin());
    if (k == 0 || k + 1 == n) throw Error(ErrorCode::NoBracket, "c(lambda) is monotone on the sampled range");

    const double lo = curve.lambdas[k - 1], hi = curve.lambdas[k + 1];
    const double g = (std::sqrt(5.0) - 1.0) / 2.0;
    double a = lo, b = hi;
    double x1 = b - g * (b - a), x2 = a + g * (b - a);
    double f1 = speed_at(x1, profile), f2 = speed_at(x2, profile);
    while (b - a > opt.tol_lambda) {
        if (f1 < f2) {
            b = x2;
            x2 = x1;
            f2 = f1;
            x1 = b - g * (b - a);
            f1 = speed_at(x1, profile);
        } else {
            a = x1;
            x1 = x2;
            f1 = f2;
            x2 = a + g * (b - a);
            f2 = speed_at(x2, profile);
        }
    }
    double lam = 0.5 * (a + b);

    // Golden section stalls near sqrt(machine eps) because c is flat at its minimum;
    // secant steps on c' recover the remaining digits.
    {
        double l0 = lam, l1 = lam * (1.0 + 1e-6);
        double g0 = speed_slope(l0, profile), g1 = speed_slope(l1, profile);
        for (int it = 0; it < 30 && g1 != g0; ++it) {
            const double l2 = l1 - g1 * (l1 - l0) / (g1 - g0);
            if (!(l2 > lo && l2 < hi)) break;
            l0 = l1;
            g0 = g1;
            l1 = l2;
            g1 = speed_slope(l1, profile);
            if (std::abs(l1 - l0) <= 1e-15 * l1) break;
        }
        if (l1 > lo && l1 < hi && speed_at(l1, profile) <= speed_at(lam, profile) + 1e-14) lam = l1;
    }

    SpectralData sd;
    sd.domain = profile.domain;
    const auto ep = principal_eigenpair(lam, profile);
    sd.lambda_star = lam;
    sd.mu_star = ep.mu;
    sd.c_star = (1.0 + ep.mu) / lam;
    sd.Q_star = ep.Q;
    const double h = opt.h_rel * lam;
    const double cp = speed_at(lam + h, profile), cm = speed_at(lam - h, profile);
    sd.c_first_deriv = (cp - cm) / (2.0 * h);
    sd.c_second_deriv = (cp - 2.0 * sd.c_star + cm) / (h * h);
    return sd;
}

std::vector<double> compute_chi(const TraitProfile& profile, double lambda_star, double h_rel) {
    const int n = profile.size();
    const auto q0 = principal_eigenpair(lambda_star, profile).Q;
    auto central = [&](double h) {
        const auto qp = principal_eigenpair(lambda_star + h, profile).Q;
        const auto qm = principal_eigenpair(lambda_star - h, profile).Q;
        std::vector<double> chi(n);
        for (int j = 0; j < n; ++j) chi[j] = -(qp[j] - qm[j]) / (2.0 * h * q0[j]);
        return chi;
    };
    const double h = h_rel * lambda_star;
    const auto c1 = central(h);
    const auto c2 = central(2.0 * h);
    std::vector<double> chi(n);
    for (int j = 0; j < n; ++j) chi[j] = (4.0 * c1[j] - c2[j]) / 3.0;
    return chi;
}

double compute_Dbar(const TraitProfile& profile, const SpectralData& sd) {
    const int n = profile.size();
    if (static_cast<int>(sd.chi.size()) != n || static_cast<int>(sd.Q_star.size()) != n)
        throw Error(ErrorCode::InvalidArgument, "compute_Dbar: spectral data incomplete");
    double num = 0.0, den = 0.0;
    for (int j = 0; j < n; ++j) {
        const double q2 = sd.Q_star[j] * sd.Q_star[j];
        const double D = profile.D[j], A = profile.A[j], chi = sd.chi[j];
        num += (D + sd.c_star * chi - 2.0 * sd.lambda_star * D * chi - A * chi) * q2;
        den += q2;
    }
    const double Dbar = num / den;
    if (!(Dbar > 0.0)) throw Error(ErrorCode::NonPositiveDbar, "D_bar <= 0 indicates an upstream spectral error");
    return Dbar;
}

BetaResult solve_corrector_beta(const TraitProfile& profile, const SpectralData& sd, double tol) {
    const int n = profile.size();
    const auto L = ground_state_operator(sd.Q_star, profile.domain);
    std::vector<double> rhs(n);
    for (int j = 0; j < n; ++j) rhs[j] = 2.0 * sd.lambda_star * profile.D[j] + profile.A[j] - sd.c_star;
    auto solved = solve_neumann(L, rhs);
    if (std::abs(solved.projected_out) > tol * std::abs(sd.c_star))
        throw Error(ErrorCode::SolvabilityViolation, "weighted mean of 2 lambda D + A - c* is not zero");
    return {std::move(solved.f), solved.projected_out};
}

SpectralData compute_spectral_data(const TraitProfile& profile, const MinimizeOptions& opt) {
    const auto curve = dispersion_curve(profile, opt.lambda_lo, opt.lambda_hi, opt.n_lambda);
    auto sd = minimize_speed(curve, profile, opt);
    sd.chi = compute_chi(profile, sd.lambda_star, opt.h_rel);
    sd.D_bar = compute_Dbar(profile, sd);
    double q2 = 0.0;
    for (double q : sd.Q_star) q2 += q * q;
    q2 *= profile.domain.dtheta();
    sd.weight_a = profile.domain.length() / q2;
    sd.weight_mu.resize(sd.Q_star.size());
    for (std::size_t j = 0; j < sd.Q_star.size(); ++j) sd.weight_mu[j] = sd.weight_a * sd.Q_star[j] * sd.Q_star[j];
    auto beta = solve_corrector_beta(profile, sd);
    sd.beta = std::move(beta.beta);
    sd.beta_projected_out = beta.projected_out;
    return sd;
}

double rel3_residual(const TraitProfile& profile, const SpectralData& sd) {
    double lhs = 0.0, rhs = 0.0;
    for (int j = 0; j < profile.size(); ++j) {
        const double q2 = sd.Q_star[j] * sd.Q_star[j];
        lhs += sd.c_star * q2;
        rhs += (2.0 * sd.lambda_star * profile.D[j] + profile.A[j]) * q2;
    }
    return std::abs(lhs - rhs) / std::abs(lhs);
}

std::vector<double> rel4_residuals(const TraitProfile& profile, const std::vector<double>& lambdas, double h_rel) {
    std::vector<double> out;
    for (double lam : lambdas) {
        const auto ep = principal_eigenpair(lam, profile);
        const double c = (1.0 + ep.mu) / lam;
        const double h = h_rel * lam;
        const double dc = (speed_at(lam + h, profile) - speed_at(lam - h, profile)) / (2.0 * h);
        double acc = 0.0, norm = 0.0;
        for (int j = 0; j < profile.size(); ++j) {
            const double q2 = ep.Q[j] * ep.Q[j];
            acc += (-lam * dc - c + profile.A[j] + 2.0 * lam * profile.D[j]) * q2;
            norm += q2;
        }
        out.push_back(std::abs(acc) / (std::abs(c) * norm));
    }
    return out;
}

DispersionReport dispersion_report(const TraitProfile& profile, const MinimizeOptions& opt) {
    DispersionReport rep;
    rep.curve = dispersion_curve(profile, opt.lambda_lo, opt.lambda_hi, opt.n_lambda);
    rep.spectral = compute_spectral_data(profile, opt);
    rep.rel3_residual = rel3_residual(profile, rep.spectral);
    const double ls = rep.spectral.lambda_star;
    rep.rel4_lambdas = {0.5 * ls, 0.75 * ls, ls, 1.5 * ls, 2.0 * ls};
    rep.rel4_residuals = rel4_residuals(profile, rep.rel4_lambdas, opt.h_rel);
    rep.ddc = rep.spectral.c_second_deriv;
    return rep;
}

}  // namespace toadfront
