#include <gtest/gtest.h>

#include <Eigen/Dense>
#include <cmath>
#include <random>

#include "toadfront/dispersion.hpp"

using namespace toadfront;

namespace {

// Dense symmetric eigensolver on the same discrete matrix.
double dense_mu(double lambda, const TraitProfile& p) {
    const int n = p.size();
    const double h2 = 1.0 / (p.domain.dtheta() * p.domain.dtheta());
    Eigen::MatrixXd M = Eigen::MatrixXd::Zero(n, n);
    for (int j = 0; j < n; ++j) {
        M(j, j) = lambda * lambda * p.D[j] + lambda * p.A[j] - h2 * ((j == 0 || j == n - 1) ? 1.0 : 2.0);
        if (j > 0) M(j, j - 1) = h2;
        if (j + 1 < n) M(j, j + 1) = h2;
    }
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(M);
    return es.eigenvalues().maxCoeff();
}

// Continuum principal eigenvalue of Q'' + V Q = mu Q, Q'(a) = Q'(b) = 0, by RK4 shooting and bisection.
// For mu above the principal eigenvalue the shot from Q(a) = 1 stays positive and ends with Q'(b) > 0.
template <class Vfun>
double shooting_mu(Vfun V, double a, double b, double vlo, double vhi, int steps = 20000) {
    auto above = [&](double mu) {
        double q = 1.0, dq = 0.0;
        const double h = (b - a) / steps;
        for (int k = 0; k < steps; ++k) {
            const double t = a + k * h;
            auto f = [&](double tt, double qq) { return (mu - V(tt)) * qq; };
            const double k1q = dq, k1d = f(t, q);
            const double k2q = dq + 0.5 * h * k1d, k2d = f(t + 0.5 * h, q + 0.5 * h * k1q);
            const double k3q = dq + 0.5 * h * k2d, k3d = f(t + 0.5 * h, q + 0.5 * h * k2q);
            const double k4q = dq + h * k3d, k4d = f(t + h, q + h * k3q);
            q += h / 6.0 * (k1q + 2 * k2q + 2 * k3q + k4q);
            dq += h / 6.0 * (k1d + 2 * k2d + 2 * k3d + k4d);
            if (q <= 0.0) return false;
        }
        return dq > 0.0;
    };
    double lo = vlo - 1.0, hi = vhi + 1.0;
    for (int it = 0; it < 200 && hi - lo > 1e-14 * std::max(1.0, std::abs(hi)); ++it) {
        const double mid = 0.5 * (lo + hi);
        (above(mid) ? hi : lo) = mid;
    }
    return 0.5 * (lo + hi);
}

TraitProfile affine_profile(int n) { return sample_profile("theta", ThetaDomain::make(1.0, 2.0, n)); }

}  // namespace

TEST(Eigenpair, ConstantCoefficientsClosedForm) {
    const auto p = sample_profile("const 1.5", ThetaDomain::make(0.0, 1.0, 32), "const 0.25");
    for (double lam : {0.1, 0.7, 2.0, 9.0}) {
        const auto ep = principal_eigenpair(lam, p);
        EXPECT_NEAR(ep.mu, 1.5 * lam * lam + 0.25 * lam, 1e-11 * (1 + ep.mu));
        for (double q : ep.Q) EXPECT_NEAR(q, 1.0, 1e-10);
    }
}

TEST(Eigenpair, MatchesDenseSolverOnSameGrid) {
    std::mt19937_64 rng(11);
    std::uniform_real_distribution<double> U(0.2, 3.0);
    for (int trial = 0; trial < 6; ++trial) {
        const int n = 16 + 23 * trial;
        auto p = affine_profile(n);
        for (int j = 0; j < n; ++j) {
            p.D[j] = U(rng);
            p.A[j] = U(rng) - 1.5;
        }
        for (double lam : {0.3, 1.0, 4.0}) {
            const double ref = dense_mu(lam, p);
            EXPECT_NEAR(principal_eigenpair(lam, p).mu, ref, 1e-9 * (1.0 + std::abs(ref)));
        }
    }
}

TEST(Eigenpair, RichardsonConvergesToShootingOracle) {
    for (double lam : {0.5, 1.3, 3.0}) {
        const double exact = shooting_mu([lam](double t) { return lam * lam * t; }, 1.0, 2.0, lam * lam, 2 * lam * lam);
        const double m1 = principal_eigenpair(lam, affine_profile(512)).mu;
        const double m2 = principal_eigenpair(lam, affine_profile(1024)).mu;
        EXPECT_NEAR((4.0 * m2 - m1) / 3.0, exact, 1e-8 * (1.0 + exact));
        EXPECT_LE(std::abs(m2 - exact), std::abs(m1 - exact) + 1e-12);
    }
}

TEST(Eigenpair, PositiveAndNormalized) {
    const auto p = affine_profile(100);
    const auto ep = principal_eigenpair(2.5, p);
    double s = 0.0;
    for (double q : ep.Q) {
        EXPECT_GT(q, 0.0);
        s += q;
    }
    EXPECT_NEAR(s * p.domain.dtheta(), 1.0, 1e-13);
}

TEST(Eigenpair, ScalarLimit) {
    const auto p = sample_profile("const 2", ThetaDomain::make(0.0, 1.0, 1));
    EXPECT_DOUBLE_EQ(principal_eigenpair(3.0, p).mu, 18.0);
}

TEST(Eigenpair, RejectsBadLambda) {
    EXPECT_THROW(principal_eigenpair(0.0, affine_profile(8)), Error);
    EXPECT_THROW(principal_eigenpair(-1.0, affine_profile(8)), Error);
}

TEST(ThetaOperator, GroundStateTransform) {
    // Q L_h f = (Lap_h + V - mu)(f Q) for the principal pair.
    const auto p = affine_profile(40);
    const double lam = 1.7;
    const auto ep = principal_eigenpair(lam, p);
    const auto L = ground_state_operator(ep.Q, p.domain);
    const int n = p.size();
    std::vector<double> f(n), fQ(n);
    for (int j = 0; j < n; ++j) {
        f[j] = std::sin(3.0 * j) + 0.1 * j;
        fQ[j] = f[j] * ep.Q[j];
    }
    const auto Lf = L.apply(f);
    const auto lap = laplacian_operator(p.domain).apply(fQ);
    for (int j = 0; j < n; ++j) {
        const double rhs = lap[j] + (lam * lam * p.D[j] - ep.mu) * fQ[j];
        EXPECT_NEAR(ep.Q[j] * Lf[j], rhs, 1e-8 * (1.0 + std::abs(rhs)));
    }
}

TEST(ThetaOperator, NeumannSolveRoundTrip) {
    const auto d = ThetaDomain::make(0.0, 1.0, 50);
    std::vector<double> Q(50);
    for (int j = 0; j < 50; ++j) Q[j] = 1.0 + 0.5 * std::cos(0.1 * j);
    const auto L = ground_state_operator(Q, d);
    std::vector<double> g(50);
    for (int j = 0; j < 50; ++j) g[j] = std::exp(-0.05 * j) + 2.0;
    const auto s = solve_neumann(L, g);
    const auto back = L.apply(s.f);
    for (int j = 0; j < 50; ++j) EXPECT_NEAR(back[j], g[j] - s.projected_out, 1e-9);
    EXPECT_NEAR(L.weighted_mean(s.f), 0.0, 1e-14);
}

TEST(MinimizeSpeed, ConstantCoefficients) {
    // mu = D lambda^2, c = (1 + D lambda^2)/lambda: lambda* = D^{-1/2}, c* = 2 sqrt(D)
    const auto p = sample_profile("const 2", ThetaDomain::make(0.0, 1.0, 16));
    const auto sd = compute_spectral_data(p);
    EXPECT_NEAR(sd.lambda_star, 1.0 / std::sqrt(2.0), 1e-10);
    EXPECT_NEAR(sd.c_star, 2.0 * std::sqrt(2.0), 1e-12);
    EXPECT_NEAR(sd.D_bar, 2.0, 1e-8);
    for (double c : sd.chi) EXPECT_NEAR(c, 0.0, 1e-8);
    for (double b : sd.beta) EXPECT_NEAR(b, 0.0, 1e-8);
    EXPECT_NEAR(sd.c_second_deriv, 2.0 / std::pow(sd.lambda_star, 3), 1e-4);
}

TEST(MinimizeSpeed, DriftShiftMovesSpeed) {
    // A -> A + a adds lambda a to mu and a to every speed.
    auto p = affine_profile(64);
    const auto base = compute_spectral_data(p);
    for (double& a : p.A) a += 0.3;
    const auto shifted = compute_spectral_data(p);
    EXPECT_NEAR(shifted.c_star, base.c_star + 0.3, 1e-11);
    EXPECT_NEAR(shifted.lambda_star, base.lambda_star, 1e-8);
}

TEST(MinimizeSpeed, StationarityAndIdentities) {
    const auto p = affine_profile(128);
    const auto sd = compute_spectral_data(p);
    EXPECT_LT(std::abs(sd.c_first_deriv), 1e-7);
    EXPECT_GT(sd.c_second_deriv, 0.0);
    EXPECT_LT(rel3_residual(p, sd), 1e-10);
    for (double r : rel4_residuals(p, {0.5, 1.0, 2.0, 5.0})) EXPECT_LT(r, 1e-6);
    // D_bar lies between the extremes of D for this monotone profile
    EXPECT_GT(sd.D_bar, 1.0);
    EXPECT_LT(sd.D_bar, 2.0);
    EXPECT_NEAR(sd.beta_projected_out, 0.0, 1e-8);
}

TEST(MinimizeSpeed, CorrectorEqualsCenteredChi) {
    // chi and beta solve the same weighted Neumann problem, so beta = chi - <chi>_mu.
    const auto p = affine_profile(96);
    const auto sd = compute_spectral_data(p);
    const auto L = ground_state_operator(sd.Q_star, p.domain);
    const double m = L.weighted_mean(sd.chi);
    for (int j = 0; j < p.size(); ++j) EXPECT_NEAR(sd.beta[j], sd.chi[j] - m, 1e-6);
    // and L chi = 2 lambda* D + A - c*
    const auto Lchi = L.apply(sd.chi);
    for (int j = 0; j < p.size(); ++j)
        EXPECT_NEAR(Lchi[j], 2 * sd.lambda_star * p.D[j] + p.A[j] - sd.c_star, 1e-6);
}

TEST(MinimizeSpeed, WeightHasUnitMean) {
    const auto p = affine_profile(64);
    const auto sd = compute_spectral_data(p);
    EXPECT_NEAR(theta_integral(sd.weight_mu, p.domain) / p.domain.length(), 1.0, 1e-13);
}

TEST(MinimizeSpeed, NoBracket) {
    const auto p = sample_profile("const 1", ThetaDomain::make(0.0, 1.0, 8));
    const auto curve = dispersion_curve(p, 0.05, 0.5, 16);
    try {
        minimize_speed(curve, p);
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.code(), ErrorCode::NoBracket);
    }
}

TEST(Corrector, SolvabilityViolation) {
    const auto p = affine_profile(32);
    auto sd = compute_spectral_data(p);
    sd.c_star += 1e-3;
    try {
        solve_corrector_beta(p, sd);
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.code(), ErrorCode::SolvabilityViolation);
    }
}

TEST(Dispersion, ConvergesInNTheta) {
    double prev = 0.0, prev_diff = 0.0;
    for (int n : {32, 64, 128, 256}) {
        const double c = compute_spectral_data(affine_profile(n)).c_star;
        if (n > 32) {
            const double diff = std::abs(c - prev);
            // at least second order; linear D is superconvergent on coarse grids
            if (n > 64) EXPECT_GT(prev_diff / diff, 3.5);
            prev_diff = diff;
        }
        prev = c;
    }
}

TEST(Chi, VanishesForConstantCoefficients) {
    const auto p = sample_profile("const 2", ThetaDomain::make(0.0, 1.0, 32), "const 0.3");
    const auto sd = compute_spectral_data(p);
    for (double c : sd.chi) EXPECT_NEAR(c, 0.0, 1e-8);
    EXPECT_NEAR(sd.D_bar, 2.0, 1e-8);
}

TEST(Chi, NormalizationKillsItsQWeightedIntegral) {
    // chi = -d(log Q)/d(lambda) and int Q = 1 for every lambda, so int chi Q* = 0.
    const auto p = affine_profile(128);
    const auto sd = compute_spectral_data(p);
    std::vector<double> f(p.size());
    for (int j = 0; j < p.size(); ++j) f[j] = sd.chi[j] * sd.Q_star[j];
    EXPECT_NEAR(theta_integral(f, p.domain), 0.0, 1e-8);
}

TEST(Dispersion, EigenvalueIsConvexInLambda) {
    const auto p = affine_profile(64);
    const auto curve = dispersion_curve(p, 0.05, 20.0, 64);
    for (std::size_t k = 1; k + 1 < curve.mus.size(); ++k) {
        const double h0 = curve.lambdas[k] - curve.lambdas[k - 1], h1 = curve.lambdas[k + 1] - curve.lambdas[k];
        const double d2 = ((curve.mus[k + 1] - curve.mus[k]) / h1 - (curve.mus[k] - curve.mus[k - 1]) / h0);
        EXPECT_GE(d2, -1e-10);
    }
}

TEST(Dbar, MatchesCurvatureOfTheSpeed) {
    // independent route: c'' from a five-point stencil on freshly computed eigenvalues
    const auto p = affine_profile(256);
    const auto sd = compute_spectral_data(p);
    const double l = sd.lambda_star, h = 1e-3 * l;
    auto c = [&](double x) { return (1.0 + principal_eigenpair(x, p).mu) / x; };
    const double c2 = (-c(l + 2 * h) + 16 * c(l + h) - 30 * c(l) + 16 * c(l - h) - c(l - 2 * h)) / (12 * h * h);
    EXPECT_NEAR(sd.D_bar, l * c2 / 2.0, 1e-3 * sd.D_bar);
    const auto q = sample_profile("const 1", ThetaDomain::make(0.0, 1.0, 16));
    const auto sq = compute_spectral_data(q);
    EXPECT_NEAR(sq.D_bar, 1.0, 1e-8);
    EXPECT_NEAR(sq.lambda_star * sq.c_second_deriv / 2.0, 1.0, 1e-5);
}
