#pragma once

#include <vector>

#include "toadfront/core_model.hpp"

namespace toadfront {

/// Discrete Neumann operator (1/w_j) [W_{j+1/2}(f_{j+1}-f_j) - W_{j-1/2}(f_j-f_{j-1})] / dtheta^2
/// with zero flux through both walls. Unit weights give the plain Laplacian; face weights Q_j Q_{j+1}
/// with cell weights Q_j^2 give L = Laplacian + (2/Q) Q' d/dtheta exactly as the ground-state
/// transform of the discrete Laplacian.
struct ThetaOperator {
    std::vector<double> face_w;  // n - 1 interior faces
    std::vector<double> cell_w;  // n cells
    double inv_dth2 = 1.0;

    int size() const { return static_cast<int>(cell_w.size()); }
    void apply(const double* f, double* out) const;
    std::vector<double> apply(const std::vector<double>& f) const;
    /// Weighted mean sum(cell_w f) / sum(cell_w).
    double weighted_mean(const std::vector<double>& f) const;
};

ThetaOperator laplacian_operator(const ThetaDomain& domain);
ThetaOperator ground_state_operator(const std::vector<double>& Q, const ThetaDomain& domain);

struct NeumannSolve {
    std::vector<double> f;      // weighted-mean-zero solution
    double projected_out = 0.0; // weighted mean removed from the right side before solving
};

/// Solve L f = rhs after projecting rhs onto weighted mean zero.
NeumannSolve solve_neumann(const ThetaOperator& L, const std::vector<double>& rhs);

struct EigenPair {
    double lambda = 0.0;
    double mu = 0.0;
    std::vector<double> Q;  // positive, integral 1
    int iterations = 0;
    double residual = 0.0;  // ||(Lap + V) Q - mu Q||_inf / ||Q||_inf
};

struct EigenOptions {
    int max_iterations = 20000;
    double tol_eig = 1e-9;  // relative residual accepted before EigenSolverFailure
};

/// Principal (largest) eigenpair of Lap_theta + diag(lambda^2 D + lambda A) with Neumann walls,
/// by shifted inverse iteration on the symmetric tridiagonal matrix.
EigenPair principal_eigenpair(double lambda, const TraitProfile& profile, const EigenOptions& opt = {});

struct DispersionCurve {
    std::vector<double> lambdas;
    std::vector<double> mus;
    std::vector<double> speeds;  // (1 + mu) / lambda
};

DispersionCurve dispersion_curve(const TraitProfile& profile, double lambda_lo, double lambda_hi, int n_lambda,
                                 bool log_spacing = true);

struct SpectralData {
    double c_star = 0.0;
    double lambda_star = 0.0;
    double mu_star = 0.0;
    std::vector<double> Q_star;
    std::vector<double> chi;
    double D_bar = 0.0;
    std::vector<double> beta;
    double beta_projected_out = 0.0;
    std::vector<double> weight_mu;  // a (Q*)^2, mean one over Theta
    double weight_a = 0.0;
    double c_first_deriv = 0.0;
    double c_second_deriv = 0.0;
    ThetaDomain domain;
};

struct MinimizeOptions {
    double lambda_lo = 0.05;
    double lambda_hi = 20.0;
    int n_lambda = 64;
    double tol_lambda = 1e-9;
    double h_rel = 1e-4;  // finite-difference step for c', c'' and chi, relative to lambda*
};

/// Bracket the minimum of c on the sampled curve, refine by golden section and finish with Newton steps
/// on c' written through the eigenvalue derivative <(2 lambda D + A) Q, Q> / <Q, Q>.
SpectralData minimize_speed(const DispersionCurve& curve, const TraitProfile& profile,
                            const MinimizeOptions& opt = {});

/// chi = -(1/Q) dQ/dlambda at lambda*, central differences plus one Richardson step.
std::vector<double> compute_chi(const TraitProfile& profile, double lambda_star, double h_rel = 1e-4);

double compute_Dbar(const TraitProfile& profile, const SpectralData& spectral);

struct BetaResult {
    std::vector<double> beta;
    double projected_out = 0.0;
};

/// Corrector in divergence form: (1/mu) d/dtheta(mu d beta/dtheta) = 2 lambda* D + A - c*, Neumann walls,
/// mu-weighted mean zero. Throws SolvabilityViolation when the mu-weighted mean of the right side
/// exceeds `tol` relative to c*.
BetaResult solve_corrector_beta(const TraitProfile& profile, const SpectralData& spectral, double tol = 1e-6);

/// All spectral quantities for a profile: curve, minimiser, chi, D_bar, weight, beta.
SpectralData compute_spectral_data(const TraitProfile& profile, const MinimizeOptions& opt = {});

/// |c* int Q^2 - int (2 lambda* D + A) Q^2| / (c* int Q^2).
double rel3_residual(const TraitProfile& profile, const SpectralData& spectral);

/// Relative residual of int (-lambda c' - c + A + 2 lambda D) Q_lambda^2 at each lambda,
/// c' by central differences with step h_rel * lambda.
std::vector<double> rel4_residuals(const TraitProfile& profile, const std::vector<double>& lambdas,
                                   double h_rel = 1e-4);

struct DispersionReport {
    DispersionCurve curve;
    SpectralData spectral;
    double rel3_residual = 0.0;
    std::vector<double> rel4_lambdas;
    std::vector<double> rel4_residuals;
    double ddc = 0.0;  // c''(lambda*)
};

DispersionReport dispersion_report(const TraitProfile& profile, const MinimizeOptions& opt = {});

}  // namespace toadfront
