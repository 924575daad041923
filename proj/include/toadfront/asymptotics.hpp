#pragma once

#include <optional>
#include <string>
#include <vector>

#include "toadfront/core_model.hpp"
#include "toadfront/dispersion.hpp"
#include "toadfront/pde_solver.hpp"

namespace toadfront {

/// Approximate solution of (1 - omega) p_tau = D p_xx + L p - (2 lambda* D + A) p_x with omega = omega_bar / tau:
///   S = tau^{-1} (S0 + S1 / sqrt(tau) + S2 / tau + S3 / tau^{3/2}),  z = (x - c* tau) / sqrt(tau),
///   S0 = z exp(-z^2 / (4 Dbar)),  S1 = chi0 S0' + phi1,  S2 = chi0 phi1' + S2_hat S0'',
///   S3 = h_chi (-3/2 S0' - z/2 S0'') + h_phi phi1'' + h_S S0'''.
struct ExpansionData {
    TraitProfile profile;
    double c_star = 0.0, lambda_star = 0.0, D_bar = 0.0;
    double chi_bar = 0.0;
    double omega_bar = 0.0;
    double sigma = 3.0;
    double z_max = 5.0;
    std::vector<double> Q_star;
    std::vector<double> chi0;      // chi + chi_bar
    std::vector<double> S2_hat;
    std::vector<double> h_chi, h_phi, h_S;
    double beta1 = 0.0, beta2 = 0.0;
    double dz = 1e-3;
    std::vector<double> phi1, dphi1;  // on z_k = k dz, k = 0..n
    double C_phi = 0.0;               // max |phi1| / z^2 on (0, sigma]
    double solvability_residual = 0.0;

    // discrete L applied to the theta factors
    std::vector<double> L_chi0, L_S2_hat, L_h_chi, L_h_phi, L_h_S;
};

/// chi_bar defaults to -(1 + max |chi|). Throws SolvabilityViolation if the S2_hat equation has a weighted-mean
/// defect above 1e-8.
ExpansionData build_expansion(const TraitProfile& profile, const SpectralData& spectral,
                              std::optional<double> chi_bar = std::nullopt, double omega_bar = 0.0, double sigma = 3.0);

/// Values at z of the one-variable factors; exposed for tests.
struct ZFactors {
    double S0[6];   // S0 and derivatives up to the fifth
    double phi[5];  // phi1 and derivatives up to the fourth
};
ZFactors z_factors(const ExpansionData& e, double z);

/// S(tau, c* tau + y, theta_j) for all j, keeping the first `terms` orders (1 = S0 only, 4 = full).
std::vector<double> evaluate_S(const ExpansionData& e, double tau, double y, int terms = 4);

/// S on the cell-centred grid y_i = y_min + (i + 1/2) dy in the frame y = x - c* tau.
Field assemble_S(const ExpansionData& e, double tau, double y_min, double dy, int n_y, int terms = 4);

struct ResidualReport {
    int terms = 4;
    std::vector<double> taus;
    std::vector<double> sup_residual;   // sup over z in [0, sigma], theta
    std::vector<double> ratios;         // sup_residual(tau) / sup_residual(2 tau) for each dyadic pair present
    std::vector<double> ratio_taus;     // the smaller tau of each pair
    std::vector<double> gaussian_gap;   // sup |S - (x - c* tau + chi0) tau^{-3/2} e^{-z^2/4Dbar}|
    std::vector<double> gaussian_gap_scaled;  // sup of the same times tau^{3/2} / (z^2 + tau^{-1/2})
};

/// Pointwise residual of the p-equation operator on S, with exact z-derivatives and the discrete theta operator.
ResidualReport residual_of_S(const ExpansionData& e, const std::vector<double>& taus, int terms = 4, int n_z = 301);

struct ProximityOptions {
    double tau_end_factor = 4.0;
    double dx = 0.05;
    double dt = 0.05;
    double sample_every = 5.0;
    double perturbation = 1.0;  // xi(tau0) = S(tau0) + perturbation tau0^{-3/2} sin(pi z / sigma)
};

struct ProximityTrace {
    std::vector<double> taus;
    std::vector<double> weighted_deviation;  // sup |xi - S| tau^{3/2} on 0 < x - c* tau < sigma sqrt(tau)
    double max_over_min = 0.0;
};

/// Solve the p-equation on the strip [c* tau, c* tau + sigma sqrt(tau)] with Dirichlet data from S.
ProximityTrace compare_xi_S(const ExpansionData& e, double tau0, const ProximityOptions& options = {});

struct AmplitudeTrace {
    std::vector<double> taus;
    std::vector<double> amplitude;  // tau * int_Theta p(tau, c* tau + sigma sqrt(tau), theta) dtheta
    double band_ratio = 0.0;        // max / min over [tau_from, tau_to]
    bool vacuous = false;           // identically zero
};

/// p-equation snapshots are fields in the frame y = x - c* tau.
AmplitudeTrace front_interior_amplitude(const std::vector<Field>& snapshots, double sigma, double tau_from,
                                        double tau_to);

struct PDecayBand {
    double tau = 0.0;
    double lo = 0.0, hi = 0.0;  // min and max of tau^{3/2} p / y over y in [1, sigma sqrt(tau)] and theta
};

PDecayBand p_decay_band(const Field& snapshot, double sigma);

enum class AmplitudeVerdict { decaying, bounded, growing };
const char* to_string(AmplitudeVerdict v);

struct CriticalityOptions {
    double t_end = 400.0;
    double dx = 0.05;
    double dt = 0.05;
    double sigma = 3.0;
    double right_extent = 0.0;  // 0: sigma sqrt(t_end) + 10 sqrt(max D t_end)
    double init_width = 5.0;    // z(0) = 1 on [0, init_width]
};

struct CriticalityRow {
    double r_shift = 0.0;
    double T_big = 0.0;
    double A_early = 0.0, A_end = 0.0;  // at t_end / 8 and t_end
    double ratio = 0.0;
    AmplitudeVerdict verdict = AmplitudeVerdict::bounded;
};

/// z_t = D z_xx + z_thth - A z_x + z for x > c* t - r log(1 + t/T) with a Dirichlet wall; amplitude
/// A(t) = sup over 1 <= x - X(t) <= sigma sqrt(t) of z e^{lambda* (x - X)} / (x - X); verdict from A(t_end)/A(t_end/8).
std::vector<CriticalityRow> moving_boundary_criticality(const TraitProfile& profile, const SpectralData& spectral,
                                                        const std::vector<double>& r_shifts, double T_big,
                                                        const CriticalityOptions& options = {});

}  // namespace toadfront
