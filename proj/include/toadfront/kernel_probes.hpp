#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

namespace toadfront {

using Coefficient = std::function<double(double)>;

struct KernelGrid {
    double x_min = -10.0;
    double x_max = 10.0;
    double dx = 0.01;
    double dt = 0.0;            // 0: dx^2 / a_max, which keeps every CN operator entrywise nonnegative
    double width_factor = 1.0 / 20.0;  // w0 = width_factor * sqrt(t)

    int n_x() const;
    double x(int i) const { return x_min + i * dx; }
};

/// Kernel of u_t = a(x) u_xx. Forward runs start a narrow Gaussian at each source y and return
/// G(t, ., y); adjoint runs solve v_t = (a v)_yy from each source x and return G(t, x, .).
struct KernelEstimate {
    double t = 0.0;
    bool adjoint = false;
    std::vector<double> x;                 // grid nodes
    std::vector<double> sources;
    std::vector<std::vector<double>> G;    // G[s][i]
    double max_boundary_mass = 0.0;

    /// G(t, x_i, y_s) (forward) or G(t, x_s, y_i) (adjoint).
    double at(int s, int i) const { return G[s][i]; }
};

KernelEstimate estimate_kernel(const Coefficient& a, double t, const KernelGrid& grid, const std::vector<double>& sources,
                               bool adjoint = false);

/// |int_x^y a^{-1/2}| by adaptive Simpson.
double riemannian_distance(const Coefficient& a, double x, double y, double tol = 1e-10);

struct VaradhanOptions {
    double r_min = 1.0, r_max = 3.0;     // pair range |x - y|
    double eps_floor = 0.25;
    std::vector<double> sources = {0.0, 1.5707963267948966, 3.141592653589793, 4.71238898038469};
    double dx_factor = 1.0 / 80.0;       // dx = dx_factor * sqrt(t)
    double margin_sigmas = 10.0;         // domain = source +- (r_max + margin_sigmas sqrt(a_max t))
    double a_max = 0.0;                  // 0: sampled
};

struct VaradhanRow {
    double t = 0.0;
    double max_error = 0.0;
    double x = 0.0, y = 0.0;  // witness
    double d = 0.0;
    double minus_4t_log_G = 0.0;
};

struct VaradhanTable {
    std::vector<VaradhanRow> rows;
    bool decreasing = false;  // error decreases along the (decreasing) t list
};

VaradhanTable varadhan_check(const Coefficient& a, const std::vector<double>& t_list, const VaradhanOptions& options = {});

struct HarnackProbeOptions {
    double window = 10.0;        // sample x, y in [-window, window]
    double domain_factor = 2.0;  // solve on [-domain_factor * window, domain_factor * window] (Neumann)
    double dx = 0.02;
    double dt = 0.0;             // 0: dx^2 / a_max
    std::vector<double> times;   // sampled times >= t0; empty: {t0, 2 t0, 4 t0}
    double floor = 1e-300;
};

struct HarnackProbeResult {
    double C_emp = 0.0;
    double t = 0.0, x = 0.0, y = 0.0;  // witness
    std::vector<double> times;
    std::vector<double> C_per_time;
};

/// max over sampled t >= t0 and |x - y| <= R of u(t,x) / (|u0|_inf^{1-1/p} u(t,y)^{1/p}); p = 1 is allowed as a diagnostic.
HarnackProbeResult harnack_constant(const std::function<double(double)>& u0, const Coefficient& a, double t0, double R,
                                    double p, const HarnackProbeOptions& options = {});

struct KernelPowerOptions {
    double half_width = 12.0;    // y in [-half_width, half_width]
    double dx = 0.0;             // 0: sqrt(t0) / 60
    int x_sources = 21;          // sources spread over [-R, R], endpoints and 0 included
};

struct KernelPowerResult {
    double C_emp = 0.0;
    double x = 0.0, y = 0.0;  // witness
    double boundary_ratio = 0.0;  // largest ratio on the outermost y cells (grows if the bound fails)
};

/// max over y and |x| <= R of G(t0,x,y)^{sp} / G(t0,0,y).
KernelPowerResult kernel_power_bound_check(const Coefficient& a, double t0, double R, double s, double p,
                                           const KernelPowerOptions& options = {});

/// Norms of one trial function on R^k x [0,1]^d.
struct NashNorms {
    double l1 = 0.0;
    double l2_sq = 0.0;
    double grad_sq = 0.0;
};

/// ||grad phi||^2 (1 + rho^{2d(k+2)/(k(k+d))}) / (||phi||_2^2 rho^{4/k}),  rho = ||phi||_2 / ||phi||_1.
double nash_ratio(const NashNorms& n, int k, int d);

/// Separable trial phi(x, theta) = prod_i f_i(x_i) prod_l g_l(theta_l).
struct NashTrial {
    enum class XKind { gaussian, bump, gaussian_pair, modulated_gaussian };
    struct XFactor {
        XKind kind = XKind::gaussian;
        double center = 0.0, width = 1.0;
        double center2 = 0.0, width2 = 1.0, weight2 = 0.0;  // gaussian_pair
        double freq = 0.0, phase = 0.0;                     // modulated_gaussian
        int bump_power = 3;                                 // bump: (1 - r^2)^power on |r| < 1
        double span = 0.0;  // quadrature half-width about center; 0 picks one from the widths
    };
    struct ThetaFactor {
        std::vector<double> cos_coef;  // g = cos_coef[0] + sum_n cos_coef[n] cos(pi n theta), n <= 4
    };
    std::vector<XFactor> x;
    std::vector<ThetaFactor> theta;

    std::string describe() const;
};

struct NashQuadrature {
    int x_points = 4001;
    int theta_points = 401;
    double truncation_tol = 1e-6;
};

/// Throws TruncationError if more than truncation_tol of a norm sits in the outer 2% of the x-grid.
NashNorms nash_norms(const NashTrial& trial, const NashQuadrature& q = {});

NashTrial random_nash_trial(int k, int d, std::uint64_t seed, long index);

struct NashReport {
    int k = 1, d = 1;
    long trials = 0;
    std::uint64_t seed = 0;
    double C_emp = 0.0;          // min over all trials
    double C_emp_half = 0.0;     // min over the first half
    double drift = 0.0;          // (C_emp_half - C_emp) / C_emp_half
    long argmin = -1;
    std::string argmin_description;
};

NashReport nash_check(int k, int d, long trial_count, std::uint64_t seed, const NashQuadrature& q = {});

}  // namespace toadfront
