#pragma once

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include "toadfront/errors.hpp"

namespace toadfront {

/// Trait interval [theta_min, theta_max] split into n_theta equal cells; samples live at cell centers.
struct ThetaDomain {
    double theta_min = 0.0;
    double theta_max = 1.0;
    int n_theta = 4;

    static ThetaDomain make(double lo, double hi, int n);

    void validate() const;
    double length() const { return theta_max - theta_min; }
    double dtheta() const { return length() / n_theta; }
    double center(int j) const { return theta_min + (j + 0.5) * dtheta(); }
    std::vector<double> centers() const;
};

/// Coefficients of the trait-structured operator: spatial diffusivity D(theta) and drift A(theta).
struct TraitProfile {
    ThetaDomain domain;
    std::vector<double> D;
    std::vector<double> A;

    void validate() const;
    int size() const { return domain.n_theta; }
};

/// Evaluate a profile descriptor ("const c", "theta", "affine a b", "table [v0, v1, ...]") at cell centers.
/// Tables are passed through and must have exactly n_theta entries.
std::vector<double> sample_function(std::string_view spec, const ThetaDomain& domain);

/// D from `d_spec`, A from `a_spec`. Throws NonPositiveDiffusivity if min(D) <= 0.
TraitProfile sample_profile(std::string_view d_spec, const ThetaDomain& domain,
                            std::string_view a_spec = "const 0");

struct DriftNormalization {
    std::vector<double> A;
    double shift = 0.0;  // the subtracted mean; x -> x - shift*t restores the original frame
};

DriftNormalization normalize_drift(const std::vector<double>& A);

/// Midpoint rule on the theta grid.
double theta_integral(const std::vector<double>& f, const ThetaDomain& domain);
double theta_integral(const double* f, const ThetaDomain& domain);

enum class WindowKind { fixed, follow_front };

struct WindowPolicy {
    WindowKind kind = WindowKind::fixed;
    double margin_left = 0.0;   // kept behind the 0.5 level
    double margin_right = 0.0;  // kept ahead of the 0.01 level
};

struct SpaceTimeGrid {
    double x_min = 0.0;
    double x_max = 1.0;
    double dx = 0.05;
    double dt = 0.0125;
    double t_end = 1.0;
    WindowPolicy window;

    void validate() const;
    int n_x() const;
};

enum class BcKind { neumann, dirichlet, moving_dirichlet };

struct BoundaryX {
    BcKind kind = BcKind::neumann;
    double value = 0.0;
};

enum class FieldRole { n, u, z, p, w, xi };

const char* to_string(FieldRole role);

/// Time-stamped n_x x n_theta grid. Row-major with theta contiguous: values[i * n_theta + j].
/// x is cell-centered: x_i = x_offset + (i + 0.5) dx.
struct Field {
    double t = 0.0;
    double x_offset = 0.0;
    double dx = 1.0;
    ThetaDomain theta;
    int n_x = 0;
    std::vector<double> values;
    BoundaryX bc_left;
    BoundaryX bc_right;
    FieldRole role = FieldRole::u;

    static Field zeros(int n_x, double x_offset, double dx, const ThetaDomain& theta,
                       FieldRole role = FieldRole::u);

    int n_theta() const { return theta.n_theta; }
    double x(int i) const { return x_offset + (i + 0.5) * dx; }
    double& at(int i, int j) { return values[static_cast<std::size_t>(i) * theta.n_theta + j]; }
    double at(int i, int j) const { return values[static_cast<std::size_t>(i) * theta.n_theta + j]; }
    const double* row(int i) const { return values.data() + static_cast<std::size_t>(i) * theta.n_theta; }
    double* row(int i) { return values.data() + static_cast<std::size_t>(i) * theta.n_theta; }

    bool all_finite() const;
    std::uint64_t checksum() const;
};

/// rho(x_i) = sum_j values(i, j) * dtheta.
std::vector<double> total_density(const Field& field);
std::vector<double> max_over_theta(const Field& field);

/// Fisher-KPP type nonlinearities used across the models.
struct ReactionLaw {
    enum class Kind { kpp_quadratic, lower_sandwich, upper_sandwich, kpp_bounded, wave_modified };

    Kind kind = Kind::kpp_quadratic;
    double C = 1.0;        // sandwich constant
    double p = 1.0;        // sandwich exponent
    double M_delta = 1.0;  // kpp_bounded: f(u) = u - M u^{1+delta}
    double delta = 1.0;
    double m_bar = 1.0;    // wave_modified: u(1-u)(1-u/m_bar)

    static ReactionLaw kpp() { return {}; }
    static ReactionLaw lower(double C, double p);
    static ReactionLaw upper(double C, double p);
    static ReactionLaw bounded(double M_delta, double delta);
    static ReactionLaw modified(double m_bar);

    void validate() const;
    double operator()(double u) const;
    /// The stable state behind the front (u_m, or m_bar for the modified wave).
    double upper_state() const;
    std::string describe() const;
};

/// FNV-1a over raw bytes; used for snapshot and manifest checksums.
std::uint64_t fnv1a(const void* data, std::size_t bytes, std::uint64_t seed = 1469598103934665603ULL);

}  // namespace toadfront
