#pragma once

#include <functional>
#include <memory>
#include <vector>

#include "toadfront/core_model.hpp"
#include "toadfront/dispersion.hpp"

namespace toadfront {

enum class ModelKind { nonlocal_toads, local_toads, local_general, linearized_dirichlet, p_equation, wave_relaxation };

const char* to_string(ModelKind kind);

/// Moving boundary X(t) = c t - r log(1 + t/T).
struct LogShift {
    double c = 0.0;
    double r_shift = 0.0;
    double T_big = 1.0;

    double position(double t) const;
};

/// The factor omega(tau) in (1 - omega) p_tau = ... .
///   zero:     omega = 0
///   rational: omega = 1 - 1/h'(tau) = r / (c (t + T)) with t = h(tau) the inverse of tau = t - (r/c) log(1 + t/T)
///   harmonic: omega = omega_bar / tau
struct OmegaSpec {
    enum class Kind { zero, rational, harmonic };
    Kind kind = Kind::zero;
    double r_shift = 0.0;
    double c_star = 1.0;
    double T_big = 1.0;
    double omega_bar = 0.0;

    static OmegaSpec zero() { return {}; }
    static OmegaSpec rational(double r_shift, double c_star, double T_big);
    static OmegaSpec harmonic(double omega_bar);

    void validate() const;
    double operator()(double tau) const;
    /// t = h(tau) for the rational kind (Newton); identity otherwise.
    double physical_time(double tau) const;
};

struct InitSpec {
    enum class Kind { zero, block, left_filled, product, delta_approx };
    Kind kind = Kind::zero;
    double x_left = 0.0, x_right = 0.0;  // block
    double amplitude = 1.0;              // block, left_filled
    double cutoff_x = 0.0;               // left_filled: amplitude for x < cutoff_x
    std::vector<double> theta_profile;   // product
    std::function<double(double)> x_profile;  // product
    double x0 = 0.0, width = 0.1;        // delta_approx: unit-mass Gaussian in x, constant in theta
    double scale = 1.0;                  // multiplies whatever the kind produces

    static InitSpec block(double x_left, double x_right, double amplitude);
    static InitSpec left_filled(double amplitude, double cutoff_x);
    static InitSpec product(std::vector<double> theta_profile, std::function<double(double)> x_profile);
    static InitSpec delta_approx(double x0, double width);
};

/// One side of the x-interval. A wall sits at the window edge; a moving boundary sits at position(t)
/// inside the window and everything beyond it is inactive.
struct BoundarySpec {
    BcKind kind = BcKind::neumann;
    double value = 0.0;
    std::function<double(double t)> position;                 // moving_dirichlet only
    std::function<void(double t, double* values)> data;       // optional theta-dependent Dirichlet data
};

struct ModelSpec {
    ModelKind kind = ModelKind::local_general;
    TraitProfile profile;
    SpaceTimeGrid grid;
    InitSpec init;
    double t_start = 0.0;

    ReactionLaw reaction;          // local kinds and wave relaxation
    double rate = 1.0;             // growth rate r: nonlocal r n (1 - rho), local rate * f(u)
    bool reaction_off = false;     // pure diffusion/drift (heat-limit checks)

    double frame_speed = 0.0;      // x is measured in a frame moving right at this speed
    LogShift shift;                // linearized_dirichlet: boundary at shift.position(t) - frame_speed t
    bool use_shift = false;

    OmegaSpec omega;               // p_equation
    std::vector<double> Q_star;    // p_equation: ground-state weights
    double c_star = 0.0;           // p_equation: the frame is x - c* tau
    double lambda_star = 0.0;

    BoundarySpec left, right;      // defaults are filled in per kind by finalize()
    bool nonnegative = true;
    double blowup_threshold = 1e6;
    double clamp_tolerance = 1e-6; // clamped mass allowed, relative to current mass
    int rannacher_steps = 2;       // implicit Euler start-up steps

    /// Fill in kind-dependent defaults (boundaries, nonnegativity) and check consistency.
    void finalize();
    void validate() const;
    /// Level of the tracked quantity behind the front (u_m, 1 for rho).
    double upper_level() const;
    /// rho for the nonlocal model, max over theta otherwise.
    bool tracks_rho() const { return kind == ModelKind::nonlocal_toads; }
};

ModelSpec make_nonlocal_model(const TraitProfile& profile, const SpaceTimeGrid& grid, const InitSpec& init,
                              double r_rate = 1.0);
ModelSpec make_local_model(const TraitProfile& profile, const ReactionLaw& reaction, const SpaceTimeGrid& grid,
                           const InitSpec& init);
/// z_t = D z_xx + z_thth - A z_x + z for x > X(t), solved in the frame moving at shift.c.
ModelSpec make_linearized_model(const TraitProfile& profile, const LogShift& shift, const SpaceTimeGrid& grid,
                                const InitSpec& init);
/// (1 - omega) p_tau = D p_xx + L p - (2 lambda* D + A) p_x for x > c* tau, solved in y = x - c* tau.
ModelSpec make_p_equation_model(const TraitProfile& profile, const SpectralData& spectral, const OmegaSpec& omega,
                                const SpaceTimeGrid& grid, const InitSpec& init);

Field initial_field(const ModelSpec& model);

struct StepStats {
    long steps = 0;
    long clamped_cells = 0;
    double clamped_mass = 0.0;
    int window_shifts = 0;
    double running_max = 0.0;
};

/// Time stepper holding the factorizations for one model. Fields passed to step() must come from
/// initial_field() of the same model or from an earlier step.
class Solver {
public:
    explicit Solver(ModelSpec model);
    ~Solver();
    Solver(Solver&&) noexcept;
    Solver& operator=(Solver&&) noexcept;

    const ModelSpec& model() const;
    /// Advance by one dt. The step index is recovered from field.t so resumed runs are bit-identical.
    void step(Field& field);
    const StepStats& stats() const;
    /// Active x-index range [first, last] at the field's current time.
    std::pair<int, int> active_range(const Field& field) const;

private:
    struct Impl;
    std::unique_ptr<Impl> impl_;
};

/// Single step without keeping a solver around.
Field step(const Field& state, const ModelSpec& model);

struct SnapshotRecord {
    double t = 0.0;
    double mass = 0.0;       // sum values dx dtheta
    double max_value = 0.0;
    double x_offset = 0.0;
    long clamped_cells = 0;
    double clamped_mass = 0.0;
    std::uint64_t checksum = 0;
};

struct RunLog {
    std::vector<SnapshotRecord> records;
    double running_max = 0.0;
    long steps = 0;
};

struct RunOptions {
    std::vector<double> snapshot_times;
    bool keep_snapshots = true;
    std::function<void(const Field&, const SnapshotRecord&)> on_snapshot;
    std::function<void(const Field&)> on_step;
};

struct RunResult {
    std::vector<Field> snapshots;
    RunLog log;
    Field final_state;
};

/// Integrate from initial_field(model), or from `resume_from` (a snapshot of the same model).
RunResult run(const ModelSpec& model, const RunOptions& options, const Field* resume_from = nullptr);

SnapshotRecord describe_snapshot(const Field& field);

struct WaveProfile {
    Field phi;           // frame xi = x - c t
    double c = 0.0;
    double t_relaxed = 0.0;
    double last_change = 0.0;
};

struct WaveOptions {
    double xi_min = -10.0;
    double xi_max = 40.0;
    double dx = 0.05;
    double dt = 0.05;
    double check_interval = 1.0;
    double tol_wave = 1e-7;
    double t_max = 20000.0;
};

/// Relax to the travelling wave at speed c (left wall pinned to the upper state, right wall zero).
WaveProfile solve_travelling_wave(const TraitProfile& profile, const ReactionLaw& reaction, double c,
                                  const WaveOptions& options = {});

struct SandwichModels {
    ModelSpec lower;
    ModelSpec upper;
    double C_sandwich = 0.0;  // constant in n^p / C^p <= rho <= C n^{1/p}
    double a_lower = 0.0;     // lower init a n0
    double a_upper = 0.0;     // upper init abar n0
};

/// Local problems bracketing the nonlocal run. `running_max` is the bound M of the nonlocal solution.
SandwichModels build_sandwich(const ModelSpec& nonlocal, double C_harnack, double p_exponent, double running_max);

struct OrderingReport {
    std::vector<double> times;
    std::vector<double> lower_violation;  // max(u_lower - n, 0) per sampled time
    std::vector<double> upper_violation;  // max(n - u_upper, 0)
    double max_violation = 0.0;
    double running_max = 0.0;
};

/// Run lower, nonlocal and upper in lockstep on the same grid and record ordering violations for t >= t_from.
/// Throws OrderingViolatedAtT1 if the ordering already fails by more than `slack` at t = t_from.
OrderingReport check_sandwich_ordering(const ModelSpec& nonlocal, const SandwichModels& sandwich, double t_from,
                                       double slack = 1e-8, double sample_every = 1.0);

}  // namespace toadfront
