#pragma once

#include <string>
#include <utility>
#include <vector>

#include "toadfront/core_model.hpp"

namespace toadfront {

enum class TrackedQuantity { rho, max_theta };

const char* to_string(TrackedQuantity q);

/// Tracked profile along x: rho = integral over theta, or max over theta.
std::vector<double> tracked_profile(const Field& field, TrackedQuantity q);

/// Rightmost crossing of level m, by linear interpolation between neighbouring cells.
/// Throws LevelNotAttained if the quantity never reaches m.
double level_position(const Field& field, double m, TrackedQuantity q);

struct FrontTrace {
    double level = 0.5;
    TrackedQuantity quantity = TrackedQuantity::max_theta;
    std::vector<double> times;
    std::vector<double> positions;
    std::vector<double> skipped_times;  // snapshots where the level was not attained
};

FrontTrace extract_level_set(const std::vector<Field>& snapshots, double m, TrackedQuantity q);

enum class FitMode { free_c, fixed_c };

struct FitSpec {
    FitMode mode = FitMode::fixed_c;
    double c_star = 2.0;  // fixed_c only
    double t0 = 0.0;
    double t1 = 0.0;      // 0 means the last trace time
    double max_condition = 1e10;
    int min_samples = 20;
    bool enforce_window_rule = true;  // t0 >= max(20, t_end/4)
};

/// X ~ c_hat t - r_hat log t + x_hat.
struct DelayFit {
    double c_hat = 0.0;
    double r_hat = 0.0;
    double x_hat = 0.0;
    FitMode mode = FitMode::fixed_c;
    double t0 = 0.0, t1 = 0.0;
    int samples = 0;
    double residual_sup = 0.0;
    double condition_number = 0.0;
    std::vector<double> times;
    std::vector<double> positions;  // X_m(t) of the fitted samples
    std::vector<double> residuals;
};

DelayFit fit_bramson(const FrontTrace& trace, const FitSpec& spec);

struct TailFit {
    double lambda_hat = 0.0;
    double x_level = 0.0;  // X_level
    double x_from = 0.0, x_to = 0.0;
    int samples = 0;
};

/// -slope of log(max_theta u) over [X_level + from, X_level + to].
TailFit tail_decay_rate(const Field& field, double level = 0.01, double from = 5.0, double to = 15.0);

struct HarnackFieldOptions {
    TrackedQuantity cutoff_quantity = TrackedQuantity::max_theta;
    double cutoff_level = 1e-3;  // sample only x <= X_cutoff(t)
    long min_pairs = 10000;      // below this, every x-offset inside the ball is used
    int x_offsets = 12;          // x-offsets per side, endpoints included
};

struct HarnackWitness {
    double t = 0.0;
    double x = 0.0, theta = 0.0;
    double x2 = 0.0, theta2 = 0.0;
};

struct HarnackFieldResult {
    double C_emp = 0.0;
    std::vector<double> times;
    std::vector<double> C_per_snapshot;
    std::vector<long> pairs_per_snapshot;
    HarnackWitness witness;
};

/// max over snapshots and pairs |x - x'| + |theta - theta'| <= R of n(x, theta) / n(x', theta')^{1/p}.
HarnackFieldResult harnack_ratio_field(const std::vector<Field>& snapshots, double p, double R,
                                       const HarnackFieldOptions& options = {});

/// CSV emitters (rows with 17 significant digits, '#' header lines, config hash in the header).
void write_trace_csv(const std::string& path, const FrontTrace& trace, const std::string& config_hash,
                     const std::vector<std::pair<std::string, std::string>>& meta = {});
void write_fit_csv(const std::string& path, const DelayFit& fit, const std::string& config_hash,
                   const std::vector<std::pair<std::string, std::string>>& meta = {});

}  // namespace toadfront
