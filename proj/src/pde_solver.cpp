#include "toadfront/pde_solver.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "toadfront/linalg.hpp"

#if defined(__SSE__)
#include <xmmintrin.h>
#endif

namespace toadfront {

const char* to_string(ModelKind kind) {
    switch (kind) {
        case ModelKind::nonlocal_toads: return "nonlocal_toads";
        case ModelKind::local_toads: return "local_toads";
        case ModelKind::local_general: return "local_general";
        case ModelKind::linearized_dirichlet: return "linearized_dirichlet";
        case ModelKind::p_equation: return "p_equation";
        case ModelKind::wave_relaxation: return "wave_relaxation";
    }
    return "?";
}

double LogShift::position(double t) const { return c * t - r_shift * std::log1p(t / T_big); }

OmegaSpec OmegaSpec::rational(double r_shift, double c_star, double T_big) {
    OmegaSpec o;
    o.kind = Kind::rational;
    o.r_shift = r_shift;
    o.c_star = c_star;
    o.T_big = T_big;
    o.validate();
    return o;
}

OmegaSpec OmegaSpec::harmonic(double omega_bar) {
    OmegaSpec o;
    o.kind = Kind::harmonic;
    o.omega_bar = omega_bar;
    return o;
}

void OmegaSpec::validate() const {
    if (kind == Kind::rational) {
        if (!(c_star > 0.0) || !(T_big > 0.0) || r_shift < 0.0)
            throw Error(ErrorCode::InvalidArgument, "omega: need c* > 0, T > 0, r >= 0");
        // tau(t) is increasing iff r / (c T) < 1
        if (!(r_shift < c_star * T_big))
            throw Error(ErrorCode::InvalidArgument, "omega: T_big must exceed r/c* for the time change to be one-to-one");
    }
}

double OmegaSpec::physical_time(double tau) const {
    if (kind != Kind::rational) return tau;
    const double k = r_shift / c_star;
    double t = std::max(tau, 0.0);
    for (int it = 0; it < 100; ++it) {
        const double f = t - k * std::log1p(t / T_big) - tau;
        const double df = 1.0 - k / (T_big + t);
        const double next = t - f / df;
        if (std::abs(next - t) <= 1e-15 * (1.0 + std::abs(t))) return next;
        t = next;
    }
    return t;
}

double OmegaSpec::operator()(double tau) const {
    switch (kind) {
        case Kind::zero: return 0.0;
        case Kind::rational: return r_shift / (c_star * (physical_time(tau) + T_big));
        case Kind::harmonic: return tau > 0.0 ? omega_bar / tau : 0.0;
    }
    return 0.0;
}

InitSpec InitSpec::block(double x_left, double x_right, double amplitude) {
    InitSpec s;
    s.kind = Kind::block;
    s.x_left = x_left;
    s.x_right = x_right;
    s.amplitude = amplitude;
    return s;
}

InitSpec InitSpec::left_filled(double amplitude, double cutoff_x) {
    InitSpec s;
    s.kind = Kind::left_filled;
    s.amplitude = amplitude;
    s.cutoff_x = cutoff_x;
    return s;
}

InitSpec InitSpec::product(std::vector<double> theta_profile, std::function<double(double)> x_profile) {
    InitSpec s;
    s.kind = Kind::product;
    s.theta_profile = std::move(theta_profile);
    s.x_profile = std::move(x_profile);
    return s;
}

InitSpec InitSpec::delta_approx(double x0, double width) {
    InitSpec s;
    s.kind = Kind::delta_approx;
    s.x0 = x0;
    s.width = width;
    return s;
}

void ModelSpec::finalize() {
    switch (kind) {
        case ModelKind::linearized_dirichlet:
            if (left.kind == BcKind::neumann) {
                left.kind = BcKind::moving_dirichlet;
                left.value = 0.0;
                const LogShift s = shift;
                const double v = frame_speed;
                const bool active = use_shift;
                left.position = [s, v, active](double t) { return (active ? s.position(t) : s.c * t) - v * t; };
            }
            break;
        case ModelKind::p_equation:
            if (left.kind == BcKind::neumann) {
                left.kind = BcKind::dirichlet;
                left.value = 0.0;
            }
            break;
        case ModelKind::wave_relaxation:
            left.kind = BcKind::dirichlet;
            left.value = reaction.upper_state();
            right.kind = BcKind::dirichlet;
            right.value = 0.0;
            break;
        default: break;
    }
    validate();
}

void ModelSpec::validate() const {
    profile.validate();
    grid.validate();
    reaction.validate();
    if (!(grid.t_end > t_start)) throw Error(ErrorCode::InvalidArgument, "model: t_end must exceed t_start");
    if (kind == ModelKind::p_equation) {
        if (static_cast<int>(Q_star.size()) != profile.size())
            throw Error(ErrorCode::InvalidArgument, "p_equation needs Q* on the model's theta grid");
        omega.validate();
    }
    if (kind == ModelKind::nonlocal_toads && !(rate > 0.0))
        throw Error(ErrorCode::InvalidArgument, "nonlocal model needs r > 0");
    for (const auto* b : {&left, &right})
        if (b->kind == BcKind::moving_dirichlet && !b->position)
            throw Error(ErrorCode::InvalidArgument, "moving boundary without a position function");
    if (init.kind == InitSpec::Kind::product &&
        (static_cast<int>(init.theta_profile.size()) != profile.size() || !init.x_profile))
        throw Error(ErrorCode::InvalidArgument, "product init needs theta profile of size n_theta and an x profile");
}

double ModelSpec::upper_level() const {
    switch (kind) {
        case ModelKind::nonlocal_toads: return 1.0;
        case ModelKind::local_toads:
        case ModelKind::local_general:
        case ModelKind::wave_relaxation: return reaction.upper_state();
        default: return 1.0;
    }
}

ModelSpec make_nonlocal_model(const TraitProfile& profile, const SpaceTimeGrid& grid, const InitSpec& init,
                              double r_rate) {
    ModelSpec m;
    m.kind = ModelKind::nonlocal_toads;
    m.profile = profile;
    m.grid = grid;
    m.init = init;
    m.rate = r_rate;
    m.finalize();
    return m;
}

ModelSpec make_local_model(const TraitProfile& profile, const ReactionLaw& reaction, const SpaceTimeGrid& grid,
                           const InitSpec& init) {
    ModelSpec m;
    m.kind = ModelKind::local_general;
    m.profile = profile;
    m.reaction = reaction;
    m.grid = grid;
    m.init = init;
    m.finalize();
    return m;
}

ModelSpec make_linearized_model(const TraitProfile& profile, const LogShift& shift, const SpaceTimeGrid& grid,
                                const InitSpec& init) {
    ModelSpec m;
    m.kind = ModelKind::linearized_dirichlet;
    m.profile = profile;
    m.grid = grid;
    m.init = init;
    m.shift = shift;
    m.use_shift = true;
    m.frame_speed = shift.c;
    m.finalize();
    return m;
}

ModelSpec make_p_equation_model(const TraitProfile& profile, const SpectralData& spectral, const OmegaSpec& omega,
                                const SpaceTimeGrid& grid, const InitSpec& init) {
    ModelSpec m;
    m.kind = ModelKind::p_equation;
    m.profile = profile;
    m.grid = grid;
    m.init = init;
    m.omega = omega;
    m.Q_star = spectral.Q_star;
    m.c_star = spectral.c_star;
    m.lambda_star = spectral.lambda_star;
    m.finalize();
    return m;
}

namespace {

void fill_inactive(Field& f, const ModelSpec& m, double t, int k0, int k1, std::vector<double>& g);

double boundary_value(const BoundarySpec& b, double t, int j, std::vector<double>& buf, int J) {
    if (!b.data) return b.value;
    buf.resize(J);
    b.data(t, buf.data());
    return buf[j];
}

}  // namespace

Field initial_field(const ModelSpec& model) {
    model.validate();
    const auto& g = model.grid;
    Field f = Field::zeros(g.n_x(), g.x_min, g.dx, model.profile.domain,
                           model.kind == ModelKind::nonlocal_toads ? FieldRole::n
                           : model.kind == ModelKind::linearized_dirichlet ? FieldRole::z
                           : model.kind == ModelKind::p_equation ? FieldRole::p
                                                                 : FieldRole::u);
    f.t = model.t_start;
    f.bc_left = {model.left.kind, model.left.value};
    f.bc_right = {model.right.kind, model.right.value};
    const int J = f.n_theta();
    const auto& in = model.init;
    for (int i = 0; i < f.n_x; ++i) {
        const double x = f.x(i);
        for (int j = 0; j < J; ++j) {
            double v = 0.0;
            switch (in.kind) {
                case InitSpec::Kind::zero: break;
                case InitSpec::Kind::block: v = (x >= in.x_left && x <= in.x_right) ? in.amplitude : 0.0; break;
                case InitSpec::Kind::left_filled: v = x < in.cutoff_x ? in.amplitude : 0.0; break;
                case InitSpec::Kind::product: v = in.theta_profile[j] * in.x_profile(x); break;
                case InitSpec::Kind::delta_approx: {
                    const double s = (x - in.x0) / in.width;
                    v = std::exp(-0.5 * s * s) / (std::sqrt(2.0 * M_PI) * in.width);
                    break;
                }
            }
            f.at(i, j) = in.scale * v;
        }
    }
    if (model.left.kind == BcKind::moving_dirichlet || model.right.kind == BcKind::moving_dirichlet) {
        Solver s(model);
        const auto [k0, k1] = s.active_range(f);
        std::vector<double> buf;
        fill_inactive(f, model, f.t, k0, k1, buf);
    }
    return f;
}

namespace {

// Ghost closure for one side: u_ghost = a_j + s * u_edge.
struct Ghost {
    int edge = 0;
    double s = 1.0;
    std::vector<double> a;
    double position = 0.0;  // boundary location (moving) or wall face
    bool moving = false;
};

void fill_inactive(Field& f, const ModelSpec& m, double t, int k0, int k1, std::vector<double>& g) {
    const int J = f.n_theta();
    std::vector<double> data(J);
    if (m.left.kind == BcKind::moving_dirichlet && k0 > 0) {
        const double X = m.left.position(t);
        for (int j = 0; j < J; ++j) data[j] = boundary_value(m.left, t, j, g, J);
        const double xk = f.x(k0);
        for (int i = 0; i < k0; ++i)
            for (int j = 0; j < J; ++j) {
                const double x = f.x(i);
                f.at(i, j) = x >= X ? data[j] + (f.at(k0, j) - data[j]) * (x - X) / (xk - X) : data[j];
            }
    }
    if (m.right.kind == BcKind::moving_dirichlet && k1 < f.n_x - 1) {
        const double X = m.right.position(t);
        for (int j = 0; j < J; ++j) data[j] = boundary_value(m.right, t, j, g, J);
        const double xk = f.x(k1);
        for (int i = k1 + 1; i < f.n_x; ++i)
            for (int j = 0; j < J; ++j) {
                const double x = f.x(i);
                f.at(i, j) = x <= X ? data[j] + (f.at(k1, j) - data[j]) * (X - x) / (X - xk) : data[j];
            }
    }
}

}  // namespace

struct Solver::Impl {
    ModelSpec m;
    int J = 1;
    double dx = 0.0, dt = 0.0, h = 0.0, dth = 1.0;
    ThetaOperator Lth;
    bool has_theta = false;
    StepStats stats;

    // x-operator bands M (e2, e1, d, f1, f2), affine part r, and LU of I - h M; all n_x * J, row-major.
    std::vector<double> e2, e1, dg, f1, f2, rc;
    std::vector<double> m2, m1, invd, u1, u2;
    std::vector<double> work, work2, rho, rho1, bufg, src;
    std::vector<double> b_now;
    double sigma_theta_cached = std::numeric_limits<double>::quiet_NaN();
    linalg::TridiagonalLU theta_lu;
    std::vector<double> th_a, th_b, th_c;

    explicit Impl(ModelSpec model) : m(std::move(model)) {
        m.validate();
        J = m.profile.size();
        dx = m.grid.dx;
        dt = m.grid.dt;
        h = 0.5 * dt;
        dth = m.profile.domain.dtheta();
        has_theta = J > 1;
        if (has_theta)
            Lth = m.kind == ModelKind::p_equation ? ground_state_operator(m.Q_star, m.profile.domain)
                                                  : laplacian_operator(m.profile.domain);
#if defined(__SSE__)
        // Leading-edge values underflow into subnormals on long runs; flush them.
        _mm_setcsr(_mm_getcsr() | 0x8040);
#endif
    }

    long step_index(const Field& f) const { return std::lround((f.t - m.t_start) / dt); }

    double sigma(double t) const {
        if (m.kind == ModelKind::p_equation) return 1.0 / (1.0 - m.omega(t));
        return 1.0;
    }

    double growth(double) const { return m.kind == ModelKind::linearized_dirichlet ? 1.0 : 0.0; }

    void drift(double t, std::vector<double>& b) const {
        b.resize(J);
        if (m.kind == ModelKind::p_equation) {
            const double om = m.omega(t);
            for (int j = 0; j < J; ++j)
                b[j] = (2.0 * m.lambda_star * m.profile.D[j] + m.profile.A[j]) / (1.0 - om) - m.c_star;
        } else {
            for (int j = 0; j < J; ++j) b[j] = m.profile.A[j] - m.frame_speed;
        }
    }

    Ghost ghost(const Field& f, const BoundarySpec& b, double t, bool left) {
        Ghost g;
        g.a.assign(J, 0.0);
        const int n = f.n_x;
        if (b.kind == BcKind::neumann) {
            g.edge = left ? 0 : n - 1;
            g.s = 1.0;
            return g;
        }
        if (b.kind == BcKind::dirichlet) {
            g.edge = left ? 0 : n - 1;
            g.s = -1.0;
            for (int j = 0; j < J; ++j) g.a[j] = 2.0 * boundary_value(b, t, j, bufg, J);
            return g;
        }
        g.moving = true;
        const double X = b.position(t);
        g.position = X;
        const double rel = (X - f.x_offset) / dx;
        double dist;
        if (left) {
            g.edge = static_cast<int>(std::ceil(rel));
            if (g.edge < 0) throw Error(ErrorCode::WindowOutsideGrid, "moving boundary left of the window");
            dist = f.x(g.edge) - X;
        } else {
            g.edge = static_cast<int>(std::floor(rel)) - 1;
            if (g.edge > n - 1) throw Error(ErrorCode::WindowOutsideGrid, "moving boundary right of the window");
            dist = X - f.x(g.edge);
        }
        g.s = 1.0 - dx / dist;
        for (int j = 0; j < J; ++j) g.a[j] = boundary_value(b, t, j, bufg, J) * (1.0 - g.s);
        return g;
    }

    std::pair<int, int> range(const Field& f, double t) {
        const Ghost L = ghost(f, m.left, t, true);
        const Ghost R = ghost(f, m.right, t, false);
        return {L.edge, R.edge};
    }

    // Assemble the x-bands of M = sigma D d_xx - b d_x on [k0, k1] with the ghost closures folded in,
    // then factor I - hh M.
    void assemble_x(const Field& f, double t, double hh, int& k0, int& k1) {
        const Ghost L = ghost(f, m.left, t, true);
        const Ghost R = ghost(f, m.right, t, false);
        k0 = L.edge;
        k1 = R.edge;
        if (k1 - k0 < 4) throw Error(ErrorCode::WindowOutsideGrid, "active x-interval has fewer than 5 cells");
        const std::size_t N = static_cast<std::size_t>(f.n_x) * J;
        for (auto* v : {&e2, &e1, &dg, &f1, &f2, &rc, &m2, &m1, &invd, &u1, &u2}) v->assign(N, 0.0);
        const double sg = sigma(t);
        drift(t, b_now);
        const double idx2 = 1.0 / (dx * dx), i2dx = 0.5 / dx;
        for (int i = k0; i <= k1; ++i) {
            for (int j = 0; j < J; ++j) {
                const std::size_t p = static_cast<std::size_t>(i) * J + j;
                const double dc = sg * m.profile.D[j] * idx2;
                const double b = b_now[j];
                double a2 = 0.0, a1 = dc, d = -2.0 * dc, c1 = dc, c2 = 0.0;
                // Central differences while the cell Peclet number is below one (monotone, and their
                // O(dx^2) error keeps the discrete minimal speed below the continuum one); upwind otherwise.
                const bool central = std::abs(b) * dx <= 2.0 * sg * m.profile.D[j];
                if (central) {
                    c1 -= b * i2dx;
                    a1 += b * i2dx;
                } else if (b >= 0.0 && i - 2 >= k0) {
                    d -= 3.0 * b * i2dx;
                    a1 += 4.0 * b * i2dx;
                    a2 -= b * i2dx;
                } else if (b < 0.0 && i + 2 <= k1) {
                    d += 3.0 * b * i2dx;
                    c1 -= 4.0 * b * i2dx;
                    c2 += b * i2dx;
                } else {
                    c1 -= b * i2dx;
                    a1 += b * i2dx;
                }
                double r = 0.0;
                if (i == k0) {
                    d += a1 * L.s;
                    r += a1 * L.a[j];
                    a1 = 0.0;
                }
                if (i == k1) {
                    d += c1 * R.s;
                    r += c1 * R.a[j];
                    c1 = 0.0;
                }
                e2[p] = a2;
                e1[p] = a1;
                dg[p] = d;
                f1[p] = c1;
                f2[p] = c2;
                rc[p] = r;
            }
        }
        // Banded LU of I - hh M without pivoting, vectorised over theta.
        for (int i = k0; i <= k1; ++i) {
            const std::size_t p = static_cast<std::size_t>(i) * J;
            for (int j = 0; j < J; ++j) {
                const std::size_t q = p + j;
                double a2 = -hh * e2[q], a1 = -hh * e1[q], d = 1.0 - hh * dg[q];
                double c1 = -hh * f1[q];
                const double c2 = -hh * f2[q];
                double l2 = 0.0, l1 = 0.0;
                if (i - 2 >= k0) {
                    const std::size_t q2 = q - 2 * J;
                    l2 = a2 * invd[q2];
                    a1 -= l2 * u1[q2];
                    d -= l2 * u2[q2];
                }
                if (i - 1 >= k0) {
                    const std::size_t q1 = q - J;
                    l1 = a1 * invd[q1];
                    d -= l1 * u1[q1];
                    c1 -= l1 * u2[q1];
                }
                m2[q] = l2;
                m1[q] = l1;
                invd[q] = 1.0 / d;
                u1[q] = c1;
                u2[q] = c2;
            }
        }
    }

    void solve_x(double* v, int k0, int k1) const {
        for (int i = k0; i <= k1; ++i) {
            double* row = v + static_cast<std::size_t>(i) * J;
            const std::size_t p = static_cast<std::size_t>(i) * J;
            if (i - 2 >= k0) {
                const double* r2 = row - 2 * J;
                for (int j = 0; j < J; ++j) row[j] -= m2[p + j] * r2[j];
            }
            if (i - 1 >= k0) {
                const double* r1 = row - J;
                for (int j = 0; j < J; ++j) row[j] -= m1[p + j] * r1[j];
            }
        }
        for (int i = k1; i >= k0; --i) {
            double* row = v + static_cast<std::size_t>(i) * J;
            const std::size_t p = static_cast<std::size_t>(i) * J;
            if (i + 1 <= k1) {
                const double* r1 = row + J;
                for (int j = 0; j < J; ++j) row[j] -= u1[p + j] * r1[j];
            }
            if (i + 2 <= k1) {
                const double* r2 = row + 2 * J;
                for (int j = 0; j < J; ++j) row[j] -= u2[p + j] * r2[j];
            }
            for (int j = 0; j < J; ++j) row[j] *= invd[p + j];
        }
    }

    // out = u + hh (M u + r) on active rows.
    void explicit_x(const double* u, double* out, double hh, int k0, int k1) const {
        for (int i = k0; i <= k1; ++i) {
            const std::size_t p = static_cast<std::size_t>(i) * J;
            const double* row = u + p;
            double* o = out + p;
            for (int j = 0; j < J; ++j) {
                double s = dg[p + j] * row[j] + rc[p + j];
                if (i - 1 >= k0) s += e1[p + j] * row[j - J];
                if (i - 2 >= k0) s += e2[p + j] * row[j - 2 * J];
                if (i + 1 <= k1) s += f1[p + j] * row[j + J];
                if (i + 2 <= k1) s += f2[p + j] * row[j + 2 * J];
                o[j] = row[j] + hh * s;
            }
        }
    }

    void prepare_theta(double sg_hh) {
        if (!has_theta || sg_hh == sigma_theta_cached) return;
        th_a.assign(J, 0.0);
        th_b.assign(J, 0.0);
        th_c.assign(J, 0.0);
        for (int j = 0; j < J; ++j) {
            const double w = Lth.inv_dth2 / Lth.cell_w[j];
            double diag = 0.0;
            if (j + 1 < J) {
                th_c[j] = -sg_hh * Lth.face_w[j] * w;
                diag += Lth.face_w[j] * w;
            }
            if (j > 0) {
                th_a[j] = -sg_hh * Lth.face_w[j - 1] * w;
                diag += Lth.face_w[j - 1] * w;
            }
            th_b[j] = 1.0 + sg_hh * diag;
        }
        theta_lu = linalg::TridiagonalLU(th_a, th_b, th_c);
        sigma_theta_cached = sg_hh;
    }

    void solve_theta(double* v, int k0, int k1) const {
        if (!has_theta) return;
        for (int i = k0; i <= k1; ++i) theta_lu.solve(v + static_cast<std::size_t>(i) * J);
    }

    void explicit_theta(const double* u, double* out, double sg_hh, int k0, int k1) const {
        if (!has_theta) {
            std::copy(u + static_cast<std::size_t>(k0) * J, u + static_cast<std::size_t>(k1 + 1) * J,
                      out + static_cast<std::size_t>(k0) * J);
            return;
        }
        std::vector<double> tmp(J);
        for (int i = k0; i <= k1; ++i) {
            const std::size_t p = static_cast<std::size_t>(i) * J;
            Lth.apply(u + p, tmp.data());
            for (int j = 0; j < J; ++j) out[p + j] = u[p + j] + sg_hh * tmp[j];
        }
    }

    double local_rate(double u) const {
        // Far-field values: the nonlinear correction is below rounding. Negative undershoots are
        // advanced linearly so a quadratic law cannot blow them up before the clamp.
        if (u < 1e-30) return u;
        return m.reaction(u);
    }

    void reaction(Field& f, double hh, int k0, int k1) {
        auto& v = f.values;
        const double g = growth(f.t);
        if (g != 0.0) {
            const double e = std::exp(g * hh);
            for (std::size_t p = static_cast<std::size_t>(k0) * J; p < static_cast<std::size_t>(k1 + 1) * J; ++p)
                v[p] *= e;
        }
        if (m.reaction_off) return;
        if (m.kind == ModelKind::nonlocal_toads) {
            const double r = m.rate;
            rho.resize(J);
            for (int i = k0; i <= k1; ++i) {
                double* row = v.data() + static_cast<std::size_t>(i) * J;
                double s = 0.0;
                for (int j = 0; j < J; ++j) s += row[j];
                const double rho0 = s * dth;
                double s1 = 0.0;
                for (int j = 0; j < J; ++j) {
                    rho[j] = row[j] + hh * r * row[j] * (1.0 - rho0);
                    s1 += rho[j];
                }
                const double rho1v = s1 * dth;
                for (int j = 0; j < J; ++j)
                    row[j] += 0.5 * hh * r * (row[j] * (1.0 - rho0) + rho[j] * (1.0 - rho1v));
            }
            return;
        }
        if (m.kind == ModelKind::local_toads || m.kind == ModelKind::local_general ||
            m.kind == ModelKind::wave_relaxation) {
            const double r = m.rate;
            auto f_of = [this](double u) { return local_rate(u); };
            for (std::size_t p = static_cast<std::size_t>(k0) * J; p < static_cast<std::size_t>(k1 + 1) * J; ++p) {
                const double u = v[p];
                const double k1v = r * f_of(u);
                const double u1v = u + hh * k1v;
                v[p] = u + 0.5 * hh * (k1v + r * f_of(u1v));
            }
        }
    }

    void post_step(Field& f, int k0, int k1) {
        auto& v = f.values;
        double mx = stats.running_max;
        const double cell = dx * dth;
        for (std::size_t p = static_cast<std::size_t>(k0) * J; p < static_cast<std::size_t>(k1 + 1) * J; ++p) {
            double& x = v[p];
            if (!(std::abs(x) <= m.blowup_threshold))
                throw Error(ErrorCode::StabilityBlowup, "value exceeds blowup threshold at t = " + std::to_string(f.t));
            if (m.nonnegative && x < 0.0) {
                if (x < -1e-12) {
                    ++stats.clamped_cells;
                    stats.clamped_mass += -x * cell;
                }
                x = 0.0;
            }
            mx = std::max(mx, x);
        }
        stats.running_max = mx;
    }

    void follow_window(Field& f) {
        const auto& w = m.grid.window;
        if (w.kind != WindowKind::follow_front) return;
        const double level = m.upper_level();
        auto q = [&](int i) {
            const double* row = f.row(i);
            if (m.tracks_rho()) {
                double s = 0.0;
                for (int j = 0; j < J; ++j) s += row[j];
                return s * dth;
            }
            return *std::max_element(row, row + J);
        };
        int i01 = -1;
        for (int i = f.n_x - 1; i >= 0; --i)
            if (q(i) >= 0.01 * level) {
                i01 = i;
                break;
            }
        if (i01 < 0) return;
        const double x01 = f.x(i01);
        const double ahead = f.x_offset + f.n_x * dx - x01;
        if (ahead >= w.margin_right) return;
        int i05 = -1;
        for (int i = i01; i >= 0; --i)
            if (q(i) >= 0.5 * level) {
                i05 = i;
                break;
            }
        // shift in chunks so the factorisation cache is not invalidated every step
        const int chunk = std::max(1, static_cast<int>(std::lround(0.1 * w.margin_right / dx)));
        const int need = static_cast<int>(std::ceil((w.margin_right - ahead) / dx)) + chunk;
        const int allowed =
            i05 < 0 ? need : std::max(0, static_cast<int>(std::floor((f.x(i05) - w.margin_left - f.x_offset) / dx)));
        const int s = std::min(need, allowed);
        if (s > 0) {
            std::move(f.values.begin() + static_cast<std::ptrdiff_t>(s) * J, f.values.end(), f.values.begin());
            std::fill(f.values.end() - static_cast<std::ptrdiff_t>(s) * J, f.values.end(), 0.0);
            f.x_offset += s * dx;
        }
        if (need > s) {
            // the window is too short for both margins: grow on the right
            f.values.resize(f.values.size() + static_cast<std::size_t>(need - s) * J, 0.0);
            f.n_x += need - s;
        }
        ++stats.window_shifts;
    }

    void step(Field& f) {
        if (f.n_theta() != J || std::abs(f.dx - dx) > 1e-15 * dx)
            throw Error(ErrorCode::InvalidArgument, "field does not match the model grid");
        const long n = step_index(f);
        const double t0 = m.t_start + n * dt;
        const double tm = t0 + h;
        const double t1 = m.t_start + (n + 1) * dt;
        int k0 = 0, k1 = 0;
        assemble_x(f, tm, h, k0, k1);
        const double sg_h = sigma(tm) * h;
        prepare_theta(sg_h);
        const std::size_t N = f.values.size();
        work.resize(N);
        work2.resize(N);

        // Wave relaxation only needs the steady state. The reaction enters both half sweeps as an explicit
        // source, which makes the fixed point of the step exactly M u + f(u) = 0 (no splitting error).
        const bool unsplit = m.kind == ModelKind::wave_relaxation;
        double* u = f.values.data();
        src.assign(N, 0.0);
        for (int i = k0; i <= k1; ++i)
            for (int j = 0; j < J; ++j) {
                const std::size_t p = static_cast<std::size_t>(i) * J + j;
                src[p] = rc[p];
                if (unsplit) src[p] += m.rate * local_rate(u[p]);
            }
        f.t = t0;
        if (!unsplit) reaction(f, h, k0, k1);
        if (n < m.rannacher_steps) {
            // two implicit Euler half steps damp the start-up oscillation of rough data
            for (int sub = 0; sub < 2; ++sub) {
                for (int i = k0; i <= k1; ++i)
                    for (int j = 0; j < J; ++j) {
                        const std::size_t p = static_cast<std::size_t>(i) * J + j;
                        u[p] += h * src[p];
                    }
                solve_x(u, k0, k1);
                solve_theta(u, k0, k1);
            }
        } else {
            explicit_theta(u, work.data(), sg_h, k0, k1);
            for (int i = k0; i <= k1; ++i)
                for (int j = 0; j < J; ++j) {
                    const std::size_t p = static_cast<std::size_t>(i) * J + j;
                    work[p] += h * src[p];
                }
            solve_x(work.data(), k0, k1);
            explicit_x(work.data(), work2.data(), h, k0, k1);
            for (int i = k0; i <= k1; ++i)
                for (int j = 0; j < J; ++j) {
                    const std::size_t p = static_cast<std::size_t>(i) * J + j;
                    work2[p] += h * (src[p] - rc[p]);
                }
            solve_theta(work2.data(), k0, k1);
            for (int i = k0; i <= k1; ++i) {
                const std::size_t p = static_cast<std::size_t>(i) * J;
                std::copy(work2.begin() + p, work2.begin() + p + J, f.values.begin() + p);
            }
        }
        f.t = tm;
        if (!unsplit) reaction(f, h, k0, k1);
        f.t = t1;
        post_step(f, k0, k1);
        const auto [a0, a1] = range(f, t1);
        fill_inactive(f, m, t1, a0, a1, bufg);
        follow_window(f);
        ++stats.steps;
    }
};

Solver::Solver(ModelSpec model) : impl_(std::make_unique<Impl>(std::move(model))) {}
Solver::~Solver() = default;
Solver::Solver(Solver&&) noexcept = default;
Solver& Solver::operator=(Solver&&) noexcept = default;

const ModelSpec& Solver::model() const { return impl_->m; }
void Solver::step(Field& field) { impl_->step(field); }
const StepStats& Solver::stats() const { return impl_->stats; }
std::pair<int, int> Solver::active_range(const Field& field) const { return impl_->range(field, field.t); }

Field step(const Field& state, const ModelSpec& model) {
    Solver s(model);
    Field out = state;
    s.step(out);
    return out;
}

SnapshotRecord describe_snapshot(const Field& f) {
    SnapshotRecord r;
    r.t = f.t;
    double s = 0.0, mx = 0.0;
    for (double v : f.values) {
        s += v;
        mx = std::max(mx, v);
    }
    r.mass = s * f.dx * f.theta.dtheta();
    r.max_value = mx;
    r.x_offset = f.x_offset;
    r.checksum = f.checksum();
    return r;
}

RunResult run(const ModelSpec& model, const RunOptions& options, const Field* resume_from) {
    Solver solver(model);
    const auto& m = solver.model();
    RunResult res;
    Field f = resume_from ? *resume_from : initial_field(m);
    const double dt = m.grid.dt;
    const long n_end = std::lround((m.grid.t_end - m.t_start) / dt);
    long n = std::lround((f.t - m.t_start) / dt);

    std::vector<long> snaps;
    for (double t : options.snapshot_times) {
        const long k = std::lround((t - m.t_start) / dt);
        if (k >= n && k <= n_end) snaps.push_back(k);
    }
    std::sort(snaps.begin(), snaps.end());
    snaps.erase(std::unique(snaps.begin(), snaps.end()), snaps.end());
    std::size_t next = 0;

    auto record = [&]() {
        auto rec = describe_snapshot(f);
        rec.clamped_cells = solver.stats().clamped_cells;
        rec.clamped_mass = solver.stats().clamped_mass;
        if (m.nonnegative && rec.clamped_mass > m.clamp_tolerance * std::max(rec.mass, 1e-300))
            throw Error(ErrorCode::NegativeDensity, "clamped mass exceeds tolerance at t = " + std::to_string(f.t));
        res.log.records.push_back(rec);
        if (options.on_snapshot) options.on_snapshot(f, rec);
        if (options.keep_snapshots) res.snapshots.push_back(f);
    };

    double running_max = 0.0;
    for (double v : f.values) running_max = std::max(running_max, v);
    if (next < snaps.size() && snaps[next] == n) {
        record();
        ++next;
    }
    while (n < n_end) {
        solver.step(f);
        ++n;
        if (options.on_step) options.on_step(f);
        if (next < snaps.size() && snaps[next] == n) {
            record();
            ++next;
        }
    }
    res.log.running_max = std::max(running_max, solver.stats().running_max);
    res.log.steps = solver.stats().steps;
    const double mass = describe_snapshot(f).mass;
    if (m.nonnegative && solver.stats().clamped_mass > m.clamp_tolerance * std::max(mass, 1e-300))
        throw Error(ErrorCode::NegativeDensity, "clamped mass exceeds tolerance at the end of the run");
    res.final_state = std::move(f);
    return res;
}

WaveProfile solve_travelling_wave(const TraitProfile& profile, const ReactionLaw& reaction, double c,
                                  const WaveOptions& opt) {
    ModelSpec m;
    m.kind = ModelKind::wave_relaxation;
    m.profile = profile;
    m.reaction = reaction;
    m.frame_speed = c;
    m.grid.x_min = opt.xi_min;
    m.grid.x_max = opt.xi_max;
    m.grid.dx = opt.dx;
    m.grid.dt = opt.dt;
    m.grid.t_end = opt.t_max;
    m.init = InitSpec::left_filled(reaction.upper_state(), 0.0);
    m.finalize();

    Solver solver(m);
    Field f = initial_field(solver.model());
    const long per_check = std::max(1L, std::lround(opt.check_interval / opt.dt));
    const long n_max = std::lround(opt.t_max / opt.dt);
    Field prev = f;
    WaveProfile out;
    out.c = c;
    for (long n = 0; n < n_max;) {
        for (long k = 0; k < per_check && n < n_max; ++k, ++n) solver.step(f);
        double change = 0.0;
        for (std::size_t p = 0; p < f.values.size(); ++p) change = std::max(change, std::abs(f.values[p] - prev.values[p]));
        out.last_change = change;
        if (change <= opt.tol_wave) {
            out.phi = std::move(f);
            out.t_relaxed = out.phi.t;
            return out;
        }
        prev = f;
    }
    throw Error(ErrorCode::NoConvergence, "travelling wave did not relax (last change " +
                                              std::to_string(out.last_change) + ")");
}

SandwichModels build_sandwich(const ModelSpec& nonlocal, double C_harnack, double p, double running_max) {
    if (nonlocal.kind != ModelKind::nonlocal_toads)
        throw Error(ErrorCode::InvalidArgument, "build_sandwich expects the nonlocal model");
    if (!(p > 1.0) || !(C_harnack > 0.0) || !(running_max > 0.0))
        throw Error(ErrorCode::InvalidArgument, "build_sandwich: need p > 1, C > 0, M > 0");
    const double L = nonlocal.profile.domain.length();
    const double r = nonlocal.rate;
    SandwichModels s;
    // rho <= |Theta| C n^{1/p} and n^p <= (C^p / |Theta|) rho with R = |Theta| in the pointwise Harnack bound
    s.C_sandwich = C_harnack * std::max(L, std::pow(L, -1.0 / p));
    s.a_lower = std::exp(-r * running_max * L);

    // n <= e^{r t} h with h the pure diffusion of n0. abar e^{k t} h is a subsolution of the upper equation
    // while k <= r (1 - (G/C)^p), G = e^r sup n0 bounding it on [0, 1]; abar e^k = e^r gives the ordering at t = 1.
    const Field n0 = initial_field(nonlocal);
    double n0max = 0.0;
    for (double v : n0.values) n0max = std::max(n0max, v);
    const double G = std::exp(r) * n0max;
    const double abar = std::exp(r * std::pow(G / s.C_sandwich, p));
    if (!std::isfinite(abar)) throw Error(ErrorCode::InvalidArgument, "build_sandwich: upper amplitude overflows");
    s.a_upper = abar;

    auto local = [&](const ReactionLaw& law, double scale) {
        ModelSpec m = nonlocal;
        m.kind = ModelKind::local_toads;
        m.reaction = law;
        m.rate = r;
        m.init.scale *= scale;
        m.finalize();
        return m;
    };
    s.lower = local(ReactionLaw::lower(s.C_sandwich, p), s.a_lower);
    s.upper = local(ReactionLaw::upper(s.C_sandwich, p), s.a_upper);
    return s;
}

OrderingReport check_sandwich_ordering(const ModelSpec& nonlocal, const SandwichModels& sw, double t_from,
                                       double slack, double sample_every) {
    if (nonlocal.grid.window.kind != WindowKind::fixed)
        throw Error(ErrorCode::InvalidArgument, "ordering check needs a fixed window shared by all three runs");
    Solver sn(nonlocal), sl(sw.lower), su(sw.upper);
    Field n = initial_field(sn.model()), lo = initial_field(sl.model()), up = initial_field(su.model());
    const double dt = nonlocal.grid.dt;
    const long n_end = std::lround((nonlocal.grid.t_end - nonlocal.t_start) / dt);
    const long k_from = std::lround((t_from - nonlocal.t_start) / dt);
    const long every = std::max(1L, std::lround(sample_every / dt));
    OrderingReport rep;
    for (long k = 0; k <= n_end; ++k) {
        if (k > 0) {
            sn.step(n);
            sl.step(lo);
            su.step(up);
        }
        if (k >= k_from && (k - k_from) % every == 0) {
            double vl = 0.0, vu = 0.0;
            for (std::size_t p = 0; p < n.values.size(); ++p) {
                vl = std::max(vl, lo.values[p] - n.values[p]);
                vu = std::max(vu, n.values[p] - up.values[p]);
            }
            rep.times.push_back(n.t);
            rep.lower_violation.push_back(vl);
            rep.upper_violation.push_back(vu);
            rep.max_violation = std::max({rep.max_violation, vl, vu});
            if (k == k_from && std::max(vl, vu) > slack)
                throw Error(ErrorCode::OrderingViolatedAtT1,
                            "ordering fails at t = " + std::to_string(n.t) + " by " + std::to_string(std::max(vl, vu)));
        }
    }
    rep.running_max = sn.stats().running_max;
    return rep;
}

}  // namespace toadfront
