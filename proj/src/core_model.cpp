#include "toadfront/core_model.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <numeric>
#include <sstream>

namespace toadfront {

ThetaDomain ThetaDomain::make(double lo, double hi, int n) {
    ThetaDomain d{lo, hi, n};
    d.validate();
    return d;
}

void ThetaDomain::validate() const {
    if (!(theta_min < theta_max) || !std::isfinite(theta_min) || !std::isfinite(theta_max))
        throw Error(ErrorCode::InvalidArgument, "theta_min must be < theta_max");
    if (n_theta < 4 && n_theta != 1)
        throw Error(ErrorCode::InvalidArgument, "n_theta must be >= 4 (or 1 for the scalar limit)");
}

std::vector<double> ThetaDomain::centers() const {
    std::vector<double> c(n_theta);
    for (int j = 0; j < n_theta; ++j) c[j] = center(j);
    return c;
}

void TraitProfile::validate() const {
    domain.validate();
    if (static_cast<int>(D.size()) != domain.n_theta || static_cast<int>(A.size()) != domain.n_theta)
        throw Error(ErrorCode::InvalidArgument, "profile length differs from n_theta");
    for (double d : D)
        if (!(d > 0.0) || !std::isfinite(d))
            throw Error(ErrorCode::NonPositiveDiffusivity, "D must be positive and finite");
    for (double a : A)
        if (!std::isfinite(a)) throw Error(ErrorCode::InvalidArgument, "A must be finite");
}

namespace {

std::string trim(std::string_view s) {
    auto b = s.find_first_not_of(" \t\r\n");
    if (b == std::string_view::npos) return {};
    auto e = s.find_last_not_of(" \t\r\n");
    return std::string(s.substr(b, e - b + 1));
}

std::vector<double> parse_numbers(const std::string& body, std::string_view spec) {
    std::string cleaned = body;
    for (char& c : cleaned)
        if (c == ',' || c == '[' || c == ']') c = ' ';
    std::istringstream in(cleaned);
    std::vector<double> out;
    std::string tok;
    while (in >> tok) {
        std::size_t used = 0;
        double v = 0.0;
        try {
            v = std::stod(tok, &used);
        } catch (const std::exception&) {
            used = 0;
        }
        if (used != tok.size())
            throw Error(ErrorCode::UnknownBuiltin, "bad number '" + tok + "' in '" + std::string(spec) + "'");
        out.push_back(v);
    }
    return out;
}

}  // namespace

std::vector<double> sample_function(std::string_view spec, const ThetaDomain& domain) {
    domain.validate();
    const std::string s = trim(spec);
    const auto space = s.find_first_of(" \t[");
    const std::string head = s.substr(0, space);
    const std::string rest = space == std::string::npos ? std::string() : s.substr(space);
    const auto args = parse_numbers(rest, spec);
    const int n = domain.n_theta;
    std::vector<double> out(n);

    if (head == "const") {
        if (args.size() != 1) throw Error(ErrorCode::UnknownBuiltin, "const expects one value");
        std::fill(out.begin(), out.end(), args[0]);
    } else if (head == "theta") {
        if (!args.empty()) throw Error(ErrorCode::UnknownBuiltin, "theta takes no parameters");
        for (int j = 0; j < n; ++j) out[j] = domain.center(j);
    } else if (head == "affine") {
        if (args.size() != 2) throw Error(ErrorCode::UnknownBuiltin, "affine expects 'a b'");
        for (int j = 0; j < n; ++j) out[j] = args[0] + args[1] * domain.center(j);
    } else if (head == "table") {
        if (static_cast<int>(args.size()) != n)
            throw Error(ErrorCode::UnknownBuiltin, "table length must equal n_theta");
        out = args;
    } else {
        throw Error(ErrorCode::UnknownBuiltin, "unknown profile '" + s + "'");
    }
    return out;
}

TraitProfile sample_profile(std::string_view d_spec, const ThetaDomain& domain, std::string_view a_spec) {
    TraitProfile prof;
    prof.domain = domain;
    prof.D = sample_function(d_spec, domain);
    prof.A = sample_function(a_spec, domain);
    for (double d : prof.D)
        if (!(d > 0.0))
            throw Error(ErrorCode::NonPositiveDiffusivity, "profile '" + std::string(d_spec) + "' is not positive");
    return prof;
}

DriftNormalization normalize_drift(const std::vector<double>& A) {
    DriftNormalization out;
    if (A.empty()) return out;
    // Uniform cells: the midpoint-rule mean is the arithmetic mean.
    const double mean = std::accumulate(A.begin(), A.end(), 0.0) / static_cast<double>(A.size());
    out.shift = mean;
    out.A.resize(A.size());
    for (std::size_t j = 0; j < A.size(); ++j) out.A[j] = A[j] - mean;
    // One more pass removes the rounding residue so that repeated calls are exact fixed points.
    const double residue = std::accumulate(out.A.begin(), out.A.end(), 0.0) / static_cast<double>(A.size());
    if (residue != 0.0) {
        for (double& a : out.A) a -= residue;
        out.shift += residue;
    }
    return out;
}

double theta_integral(const double* f, const ThetaDomain& domain) {
    double s = 0.0;
    for (int j = 0; j < domain.n_theta; ++j) s += f[j];
    return s * domain.dtheta();
}

double theta_integral(const std::vector<double>& f, const ThetaDomain& domain) {
    if (static_cast<int>(f.size()) != domain.n_theta)
        throw Error(ErrorCode::InvalidArgument, "theta_integral: size mismatch");
    return theta_integral(f.data(), domain);
}

void SpaceTimeGrid::validate() const {
    if (!(dx > 0.0) || !(dt > 0.0) || !(t_end > 0.0) || !(x_max > x_min))
        throw Error(ErrorCode::InvalidArgument, "grid: dx, dt, t_end must be positive and x_max > x_min");
    const double cells = (x_max - x_min) / dx;
    if (std::abs(cells - std::round(cells)) > 1e-9 * std::max(1.0, cells))
        throw Error(ErrorCode::InvalidArgument, "grid: (x_max - x_min)/dx must be an integer");
    if (window.kind == WindowKind::follow_front && !(window.margin_left > 0.0 && window.margin_right > 0.0))
        throw Error(ErrorCode::InvalidArgument, "grid: follow_front needs positive margins");
}

int SpaceTimeGrid::n_x() const { return static_cast<int>(std::lround((x_max - x_min) / dx)); }

const char* to_string(FieldRole role) {
    switch (role) {
        case FieldRole::n: return "n";
        case FieldRole::u: return "u";
        case FieldRole::z: return "z";
        case FieldRole::p: return "p";
        case FieldRole::w: return "w";
        case FieldRole::xi: return "xi";
    }
    return "?";
}

Field Field::zeros(int n_x, double x_offset, double dx, const ThetaDomain& theta, FieldRole role) {
    if (n_x < 3) throw Error(ErrorCode::InvalidArgument, "field needs at least 3 x cells");
    Field f;
    f.n_x = n_x;
    f.x_offset = x_offset;
    f.dx = dx;
    f.theta = theta;
    f.role = role;
    f.values.assign(static_cast<std::size_t>(n_x) * theta.n_theta, 0.0);
    return f;
}

bool Field::all_finite() const {
    return std::all_of(values.begin(), values.end(), [](double v) { return std::isfinite(v); });
}

std::uint64_t fnv1a(const void* data, std::size_t bytes, std::uint64_t seed) {
    const auto* p = static_cast<const unsigned char*>(data);
    std::uint64_t h = seed;
    for (std::size_t i = 0; i < bytes; ++i) {
        h ^= p[i];
        h *= 1099511628211ULL;
    }
    return h;
}

std::uint64_t Field::checksum() const {
    std::uint64_t h = fnv1a(values.data(), values.size() * sizeof(double));
    const double meta[3] = {t, x_offset, dx};
    return fnv1a(meta, sizeof(meta), h);
}

std::vector<double> total_density(const Field& field) {
    std::vector<double> rho(field.n_x);
    for (int i = 0; i < field.n_x; ++i) rho[i] = theta_integral(field.row(i), field.theta);
    return rho;
}

std::vector<double> max_over_theta(const Field& field) {
    std::vector<double> m(field.n_x);
    const int nt = field.n_theta();
    for (int i = 0; i < field.n_x; ++i) m[i] = *std::max_element(field.row(i), field.row(i) + nt);
    return m;
}

ReactionLaw ReactionLaw::lower(double C, double p) {
    ReactionLaw r;
    r.kind = Kind::lower_sandwich;
    r.C = C;
    r.p = p;
    r.validate();
    return r;
}

ReactionLaw ReactionLaw::upper(double C, double p) {
    ReactionLaw r;
    r.kind = Kind::upper_sandwich;
    r.C = C;
    r.p = p;
    r.validate();
    return r;
}

ReactionLaw ReactionLaw::bounded(double M_delta, double delta) {
    ReactionLaw r;
    r.kind = Kind::kpp_bounded;
    r.M_delta = M_delta;
    r.delta = delta;
    r.validate();
    return r;
}

ReactionLaw ReactionLaw::modified(double m_bar) {
    ReactionLaw r;
    r.kind = Kind::wave_modified;
    r.m_bar = m_bar;
    r.validate();
    return r;
}

void ReactionLaw::validate() const {
    switch (kind) {
        case Kind::kpp_quadratic: break;
        case Kind::lower_sandwich:
        case Kind::upper_sandwich:
            if (!(C > 0.0) || !(p > 0.0)) throw Error(ErrorCode::InvalidArgument, "sandwich needs C > 0, p > 0");
            break;
        case Kind::kpp_bounded:
            if (!(delta > 2.0 / 3.0) || !(M_delta > 0.0))
                throw Error(ErrorCode::InvalidArgument, "kpp_bounded needs delta > 2/3 and M > 0");
            break;
        case Kind::wave_modified:
            if (!(m_bar > 0.0 && m_bar < 1.0)) throw Error(ErrorCode::InvalidArgument, "m_bar must lie in (0,1)");
            break;
    }
}

double ReactionLaw::operator()(double u) const {
    switch (kind) {
        case Kind::kpp_quadratic: return u * (1.0 - u);
        case Kind::lower_sandwich: return u * (1.0 - C * std::pow(std::max(u, 0.0), 1.0 / p));
        case Kind::upper_sandwich: return u * (1.0 - std::pow(std::max(u, 0.0), p) / std::pow(C, p));
        case Kind::kpp_bounded: return u - M_delta * std::pow(std::max(u, 0.0), 1.0 + delta);
        case Kind::wave_modified: return u * (1.0 - u) * (1.0 - u / m_bar);
    }
    return 0.0;
}

double ReactionLaw::upper_state() const {
    switch (kind) {
        case Kind::kpp_quadratic: return 1.0;
        case Kind::lower_sandwich: return std::pow(C, -p);
        case Kind::upper_sandwich: return C;
        case Kind::kpp_bounded: return std::pow(M_delta, -1.0 / delta);
        case Kind::wave_modified: return m_bar;
    }
    return 1.0;
}

std::string ReactionLaw::describe() const {
    std::ostringstream os;
    switch (kind) {
        case Kind::kpp_quadratic: os << "kpp_quadratic"; break;
        case Kind::lower_sandwich: os << "lower_sandwich C=" << C << " p=" << p; break;
        case Kind::upper_sandwich: os << "upper_sandwich C=" << C << " p=" << p; break;
        case Kind::kpp_bounded: os << "kpp_bounded M=" << M_delta << " delta=" << delta; break;
        case Kind::wave_modified: os << "wave_modified m_bar=" << m_bar; break;
    }
    return os.str();
}

}  // namespace toadfront
