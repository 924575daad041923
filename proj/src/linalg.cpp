#include "toadfront/linalg.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>

#include "toadfront/errors.hpp"

namespace toadfront::linalg {

void solve_tridiagonal(const std::vector<double>& a, const std::vector<double>& b,
                       const std::vector<double>& c, std::vector<double>& d) {
    TridiagonalLU lu(a, b, c);
    lu.solve(d.data());
}

TridiagonalLU::TridiagonalLU(const std::vector<double>& a, const std::vector<double>& b,
                             const std::vector<double>& c)
    : a_(a), c_(b.size()), inv_pivot_(b.size()) {
    const std::size_t n = b.size();
    if (a.size() != n || c.size() != n) throw Error(ErrorCode::InvalidArgument, "tridiagonal: size mismatch");
    double pivot = b[0];
    for (std::size_t i = 0; i < n; ++i) {
        if (i > 0) pivot = b[i] - a[i] * c_[i - 1];
        if (pivot == 0.0) throw Error(ErrorCode::InvalidArgument, "tridiagonal: zero pivot");
        inv_pivot_[i] = 1.0 / pivot;
        c_[i] = (i + 1 < n ? c[i] : 0.0) * inv_pivot_[i];
    }
}

void TridiagonalLU::solve(double* d) const {
    const std::size_t n = inv_pivot_.size();
    d[0] *= inv_pivot_[0];
    for (std::size_t i = 1; i < n; ++i) d[i] = (d[i] - a_[i] * d[i - 1]) * inv_pivot_[i];
    for (std::size_t i = n - 1; i-- > 0;) d[i] -= c_[i] * d[i + 1];
}

LeastSquaresResult least_squares(const std::vector<double>& X, int cols, const std::vector<double>& y) {
    const int rows = static_cast<int>(y.size());
    if (cols <= 0 || static_cast<int>(X.size()) != rows * cols || rows < cols)
        throw Error(ErrorCode::InvalidArgument, "least_squares: bad shapes");
    Eigen::Map<const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>> A(X.data(), rows, cols);
    Eigen::Map<const Eigen::VectorXd> b(y.data(), rows);
    Eigen::JacobiSVD<Eigen::MatrixXd> svd(A, Eigen::ComputeThinU | Eigen::ComputeThinV);
    const auto& s = svd.singularValues();
    LeastSquaresResult out;
    const double smin = s(s.size() - 1);
    out.condition_number = smin > 0.0 ? (s(0) / smin) * (s(0) / smin) : INFINITY;
    // Householder QR gives the exact least-squares solution; the SVD is only for conditioning.
    Eigen::VectorXd coef = A.colPivHouseholderQr().solve(b);
    out.coef.assign(coef.data(), coef.data() + cols);
    Eigen::VectorXd r = b - A * coef;
    out.residuals.assign(r.data(), r.data() + rows);
    out.max_abs_residual = r.size() ? r.cwiseAbs().maxCoeff() : 0.0;
    return out;
}

LeastSquaresResult fit_line(const std::vector<double>& x, const std::vector<double>& y) {
    std::vector<double> X(2 * x.size());
    for (std::size_t i = 0; i < x.size(); ++i) {
        X[2 * i] = x[i];
        X[2 * i + 1] = 1.0;
    }
    return least_squares(X, 2, y);
}

}  // namespace toadfront::linalg
