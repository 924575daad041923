#pragma once

#include <vector>

namespace toadfront::linalg {

/// Thomas algorithm. a: sub-diagonal (a[0] unused), b: diagonal, c: super-diagonal (c[n-1] unused).
/// The right side d is overwritten with the solution.
void solve_tridiagonal(const std::vector<double>& a, const std::vector<double>& b,
                       const std::vector<double>& c, std::vector<double>& d);

/// Factored tridiagonal matrix for repeated solves with the same coefficients.
class TridiagonalLU {
public:
    TridiagonalLU() = default;
    TridiagonalLU(const std::vector<double>& a, const std::vector<double>& b, const std::vector<double>& c);

    void solve(double* d) const;
    int size() const { return static_cast<int>(inv_pivot_.size()); }

private:
    std::vector<double> a_, c_, inv_pivot_;
};

struct LeastSquaresResult {
    std::vector<double> coef;
    std::vector<double> residuals;
    double condition_number = 0.0;  // of the normal equations, i.e. sigma_max^2 / sigma_min^2
    double max_abs_residual = 0.0;
};

/// Minimize ||X b - y||_2 for a row-major design matrix with `cols` columns.
LeastSquaresResult least_squares(const std::vector<double>& X, int cols, const std::vector<double>& y);

/// Straight-line fit y ~ slope * x + intercept.
LeastSquaresResult fit_line(const std::vector<double>& x, const std::vector<double>& y);

}  // namespace toadfront::linalg
