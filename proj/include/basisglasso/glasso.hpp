#pragma once

#include <basisglasso/linalg.hpp>

#include <vector>

namespace bgl {

struct GlassoOptions
{
    double tol = 1e-6;               // relative min-norm subgradient
    int max_newton_iters = 200;
    double armijo_beta = 0.5;
    double armijo_sigma = 1e-4;
    int max_line_search = 40;
    // Newton direction: coordinate passes alternated with conjugate-gradient
    // solves on the support/sign face the coordinate pass picked. One round
    // is plain coordinate descent.
    int face_rounds = 3;
    int cg_iters = 20;
};

struct GlassoSolution
{
    Matrix Q;
    Matrix W;  // Q^{-1}
    int iterations = 0;
    double subgradient_norm = 0.0;  // relative to ||G||_F
    bool converged = false;
    std::vector<double> objective_trace;  // objective after each accepted step, starting at Q_init
};

inline double soft_threshold(double x, double t)
{
    if (x > t) return x - t;
    if (x < -t) return x + t;
    return 0.0;
}

/// -logdet Q + tr(G Q) + sum_ij Lambda_ij |Q_ij|
double glasso_objective(const Matrix& Q, const Matrix& G, const Matrix& Lambda);

/// Minimum-norm element of the subdifferential of the glasso objective at Q,
/// given W = Q^{-1}.
Matrix min_norm_subgradient(const Matrix& Q, const Matrix& W, const Matrix& G,
                            const Matrix& Lambda);

/// Proximal Newton (QUIC-style) solve of
///   min_{Q > 0} -logdet Q + tr(G Q) + ||Lambda o Q||_1.
/// The Newton direction comes from coordinate descent over the free set on the
/// l1-penalized quadratic model; the step from Armijo backtracking that keeps Q
/// positive definite.
GlassoSolution glasso_solve(const Matrix& G, const Matrix& Lambda, const Matrix& Q_init,
                            const GlassoOptions& options = {});

/// Primal minus dual objective for a constant off-diagonal penalty lambda,
/// using the dual point U = clip(Q^{-1} - G, +-lambda) with zero diagonal.
/// Returns +inf when G + U is not positive definite.
double duality_gap(const Matrix& Q, const Matrix& G, double lambda);

} // namespace bgl
