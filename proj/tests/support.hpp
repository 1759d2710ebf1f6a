#pragma once

// Independent reference computations used as test oracles. Everything here is
// dense and deliberately naive.

#include <basisglasso/likelihood.hpp>
#include <basisglasso/linalg.hpp>
#include <basisglasso/random.hpp>

#include <cmath>
#include <random>

namespace bgl::test {

inline Matrix random_matrix(Index rows, Index cols, Rng& rng, double scale = 1.0)
{
    std::normal_distribution<double> z(0.0, scale);
    Matrix a(rows, cols);
    for (Index j = 0; j < cols; ++j)
        for (Index i = 0; i < rows; ++i)
            a(i, j) = z(rng);
    return a;
}

/// A A^T / ell + shift I, well conditioned for small shift >= 0.5.
inline Matrix random_spd(Index ell, Rng& rng, double shift = 0.5)
{
    const Matrix a = random_matrix(ell, ell, rng);
    Matrix q = a * a.transpose() / static_cast<double>(ell);
    q.diagonal().array() += shift;
    return 0.5 * (q + q.transpose());
}

inline double uniform(Rng& rng, double lo, double hi)
{
    return std::uniform_real_distribution<double>(lo, hi)(rng);
}

/// Demeaned sample covariance with divisor m - 1, formed explicitly.
inline Matrix dense_cov(const Matrix& Y)
{
    const Index n = Y.rows(), m = Y.cols();
    Matrix S = Matrix::Zero(n, n);
    Vector mean = Vector::Zero(n);
    for (Index k = 0; k < m; ++k)
        mean += Y.col(k);
    mean /= static_cast<double>(m);
    for (Index k = 0; k < m; ++k) {
        const Vector d = Y.col(k) - mean;
        for (Index i = 0; i < n; ++i)
            for (Index j = 0; j < n; ++j)
                S(i, j) += d(i) * d(j);
    }
    return S / static_cast<double>(m - 1);
}

inline double dense_logdet(const Matrix& a)
{
    // via eigenvalues, independent of the Cholesky path in the library
    Eigen::SelfAdjointEigenSolver<Matrix> es(a);
    return es.eigenvalues().array().log().sum();
}

/// Exact Gaussian process kriging with Sigma = Phi Q^{-1} Phi^T + tau2 I.
struct DenseKriging
{
    Vector mean;
    Vector variance;
};

inline DenseKriging dense_kriging(const Matrix& phi_obs, const Matrix& phi_pred, const Matrix& Q,
                                  double tau2, const Vector& y, bool include_nugget)
{
    const Matrix Qinv = Q.inverse();
    Matrix sigma = phi_obs * Qinv * phi_obs.transpose();
    sigma.diagonal().array() += tau2;
    const Matrix cross = phi_pred * Qinv * phi_obs.transpose();
    const Matrix prior = phi_pred * Qinv * phi_pred.transpose();
    const auto lu = sigma.fullPivLu();
    DenseKriging out;
    out.mean = cross * lu.solve(y);
    const Matrix post = prior - cross * lu.solve(cross.transpose());
    out.variance = post.diagonal();
    if (include_nugget)
        out.variance.array() += tau2;
    return out;
}

/// g(Q) = logdet(Q + Phi^T Phi / tau2) - tr(A (Q + Phi^T Phi / tau2)^{-1}),
/// A = Phi^T S Phi / tau2^2; the concave part whose gradient dc_gradient returns.
inline double concave_part(const Matrix& Q, const LikelihoodKernel& k, double tau2)
{
    const Matrix K = Q + k.PhiTPhi / tau2;
    const Matrix A = k.PhiTSPhi / (tau2 * tau2);
    return dense_logdet(K) - (A * K.inverse()).trace();
}

/// Fourth-order central difference of f at 0.
template <class F>
double central_difference(F&& f, double h)
{
    return (-f(2 * h) + 8 * f(h) - 8 * f(-h) + f(-2 * h)) / (12 * h);
}

/// Proximal gradient for -logdet Q + tr(G Q) + lambda sum_{i != j} |Q_ij|
/// with backtracking that keeps Q positive definite.
inline Matrix proximal_gradient_glasso(const Matrix& G, double lambda, int iters = 200000,
                                       double tol = 1e-14)
{
    const Index ell = G.rows();
    auto smooth = [&](const Matrix& q) -> double {
        Eigen::LLT<Matrix> llt(q);
        if (llt.info() != Eigen::Success)
            return INFINITY;
        const Vector d = llt.matrixLLT().diagonal();
        if ((d.array() <= 0.0).any())
            return INFINITY;
        return -2.0 * d.array().log().sum() + (G.array() * q.array()).sum();
    };
    auto prox = [&](Matrix q, double t) {
        for (Index j = 0; j < ell; ++j)
            for (Index i = 0; i < ell; ++i)
                if (i != j) {
                    const double v = q(i, j);
                    q(i, j) = std::copysign(std::max(std::abs(v) - t * lambda, 0.0), v);
                }
        return q;
    };
    Matrix Q = Matrix(G.diagonal().cwiseInverse().asDiagonal());
    double f = smooth(Q);
    double t = 1.0;
    for (int it = 0; it < iters; ++it) {
        const Matrix grad = G - Q.inverse();
        Matrix next;
        double fn = INFINITY;
        for (int ls = 0; ls < 80; ++ls) {
            next = prox(Q - t * grad, t);
            fn = smooth(next);
            const Matrix d = next - Q;
            if (fn <= f + (grad.array() * d.array()).sum() + d.squaredNorm() / (2.0 * t))
                break;
            t *= 0.5;
        }
        const double change = (next - Q).norm();
        Q = next;
        f = fn;
        t *= 1.5;
        if (change < tol)
            break;
    }
    return Q;
}

} // namespace bgl::test
