#pragma once

#include <basisglasso/linalg.hpp>

#include <span>
#include <vector>

namespace bgl {

/// Everything the reduced likelihood needs, in ell x ell space.
struct LikelihoodKernel
{
    Matrix PhiTPhi;   // Phi^T Phi
    Matrix PhiTSPhi;  // Phi^T S Phi
    double trS = 0.0;
    Index n = 0;
    Index m = 0;

    Index ell() const { return PhiTPhi.rows(); }
};

/// Projections of the demeaned, (m-1)-normalized sample covariance S of the
/// columns of Y. S itself (n x n) is never formed.
LikelihoodKernel empirical_cov_projections(const Matrix& Y, const Matrix& phi);

/// Same, restricted to the replicate columns in `cols`. `phi_t_phi` may be
/// passed to skip recomputing Phi^T Phi.
LikelihoodKernel empirical_cov_projections(const Matrix& Y, const Matrix& phi,
                                           std::span<const Index> cols,
                                           const Matrix* phi_t_phi = nullptr);

/// logdet(Q + Phi^T Phi / tau2) - logdet(Q) - tr(Phi^T S Phi (Q + Phi^T Phi / tau2)^{-1}) / tau2^2
double reduced_nll(const Matrix& Q, double tau2, const LikelihoodKernel& kernel);

/// reduced_nll + n log tau2 + tr(S) / tau2, i.e. twice the negative
/// log-likelihood without the n log(2 pi) constant.
double total_nll(const Matrix& Q, double tau2, const LikelihoodKernel& kernel);

/// Dense n x n evaluation logdet(Sigma) + tr(S Sigma^{-1}), Sigma = Phi Q^{-1} Phi^T + tau2 I.
/// Only feasible for small n; used as an oracle.
double full_nll(const Matrix& Q, double tau2, const Matrix& phi, const Matrix& S);

/// sum_ij Lambda_ij |Q_ij|
double l1_penalty(const Matrix& Q, const Matrix& Lambda);

double penalized_objective(const Matrix& Q, double tau2, const LikelihoodKernel& kernel,
                           const Matrix& Lambda);

struct NuggetEstimate
{
    double tau2 = 0.0;
    double alpha = 0.0;
    double objective = 0.0;
    // objective at each start and at the optimum reached from it
    std::vector<double> start_objectives;
    std::vector<double> end_objectives;
};

/// Evaluates total_nll(alpha I, tau2) in O(ell) after an eigendecomposition of
/// Phi^T Phi.
class StationaryObjective
{
public:
    explicit StationaryObjective(const LikelihoodKernel& kernel);

    double value(double alpha, double tau2) const;
    /// Gradient with respect to (log alpha, log tau2).
    Eigen::Vector2d log_gradient(double alpha, double tau2) const;

private:
    Vector p_;  // eigenvalues of Phi^T Phi
    Vector a_;  // diag(V^T Phi^T S Phi V)
    double trS_;
    double n_;
};

/// Minimizes total_nll over Q = alpha I and tau2 from three starting points.
NuggetEstimate estimate_nugget(const LikelihoodKernel& kernel);

} // namespace bgl
