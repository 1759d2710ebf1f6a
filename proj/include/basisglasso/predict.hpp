#pragma once

#include <basisglasso/basis.hpp>
#include <basisglasso/likelihood.hpp>
#include <basisglasso/linalg.hpp>

#include <optional>
#include <string>
#include <vector>

namespace bgl {

struct KrigingResult
{
    Vector mean;
    Vector variance;
};

/// Coefficient-space kriging. With K = Q + Phi_obs^T Phi_obs / tau2,
///   mean = Phi_pred K^{-1} Phi_obs^T y / tau2,
///   variance_i = phi_i^T K^{-1} phi_i (+ tau2 when include_nugget).
KrigingResult krige(const Matrix& phi_obs, const Matrix& phi_pred, const Matrix& Q, double tau2,
                    const Vector& y, bool include_nugget = true);

/// Kriging means for every column of Y (n_obs x m); variances do not depend on
/// the data and are shared.
struct KrigingBatch
{
    Matrix mean;  // n_pred x m
    Vector variance;
};
KrigingBatch krige_batch(const Matrix& phi_obs, const Matrix& phi_pred, const Matrix& Q,
                         double tau2, const Matrix& Y, bool include_nugget = true);

double normal_cdf(double z);
double normal_pdf(double z);

/// Closed-form CRPS of N(mu, sigma^2) at y.
double crps_gaussian(double mu, double sigma, double y);

/// tr((Q + Phi^T Phi / tau2)^{-1} Phi^T Phi) / tau2, the trace of the hat matrix.
double effective_df(const Matrix& Q, const Matrix& phi_t_phi, double tau2);

/// (m / 2) [reduced_nll + n log tau2 + tr(S) / tau2 + n log(2 pi)]
double replicate_nll(const Matrix& Q, double tau2, const LikelihoodKernel& kernel);

inline double aic(double nll_total, double eff_df) { return 2.0 * nll_total + 2.0 * eff_df; }

/// Pointwise process standard deviation sqrt(phi(s)^T Q^{-1} phi(s)); tau2 is
/// added to the variance when include_nugget is set.
Vector implied_sd(const Matrix& phi_eval, const Matrix& Q, double tau2 = 0.0,
                  bool include_nugget = false);

/// Correlation of the process at each row of phi_eval with the point whose
/// basis row is phi_center. NaN where the standard deviation vanishes.
Vector implied_correlation(const Matrix& phi_eval, const Matrix& Q, const Vector& phi_center);

struct Neighbor
{
    Index index = 0;
    double value = 0.0;
    std::optional<Point> location;
};

/// Off-diagonal entries of column j with |Q_ij| > threshold.
std::vector<Neighbor> neighborhood(const Matrix& Q, Index j, double threshold,
                                   const NodeGrid* grid = nullptr);

struct RecoveryMetrics
{
    double rel_frobenius = 0.0;
    std::optional<double> kl_score;         // tr(Qhat Q) - logdet(Qhat Q) - ell
    std::optional<double> kl_conventional;  // (tr(Qhat Q^{-1}) - logdet(Qhat Q^{-1}) - ell) / 2
    std::string kl_diagnostic;
    double pct_missed_zeros = 0.0;
    double pct_missed_nonzeros = 0.0;
    double zero_tol = 0.0;
};

/// Recovery scores against a known truth. zero_tol defaults to 1e-8 max|Qhat|.
RecoveryMetrics recovery_metrics(const Matrix& Q_hat, const Matrix& Q_true,
                                 std::optional<double> zero_tol = std::nullopt);

} // namespace bgl
