#include <basisglasso/error.hpp>
#include <basisglasso/predict.hpp>

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>

namespace bgl {

namespace {

SpdFactor posterior_factor(const Matrix& phi_obs, const Matrix& Q, double tau2)
{
    if (!(tau2 > 0.0))
        throw ConfigError("kriging requires tau2 > 0");
    if (phi_obs.cols() != Q.rows())
        throw ConfigError("kriging: basis width does not match Q");
    return SpdFactor(Q + phi_obs.transpose() * phi_obs / tau2,
                     "kriging: Q + Phi^T Phi / tau2");
}

Vector rowwise_quadratic(const SpdFactor& f, const Matrix& phi)
{
    // phi_i^T K^{-1} phi_i = ||L^{-1} phi_i||^2
    const Matrix half = f.llt().matrixL().solve(Matrix(phi.transpose()));
    return half.colwise().squaredNorm().transpose();
}

} // namespace

KrigingResult krige(const Matrix& phi_obs, const Matrix& phi_pred, const Matrix& Q, double tau2,
                    const Vector& y, bool include_nugget)
{
    if (y.size() != phi_obs.rows())
        throw DataError("krige: observation vector length does not match basis rows");
    if (!y.allFinite())
        throw DataError("krige: observations must be finite");
    const auto batch = krige_batch(phi_obs, phi_pred, Q, tau2, Matrix(y), include_nugget);
    return {batch.mean.col(0), batch.variance};
}

KrigingBatch krige_batch(const Matrix& phi_obs, const Matrix& phi_pred, const Matrix& Q,
                         double tau2, const Matrix& Y, bool include_nugget)
{
    if (phi_pred.cols() != phi_obs.cols())
        throw ConfigError("krige: prediction basis width differs from observation basis");
    const SpdFactor f = posterior_factor(phi_obs, Q, tau2);
    const Matrix coef = f.solve(Matrix(phi_obs.transpose() * Y)) / tau2;
    KrigingBatch out;
    out.mean = phi_pred * coef;
    out.variance = rowwise_quadratic(f, phi_pred);
    if (include_nugget)
        out.variance.array() += tau2;
    return out;
}

double normal_cdf(double z) { return 0.5 * std::erfc(-z / std::numbers::sqrt2); }

double normal_pdf(double z) { return std::exp(-0.5 * z * z) / std::sqrt(2.0 * std::numbers::pi); }

double crps_gaussian(double mu, double sigma, double y)
{
    if (!(sigma > 0.0))
        throw ConfigError("crps_gaussian: sigma must be positive");
    const double z = (y - mu) / sigma;
    return sigma * (z * (2.0 * normal_cdf(z) - 1.0) + 2.0 * normal_pdf(z) -
                    1.0 / std::sqrt(std::numbers::pi));
}

double effective_df(const Matrix& Q, const Matrix& phi_t_phi, double tau2)
{
    if (!(tau2 > 0.0))
        throw ConfigError("effective_df: tau2 must be positive");
    const SpdFactor f(Q + phi_t_phi / tau2, "effective_df: Q + Phi^T Phi / tau2");
    return f.solve(phi_t_phi).trace() / tau2;
}

double replicate_nll(const Matrix& Q, double tau2, const LikelihoodKernel& kernel)
{
    const double n = static_cast<double>(kernel.n);
    return 0.5 * static_cast<double>(kernel.m) *
           (total_nll(Q, tau2, kernel) + n * std::log(2.0 * std::numbers::pi));
}

Vector implied_sd(const Matrix& phi_eval, const Matrix& Q, double tau2, bool include_nugget)
{
    const SpdFactor f(Q, "implied_sd: Q");
    Vector var = rowwise_quadratic(f, phi_eval);
    if (include_nugget)
        var.array() += tau2;
    return var.cwiseMax(0.0).cwiseSqrt();
}

Vector implied_correlation(const Matrix& phi_eval, const Matrix& Q, const Vector& phi_center)
{
    if (phi_center.size() != Q.rows())
        throw ConfigError("implied_correlation: center basis row has the wrong length");
    const SpdFactor f(Q, "implied_correlation: Q");
    const Vector w = f.solve(phi_center);
    const double var0 = phi_center.dot(w);
    const Vector cov = phi_eval * w;
    const Vector var = rowwise_quadratic(f, phi_eval);
    Vector corr(phi_eval.rows());
    const double nan = std::numeric_limits<double>::quiet_NaN();
    for (Index i = 0; i < corr.size(); ++i) {
        const double denom = std::sqrt(var(i) * var0);
        corr(i) = denom > 0.0 ? std::clamp(cov(i) / denom, -1.0, 1.0) : nan;
    }
    return corr;
}

std::vector<Neighbor> neighborhood(const Matrix& Q, Index j, double threshold,
                                   const NodeGrid* grid)
{
    if (j < 0 || j >= Q.cols())
        throw ConfigError("neighborhood: column index out of range");
    std::vector<Neighbor> out;
    for (Index i = 0; i < Q.rows(); ++i) {
        if (i == j || !(std::abs(Q(i, j)) > threshold))
            continue;
        Neighbor nb{i, Q(i, j), std::nullopt};
        if (grid && static_cast<std::size_t>(i) < grid->size())
            nb.location = grid->nodes[static_cast<std::size_t>(i)];
        out.push_back(nb);
    }
    return out;
}

RecoveryMetrics recovery_metrics(const Matrix& Q_hat, const Matrix& Q_true,
                                 std::optional<double> zero_tol)
{
    if (Q_hat.rows() != Q_true.rows() || Q_hat.cols() != Q_true.cols())
        throw ConfigError("recovery_metrics: dimension mismatch");
    const Index ell = Q_true.rows();
    RecoveryMetrics r;
    r.zero_tol = zero_tol.value_or(1e-8 * Q_hat.cwiseAbs().maxCoeff());
    if (r.zero_tol < 0.0)
        throw ConfigError("recovery_metrics: zero_tol must be nonnegative");
    r.rel_frobenius = (Q_hat - Q_true).norm() / Q_true.norm();

    Index true_zero = 0, missed_zero = 0, true_nonzero = 0, missed_nonzero = 0;
    for (Index j = 0; j < ell; ++j)
        for (Index i = 0; i < j; ++i) {
            const bool est_zero = std::abs(Q_hat(i, j)) <= r.zero_tol;
            if (Q_true(i, j) == 0.0) {
                ++true_zero;
                missed_zero += est_zero ? 0 : 1;
            } else {
                ++true_nonzero;
                missed_nonzero += est_zero ? 1 : 0;
            }
        }
    r.pct_missed_zeros = true_zero ? 100.0 * static_cast<double>(missed_zero) / static_cast<double>(true_zero) : 0.0;
    r.pct_missed_nonzeros = true_nonzero ? 100.0 * static_cast<double>(missed_nonzero) / static_cast<double>(true_nonzero) : 0.0;

    const double ell_d = static_cast<double>(ell);
    Eigen::LLT<Matrix> hat(Q_hat);
    Eigen::LLT<Matrix> tru(Q_true);
    const bool hat_ok = hat.info() == Eigen::Success && (hat.matrixLLT().diagonal().array() > 0).all();
    const bool tru_ok = tru.info() == Eigen::Success && (tru.matrixLLT().diagonal().array() > 0).all();
    if (hat_ok && tru_ok) {
        const double ld_hat = 2.0 * hat.matrixLLT().diagonal().array().log().sum();
        const double ld_true = 2.0 * tru.matrixLLT().diagonal().array().log().sum();
        r.kl_score = (Q_hat.array() * Q_true.array()).sum() - (ld_hat + ld_true) - ell_d;
        const double tr_ratio = tru.solve(Q_hat).trace();
        r.kl_conventional = 0.5 * (tr_ratio - (ld_hat - ld_true) - ell_d);
    } else {
        r.kl_diagnostic = hat_ok ? "true precision is not positive definite"
                                 : "estimated precision is not positive definite";
    }
    return r;
}

} // namespace bgl
