#include <basisglasso/error.hpp>
#include <basisglasso/likelihood.hpp>

#include <Eigen/Eigenvalues>

#include <array>
#include <cmath>
#include <limits>
#include <numeric>
#include <sstream>

namespace bgl {

LikelihoodKernel empirical_cov_projections(const Matrix& Y, const Matrix& phi)
{
    std::vector<Index> cols(static_cast<std::size_t>(Y.cols()));
    std::iota(cols.begin(), cols.end(), Index{0});
    return empirical_cov_projections(Y, phi, cols);
}

LikelihoodKernel empirical_cov_projections(const Matrix& Y, const Matrix& phi,
                                           std::span<const Index> cols,
                                           const Matrix* phi_t_phi)
{
    const auto m = static_cast<Index>(cols.size());
    if (m < 2)
        throw ConfigError("empirical covariance needs at least 2 replicates, got " +
                          std::to_string(m));
    if (Y.rows() != phi.rows())
        throw DataError("data has " + std::to_string(Y.rows()) + " rows but basis has " +
                        std::to_string(phi.rows()));

    Matrix yc(Y.rows(), m);
    for (Index k = 0; k < m; ++k)
        yc.col(k) = Y.col(cols[static_cast<std::size_t>(k)]);
    const Vector mean = yc.rowwise().mean();
    yc.colwise() -= mean;

    const double scale = 1.0 / static_cast<double>(m - 1);
    LikelihoodKernel k;
    k.n = Y.rows();
    k.m = m;
    k.PhiTPhi = phi_t_phi ? *phi_t_phi : Matrix(phi.transpose() * phi);
    const Matrix b = phi.transpose() * yc;  // ell x m
    k.PhiTSPhi = Matrix::Zero(b.rows(), b.rows());
    k.PhiTSPhi.selfadjointView<Eigen::Lower>().rankUpdate(b, scale);
    k.PhiTSPhi = k.PhiTSPhi.selfadjointView<Eigen::Lower>();
    k.trS = yc.squaredNorm() * scale;
    return k;
}

double reduced_nll(const Matrix& Q, double tau2, const LikelihoodKernel& kernel)
{
    if (!(tau2 > 0.0))
        throw ConfigError("reduced_nll: tau2 must be positive");
    const SpdFactor qf(Q, "reduced_nll: Q");
    const Matrix k = Q + kernel.PhiTPhi / tau2;
    const SpdFactor kf(k, "reduced_nll: Q + Phi^T Phi / tau2");
    const double trace = kf.solve(kernel.PhiTSPhi).trace() / (tau2 * tau2);
    return kf.logdet() - qf.logdet() - trace;
}

double total_nll(const Matrix& Q, double tau2, const LikelihoodKernel& kernel)
{
    return reduced_nll(Q, tau2, kernel) + static_cast<double>(kernel.n) * std::log(tau2) +
           kernel.trS / tau2;
}

double full_nll(const Matrix& Q, double tau2, const Matrix& phi, const Matrix& S)
{
    const SpdFactor qf(Q, "full_nll: Q");
    Matrix sigma = phi * qf.solve(Matrix(phi.transpose()));
    sigma.diagonal().array() += tau2;
    const SpdFactor sf(symmetrize(sigma), "full_nll: Phi Q^{-1} Phi^T + tau2 I");
    return sf.logdet() + sf.solve(S).trace();
}

double l1_penalty(const Matrix& Q, const Matrix& Lambda)
{
    return (Lambda.array() * Q.array().abs()).sum();
}

double penalized_objective(const Matrix& Q, double tau2, const LikelihoodKernel& kernel,
                           const Matrix& Lambda)
{
    return reduced_nll(Q, tau2, kernel) + l1_penalty(Q, Lambda);
}

StationaryObjective::StationaryObjective(const LikelihoodKernel& kernel)
    : trS_(kernel.trS), n_(static_cast<double>(kernel.n))
{
    Eigen::SelfAdjointEigenSolver<Matrix> es(kernel.PhiTPhi);
    p_ = es.eigenvalues().cwiseMax(0.0);
    const Matrix& v = es.eigenvectors();
    a_ = (v.transpose() * kernel.PhiTSPhi * v).diagonal();
}

double StationaryObjective::value(double alpha, double tau2) const
{
    const double ell = static_cast<double>(p_.size());
    const auto k = (alpha + p_.array() / tau2).eval();
    return k.log().sum() - ell * std::log(alpha) - (a_.array() / k).sum() / (tau2 * tau2) +
           n_ * std::log(tau2) + trS_ / tau2;
}

Eigen::Vector2d StationaryObjective::log_gradient(double alpha, double tau2) const
{
    const double ell = static_cast<double>(p_.size());
    const double t = tau2;
    const auto k = (alpha + p_.array() / t).eval();
    const auto h = (t * t * k).eval();
    const double d_alpha = (1.0 / k).sum() - ell / alpha + (a_.array() * t * t / h.square()).sum();
    const double d_tau = (-p_.array() / (t * t) / k).sum() +
                         (a_.array() * (2.0 * t * alpha + p_.array()) / h.square()).sum() +
                         n_ / t - trS_ / (t * t);
    return {alpha * d_alpha, t * d_tau};
}

namespace {

struct BfgsResult
{
    Eigen::Vector2d x;
    double f;
};

// BFGS with backtracking Armijo line search in (log alpha, log tau2).
BfgsResult minimize_bfgs(const StationaryObjective& obj, Eigen::Vector2d x)
{
    auto eval = [&](const Eigen::Vector2d& z) {
        return obj.value(std::exp(z(0)), std::exp(z(1)));
    };
    auto grad = [&](const Eigen::Vector2d& z) {
        return obj.log_gradient(std::exp(z(0)), std::exp(z(1)));
    };
    double f = eval(x);
    if (!std::isfinite(f)) {
        std::ostringstream os;
        os << "estimate_nugget: non-finite objective at alpha=" << std::exp(x(0))
           << ", tau2=" << std::exp(x(1));
        throw NumericError(os.str());
    }
    Eigen::Vector2d g = grad(x);
    Eigen::Matrix2d h = Eigen::Matrix2d::Identity();
    for (int iter = 0; iter < 1000; ++iter) {
        if (g.lpNorm<Eigen::Infinity>() < 1e-10 * (1.0 + std::abs(f)))
            break;
        Eigen::Vector2d dir = -h * g;
        if (dir.dot(g) >= 0.0) {
            h.setIdentity();
            dir = -g;
        }
        // cap the step so exp() stays representable
        const double len = dir.lpNorm<Eigen::Infinity>();
        if (len > 5.0)
            dir *= 5.0 / len;
        double step = 1.0;
        Eigen::Vector2d xn;
        double fn = 0.0;
        bool accepted = false;
        for (int ls = 0; ls < 60; ++ls) {
            xn = x + step * dir;
            fn = eval(xn);
            if (std::isfinite(fn) && fn <= f + 1e-4 * step * g.dot(dir)) {
                accepted = true;
                break;
            }
            step *= 0.5;
        }
        if (!accepted)
            break;
        const Eigen::Vector2d gn = grad(xn);
        const Eigen::Vector2d s = xn - x;
        const Eigen::Vector2d y = gn - g;
        const double sy = s.dot(y);
        if (sy > 1e-14 * s.norm() * y.norm()) {
            const double rho = 1.0 / sy;
            const Eigen::Matrix2d I = Eigen::Matrix2d::Identity();
            h = (I - rho * s * y.transpose()) * h * (I - rho * y * s.transpose()) +
                rho * s * s.transpose();
        }
        const bool stalled = std::abs(f - fn) <= 1e-15 * (1.0 + std::abs(f));
        x = xn;
        f = fn;
        g = gn;
        if (stalled && s.lpNorm<Eigen::Infinity>() < 1e-12)
            break;
    }
    return {x, f};
}

} // namespace

NuggetEstimate estimate_nugget(const LikelihoodKernel& kernel)
{
    if (kernel.n < 1)
        throw ConfigError("estimate_nugget: empty kernel");
    const StationaryObjective obj(kernel);
    const double base = kernel.trS / static_cast<double>(kernel.n);
    if (!(base > 0.0))
        throw NumericError("estimate_nugget: tr(S) is zero; nugget is not identifiable");
    const std::array<Eigen::Vector2d, 3> starts{
        Eigen::Vector2d(std::log(0.1), std::log(0.1 * base)),
        Eigen::Vector2d(std::log(1.0), std::log(base)),
        Eigen::Vector2d(std::log(10.0), std::log(base))};

    NuggetEstimate best;
    best.objective = std::numeric_limits<double>::infinity();
    for (const auto& x0 : starts) {
        best.start_objectives.push_back(obj.value(std::exp(x0(0)), std::exp(x0(1))));
        const auto r = minimize_bfgs(obj, x0);
        best.end_objectives.push_back(r.f);
        if (r.f < best.objective) {
            best.objective = r.f;
            best.alpha = std::exp(r.x(0));
            best.tau2 = std::exp(r.x(1));
        }
    }
    return best;
}

} // namespace bgl
