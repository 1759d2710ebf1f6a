#include <basisglasso/dcfit.hpp>
#include <basisglasso/error.hpp>

#include <chrono>
#include <cmath>

namespace bgl {

std::string to_string(PenaltyForm form)
{
    return form == PenaltyForm::constant_offdiag ? "constant" : "distance";
}

PenaltyForm parse_penalty_form(const std::string& name)
{
    if (name == "constant" || name == "constant-offdiag")
        return PenaltyForm::constant_offdiag;
    if (name == "distance" || name == "distance-scaled")
        return PenaltyForm::distance_scaled;
    throw ConfigError("unknown penalty form '" + name + "'");
}

std::string to_string(StopReason reason)
{
    switch (reason) {
    case StopReason::tolerance: return "tolerance";
    case StopReason::max_iters: return "max_iters";
    case StopReason::max_seconds: return "max_seconds";
    }
    return "unknown";
}

Matrix build_penalty(const PenaltySpec& spec, Index ell, const Matrix* distances,
                     std::span<const bool> global_mask)
{
    if (spec.lambda < 0.0 || (spec.gamma && *spec.gamma < 0.0))
        throw ConfigError("build_penalty: lambda and gamma must be nonnegative");
    if (!global_mask.empty() && static_cast<Index>(global_mask.size()) != ell)
        throw ConfigError("build_penalty: global mask length does not match ell");
    auto is_global = [&](Index j) {
        return !global_mask.empty() && global_mask[static_cast<std::size_t>(j)];
    };

    Matrix lam(ell, ell);
    if (spec.form == PenaltyForm::constant_offdiag) {
        lam.setConstant(spec.lambda);
    } else {
        if (!distances)
            throw ConfigError("build_penalty: distance form requires node geometry");
        std::vector<Index> local;
        for (Index j = 0; j < ell; ++j)
            if (!is_global(j))
                local.push_back(j);
        const auto nl = static_cast<Index>(local.size());
        if (distances->rows() == ell && distances->cols() == ell) {
            lam = spec.lambda * (*distances);
        } else if (distances->rows() == nl && distances->cols() == nl) {
            lam.setZero();
            for (Index b = 0; b < nl; ++b)
                for (Index a = 0; a < nl; ++a)
                    lam(local[static_cast<std::size_t>(a)], local[static_cast<std::size_t>(b)]) =
                        spec.lambda * (*distances)(a, b);
        } else {
            throw ConfigError("build_penalty: distance matrix has the wrong size");
        }
        if ((lam.array() < 0.0).any())
            throw ConfigError("build_penalty: distances must be nonnegative");
    }
    if (spec.gamma) {
        for (Index j = 0; j < ell; ++j)
            if (is_global(j)) {
                lam.row(j).setConstant(*spec.gamma);
                lam.col(j).setConstant(*spec.gamma);
            }
    }
    lam = symmetrize(lam);
    lam.diagonal().setZero();
    return lam;
}

Matrix dc_gradient(const Matrix& Q, const LikelihoodKernel& kernel, double tau2)
{
    if (!(tau2 > 0.0))
        throw ConfigError("dc_gradient: tau2 must be positive");
    const SpdFactor kf(Q + kernel.PhiTPhi / tau2, "dc_gradient: Q + Phi^T Phi / tau2");
    const Matrix M = kf.inverse();
    const Matrix A = kernel.PhiTSPhi / (tau2 * tau2);
    return symmetrize(M + M * A * M);
}

FitReport dc_fit(const LikelihoodKernel& kernel, double tau2, const Matrix& Lambda,
                 const DcOptions& options)
{
    return dc_fit(kernel, tau2, Lambda, Matrix::Identity(kernel.ell(), kernel.ell()), options);
}

FitReport dc_fit(const LikelihoodKernel& kernel, double tau2, const Matrix& Lambda,
                 const Matrix& Q0, const DcOptions& options)
{
    if (!(tau2 > 0.0))
        throw ConfigError("dc_fit: tau2 must be positive");
    const Index ell = kernel.ell();
    if (Lambda.rows() != ell || Lambda.cols() != ell || Q0.rows() != ell || Q0.cols() != ell)
        throw ConfigError("dc_fit: dimension mismatch between kernel, penalty and Q0");
    if ((Lambda.array() < 0.0).any())
        throw ConfigError("dc_fit: penalty weights must be nonnegative");

    const auto start = std::chrono::steady_clock::now();
    auto elapsed = [&] {
        return std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    };

    FitReport rep;
    rep.tau2 = tau2;
    rep.options = options;
    Matrix Q = symmetrize(Q0);
    double objective = penalized_objective(Q, tau2, kernel, Lambda);
    rep.objective_trace.push_back(objective);

    for (int iter = 1;; ++iter) {
        GlassoSolution sol;
        try {
            const Matrix G = dc_gradient(Q, kernel, tau2);
            sol = glasso_solve(G, Lambda, Q, options.inner);
        } catch (const Error& e) {
            throw Error(e.category(),
                        "dc_fit iteration " + std::to_string(iter) + ": " + e.what());
        }
        Matrix next = symmetrize(sol.Q);
        const double q_norm = Q.norm();
        const double rel = (next - Q).norm() / (q_norm > 0.0 ? q_norm : 1.0);
        const double next_objective = penalized_objective(next, tau2, kernel, Lambda);
        if (next_objective > objective + mm_slack * std::abs(objective))
            ++rep.monotonicity_violations;

        Q = std::move(next);
        objective = next_objective;
        rep.objective_trace.push_back(objective);
        rep.rel_change_trace.push_back(rel);
        rep.inner_iterations.push_back(sol.iterations);
        rep.inner_all_converged = rep.inner_all_converged && sol.converged;
        rep.iterations = iter;

        if (rel < options.tol) {
            rep.converged = true;
            rep.stop = StopReason::tolerance;
            break;
        }
        if (iter >= options.max_iters) {
            rep.stop = StopReason::max_iters;
            break;
        }
        if (elapsed() > options.max_seconds) {
            rep.stop = StopReason::max_seconds;
            break;
        }
    }
    rep.Q = std::move(Q);
    rep.wall_seconds = elapsed();
    return rep;
}

} // namespace bgl
