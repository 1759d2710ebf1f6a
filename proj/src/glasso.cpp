#include <basisglasso/error.hpp>
#include <basisglasso/glasso.hpp>

#include <algorithm>
#include <cmath>
#include <limits>
#include <utility>
#include <vector>

namespace bgl {

namespace {

struct Factored
{
    Matrix W;
    double logdet = 0.0;
};

bool try_factor(const Matrix& x, Factored& out)
{
    Eigen::LLT<Matrix> llt(x);
    if (llt.info() != Eigen::Success)
        return false;
    const auto diag = llt.matrixLLT().diagonal();
    if (!((diag.array() > 0.0).all()) || !diag.allFinite())
        return false;
    out.logdet = 2.0 * diag.array().log().sum();
    out.W = symmetrize(llt.solve(Matrix::Identity(x.rows(), x.cols())));
    return true;
}

double smooth_part(const Matrix& x, double logdet, const Matrix& G)
{
    return -logdet + (G.array() * x.array()).sum();
}

// Quadratic model of the composite objective along direction D.
double model_value(const Matrix& X, const Matrix& W, const Matrix& grad, const Matrix& Lambda,
                   const Matrix& D)
{
    const Matrix WD = W * D;
    return (grad.array() * D.array()).sum() + 0.5 * (WD.array() * WD.transpose().array()).sum() +
           (Lambda.array() * ((X + D).array().abs() - X.array().abs())).sum();
}

// Minimizes the Newton model over directions that keep the support and signs
// of X + D, by conjugate gradients, then clips sign changes to zero. D is
// replaced only when the model value improves.
void refine_on_face(const Matrix& X, const Matrix& W, const Matrix& grad, const Matrix& Lambda,
                    const std::vector<std::pair<Index, Index>>& free_set, int max_iters,
                    Matrix& D)
{
    const Index ell = X.rows();
    Matrix mask = Matrix::Zero(ell, ell);
    Matrix sign = Matrix::Zero(ell, ell);
    for (const auto& [i, j] : free_set) {
        const double v = X(i, j) + D(i, j);
        if (v == 0.0)
            continue;
        mask(i, j) = mask(j, i) = 1.0;
        sign(i, j) = sign(j, i) = v > 0.0 ? 1.0 : -1.0;
    }
    const Matrix lin = grad + (Lambda.array() * sign.array()).matrix();
    Matrix E = D;
    Matrix R = ((lin + W * E * W).array() * mask.array()).matrix();
    Matrix P = -R;
    double rr = R.squaredNorm();
    const double rr0 = rr;
    for (int k = 0; k < max_iters && rr > 1e-16 * rr0 && rr > 0.0; ++k) {
        const Matrix HP = ((W * P * W).array() * mask.array()).matrix();
        const double pHp = (P.array() * HP.array()).sum();
        if (!(pHp > 0.0))
            break;
        const double alpha = rr / pHp;
        E += alpha * P;
        R += alpha * HP;
        const double rr_new = R.squaredNorm();
        P = -R + (rr_new / rr) * P;
        rr = rr_new;
    }
    for (Index j = 0; j < ell; ++j)
        for (Index i = 0; i < ell; ++i)
            if (mask(i, j) != 0.0 && (X(i, j) + E(i, j)) * sign(i, j) < 0.0)
                E(i, j) = -X(i, j);
    if (model_value(X, W, grad, Lambda, E) < model_value(X, W, grad, Lambda, D))
        D = std::move(E);
}

} // namespace

double glasso_objective(const Matrix& Q, const Matrix& G, const Matrix& Lambda)
{
    const SpdFactor f(Q, "glasso_objective: Q");
    return smooth_part(Q, f.logdet(), G) + (Lambda.array() * Q.array().abs()).sum();
}

Matrix min_norm_subgradient(const Matrix& Q, const Matrix& W, const Matrix& G,
                            const Matrix& Lambda)
{
    const Index ell = Q.rows();
    Matrix sub(ell, ell);
    for (Index j = 0; j < ell; ++j)
        for (Index i = 0; i < ell; ++i) {
            const double g = G(i, j) - W(i, j);
            const double q = Q(i, j);
            if (q > 0.0)
                sub(i, j) = g + Lambda(i, j);
            else if (q < 0.0)
                sub(i, j) = g - Lambda(i, j);
            else
                sub(i, j) = soft_threshold(g, Lambda(i, j));
        }
    return sub;
}

GlassoSolution glasso_solve(const Matrix& G, const Matrix& Lambda, const Matrix& Q_init,
                            const GlassoOptions& options)
{
    const Index ell = G.rows();
    if (G.cols() != ell || Lambda.rows() != ell || Lambda.cols() != ell ||
        Q_init.rows() != ell || Q_init.cols() != ell)
        throw ConfigError("glasso_solve: dimension mismatch");
    if (!(options.tol > 0.0))
        throw ConfigError("glasso_solve: tol must be positive");
    if ((Lambda.array() < 0.0).any())
        throw ConfigError("glasso_solve: penalty weights must be nonnegative");
    if (!G.allFinite() || (G - G.transpose()).cwiseAbs().maxCoeff() >
                              1e-10 * std::max(1.0, G.cwiseAbs().maxCoeff()))
        throw DataError("glasso_solve: G must be finite and symmetric");
    if (min_eigenvalue(G) < -psd_tolerance(G))
        throw DataError("glasso_solve: G is not positive semidefinite");

    GlassoSolution sol;
    Matrix X = symmetrize(Q_init);
    Factored fac;
    if (!try_factor(X, fac))
        throw NotSpdError("glasso_solve: initial Q is not positive definite");
    const double g_norm = G.norm() > 0.0 ? G.norm() : 1.0;
    double F = smooth_part(X, fac.logdet, G) + (Lambda.array() * X.array().abs()).sum();
    sol.objective_trace.push_back(F);

    std::vector<std::pair<Index, Index>> free_set;
    free_set.reserve(static_cast<std::size_t>(ell * (ell + 1) / 2));
    Matrix D(ell, ell);
    Matrix U(ell, ell);  // U = D W

    for (int iter = 0;; ++iter) {
        const Matrix& W = fac.W;
        sol.subgradient_norm = min_norm_subgradient(X, W, G, Lambda).norm() / g_norm;
        if (sol.subgradient_norm < options.tol) {
            sol.converged = true;
            break;
        }
        if (iter >= options.max_newton_iters)
            break;

        const Matrix grad = G - W;
        free_set.clear();
        for (Index j = 0; j < ell; ++j)
            for (Index i = 0; i <= j; ++i)
                if (i == j || X(i, j) != 0.0 || std::abs(grad(i, j)) > Lambda(i, j))
                    free_set.emplace_back(i, j);

        D.setZero();
        U.setZero();
        const int sweeps = 1 + iter;
        const int rounds = std::max(1, options.face_rounds);
        for (int round = 0;; ++round) {
            for (int sweep = 0; sweep < sweeps; ++sweep) {
                double max_change = 0.0;
                for (const auto& [i, j] : free_set) {
                    const double a = i == j ? W(i, i) * W(i, i) : W(i, j) * W(i, j) + W(i, i) * W(j, j);
                    const double b = grad(i, j) + W.col(i).dot(U.col(j));
                    const double c = X(i, j) + D(i, j);
                    const double shrunk = soft_threshold(c - b / a, Lambda(i, j) / a);
                    // X + D lands exactly on zero when the coordinate is thresholded out
                    const double d_new = shrunk == 0.0 ? -X(i, j) : shrunk - X(i, j);
                    const double mu = d_new - D(i, j);
                    if (mu == 0.0)
                        continue;
                    max_change = std::max(max_change, std::abs(mu));
                    D(i, j) = d_new;
                    U.row(i) += mu * W.row(j);
                    if (i != j) {
                        D(j, i) = d_new;
                        U.row(j) += mu * W.row(i);
                    }
                }
                if (max_change == 0.0)
                    break;
            }
            if (round + 1 >= rounds)
                break;  // always finish with a coordinate pass
            refine_on_face(X, W, grad, Lambda, free_set, options.cg_iters, D);
            U.noalias() = D * W;
        }

        const double pen_x = (Lambda.array() * X.array().abs()).sum();
        const double pen_xd = (Lambda.array() * (X + D).array().abs()).sum();
        const double delta = (grad.array() * D.array()).sum() + pen_xd - pen_x;
        if (!(delta < 0.0))
            break;  // no descent direction left at working precision

        double step = 1.0;
        bool accepted = false;
        Matrix Xn;
        Factored fn;
        for (int ls = 0; ls < options.max_line_search; ++ls) {
            Xn = X + step * D;
            if (try_factor(Xn, fn)) {
                const double Fn =
                    smooth_part(Xn, fn.logdet, G) + (Lambda.array() * Xn.array().abs()).sum();
                // slack absorbs roundoff when the remaining decrease is below the resolution of F
                if (Fn <= F + options.armijo_sigma * step * delta +
                              1e-13 * std::max(1.0, std::abs(F))) {
                    F = Fn;
                    accepted = true;
                    break;
                }
            }
            step *= options.armijo_beta;
        }
        if (!accepted)
            break;
        X = std::move(Xn);
        fac = std::move(fn);
        sol.objective_trace.push_back(F);
        sol.iterations = iter + 1;
    }

    sol.Q = std::move(X);
    sol.W = std::move(fac.W);
    return sol;
}

double duality_gap(const Matrix& Q, const Matrix& G, double lambda)
{
    const SpdFactor qf(Q, "duality_gap: Q");
    const Matrix W = qf.inverse();
    const Index ell = Q.rows();
    Matrix U = (W - G).cwiseMax(-lambda).cwiseMin(lambda);
    U.diagonal().setZero();
    const Matrix dual_mat = G + U;
    Factored df;
    if (!try_factor(dual_mat, df))
        return std::numeric_limits<double>::infinity();
    double off_l1 = Q.cwiseAbs().sum() - Q.diagonal().cwiseAbs().sum();
    const double primal = -qf.logdet() + (G.array() * Q.array()).sum() + lambda * off_l1;
    const double dual = df.logdet + static_cast<double>(ell);
    return primal - dual;
}

} // namespace bgl
