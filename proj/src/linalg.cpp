#include <basisglasso/error.hpp>
#include <basisglasso/linalg.hpp>

#include <Eigen/Eigenvalues>

#include <cmath>

namespace bgl {

SpdFactor::SpdFactor(const Matrix& a, const std::string& what)
    : llt_(a)
{
    if (a.rows() != a.cols())
        throw NotSpdError(what + ": matrix is not square");
    if (llt_.info() != Eigen::Success || !a.allFinite())
        throw NotSpdError(what + ": Cholesky factorization failed (matrix not positive definite)");
    const auto diag = llt_.matrixLLT().diagonal();
    if ((diag.array() <= 0.0).any() || !diag.allFinite())
        throw NotSpdError(what + ": Cholesky factorization failed (nonpositive pivot)");
}

double SpdFactor::logdet() const
{
    return 2.0 * llt_.matrixLLT().diagonal().array().log().sum();
}

Matrix SpdFactor::inverse() const
{
    Matrix inv = llt_.solve(Matrix::Identity(size(), size()));
    return symmetrize(inv);
}

bool is_spd(const Matrix& a)
{
    if (a.rows() != a.cols() || !a.allFinite())
        return false;
    Eigen::LLT<Matrix> llt(a);
    if (llt.info() != Eigen::Success)
        return false;
    return (llt.matrixLLT().diagonal().array() > 0.0).all();
}

double min_eigenvalue(const Matrix& a)
{
    if (a.size() == 0)
        return 0.0;
    Eigen::SelfAdjointEigenSolver<Matrix> es(a, Eigen::EigenvaluesOnly);
    return es.eigenvalues()(0);
}

double psd_tolerance(const Matrix& a)
{
    if (a.size() == 0)
        return 0.0;
    Eigen::SelfAdjointEigenSolver<Matrix> es(a, Eigen::EigenvaluesOnly);
    return 1e-8 * es.eigenvalues().cwiseAbs().maxCoeff();
}

} // namespace bgl
