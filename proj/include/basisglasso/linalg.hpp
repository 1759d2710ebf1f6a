#pragma once

#include <Eigen/Dense>

#include <string>

namespace bgl {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;
using Index = Eigen::Index;

/// Cholesky factor of an SPD matrix. Throws NotSpdError naming `what` when
/// the factorization fails.
class SpdFactor
{
public:
    SpdFactor(const Matrix& a, const std::string& what);

    double logdet() const;
    Matrix inverse() const;
    Matrix solve(const Matrix& b) const { return llt_.solve(b); }
    Vector solve(const Vector& b) const { return llt_.solve(b); }
    const Eigen::LLT<Matrix>& llt() const { return llt_; }
    Index size() const { return llt_.rows(); }

private:
    Eigen::LLT<Matrix> llt_;
};

/// True when a Cholesky factorization of `a` succeeds.
bool is_spd(const Matrix& a);

double min_eigenvalue(const Matrix& a);

inline Matrix symmetrize(const Matrix& a) { return 0.5 * (a + a.transpose()); }

/// ||A||_2 based tolerance used when asserting positive semidefiniteness.
double psd_tolerance(const Matrix& a);

} // namespace bgl
