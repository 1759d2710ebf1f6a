#pragma once

#include <basisglasso/glasso.hpp>
#include <basisglasso/likelihood.hpp>
#include <basisglasso/linalg.hpp>

#include <optional>
#include <span>
#include <string>
#include <vector>

namespace bgl {

enum class PenaltyForm { constant_offdiag, distance_scaled };

std::string to_string(PenaltyForm form);
PenaltyForm parse_penalty_form(const std::string& name);

struct PenaltySpec
{
    PenaltyForm form = PenaltyForm::constant_offdiag;
    double lambda = 0.0;
    std::optional<double> gamma;  // weight for rows/columns of global basis columns
};

/// Materialize Lambda. `distances` covers either all ell columns or only the
/// non-global ones (in column order); it is required for the distance form.
/// The diagonal is always zero.
Matrix build_penalty(const PenaltySpec& spec, Index ell, const Matrix* distances = nullptr,
                     std::span<const bool> global_mask = {});

/// Gradient of the concave part at Q: M + M A M with
/// M = (Q + Phi^T Phi / tau2)^{-1}, A = Phi^T S Phi / tau2^2.
Matrix dc_gradient(const Matrix& Q, const LikelihoodKernel& kernel, double tau2);

struct DcOptions
{
    double tol = 0.01;  // relative Frobenius change between outer iterates
    int max_iters = 200;
    double max_seconds = 3600.0;
    GlassoOptions inner;
};

enum class StopReason { tolerance, max_iters, max_seconds };
std::string to_string(StopReason reason);

struct FitReport
{
    Matrix Q;
    double tau2 = 0.0;
    std::vector<double> objective_trace;   // penalized objective at Q0, Q1, ...
    std::vector<double> rel_change_trace;  // ||Q_{j+1} - Q_j||_F / ||Q_j||_F
    std::vector<int> inner_iterations;
    int iterations = 0;
    double wall_seconds = 0.0;
    bool converged = false;
    StopReason stop = StopReason::max_iters;
    int monotonicity_violations = 0;
    bool inner_all_converged = true;
    DcOptions options;
};

/// Relative slack allowed when checking that the MM objective does not increase.
inline constexpr double mm_slack = 1e-8;

/// Outer MM loop: Q_{j+1} = glasso(dc_gradient(Q_j), Lambda) warm-started at Q_j.
FitReport dc_fit(const LikelihoodKernel& kernel, double tau2, const Matrix& Lambda,
                 const Matrix& Q0, const DcOptions& options = {});

/// dc_fit from the identity.
FitReport dc_fit(const LikelihoodKernel& kernel, double tau2, const Matrix& Lambda,
                 const DcOptions& options = {});

} // namespace bgl
