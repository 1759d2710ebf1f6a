#pragma once

#include <basisglasso/dcfit.hpp>
#include <basisglasso/design.hpp>
#include <basisglasso/predict.hpp>

#include <cstdint>
#include <string>
#include <vector>

namespace bgl {

struct StudySpec
{
    std::string name = "study";
    BasisSpec basis;
    GraphSpec graph;
    std::vector<Index> n_values{400};
    std::vector<Index> ell_values{25};
    std::vector<Index> m_values{50};
    int trials = 1;
    double noise_to_signal = 0.1;
    std::vector<double> lambdas{0.005};
    int cv_folds = 0;  // < 2: use lambdas.front() without selection
    std::uint64_t seed = 1;
    int workers = 1;
    DcOptions fit;
};

/// Parses `key = value` lines ('#' starts a comment). Lists are comma
/// separated; `lambda_grid = lo:hi:count` expands to equally spaced values.
StudySpec parse_study_config(const std::string& text);

void validate(const StudySpec& spec);

struct TrialResult
{
    std::size_t cell = 0;
    int trial = 0;
    Index n = 0, ell = 0, m = 0;
    bool ok = false;
    std::string error;
    RecoveryMetrics metrics;
    double tau2_hat = 0.0;
    double tau2 = 0.0;
    double f_hat = 0.0;
    double f_true = 0.0;
    double lambda = 0.0;
    int outer_iterations = 0;
    int monotonicity_violations = 0;
};

struct CellSummary
{
    Index n = 0, ell = 0, m = 0;
    int trials_ok = 0;
    int trials_failed = 0;
    double frob = 0.0, kl = 0.0, pct_mz = 0.0, pct_mnz = 0.0;
    double tau2_hat = 0.0, tau2 = 0.0, f_hat = 0.0, f_true = 0.0;
};

struct StudyResults
{
    std::vector<TrialResult> trials;  // ordered by (cell, trial)
    std::vector<CellSummary> cells;
};

/// One simulate -> nugget -> select -> fit -> score pass.
TrialResult run_trial(const StudySpec& spec, Index n, Index ell, Index m, std::size_t cell,
                      int trial);

/// Every (n, ell, m) cell times `trials`; failures are recorded per trial.
StudyResults run_study(const StudySpec& spec);

/// Trial-averaged table: n, ell, m, Frob, KL, %MZ, %MNZ, tau2_hat, tau2, f_hat, f_true.
std::string results_csv(const StudyResults& results);
std::string trials_csv(const StudyResults& results);

} // namespace bgl
