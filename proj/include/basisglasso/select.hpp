#pragma once

#include <basisglasso/dcfit.hpp>
#include <basisglasso/linalg.hpp>

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

namespace bgl {

struct Candidate
{
    PenaltySpec spec;
    Matrix Lambda;
};

/// Materialize a list of penalty specs against one geometry.
std::vector<Candidate> make_candidates(const std::vector<PenaltySpec>& specs, Index ell,
                                       const Matrix* distances = nullptr,
                                       std::span<const bool> global_mask = {});

/// Disjoint, covering folds of {0, ..., m-1}, shuffled under `seed`.
std::vector<std::vector<Index>> kfold_partition(Index m, int k, std::uint64_t seed);

/// `count` distinct indices out of {0, ..., n-1}, sorted, drawn under `seed`.
std::vector<Index> holdout_indices(Index n, Index count, std::uint64_t seed);

std::vector<Index> complement(Index n, const std::vector<Index>& subset);

struct CvCell
{
    std::size_t candidate = 0;
    std::size_t fold = 0;
    double score = 0.0;
    bool ok = false;
    std::string error;
};

struct CvResult
{
    std::vector<CvCell> cells;         // candidate-major
    std::vector<double> mean_score;    // per candidate (NaN when excluded)
    std::vector<bool> excluded;
    std::optional<std::size_t> selected;
    bool boundary = false;
    std::string warning;
};

/// Pure argmin over non-excluded candidates; exact ties go to the candidate
/// with the larger total penalty mass.
std::optional<std::size_t> select_candidate(const std::vector<double>& scores,
                                            const std::vector<bool>& excluded,
                                            const std::vector<Candidate>& candidates);

struct CvOptions
{
    DcOptions fit;
    int workers = 1;
};

/// Likelihood-based k-fold CV over replicates: fit on the complement of each
/// fold, score the held-out fold with the unpenalized reduced likelihood.
CvResult cv_likelihood(const Matrix& Y, const Matrix& phi, double tau2,
                       const std::vector<Candidate>& candidates,
                       const std::vector<std::vector<Index>>& folds,
                       const CvOptions& options = {});

struct PredictiveCvResult
{
    CvResult cv;  // one "fold"; score is RMSE
    std::optional<FitReport> final_fit;
};

/// Spatial hold-out CV: fit on training locations, krige every replicate to the
/// held-out locations, score by RMSE; refit the winner on all locations.
PredictiveCvResult cv_predictive(const Matrix& Y, const Matrix& phi, double tau2,
                                 const std::vector<Candidate>& candidates,
                                 const std::vector<Index>& heldout,
                                 const CvOptions& options = {});

} // namespace bgl
