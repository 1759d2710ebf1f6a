#include <basisglasso/error.hpp>
#include <basisglasso/parallel.hpp>
#include <basisglasso/predict.hpp>
#include <basisglasso/random.hpp>
#include <basisglasso/select.hpp>

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

namespace bgl {

std::vector<Candidate> make_candidates(const std::vector<PenaltySpec>& specs, Index ell,
                                       const Matrix* distances, std::span<const bool> global_mask)
{
    if (specs.empty())
        throw ConfigError("no penalty candidates given");
    std::vector<Candidate> out;
    out.reserve(specs.size());
    for (const auto& s : specs)
        out.push_back({s, build_penalty(s, ell, distances, global_mask)});
    return out;
}

std::vector<std::vector<Index>> kfold_partition(Index m, int k, std::uint64_t seed)
{
    if (k < 2 || static_cast<Index>(k) > m)
        throw ConfigError("kfold_partition: need 2 <= k <= m");
    std::vector<Index> perm(static_cast<std::size_t>(m));
    std::iota(perm.begin(), perm.end(), Index{0});
    auto rng = make_rng(seed, {0xf01du});
    std::shuffle(perm.begin(), perm.end(), rng);
    std::vector<std::vector<Index>> folds(static_cast<std::size_t>(k));
    for (std::size_t i = 0; i < perm.size(); ++i)
        folds[i % folds.size()].push_back(perm[i]);
    for (auto& f : folds)
        std::sort(f.begin(), f.end());
    return folds;
}

std::vector<Index> holdout_indices(Index n, Index count, std::uint64_t seed)
{
    if (count < 1 || count >= n)
        throw ConfigError("holdout_indices: need 1 <= count < n");
    std::vector<Index> perm(static_cast<std::size_t>(n));
    std::iota(perm.begin(), perm.end(), Index{0});
    auto rng = make_rng(seed, {0x401du});
    std::shuffle(perm.begin(), perm.end(), rng);
    perm.resize(static_cast<std::size_t>(count));
    std::sort(perm.begin(), perm.end());
    return perm;
}

std::vector<Index> complement(Index n, const std::vector<Index>& subset)
{
    std::vector<bool> in(static_cast<std::size_t>(n), false);
    for (Index i : subset)
        in[static_cast<std::size_t>(i)] = true;
    std::vector<Index> out;
    for (Index i = 0; i < n; ++i)
        if (!in[static_cast<std::size_t>(i)])
            out.push_back(i);
    return out;
}

std::optional<std::size_t> select_candidate(const std::vector<double>& scores,
                                            const std::vector<bool>& excluded,
                                            const std::vector<Candidate>& candidates)
{
    std::optional<std::size_t> best;
    double best_mass = 0.0;
    for (std::size_t c = 0; c < scores.size(); ++c) {
        if (excluded[c] || !std::isfinite(scores[c]))
            continue;
        const double mass = candidates[c].Lambda.sum();
        if (!best || scores[c] < scores[*best] || (scores[c] == scores[*best] && mass > best_mass)) {
            best = c;
            best_mass = mass;
        }
    }
    return best;
}

namespace {

void finalize(CvResult& r, const std::vector<Candidate>& candidates, std::size_t folds)
{
    const std::size_t nc = candidates.size();
    r.mean_score.assign(nc, std::numeric_limits<double>::quiet_NaN());
    r.excluded.assign(nc, false);
    for (std::size_t c = 0; c < nc; ++c) {
        double sum = 0.0;
        for (std::size_t f = 0; f < folds; ++f) {
            const auto& cell = r.cells[c * folds + f];
            if (!cell.ok)
                r.excluded[c] = true;
            sum += cell.score;
        }
        if (!r.excluded[c])
            r.mean_score[c] = sum / static_cast<double>(folds);
    }
    r.selected = select_candidate(r.mean_score, r.excluded, candidates);
    if (!r.selected) {
        r.warning = "every candidate was excluded";
        return;
    }
    if (nc > 1 && (*r.selected == 0 || *r.selected == nc - 1)) {
        r.boundary = true;
        r.warning = "selected penalty lies on the boundary of the candidate grid";
    }
}

Matrix select_rows(const Matrix& a, const std::vector<Index>& rows)
{
    Matrix out(static_cast<Index>(rows.size()), a.cols());
    for (std::size_t i = 0; i < rows.size(); ++i)
        out.row(static_cast<Index>(i)) = a.row(rows[i]);
    return out;
}

} // namespace

CvResult cv_likelihood(const Matrix& Y, const Matrix& phi, double tau2,
                       const std::vector<Candidate>& candidates,
                       const std::vector<std::vector<Index>>& folds,
                       const CvOptions& options)
{
    if (candidates.empty())
        throw ConfigError("cv_likelihood: no candidates");
    if (folds.size() < 2)
        throw ConfigError("cv_likelihood: need at least 2 folds");
    const Matrix gram = phi.transpose() * phi;
    std::vector<LikelihoodKernel> train, test;
    for (const auto& fold : folds) {
        const auto rest = complement(Y.cols(), fold);
        train.push_back(empirical_cov_projections(Y, phi, rest, &gram));
        test.push_back(empirical_cov_projections(Y, phi, fold, &gram));
    }

    CvResult r;
    const std::size_t nf = folds.size();
    r.cells.resize(candidates.size() * nf);
    parallel_for(r.cells.size(), options.workers, [&](std::size_t idx) {
        CvCell& cell = r.cells[idx];
        cell.candidate = idx / nf;
        cell.fold = idx % nf;
        try {
            const auto fit = dc_fit(train[cell.fold], tau2, candidates[cell.candidate].Lambda,
                                    options.fit);
            cell.score = reduced_nll(fit.Q, tau2, test[cell.fold]);
            cell.ok = fit.converged && std::isfinite(cell.score);
            if (!fit.converged)
                cell.error = "outer iteration did not converge (" + to_string(fit.stop) + ")";
        } catch (const Error& e) {
            cell.ok = false;
            cell.score = std::numeric_limits<double>::quiet_NaN();
            cell.error = e.what();
        }
    });
    finalize(r, candidates, nf);
    return r;
}

PredictiveCvResult cv_predictive(const Matrix& Y, const Matrix& phi, double tau2,
                                 const std::vector<Candidate>& candidates,
                                 const std::vector<Index>& heldout, const CvOptions& options)
{
    if (candidates.empty())
        throw ConfigError("cv_predictive: no candidates");
    if (heldout.empty())
        throw ConfigError("cv_predictive: empty hold-out set");
    const auto training = complement(Y.rows(), heldout);
    const Matrix phi_train = select_rows(phi, training);
    const Matrix phi_test = select_rows(phi, heldout);
    const Matrix y_train = select_rows(Y, training);
    const Matrix y_test = select_rows(Y, heldout);
    const auto kernel = empirical_cov_projections(y_train, phi_train);

    PredictiveCvResult out;
    CvResult& r = out.cv;
    r.cells.resize(candidates.size());
    parallel_for(r.cells.size(), options.workers, [&](std::size_t c) {
        CvCell& cell = r.cells[c];
        cell.candidate = c;
        try {
            const auto fit = dc_fit(kernel, tau2, candidates[c].Lambda, options.fit);
            const auto pred = krige_batch(phi_train, phi_test, fit.Q, tau2, y_train);
            cell.score = std::sqrt((pred.mean - y_test).squaredNorm() /
                                   static_cast<double>(y_test.size()));
            cell.ok = fit.converged && std::isfinite(cell.score);
            if (!fit.converged)
                cell.error = "outer iteration did not converge (" + to_string(fit.stop) + ")";
        } catch (const Error& e) {
            cell.ok = false;
            cell.score = std::numeric_limits<double>::quiet_NaN();
            cell.error = e.what();
        }
    });
    finalize(r, candidates, 1);
    if (r.selected) {
        const auto full = empirical_cov_projections(Y, phi);
        out.final_fit = dc_fit(full, tau2, candidates[*r.selected].Lambda, options.fit);
    }
    return out;
}

} // namespace bgl
