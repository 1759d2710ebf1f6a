#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <basisglasso/basis.hpp>
#include <basisglasso/error.hpp>
#include <basisglasso/graphs.hpp>
#include <basisglasso/select.hpp>

#include "support.hpp"

#include <cmath>
#include <set>

using namespace bgl;

namespace {

std::vector<Candidate> constant_candidates(const std::vector<double>& lambdas, Index ell)
{
    std::vector<PenaltySpec> specs;
    for (double l : lambdas)
        specs.push_back({PenaltyForm::constant_offdiag, l, {}});
    return make_candidates(specs, ell);
}

struct Data
{
    Matrix Y;
    BasisMatrix phi;
    double tau2;
};

Data small_data(std::uint64_t seed, Index n = 120, Index m = 30)
{
    auto rng = make_rng(seed);
    const auto loc = uniform_locations(n, {}, rng);
    const auto grid = build_single_grid({}, 3, 3, 2.5);
    const auto phi = build_basis_matrix(loc, grid);
    const auto ds = simulate_replicates(phi, loc, gen_band(9), m, 0.1, seed + 1);
    return {ds.Y, phi, ds.tau2};
}

} // namespace

TEST_CASE("k-fold partition")
{
    const auto folds = kfold_partition(23, 5, 9);
    REQUIRE(folds.size() == 5);
    std::set<Index> all;
    for (const auto& f : folds) {
        CHECK((f.size() == 4 || f.size() == 5));
        CHECK(std::is_sorted(f.begin(), f.end()));
        all.insert(f.begin(), f.end());
    }
    CHECK(all.size() == 23);
    CHECK(*all.rbegin() == 22);
    CHECK(kfold_partition(23, 5, 9) == folds);
    CHECK(kfold_partition(23, 5, 10) != folds);
    CHECK_THROWS_AS(kfold_partition(3, 5, 1), ConfigError);
    CHECK_THROWS_AS(kfold_partition(10, 1, 1), ConfigError);
}

TEST_CASE("hold-out and complement")
{
    const auto h = holdout_indices(50, 7, 3);
    CHECK(h.size() == 7);
    CHECK(std::set<Index>(h.begin(), h.end()).size() == 7);
    const auto c = complement(50, h);
    CHECK(c.size() == 43);
    for (Index i : c)
        CHECK(std::find(h.begin(), h.end(), i) == h.end());
    CHECK_THROWS_AS(holdout_indices(5, 5, 1), ConfigError);
}

TEST_CASE("selection rule")
{
    const auto cands = constant_candidates({0.01, 0.02, 0.03}, 3);
    CHECK(select_candidate({3.0, 1.0, 2.0}, {false, false, false}, cands) == 1u);
    // exact tie goes to the heavier penalty
    CHECK(select_candidate({1.0, 2.0, 1.0}, {false, false, false}, cands) == 2u);
    // excluded and non-finite entries never win
    CHECK(select_candidate({3.0, 1.0, 2.0}, {false, true, false}, cands) == 2u);
    CHECK(select_candidate({NAN, 5.0, NAN}, {false, false, false}, cands) == 1u);
    CHECK_FALSE(select_candidate({1.0, 1.0, 1.0}, {true, true, true}, cands).has_value());
}

TEST_CASE("likelihood CV")
{
    const auto d = small_data(51);
    const auto cands = constant_candidates({0.001, 0.01, 0.1}, 9);
    const auto folds = kfold_partition(d.Y.cols(), 3, 5);
    CvOptions opts;
    const auto r = cv_likelihood(d.Y, d.phi.values, d.tau2, cands, folds, opts);
    CHECK(r.cells.size() == 9);
    REQUIRE(r.selected.has_value());
    for (std::size_t c = 0; c < 3; ++c) {
        CHECK_FALSE(r.excluded[c]);
        double sum = 0.0;
        for (std::size_t f = 0; f < 3; ++f) {
            CHECK(r.cells[c * 3 + f].candidate == c);
            sum += r.cells[c * 3 + f].score;
        }
        CHECK(r.mean_score[c] == doctest::Approx(sum / 3.0));
    }
    CHECK(r.boundary == (*r.selected != 1));

    // parallel evaluation is identical
    opts.workers = 4;
    const auto p = cv_likelihood(d.Y, d.phi.values, d.tau2, cands, folds, opts);
    for (std::size_t i = 0; i < r.cells.size(); ++i)
        CHECK(p.cells[i].score == r.cells[i].score);

    // a single candidate is selected without a boundary warning
    const auto one = cv_likelihood(d.Y, d.phi.values, d.tau2, constant_candidates({0.01}, 9),
                                   folds);
    CHECK(one.selected == 0u);
    CHECK_FALSE(one.boundary);
}

TEST_CASE("nonconverged candidates are excluded")
{
    const auto d = small_data(52);
    const auto cands = constant_candidates({0.01, 0.05}, 9);
    CvOptions opts;
    opts.fit.tol = 0.0;
    opts.fit.max_iters = 2;
    const auto r = cv_likelihood(d.Y, d.phi.values, d.tau2, cands,
                                 kfold_partition(d.Y.cols(), 2, 1), opts);
    CHECK(r.excluded[0]);
    CHECK(r.excluded[1]);
    CHECK_FALSE(r.selected.has_value());
    CHECK_FALSE(r.warning.empty());
}

TEST_CASE("predictive CV")
{
    const auto d = small_data(53);
    const auto cands = constant_candidates({0.005, 0.05}, 9);
    const auto held = holdout_indices(d.Y.rows(), 20, 4);
    const auto r = cv_predictive(d.Y, d.phi.values, d.tau2, cands, held);
    CHECK(r.cv.cells.size() == 2);
    REQUIRE(r.cv.selected.has_value());
    REQUIRE(r.final_fit.has_value());
    CHECK(r.final_fit->converged);
    for (const auto& c : r.cv.cells)
        CHECK(c.score > 0.0);
}
