#pragma once

#include <basisglasso/basis.hpp>
#include <basisglasso/linalg.hpp>
#include <basisglasso/random.hpp>

#include <cstdint>
#include <map>
#include <string>
#include <utility>
#include <vector>

namespace bgl {

enum class GraphFamily { band, cluster, random, scale_free, lattice_sar };

std::string to_string(GraphFamily family);
GraphFamily parse_graph_family(const std::string& name);

/// Ground-truth precision matrix with its off-diagonal support (i < j).
struct TruePrecision
{
    Matrix Q;
    std::vector<std::pair<Index, Index>> pattern;
    GraphFamily family = GraphFamily::band;
    std::map<std::string, double> params;
};

inline constexpr double default_spd_margin = 0.1;

/// A + (max(0, -lambda_min(A)) + margin) I.
Matrix spd_correct(const Matrix& a, double margin = default_spd_margin);

/// Off-diagonal support of a symmetric matrix, entries with |value| > tol.
std::vector<std::pair<Index, Index>> offdiag_pattern(const Matrix& q, double tol = 0.0);

TruePrecision gen_band(Index ell, double margin = default_spd_margin);
TruePrecision gen_cluster(Index ell, Index block_count, double fill_prob, Rng& rng,
                          double margin = default_spd_margin);
TruePrecision gen_random(Index ell, double edge_prob, Rng& rng,
                         double margin = default_spd_margin);
/// Barabasi-Albert preferential attachment, one edge per new node.
TruePrecision gen_scale_free(Index ell, Rng& rng, double margin = default_spd_margin);

/// SAR precision per lattice level: B = a_wght I - adjacency, Q_k = B^T B / w_k
/// with w_k proportional to exp(-2 nu (k - 1)) and sum_k w_k = 1.
TruePrecision latticekrig_precision(const NodeGrid& grid, double a_wght, double nu);

/// Nugget implied by a noise-to-signal ratio: ratio * tr(Q^{-1} Phi^T Phi) / n.
double nugget_for_ratio(const Matrix& phi, const Matrix& q, double noise_to_signal);

struct SimDataset
{
    Matrix Y;  // n x m
    std::vector<Point> locations;
    BasisMatrix phi;
    double tau2 = 0.0;
    TruePrecision truth;
    double noise_to_signal = 0.0;
};

std::vector<Point> uniform_locations(Index n, const Rectangle& domain, Rng& rng);

/// Y_i = Phi c_i + eps_i with c_i ~ N(0, Q^{-1}) and eps_i ~ N(0, tau^2 I).
SimDataset simulate_replicates(const BasisMatrix& phi, std::vector<Point> locations,
                               const TruePrecision& truth, Index m, double noise_to_signal,
                               std::uint64_t seed);

} // namespace bgl
