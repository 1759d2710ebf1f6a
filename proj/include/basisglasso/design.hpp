#pragma once

#include <basisglasso/basis.hpp>
#include <basisglasso/graphs.hpp>

#include <optional>
#include <string>

namespace bgl {

enum class BasisFamily { wendland_single, wendland_multires, harmonic };

std::string to_string(BasisFamily family);
BasisFamily parse_basis_family(const std::string& name);

/// How to build Phi for a set of locations.
struct BasisSpec
{
    BasisFamily family = BasisFamily::wendland_single;
    Index grid_count = 10;    // single level: nodes per axis
    Index coarse_count = 2;   // multiresolution: coarsest nodes per axis
    int levels = 1;
    double overlap = 2.5;
    Index ell = 100;          // harmonic: number of columns (perfect square)
    Rectangle domain{};       // wendland node domain
};

struct BasisSetup
{
    BasisMatrix phi;
    std::optional<NodeGrid> grid;
};

/// Number of basis columns `spec` will produce.
Index basis_size(const BasisSpec& spec);

/// `scale_n` is the harmonic frequency normalization (the domain is [0, sqrt(scale_n)]^2).
BasisSetup build_basis(const BasisSpec& spec, std::span<const Point> locations, double scale_n);

/// Domain that observation locations are sampled from: the unit square for
/// Wendland bases, [0, sqrt(n)]^2 for the harmonic basis.
Rectangle sampling_domain(const BasisSpec& spec, Index n);

struct GraphSpec
{
    GraphFamily family = GraphFamily::lattice_sar;
    double a_wght = 4.05;
    double nu = 0.5;
    std::optional<double> edge_prob;          // random; default 3 / ell
    std::optional<Index> block_count;         // cluster; default round(ell / 20)
    double fill_prob = 1.0;                   // cluster
    double spd_margin = default_spd_margin;
};

/// Ground truth for a basis setup; lattice-sar needs the node grid.
TruePrecision make_truth(const GraphSpec& spec, const BasisSetup& basis, Rng& rng);

} // namespace bgl
