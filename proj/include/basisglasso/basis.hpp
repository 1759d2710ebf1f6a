#pragma once

#include <basisglasso/linalg.hpp>

#include <array>
#include <cstddef>
#include <span>
#include <string>
#include <vector>

namespace bgl {

using Point = std::array<double, 2>;

struct Rectangle
{
    double x_min = 0.0;
    double x_max = 1.0;
    double y_min = 0.0;
    double y_max = 1.0;
};

/// Regular lattice backing one resolution level. Nodes of the level occupy
/// [offset, offset + nx*ny) in row-major (x fastest) order.
struct LatticeLevel
{
    int level = 1;
    Index nx = 0;
    Index ny = 0;
    Index offset = 0;
};

/// Basis-function centers. Geographic grids store (lon, lat) in degrees and
/// measure distances along great circles of the unit sphere (radians);
/// planar grids use Euclidean distance.
struct NodeGrid
{
    std::vector<Point> nodes;
    std::vector<double> radius;
    std::vector<int> level;
    std::vector<LatticeLevel> lattices;
    bool geographic = false;

    std::size_t size() const { return nodes.size(); }
};

enum class ColumnKind { wendland, harmonic, global };

struct ColumnMeta
{
    ColumnKind kind = ColumnKind::wendland;
    Index node = -1;        // wendland: node index
    int level = 0;          // wendland: resolution level
    Point frequency{};      // harmonic: omega
    std::string label;      // global: covariate label
};

struct BasisMatrix
{
    Matrix values;  // n x ell
    std::vector<ColumnMeta> columns;

    Index rows() const { return values.rows(); }
    Index cols() const { return values.cols(); }
    std::vector<bool> global_mask() const;
};

/// C2 Wendland function (1-d)^6 (35 d^2 + 18 d + 3) / 3 on [0, 1], zero beyond.
double wendland_eval(double d);

double distance(const Point& a, const Point& b, bool geographic);

/// Great-circle distance on the unit sphere between (lon, lat) degree pairs.
double great_circle(const Point& a, const Point& b);

NodeGrid build_single_grid(const Rectangle& domain, Index nx, Index ny, double overlap);

/// Per-level lattices with coarse_count * 2^(k-1) nodes per axis at level k.
NodeGrid build_multires_grid(const Rectangle& domain, Index coarse_count, int levels,
                             double overlap);

BasisMatrix build_basis_matrix(std::span<const Point> locations, const NodeGrid& grid);

/// Harmonic basis cos(2 pi omega^T s) with omega = (k, j) / sqrt(scale_n),
/// k, j in 1..sqrt(ell).
BasisMatrix build_harmonic_basis(std::span<const Point> locations, Index ell, double scale_n);

double harmonic_eval(const Point& omega, const Point& s);

/// Fibonacci-spiral nodes on the unit sphere, returned as (lon, lat) degrees.
NodeGrid equispaced_sphere_nodes(Index count, double radius = 0.0);

Point sinusoidal_project(const Point& lonlat_deg, double ref_radius);

BasisMatrix append_global_column(const BasisMatrix& phi, const Vector& covariate,
                                 const std::string& label);

/// Pairwise node distances (great-circle for geographic grids).
Matrix node_distances(const NodeGrid& grid);

} // namespace bgl
