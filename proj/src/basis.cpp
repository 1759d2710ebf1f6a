#include <basisglasso/basis.hpp>
#include <basisglasso/error.hpp>

#include <algorithm>
#include <cmath>
#include <numbers>

namespace bgl {

namespace {

constexpr double deg = std::numbers::pi / 180.0;

void append_lattice(NodeGrid& grid, const Rectangle& domain, Index nx, Index ny,
                    double overlap, int level)
{
    const double dx = (domain.x_max - domain.x_min) / static_cast<double>(nx - 1);
    const double dy = (domain.y_max - domain.y_min) / static_cast<double>(ny - 1);
    const double r = overlap * std::max(dx, dy);
    grid.lattices.push_back({level, nx, ny, static_cast<Index>(grid.nodes.size())});
    for (Index j = 0; j < ny; ++j) {
        for (Index i = 0; i < nx; ++i) {
            grid.nodes.push_back({domain.x_min + dx * static_cast<double>(i),
                                  domain.y_min + dy * static_cast<double>(j)});
            grid.radius.push_back(r);
            grid.level.push_back(level);
        }
    }
}

void check_domain(const Rectangle& domain)
{
    if (!(domain.x_max > domain.x_min) || !(domain.y_max > domain.y_min))
        throw ConfigError("degenerate domain: zero or negative width");
}

} // namespace

std::vector<bool> BasisMatrix::global_mask() const
{
    std::vector<bool> mask(columns.size());
    for (std::size_t j = 0; j < columns.size(); ++j)
        mask[j] = columns[j].kind == ColumnKind::global;
    return mask;
}

double wendland_eval(double d)
{
    if (d < 0.0 || std::isnan(d))
        throw std::domain_error("wendland_eval: negative distance");
    if (d >= 1.0)
        return 0.0;
    const double u = 1.0 - d;
    const double u2 = u * u;
    const double u6 = u2 * u2 * u2;
    return u6 * (35.0 * d * d + 18.0 * d + 3.0) / 3.0;
}

double great_circle(const Point& a, const Point& b)
{
    // haversine keeps precision for short arcs
    const double phi1 = a[1] * deg;
    const double phi2 = b[1] * deg;
    const double dphi = phi2 - phi1;
    const double dlam = (b[0] - a[0]) * deg;
    const double s1 = std::sin(0.5 * dphi);
    const double s2 = std::sin(0.5 * dlam);
    const double h = s1 * s1 + std::cos(phi1) * std::cos(phi2) * s2 * s2;
    return 2.0 * std::asin(std::min(1.0, std::sqrt(h)));
}

double distance(const Point& a, const Point& b, bool geographic)
{
    if (geographic)
        return great_circle(a, b);
    return std::hypot(a[0] - b[0], a[1] - b[1]);
}

NodeGrid build_single_grid(const Rectangle& domain, Index nx, Index ny, double overlap)
{
    check_domain(domain);
    if (nx < 2 || ny < 2)
        throw ConfigError("build_single_grid: need at least 2 nodes per axis");
    if (!(overlap > 0.0))
        throw ConfigError("build_single_grid: overlap must be positive");
    NodeGrid grid;
    append_lattice(grid, domain, nx, ny, overlap, 1);
    return grid;
}

NodeGrid build_multires_grid(const Rectangle& domain, Index coarse_count, int levels,
                             double overlap)
{
    check_domain(domain);
    if (coarse_count < 2 || levels < 1)
        throw ConfigError("build_multires_grid: coarse_count >= 2 and levels >= 1 required");
    if (!(overlap > 0.0))
        throw ConfigError("build_multires_grid: overlap must be positive");
    NodeGrid grid;
    Index count = coarse_count;
    for (int k = 1; k <= levels; ++k) {
        append_lattice(grid, domain, count, count, overlap, k);
        count *= 2;
    }
    return grid;
}

BasisMatrix build_basis_matrix(std::span<const Point> locations, const NodeGrid& grid)
{
    if (grid.size() == 0)
        throw ConfigError("build_basis_matrix: empty node grid");
    const auto n = static_cast<Index>(locations.size());
    const auto ell = static_cast<Index>(grid.size());
    BasisMatrix phi;
    phi.values = Matrix::Zero(n, ell);
    phi.columns.resize(grid.size());
    for (Index j = 0; j < ell; ++j) {
        auto& meta = phi.columns[static_cast<std::size_t>(j)];
        meta.kind = ColumnKind::wendland;
        meta.node = j;
        meta.level = grid.level.empty() ? 1 : grid.level[static_cast<std::size_t>(j)];
    }
    for (Index i = 0; i < n; ++i) {
        const Point& s = locations[static_cast<std::size_t>(i)];
        if (!std::isfinite(s[0]) || !std::isfinite(s[1]))
            throw DataError("build_basis_matrix: non-finite location at row " + std::to_string(i));
        for (Index j = 0; j < ell; ++j) {
            const auto js = static_cast<std::size_t>(j);
            const double d = distance(s, grid.nodes[js], grid.geographic) / grid.radius[js];
            if (d < 1.0)
                phi.values(i, j) = wendland_eval(d);
        }
    }
    return phi;
}

double harmonic_eval(const Point& omega, const Point& s)
{
    return std::cos(2.0 * std::numbers::pi * (omega[0] * s[0] + omega[1] * s[1]));
}

BasisMatrix build_harmonic_basis(std::span<const Point> locations, Index ell, double scale_n)
{
    const auto side = static_cast<Index>(std::llround(std::sqrt(static_cast<double>(ell))));
    if (ell < 1 || side * side != ell)
        throw ConfigError("build_harmonic_basis: ell must be a perfect square");
    if (!(scale_n > 0.0))
        throw ConfigError("build_harmonic_basis: scale must be positive");
    const double root_n = std::sqrt(scale_n);
    BasisMatrix phi;
    phi.values.resize(static_cast<Index>(locations.size()), ell);
    phi.columns.resize(static_cast<std::size_t>(ell));
    Index col = 0;
    for (Index k = 1; k <= side; ++k) {
        for (Index j = 1; j <= side; ++j, ++col) {
            const Point omega{static_cast<double>(k) / root_n, static_cast<double>(j) / root_n};
            auto& meta = phi.columns[static_cast<std::size_t>(col)];
            meta.kind = ColumnKind::harmonic;
            meta.frequency = omega;
            for (std::size_t i = 0; i < locations.size(); ++i)
                phi.values(static_cast<Index>(i), col) = harmonic_eval(omega, locations[i]);
        }
    }
    return phi;
}

NodeGrid equispaced_sphere_nodes(Index count, double radius)
{
    if (count < 2)
        throw ConfigError("equispaced_sphere_nodes: count must be >= 2");
    NodeGrid grid;
    grid.geographic = true;
    const double golden = std::numbers::pi * (3.0 - std::sqrt(5.0));
    const double n = static_cast<double>(count);
    // default support: 2.5 times the mean node spacing on the unit sphere
    const double r = radius > 0.0 ? radius : 2.5 * std::sqrt(4.0 * std::numbers::pi / n);
    if (count == 2) {
        // the spiral degenerates; two nodes are placed at the poles
        for (double lat : {90.0, -90.0}) {
            grid.nodes.push_back({0.0, lat});
            grid.radius.push_back(r);
            grid.level.push_back(1);
        }
        return grid;
    }
    for (Index i = 0; i < count; ++i) {
        const double z = 1.0 - (2.0 * static_cast<double>(i) + 1.0) / n;
        const double lat = std::asin(z) / deg;
        double lon = std::remainder(golden * static_cast<double>(i), 2.0 * std::numbers::pi) / deg;
        grid.nodes.push_back({lon, lat});
        grid.radius.push_back(r);
        grid.level.push_back(1);
    }
    return grid;
}

Point sinusoidal_project(const Point& lonlat_deg, double ref_radius)
{
    const double lon = lonlat_deg[0] * deg;
    const double lat = lonlat_deg[1] * deg;
    return {ref_radius * lon * std::cos(lat), ref_radius * lat};
}

BasisMatrix append_global_column(const BasisMatrix& phi, const Vector& covariate,
                                 const std::string& label)
{
    if (covariate.size() != phi.rows())
        throw DataError("append_global_column: covariate length " +
                        std::to_string(covariate.size()) + " does not match n = " +
                        std::to_string(phi.rows()));
    if (!covariate.allFinite())
        throw DataError("append_global_column: covariate has non-finite entries");
    BasisMatrix out;
    out.values.resize(phi.rows(), phi.cols() + 1);
    out.values.leftCols(phi.cols()) = phi.values;
    out.values.col(phi.cols()) = covariate;
    out.columns = phi.columns;
    ColumnMeta meta;
    meta.kind = ColumnKind::global;
    meta.label = label;
    out.columns.push_back(meta);
    return out;
}

Matrix node_distances(const NodeGrid& grid)
{
    const auto ell = static_cast<Index>(grid.size());
    Matrix d = Matrix::Zero(ell, ell);
    for (Index i = 0; i < ell; ++i)
        for (Index j = i + 1; j < ell; ++j) {
            const double v = distance(grid.nodes[static_cast<std::size_t>(i)],
                                      grid.nodes[static_cast<std::size_t>(j)], grid.geographic);
            d(i, j) = v;
            d(j, i) = v;
        }
    return d;
}

} // namespace bgl
