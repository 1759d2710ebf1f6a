#include <basisglasso/error.hpp>
#include <basisglasso/graphs.hpp>

#include <algorithm>
#include <cmath>

namespace bgl {

std::string to_string(GraphFamily family)
{
    switch (family) {
    case GraphFamily::band: return "band";
    case GraphFamily::cluster: return "cluster";
    case GraphFamily::random: return "random";
    case GraphFamily::scale_free: return "scale-free";
    case GraphFamily::lattice_sar: return "lattice-sar";
    }
    return "unknown";
}

GraphFamily parse_graph_family(const std::string& name)
{
    if (name == "band") return GraphFamily::band;
    if (name == "cluster") return GraphFamily::cluster;
    if (name == "random") return GraphFamily::random;
    if (name == "scale-free" || name == "scale_free") return GraphFamily::scale_free;
    if (name == "lattice-sar" || name == "lattice_sar") return GraphFamily::lattice_sar;
    throw ConfigError("unknown graph family '" + name + "'");
}

Matrix spd_correct(const Matrix& a, double margin)
{
    const double lmin = min_eigenvalue(a);
    const double shift = std::max(0.0, -lmin) + margin;
    Matrix out = a;
    out.diagonal().array() += shift;
    return out;
}

std::vector<std::pair<Index, Index>> offdiag_pattern(const Matrix& q, double tol)
{
    std::vector<std::pair<Index, Index>> pattern;
    for (Index j = 0; j < q.cols(); ++j)
        for (Index i = 0; i < j; ++i)
            if (std::abs(q(i, j)) > tol)
                pattern.emplace_back(i, j);
    return pattern;
}

namespace {

TruePrecision finish(Matrix adjacency, GraphFamily family, double margin)
{
    TruePrecision t;
    t.pattern = offdiag_pattern(adjacency);
    t.Q = spd_correct(adjacency, margin);
    t.family = family;
    t.params["spd_margin"] = margin;
    return t;
}

void check_ell(Index ell)
{
    if (ell < 2)
        throw ConfigError("graph generators need ell >= 2");
}

} // namespace

TruePrecision gen_band(Index ell, double margin)
{
    check_ell(ell);
    Matrix a = Matrix::Zero(ell, ell);
    for (Index i = 0; i + 1 < ell; ++i) {
        a(i, i + 1) = 1.0;
        a(i + 1, i) = 1.0;
    }
    return finish(std::move(a), GraphFamily::band, margin);
}

TruePrecision gen_cluster(Index ell, Index block_count, double fill_prob, Rng& rng,
                          double margin)
{
    if (block_count < 1 || block_count > ell)
        throw ConfigError("gen_cluster: need 1 <= block_count <= ell");
    if (fill_prob < 0.0 || fill_prob > 1.0)
        throw ConfigError("gen_cluster: fill_prob must lie in [0, 1]");
    Matrix a = Matrix::Zero(ell, ell);
    std::bernoulli_distribution coin(fill_prob);
    for (Index b = 0; b < block_count; ++b) {
        const Index lo = b * ell / block_count;
        const Index hi = (b + 1) * ell / block_count;
        for (Index j = lo; j < hi; ++j)
            for (Index i = lo; i < j; ++i)
                if (coin(rng)) {
                    a(i, j) = 1.0;
                    a(j, i) = 1.0;
                }
    }
    auto t = finish(std::move(a), GraphFamily::cluster, margin);
    t.params["block_count"] = static_cast<double>(block_count);
    t.params["fill_prob"] = fill_prob;
    return t;
}

TruePrecision gen_random(Index ell, double edge_prob, Rng& rng, double margin)
{
    if (edge_prob < 0.0 || edge_prob > 1.0)
        throw ConfigError("gen_random: edge_prob must lie in [0, 1]");
    Matrix a = Matrix::Zero(ell, ell);
    std::bernoulli_distribution coin(edge_prob);
    for (Index j = 0; j < ell; ++j)
        for (Index i = 0; i < j; ++i)
            if (coin(rng)) {
                a(i, j) = 1.0;
                a(j, i) = 1.0;
            }
    auto t = finish(std::move(a), GraphFamily::random, margin);
    t.params["edge_prob"] = edge_prob;
    return t;
}

TruePrecision gen_scale_free(Index ell, Rng& rng, double margin)
{
    check_ell(ell);
    Matrix a = Matrix::Zero(ell, ell);
    // each node appears in `ends` once per incident edge, so a uniform draw
    // from it is a degree-proportional draw
    std::vector<Index> ends{0, 1};
    a(0, 1) = a(1, 0) = 1.0;
    for (Index v = 2; v < ell; ++v) {
        std::uniform_int_distribution<std::size_t> pick(0, ends.size() - 1);
        const Index u = ends[pick(rng)];
        a(u, v) = a(v, u) = 1.0;
        ends.push_back(u);
        ends.push_back(v);
    }
    auto t = finish(std::move(a), GraphFamily::scale_free, margin);
    t.params["edges_per_node"] = 1.0;
    return t;
}

TruePrecision latticekrig_precision(const NodeGrid& grid, double a_wght, double nu)
{
    if (!(a_wght > 4.0))
        throw ConfigError("latticekrig_precision: a_wght must exceed 4 for a 2-D lattice");
    if (grid.lattices.empty())
        throw ConfigError("latticekrig_precision: grid carries no regular lattice levels");
    const auto ell = static_cast<Index>(grid.size());
    Matrix q = Matrix::Zero(ell, ell);

    double total = 0.0;
    for (const auto& lat : grid.lattices)
        total += std::exp(-2.0 * nu * (lat.level - 1));

    for (const auto& lat : grid.lattices) {
        const Index size = lat.nx * lat.ny;
        Matrix b = a_wght * Matrix::Identity(size, size);
        auto id = [&](Index ix, Index iy) { return iy * lat.nx + ix; };
        for (Index iy = 0; iy < lat.ny; ++iy)
            for (Index ix = 0; ix < lat.nx; ++ix) {
                const Index k = id(ix, iy);
                if (ix > 0) b(k, id(ix - 1, iy)) = -1.0;
                if (ix + 1 < lat.nx) b(k, id(ix + 1, iy)) = -1.0;
                if (iy > 0) b(k, id(ix, iy - 1)) = -1.0;
                if (iy + 1 < lat.ny) b(k, id(ix, iy + 1)) = -1.0;
            }
        const double w = std::exp(-2.0 * nu * (lat.level - 1)) / total;
        q.block(lat.offset, lat.offset, size, size) = (b.transpose() * b) / w;
    }

    TruePrecision t;
    t.Q = symmetrize(q);
    t.pattern = offdiag_pattern(t.Q);
    t.family = GraphFamily::lattice_sar;
    t.params["a_wght"] = a_wght;
    t.params["nu"] = nu;
    return t;
}

double nugget_for_ratio(const Matrix& phi, const Matrix& q, double noise_to_signal)
{
    const SpdFactor qf(q, "nugget_for_ratio: Q");
    const Matrix gram = phi.transpose() * phi;
    const double signal = qf.solve(gram).trace() / static_cast<double>(phi.rows());
    return noise_to_signal * signal;
}

std::vector<Point> uniform_locations(Index n, const Rectangle& domain, Rng& rng)
{
    std::uniform_real_distribution<double> ux(domain.x_min, domain.x_max);
    std::uniform_real_distribution<double> uy(domain.y_min, domain.y_max);
    std::vector<Point> out(static_cast<std::size_t>(n));
    for (auto& p : out) {
        p[0] = ux(rng);
        p[1] = uy(rng);
    }
    return out;
}

SimDataset simulate_replicates(const BasisMatrix& phi, std::vector<Point> locations,
                               const TruePrecision& truth, Index m, double noise_to_signal,
                               std::uint64_t seed)
{
    if (m < 2)
        throw ConfigError("simulate_replicates: need m >= 2 replicates");
    if (noise_to_signal < 0.0)
        throw ConfigError("simulate_replicates: noise_to_signal must be nonnegative");
    if (truth.Q.rows() != phi.cols())
        throw ConfigError("simulate_replicates: Q dimension does not match basis size");
    const SpdFactor qf(truth.Q, "simulate_replicates: Q_true");

    SimDataset ds;
    ds.phi = phi;
    ds.locations = std::move(locations);
    ds.truth = truth;
    ds.noise_to_signal = noise_to_signal;
    ds.tau2 = nugget_for_ratio(phi.values, truth.Q, noise_to_signal);

    auto rng = make_rng(seed, {0x51u});
    std::normal_distribution<double> normal(0.0, 1.0);
    const Index ell = phi.cols();
    const Index n = phi.rows();
    Matrix z(ell, m);
    for (Index j = 0; j < m; ++j)
        for (Index i = 0; i < ell; ++i)
            z(i, j) = normal(rng);
    // Q = L L^T, so c = L^{-T} z has covariance Q^{-1}
    const Matrix c = qf.llt().matrixU().solve(z);
    ds.Y = phi.values * c;
    if (ds.tau2 > 0.0) {
        const double tau = std::sqrt(ds.tau2);
        for (Index j = 0; j < m; ++j)
            for (Index i = 0; i < n; ++i)
                ds.Y(i, j) += tau * normal(rng);
    }
    return ds;
}

} // namespace bgl
