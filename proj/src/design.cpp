#include <basisglasso/design.hpp>
#include <basisglasso/error.hpp>

#include <algorithm>
#include <cmath>

namespace bgl {

std::string to_string(BasisFamily family)
{
    switch (family) {
    case BasisFamily::wendland_single: return "wendland-single";
    case BasisFamily::wendland_multires: return "wendland-multires";
    case BasisFamily::harmonic: return "harmonic";
    }
    return "unknown";
}

BasisFamily parse_basis_family(const std::string& name)
{
    if (name == "wendland-single" || name == "wendland") return BasisFamily::wendland_single;
    if (name == "wendland-multires" || name == "multires") return BasisFamily::wendland_multires;
    if (name == "harmonic") return BasisFamily::harmonic;
    throw ConfigError("unknown basis family '" + name + "'");
}

Index basis_size(const BasisSpec& spec)
{
    switch (spec.family) {
    case BasisFamily::wendland_single:
        return spec.grid_count * spec.grid_count;
    case BasisFamily::wendland_multires: {
        Index total = 0;
        Index c = spec.coarse_count;
        for (int k = 0; k < spec.levels; ++k, c *= 2)
            total += c * c;
        return total;
    }
    case BasisFamily::harmonic:
        return spec.ell;
    }
    return 0;
}

BasisSetup build_basis(const BasisSpec& spec, std::span<const Point> locations, double scale_n)
{
    BasisSetup out;
    switch (spec.family) {
    case BasisFamily::wendland_single:
        out.grid = build_single_grid(spec.domain, spec.grid_count, spec.grid_count, spec.overlap);
        out.phi = build_basis_matrix(locations, *out.grid);
        break;
    case BasisFamily::wendland_multires:
        out.grid = build_multires_grid(spec.domain, spec.coarse_count, spec.levels, spec.overlap);
        out.phi = build_basis_matrix(locations, *out.grid);
        break;
    case BasisFamily::harmonic:
        out.phi = build_harmonic_basis(locations, spec.ell, scale_n);
        break;
    }
    return out;
}

Rectangle sampling_domain(const BasisSpec& spec, Index n)
{
    if (spec.family == BasisFamily::harmonic) {
        const double side = std::sqrt(static_cast<double>(n));
        return {0.0, side, 0.0, side};
    }
    return spec.domain;
}

TruePrecision make_truth(const GraphSpec& spec, const BasisSetup& basis, Rng& rng)
{
    const Index ell = basis.phi.cols();
    TruePrecision t;
    switch (spec.family) {
    case GraphFamily::lattice_sar:
        if (!basis.grid)
            throw ConfigError("lattice-sar truth requires a Wendland node grid");
        return latticekrig_precision(*basis.grid, spec.a_wght, spec.nu);
    case GraphFamily::band:
        return gen_band(ell, spec.spd_margin);
    case GraphFamily::cluster: {
        const Index blocks = spec.block_count.value_or(
            std::max<Index>(1, static_cast<Index>(std::llround(static_cast<double>(ell) / 20.0))));
        return gen_cluster(ell, blocks, spec.fill_prob, rng, spec.spd_margin);
    }
    case GraphFamily::random:
        return gen_random(ell, spec.edge_prob.value_or(std::min(1.0, 3.0 / static_cast<double>(ell))),
                          rng, spec.spd_margin);
    case GraphFamily::scale_free:
        return gen_scale_free(ell, rng, spec.spd_margin);
    }
    return t;
}

} // namespace bgl
