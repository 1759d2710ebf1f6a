#include <basisglasso/basis.hpp>
#include <basisglasso/dcfit.hpp>
#include <basisglasso/design.hpp>
#include <basisglasso/error.hpp>
#include <basisglasso/glasso.hpp>
#include <basisglasso/graphs.hpp>
#include <basisglasso/likelihood.hpp>
#include <basisglasso/predict.hpp>
#include <basisglasso/select.hpp>

#include <pybind11/eigen.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

namespace py = pybind11;
using namespace bgl;

namespace {

std::vector<Point> to_points(const Matrix& xy)
{
    if (xy.cols() != 2)
        throw ConfigError("locations must be an n x 2 array");
    std::vector<Point> pts(static_cast<std::size_t>(xy.rows()));
    for (Index i = 0; i < xy.rows(); ++i)
        pts[static_cast<std::size_t>(i)] = {xy(i, 0), xy(i, 1)};
    return pts;
}

Matrix from_points(const std::vector<Point>& pts)
{
    Matrix xy(static_cast<Index>(pts.size()), 2);
    for (std::size_t i = 0; i < pts.size(); ++i) {
        xy(static_cast<Index>(i), 0) = pts[i][0];
        xy(static_cast<Index>(i), 1) = pts[i][1];
    }
    return xy;
}

BasisSpec basis_spec(const std::string& family, Index grid_count, Index coarse_count, int levels,
                     double overlap, Index ell)
{
    BasisSpec s;
    s.family = parse_basis_family(family);
    s.grid_count = grid_count;
    s.coarse_count = coarse_count;
    s.levels = levels;
    s.overlap = overlap;
    s.ell = ell;
    return s;
}

py::dict fit_dict(const FitReport& r)
{
    py::dict d;
    d["Q"] = r.Q;
    d["tau2"] = r.tau2;
    d["iterations"] = r.iterations;
    d["converged"] = r.converged;
    d["stop"] = to_string(r.stop);
    d["objective_trace"] = r.objective_trace;
    d["rel_change_trace"] = r.rel_change_trace;
    d["monotonicity_violations"] = r.monotonicity_violations;
    return d;
}

} // namespace

PYBIND11_MODULE(_core, m)
{
    m.doc() = "Sparse precision estimation for basis-function spatial models";

    py::register_exception<ConfigError>(m, "ConfigError", PyExc_ValueError);
    py::register_exception<DataError>(m, "DataError", PyExc_ValueError);
    py::register_exception<NotSpdError>(m, "NotSpdError", PyExc_ArithmeticError);
    py::register_exception<NumericError>(m, "NumericError", PyExc_ArithmeticError);

    m.def("wendland", &wendland_eval, py::arg("d"));

    m.def(
        "basis_matrix",
        [](const Matrix& locations, const std::string& family, Index grid_count,
           Index coarse_count, int levels, double overlap, Index ell, double scale_n) {
            const auto pts = to_points(locations);
            const auto spec = basis_spec(family, grid_count, coarse_count, levels, overlap, ell);
            return build_basis(spec, pts, scale_n > 0 ? scale_n : double(pts.size())).phi.values;
        },
        py::arg("locations"), py::arg("family") = "wendland-single", py::arg("grid_count") = 10,
        py::arg("coarse_count") = 2, py::arg("levels") = 1, py::arg("overlap") = 2.5,
        py::arg("ell") = 100, py::arg("scale_n") = 0.0);

    m.def(
        "simulate",
        [](Index n, Index m_rep, const std::string& basis, Index size, const std::string& graph,
           double noise_to_signal, std::uint64_t seed) {
            BasisSpec bs;
            bs.family = parse_basis_family(basis);
            if (bs.family == BasisFamily::harmonic)
                bs.ell = size;
            else
                bs.grid_count = size;
            GraphSpec gs;
            gs.family = parse_graph_family(graph);
            auto rng = make_rng(seed);
            auto locs = uniform_locations(n, sampling_domain(bs, n), rng);
            const auto setup = build_basis(bs, locs, static_cast<double>(n));
            const auto truth = make_truth(gs, setup, rng);
            const auto ds = simulate_replicates(setup.phi, std::move(locs), truth, m_rep,
                                                noise_to_signal, rng());
            py::dict d;
            d["Y"] = ds.Y;
            d["locations"] = from_points(ds.locations);
            d["phi"] = ds.phi.values;
            d["Q_true"] = truth.Q;
            d["tau2"] = ds.tau2;
            return d;
        },
        py::arg("n"), py::arg("m"), py::arg("basis") = "wendland-single", py::arg("size") = 10,
        py::arg("graph") = "lattice-sar", py::arg("noise_to_signal") = 0.1, py::arg("seed") = 1);

    py::class_<LikelihoodKernel>(m, "LikelihoodKernel")
        .def_readonly("PhiTPhi", &LikelihoodKernel::PhiTPhi)
        .def_readonly("PhiTSPhi", &LikelihoodKernel::PhiTSPhi)
        .def_readonly("trS", &LikelihoodKernel::trS)
        .def_readonly("n", &LikelihoodKernel::n)
        .def_readonly("m", &LikelihoodKernel::m);

    m.def("kernel",
          py::overload_cast<const Matrix&, const Matrix&>(&empirical_cov_projections),
          py::arg("Y"), py::arg("phi"));
    m.def("reduced_nll", &reduced_nll, py::arg("Q"), py::arg("tau2"), py::arg("kernel"));
    m.def("total_nll", &total_nll, py::arg("Q"), py::arg("tau2"), py::arg("kernel"));
    m.def("full_nll", &full_nll, py::arg("Q"), py::arg("tau2"), py::arg("phi"), py::arg("S"));
    m.def("dc_gradient", &dc_gradient, py::arg("Q"), py::arg("kernel"), py::arg("tau2"));

    m.def(
        "estimate_nugget",
        [](const LikelihoodKernel& k) {
            const auto e = estimate_nugget(k);
            return py::make_tuple(e.tau2, e.alpha);
        },
        py::arg("kernel"), "Returns (tau2, alpha).");

    m.def(
        "penalty",
        [](Index ell, double lambda, const std::string& form, std::optional<Matrix> distances) {
            PenaltySpec s{parse_penalty_form(form), lambda, std::nullopt};
            return build_penalty(s, ell, distances ? &*distances : nullptr);
        },
        py::arg("ell"), py::arg("lambda_"), py::arg("form") = "constant",
        py::arg("distances") = py::none());

    m.def(
        "glasso",
        [](const Matrix& G, const Matrix& Lambda, std::optional<Matrix> Q_init, double tol) {
            GlassoOptions o;
            o.tol = tol;
            const Matrix q0 = Q_init ? *Q_init : Matrix(G.diagonal().cwiseInverse().asDiagonal());
            const auto s = glasso_solve(G, Lambda, q0, o);
            py::dict d;
            d["Q"] = s.Q;
            d["iterations"] = s.iterations;
            d["converged"] = s.converged;
            return d;
        },
        py::arg("G"), py::arg("Lambda"), py::arg("Q_init") = py::none(), py::arg("tol") = 1e-6);
    m.def("duality_gap", &duality_gap, py::arg("Q"), py::arg("G"), py::arg("lambda_"));

    m.def(
        "fit",
        [](const LikelihoodKernel& k, double tau2, const Matrix& Lambda, double tol,
           int max_iters) {
            DcOptions o;
            o.tol = tol;
            o.max_iters = max_iters;
            return fit_dict(dc_fit(k, tau2, Lambda, o));
        },
        py::arg("kernel"), py::arg("tau2"), py::arg("Lambda"), py::arg("tol") = 0.01,
        py::arg("max_iters") = 200);

    m.def(
        "krige",
        [](const Matrix& phi_obs, const Matrix& phi_pred, const Matrix& Q, double tau2,
           const Vector& y, bool include_nugget) {
            const auto r = krige(phi_obs, phi_pred, Q, tau2, y, include_nugget);
            return py::make_tuple(r.mean, r.variance);
        },
        py::arg("phi_obs"), py::arg("phi_pred"), py::arg("Q"), py::arg("tau2"), py::arg("y"),
        py::arg("include_nugget") = true, "Returns (mean, variance).");
    m.def("crps", &crps_gaussian, py::arg("mu"), py::arg("sigma"), py::arg("y"));
    m.def("effective_df", &effective_df, py::arg("Q"), py::arg("PhiTPhi"), py::arg("tau2"));

    m.def(
        "recovery_metrics",
        [](const Matrix& Q_hat, const Matrix& Q_true) {
            const auto r = recovery_metrics(Q_hat, Q_true);
            py::dict d;
            d["rel_frobenius"] = r.rel_frobenius;
            d["kl_score"] = r.kl_score;
            d["kl_conventional"] = r.kl_conventional;
            d["pct_missed_zeros"] = r.pct_missed_zeros;
            d["pct_missed_nonzeros"] = r.pct_missed_nonzeros;
            return d;
        },
        py::arg("Q_hat"), py::arg("Q_true"));
}
