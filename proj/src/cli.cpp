#include <basisglasso/cli.hpp>
#include <basisglasso/dcfit.hpp>
#include <basisglasso/design.hpp>
#include <basisglasso/error.hpp>
#include <basisglasso/experiments.hpp>
#include <basisglasso/io.hpp>
#include <basisglasso/likelihood.hpp>
#include <basisglasso/predict.hpp>
#include <basisglasso/select.hpp>

#include <CLI11.hpp>
#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <memory>
#include <optional>
#include <ostream>
#include <set>
#include <sstream>

namespace bgl {

namespace {

using json = nlohmann::ordered_json;
namespace fs = std::filesystem;

constexpr int format_version = 1;

std::vector<std::string> split_commas(const std::string& s)
{
    std::vector<std::string> out;
    std::stringstream ss(s);
    std::string item;
    while (std::getline(ss, item, ',')) {
        const auto b = item.find_first_not_of(" \t");
        const auto e = item.find_last_not_of(" \t");
        if (b != std::string::npos)
            out.push_back(item.substr(b, e - b + 1));
    }
    return out;
}

// Resolved parameters for one subcommand. Values given on the command line
// arrive as strings, values from JSON files keep their JSON type.
class Params
{
public:
    explicit Params(json j) : j_(std::move(j)) {}

    bool has(const std::string& key) const { return j_.contains(key) && !j_[key].is_null(); }

    std::optional<double> opt_num(const std::string& key) const
    {
        if (!has(key))
            return std::nullopt;
        const auto& v = j_[key];
        if (v.is_number())
            return v.get<double>();
        if (v.is_string())
            return parse_num(key, v.get<std::string>());
        throw ConfigError("option '" + key + "' must be a number");
    }
    double num(const std::string& key, double fallback) const
    {
        return opt_num(key).value_or(fallback);
    }
    long long integer(const std::string& key, long long fallback) const
    {
        const auto v = opt_num(key);
        if (!v)
            return fallback;
        if (*v != std::floor(*v))
            throw ConfigError("option '" + key + "' must be an integer");
        return static_cast<long long>(*v);
    }
    std::optional<std::string> opt_str(const std::string& key) const
    {
        if (!has(key))
            return std::nullopt;
        const auto& v = j_[key];
        if (!v.is_string())
            throw ConfigError("option '" + key + "' must be a string");
        return v.get<std::string>();
    }
    std::string str(const std::string& key, const std::string& fallback) const
    {
        return opt_str(key).value_or(fallback);
    }
    bool flag(const std::string& key) const
    {
        if (!has(key))
            return false;
        const auto& v = j_[key];
        if (v.is_boolean())
            return v.get<bool>();
        if (v.is_string())
            return v.get<std::string>() != "false" && v.get<std::string>() != "0";
        throw ConfigError("option '" + key + "' must be a boolean");
    }
    std::vector<std::string> strs(const std::string& key) const
    {
        if (!has(key))
            return {};
        const auto& v = j_[key];
        if (v.is_string())
            return split_commas(v.get<std::string>());
        if (v.is_array()) {
            std::vector<std::string> out;
            for (const auto& e : v) {
                if (e.is_string())
                    out.push_back(e.get<std::string>());
                else if (e.is_number())
                    out.push_back(io::format_double(e.get<double>()));
                else
                    throw ConfigError("option '" + key + "' has a non-scalar element");
            }
            return out;
        }
        if (v.is_number())
            return {io::format_double(v.get<double>())};
        throw ConfigError("option '" + key + "' must be a list");
    }
    std::vector<double> nums(const std::string& key) const
    {
        std::vector<double> out;
        for (const auto& s : strs(key))
            out.push_back(parse_num(key, s));
        return out;
    }
    std::string required_str(const std::string& key) const
    {
        auto v = opt_str(key);
        if (!v || v->empty())
            throw ConfigError("missing required option --" + dashed(key));
        return *v;
    }

    static std::string dashed(std::string key)
    {
        std::replace(key.begin(), key.end(), '_', '-');
        return key;
    }

private:
    static double parse_num(const std::string& key, const std::string& s)
    {
        try {
            std::size_t pos = 0;
            const double d = std::stod(s, &pos);
            if (pos == s.size())
                return d;
        } catch (const std::exception&) {
        }
        throw ConfigError("option '" + key + "' expects a number, got '" + s + "'");
    }

    json j_;
};

std::string key_of(const CLI::Option* opt)
{
    std::string name = opt->get_lnames().empty() ? opt->get_name() : opt->get_lnames().front();
    std::replace(name.begin(), name.end(), '-', '_');
    return name;
}

// Explicitly given command-line options as a JSON object.
json given_flags(const CLI::App& app)
{
    json j = json::object();
    for (const CLI::Option* opt : app.get_options()) {
        if (opt->count() == 0 || key_of(opt) == "help")
            continue;
        if (opt->get_expected_max() == 0) {
            j[key_of(opt)] = true;
            continue;
        }
        std::string joined;
        for (const auto& r : opt->results())
            joined += (joined.empty() ? "" : ",") + r;
        j[key_of(opt)] = joined;
    }
    return j;
}

std::set<std::string> known_keys(const CLI::App& app)
{
    std::set<std::string> keys;
    for (const CLI::Option* opt : app.get_options())
        keys.insert(key_of(opt));
    return keys;
}

json read_json(const fs::path& path)
{
    const std::string text = io::read_text(path);
    try {
        return json::parse(text);
    } catch (const json::parse_error& e) {
        throw DataError(path.string() + ": " + e.what());
    }
}

// defaults < layers (in order) < command-line flags < --config file
Params resolve(const CLI::App& app, const std::vector<json>& layers)
{
    json merged = json::object();
    for (const auto& layer : layers)
        for (const auto& [k, v] : layer.items())
            merged[k] = v;
    const json flags = given_flags(app);
    for (const auto& [k, v] : flags.items())
        merged[k] = v;
    if (flags.contains("config")) {
        const fs::path path = flags["config"].get<std::string>();
        json file = read_json(path);
        if (file.contains("config") && file["config"].is_object())
            file = file["config"];
        if (!file.is_object())
            throw ConfigError(path.string() + ": config must be a JSON object");
        const auto keys = known_keys(app);
        for (const auto& [k, v] : file.items()) {
            if (!keys.count(k))
                throw ConfigError(path.string() + ": unknown key '" + k + "'");
            merged[k] = v;
        }
    }
    return Params(std::move(merged));
}

// ---- shared option groups ----------------------------------------------

void add_basis_options(CLI::App* app)
{
    app->add_option("--basis", "Basis family: wendland-single | wendland-multires | harmonic");
    app->add_option("--grid-count", "Single-level Wendland nodes per axis (default 10)");
    app->add_option("--coarse-count", "Multiresolution coarsest nodes per axis (default 2)");
    app->add_option("--levels", "Multiresolution level count (default 1)");
    app->add_option("--overlap", "Node radius as a multiple of the lattice spacing (default 2.5)");
    app->add_option("--ell", "Harmonic basis size, a perfect square (default 100)");
    app->add_option("--x-min", "Node domain");
    app->add_option("--x-max", "Node domain");
    app->add_option("--y-min", "Node domain");
    app->add_option("--y-max", "Node domain");
}

const char* const basis_keys[] = {"basis", "grid_count", "coarse_count", "levels", "overlap",
                                  "ell", "x_min", "x_max", "y_min", "y_max"};

BasisSpec basis_from(const Params& p)
{
    BasisSpec s;
    s.family = parse_basis_family(p.str("basis", to_string(s.family)));
    s.grid_count = p.integer("grid_count", s.grid_count);
    s.coarse_count = p.integer("coarse_count", s.coarse_count);
    s.levels = static_cast<int>(p.integer("levels", s.levels));
    s.overlap = p.num("overlap", s.overlap);
    s.ell = p.integer("ell", s.ell);
    s.domain.x_min = p.num("x_min", s.domain.x_min);
    s.domain.x_max = p.num("x_max", s.domain.x_max);
    s.domain.y_min = p.num("y_min", s.domain.y_min);
    s.domain.y_max = p.num("y_max", s.domain.y_max);
    return s;
}

json basis_echo(const BasisSpec& s)
{
    return json{{"basis", to_string(s.family)},
                {"grid_count", s.grid_count},
                {"coarse_count", s.coarse_count},
                {"levels", s.levels},
                {"overlap", s.overlap},
                {"ell", s.ell},
                {"x_min", s.domain.x_min},
                {"x_max", s.domain.x_max},
                {"y_min", s.domain.y_min},
                {"y_max", s.domain.y_max}};
}

json pick(const json& j, std::initializer_list<const char*> keys)
{
    json out = json::object();
    for (const char* k : keys)
        if (j.contains(k))
            out[k] = j[k];
    return out;
}

json basis_layer(const json& j)
{
    json out = json::object();
    for (const char* k : basis_keys)
        if (j.contains(k))
            out[k] = j[k];
    return out;
}

void add_graph_options(CLI::App* app)
{
    app->add_option("--graph", "Truth family: band | cluster | random | scale-free | lattice-sar");
    app->add_option("--a-wght", "Lattice SAR diagonal weight, > 4 (default 4.05)");
    app->add_option("--nu", "Lattice SAR level-weight decay (default 0.5)");
    app->add_option("--edge-prob", "Random graph edge probability (default 3/ell)");
    app->add_option("--block-count", "Cluster graph block count (default round(ell/20))");
    app->add_option("--fill-prob", "Within-block edge probability (default 1)");
    app->add_option("--spd-margin", "Diagonal margin added by the SPD correction (default 0.1)");
}

GraphSpec graph_from(const Params& p)
{
    GraphSpec g;
    g.family = parse_graph_family(p.str("graph", to_string(g.family)));
    g.a_wght = p.num("a_wght", g.a_wght);
    g.nu = p.num("nu", g.nu);
    if (auto v = p.opt_num("edge_prob"))
        g.edge_prob = *v;
    if (p.has("block_count"))
        g.block_count = p.integer("block_count", 1);
    g.fill_prob = p.num("fill_prob", g.fill_prob);
    g.spd_margin = p.num("spd_margin", g.spd_margin);
    return g;
}

json graph_echo(const GraphSpec& g)
{
    json j{{"graph", to_string(g.family)}, {"a_wght", g.a_wght}, {"nu", g.nu}};
    if (g.edge_prob)
        j["edge_prob"] = *g.edge_prob;
    if (g.block_count)
        j["block_count"] = *g.block_count;
    j["fill_prob"] = g.fill_prob;
    j["spd_margin"] = g.spd_margin;
    return j;
}

void add_fit_options(CLI::App* app)
{
    app->add_option("--penalty", "Penalty form: constant | distance (default constant)");
    app->add_option("--gamma", "Penalty on rows/columns of global basis columns");
    app->add_option("--tau2", "Nugget variance; estimated from the data when omitted");
    app->add_option("--tol", "Outer relative Frobenius tolerance (default 0.01)");
    app->add_option("--inner-tol", "Graphical lasso relative subgradient tolerance (default 1e-6)");
    app->add_option("--max-iters", "Outer iteration cap (default 200)");
    app->add_option("--max-seconds", "Outer wall-time cap (default 3600)");
    app->add_option("--detrend", "Covariate columns regressed out (with an intercept) before fitting");
    app->add_option("--global-covariate", "Covariate column appended to Phi as a global basis function");
}

DcOptions fit_options_from(const Params& p)
{
    DcOptions o;
    o.tol = p.num("tol", o.tol);
    o.max_iters = static_cast<int>(p.integer("max_iters", o.max_iters));
    o.max_seconds = p.num("max_seconds", o.max_seconds);
    o.inner.tol = p.num("inner_tol", o.inner.tol);
    if (!(o.tol >= 0.0) || !(o.inner.tol > 0.0) || o.max_iters < 1 || !(o.max_seconds > 0.0))
        throw ConfigError("tolerances and caps must be positive (outer tol may be 0)");
    return o;
}

json fit_options_echo(const DcOptions& o)
{
    return json{{"tol", o.tol},
                {"inner_tol", o.inner.tol},
                {"max_iters", o.max_iters},
                {"max_seconds", o.max_seconds}};
}

void add_data_options(CLI::App* app)
{
    app->add_option("--data", "Dataset directory written by `simulate` (reads manifest.json)");
    app->add_option("--locations", "Locations CSV (id,x,y[,covariates...])");
    app->add_option("--replicates", "Replicate matrix, n x m (.bin or .csv)");
    app->add_option("--scale-n", "Harmonic frequency normalization (default: manifest n or row count)");
}

// ---- data and model ----------------------------------------------------

struct Dataset
{
    io::LocationTable locations;
    Matrix Y;
    json manifest;  // null without --data
    fs::path dir;
};

json manifest_of(const Params& p)
{
    if (!p.has("data"))
        return nullptr;
    return read_json(fs::path(p.str("data", "")) / "manifest.json");
}

Dataset load_data(const Params& p)
{
    Dataset d;
    d.manifest = manifest_of(p);
    fs::path loc, rep;
    if (!d.manifest.is_null()) {
        d.dir = p.str("data", "");
        const auto& files = d.manifest.at("files");
        loc = d.dir / files.at("locations").get<std::string>();
        rep = d.dir / files.at("replicates").get<std::string>();
    }
    if (auto v = p.opt_str("locations"))
        loc = *v;
    if (auto v = p.opt_str("replicates"))
        rep = *v;
    if (loc.empty() || rep.empty())
        throw ConfigError("need --data, or both --locations and --replicates");
    d.locations = io::read_locations_csv(loc);
    d.Y = io::read_matrix(rep);
    if (d.Y.rows() != static_cast<Index>(d.locations.points.size()))
        throw DataError(rep.string() + ": " + std::to_string(d.Y.rows()) + " rows but " +
                        loc.string() + " lists " + std::to_string(d.locations.points.size()) +
                        " locations");
    if (!d.Y.allFinite())
        throw DataError(rep.string() + ": non-finite replicate values");
    return d;
}

json data_layer(const json& manifest)
{
    if (manifest.is_null())
        return json::object();
    json layer = basis_layer(manifest.value("basis", json::object()));
    if (manifest.contains("n"))
        layer["scale_n"] = manifest["n"];
    return layer;
}

Matrix covariate_matrix(const io::LocationTable& t, const std::vector<std::string>& names,
                        const std::vector<Index>& rows)
{
    Matrix X(static_cast<Index>(rows.size()), static_cast<Index>(names.size()) + 1);
    X.col(0).setOnes();
    for (std::size_t k = 0; k < names.size(); ++k) {
        const Vector c = t.covariate(names[k]);
        for (std::size_t r = 0; r < rows.size(); ++r)
            X(static_cast<Index>(r), static_cast<Index>(k) + 1) = c(rows[r]);
    }
    return X;
}

std::vector<Index> all_rows(Index n)
{
    std::vector<Index> r(static_cast<std::size_t>(n));
    for (Index i = 0; i < n; ++i)
        r[static_cast<std::size_t>(i)] = i;
    return r;
}

Matrix select_rows(const Matrix& a, const std::vector<Index>& rows)
{
    Matrix out(static_cast<Index>(rows.size()), a.cols());
    for (std::size_t r = 0; r < rows.size(); ++r)
        out.row(static_cast<Index>(r)) = a.row(rows[r]);
    return out;
}

struct Model
{
    BasisSpec spec;
    BasisSetup basis;  // phi includes the global column when requested
    double scale_n = 0.0;
    std::vector<std::string> detrend;
    std::optional<std::string> global_covariate;
    std::optional<Matrix> distances;
    std::unique_ptr<bool[]> mask_data;
    std::span<const bool> mask;
};

Model build_model(const Params& p, const Dataset& d)
{
    Model m;
    m.spec = basis_from(p);
    m.scale_n = p.num("scale_n", static_cast<double>(d.locations.points.size()));
    m.basis = build_basis(m.spec, d.locations.points, m.scale_n);
    m.detrend = p.strs("detrend");
    if (auto g = p.opt_str("global_covariate"); g && !g->empty()) {
        m.global_covariate = *g;
        m.basis.phi = append_global_column(m.basis.phi, d.locations.covariate(*g), *g);
    }
    if (m.basis.grid)
        m.distances = node_distances(*m.basis.grid);
    const auto mask = m.basis.phi.global_mask();
    m.mask_data = std::make_unique<bool[]>(mask.size());
    std::copy(mask.begin(), mask.end(), m.mask_data.get());
    m.mask = {m.mask_data.get(), mask.size()};
    return m;
}

json model_echo(const Model& m)
{
    json j = basis_echo(m.spec);
    j["scale_n"] = m.scale_n;
    j["detrend"] = m.detrend;
    j["global_covariate"] = m.global_covariate ? json(*m.global_covariate) : json(nullptr);
    return j;
}

// Y minus its least-squares fit on [1, covariates]; identity without detrending.
Matrix detrended(const Dataset& d, const Model& m)
{
    if (m.detrend.empty())
        return d.Y;
    const Matrix X = covariate_matrix(d.locations, m.detrend, all_rows(d.Y.rows()));
    const auto qr = X.colPivHouseholderQr();
    if (qr.rank() < X.cols())
        throw DataError("detrend design matrix is rank deficient");
    return d.Y - X * qr.solve(d.Y);
}

PenaltySpec penalty_from(const Params& p, double lambda)
{
    PenaltySpec s;
    s.form = parse_penalty_form(p.str("penalty", "constant"));
    s.lambda = lambda;
    if (auto g = p.opt_num("gamma"))
        s.gamma = *g;
    if (lambda < 0.0 || (s.gamma && *s.gamma < 0.0))
        throw ConfigError("penalty weights must be nonnegative");
    return s;
}

json penalty_echo(const PenaltySpec& s)
{
    return json{{"lambda", s.lambda},
                {"penalty", to_string(s.form)},
                {"gamma", s.gamma ? json(*s.gamma) : json(nullptr)}};
}

json nugget_echo(const NuggetEstimate& e)
{
    return json{{"tau2", e.tau2},
                {"alpha", e.alpha},
                {"objective", e.objective},
                {"start_objectives", e.start_objectives},
                {"end_objectives", e.end_objectives}};
}

json finite_or_null(double v)
{
    return std::isfinite(v) ? json(v) : json(nullptr);
}

fs::path out_dir(const Params& p)
{
    fs::path dir = p.required_str("out");
    std::error_code ec;
    fs::create_directories(dir, ec);
    if (ec)
        throw DataError(dir.string() + ": cannot create output directory: " + ec.message());
    return dir;
}

void write_json(const fs::path& path, const json& j)
{
    io::write_text(path, j.dump(2) + "\n");
}

// ---- simulate ----------------------------------------------------------

int cmd_simulate(const CLI::App& app, std::ostream& out)
{
    const Params p = resolve(app, {});
    const fs::path dir = out_dir(p);
    const Index n = p.integer("n", 400);
    const Index m = p.integer("m", 50);
    const double nsr = p.num("noise_to_signal", 0.1);
    const auto seed = static_cast<std::uint64_t>(p.integer("seed", 1));
    if (n < 1 || m < 2)
        throw ConfigError("simulate needs n >= 1 and m >= 2");
    const BasisSpec bs = basis_from(p);
    const GraphSpec gs = graph_from(p);

    auto rng = make_rng(seed, {0x5111});
    auto locations = uniform_locations(n, sampling_domain(bs, n), rng);
    const auto basis = build_basis(bs, locations, static_cast<double>(n));
    const auto truth = make_truth(gs, basis, rng);
    const std::uint64_t sim_seed = rng();
    const auto ds = simulate_replicates(basis.phi, locations, truth, m, nsr, sim_seed);

    io::LocationTable table;
    for (Index i = 0; i < n; ++i)
        table.ids.push_back(std::to_string(i));
    table.points = locations;
    table.covariates = Matrix(n, 0);

    json files{{"locations", "locations.csv"}, {"replicates", "Y.bin"}, {"q_true", "Q_true.csv"}};
    io::write_locations_csv(dir / "locations.csv", table);
    io::write_matrix_bin(dir / "Y.bin", ds.Y);
    if (p.flag("csv")) {
        io::write_matrix_csv(dir / "Y.csv", ds.Y);
        files["replicates_csv"] = "Y.csv";
    }
    io::write_triplets(dir / "Q_true.csv", truth.Q, 0.0);
    if (basis.grid) {
        io::write_nodes_csv(dir / "nodes.csv", *basis.grid);
        files["nodes"] = "nodes.csv";
    }

    json manifest{{"format_version", format_version},
                  {"command", "simulate"},
                  {"n", n},
                  {"m", m},
                  {"ell", basis.phi.cols()},
                  {"seed", seed},
                  {"noise_to_signal", nsr},
                  {"tau2", ds.tau2},
                  {"basis", basis_echo(bs)},
                  {"graph", graph_echo(gs)},
                  {"files", files}};
    write_json(dir / "manifest.json", manifest);
    out << "simulated n=" << n << " m=" << m << " ell=" << basis.phi.cols()
        << " tau2=" << io::format_double(ds.tau2) << " -> " << dir.string() << "\n";
    return 0;
}

// ---- fit ---------------------------------------------------------------

json selection_layer(const Params& p)
{
    if (!p.has("selection"))
        return json::object();
    const json sel = read_json(p.str("selection", ""));
    if (!sel.contains("selected") || sel["selected"].is_null())
        throw ConfigError(p.str("selection", "") + ": no selected candidate");
    json layer = json::object();
    const auto& s = sel["selected"];
    layer["lambda"] = s.at("lambda");
    layer["penalty"] = s.at("penalty");
    if (s.contains("gamma") && !s["gamma"].is_null())
        layer["gamma"] = s["gamma"];
    if (sel.contains("tau2"))
        layer["tau2"] = sel["tau2"];
    return layer;
}

int cmd_fit(const CLI::App& app, std::ostream& out, std::ostream& err)
{
    const Params first = resolve(app, {});
    const json manifest = manifest_of(first);
    const Params p = resolve(app, {data_layer(manifest), selection_layer(first)});
    const fs::path dir = out_dir(p);
    const Dataset d = load_data(p);
    const Model model = build_model(p, d);
    const Matrix Y = detrended(d, model);
    const auto kernel = empirical_cov_projections(Y, model.basis.phi.values);

    std::optional<NuggetEstimate> nugget;
    double tau2 = 0.0;
    if (auto t = p.opt_num("tau2")) {
        tau2 = *t;
        if (!(tau2 > 0.0))
            throw ConfigError("--tau2 must be positive");
    } else {
        nugget = estimate_nugget(kernel);
        tau2 = nugget->tau2;
    }
    if (!p.has("lambda"))
        throw ConfigError("missing required option --lambda (or --selection)");
    const PenaltySpec pen = penalty_from(p, p.num("lambda", 0.0));
    const DcOptions opts = fit_options_from(p);
    const double threshold = p.num("threshold", 0.0);
    const Index ell = model.basis.phi.cols();
    const Matrix Lambda = build_penalty(pen, ell, model.distances ? &*model.distances : nullptr,
                                        model.mask);
    const FitReport fit = dc_fit(kernel, tau2, Lambda, opts);

    io::write_triplets(dir / "Q_hat.csv", fit.Q, threshold);

    json config = json::object();
    if (p.has("data"))
        config["data"] = p.str("data", "");
    if (p.has("locations"))
        config["locations"] = p.str("locations", "");
    if (p.has("replicates"))
        config["replicates"] = p.str("replicates", "");
    config.update(model_echo(model));
    config.update(penalty_echo(pen));
    config["tau2"] = tau2;
    config.update(fit_options_echo(opts));
    config["threshold"] = threshold;

    json result{{"tau2", fit.tau2},
                {"tau2_source", nugget ? "estimated" : "given"},
                {"n", kernel.n},
                {"m", kernel.m},
                {"ell", ell},
                {"iterations", fit.iterations},
                {"converged", fit.converged},
                {"stop", to_string(fit.stop)},
                {"objective_trace", fit.objective_trace},
                {"rel_change_trace", fit.rel_change_trace},
                {"inner_iterations", fit.inner_iterations},
                {"inner_all_converged", fit.inner_all_converged},
                {"monotonicity_violations", fit.monotonicity_violations},
                {"nonzeros_offdiag", static_cast<Index>(offdiag_pattern(fit.Q).size())}};
    if (nugget)
        result["nugget"] = nugget_echo(*nugget);
    if (p.flag("timing"))
        result["wall_seconds"] = fit.wall_seconds;
    json report{{"format_version", format_version},
                {"command", "fit"},
                {"config", config},
                {"result", result},
                {"files", {{"q_hat", "Q_hat.csv"}}}};
    write_json(dir / "fit.json", report);

    out << "fit: " << fit.iterations << " outer iterations, stop=" << to_string(fit.stop)
        << ", tau2=" << io::format_double(tau2) << " -> " << dir.string() << "\n";
    if (!fit.converged) {
        err << "error: fit did not converge (" << to_string(fit.stop)
            << "); outputs written for inspection\n";
        return static_cast<int>(ErrorCategory::nonconvergence);
    }
    return 0;
}

// ---- cv ----------------------------------------------------------------

int cmd_cv(const CLI::App& app, std::ostream& out, std::ostream& err)
{
    const Params first = resolve(app, {});
    const Params p = resolve(app, {data_layer(manifest_of(first))});
    const fs::path dir = out_dir(p);
    const Dataset d = load_data(p);
    const Model model = build_model(p, d);
    const Matrix Y = detrended(d, model);
    const Index ell = model.basis.phi.cols();

    const auto lambdas = p.nums("lambdas");
    if (lambdas.empty())
        throw ConfigError("missing required option --lambdas");
    std::vector<PenaltySpec> specs;
    for (double l : lambdas)
        specs.push_back(penalty_from(p, l));
    const auto candidates = make_candidates(
        specs, ell, model.distances ? &*model.distances : nullptr, model.mask);

    std::optional<NuggetEstimate> nugget;
    double tau2 = 0.0;
    if (auto t = p.opt_num("tau2")) {
        tau2 = *t;
    } else {
        nugget = estimate_nugget(empirical_cov_projections(Y, model.basis.phi.values));
        tau2 = nugget->tau2;
    }
    CvOptions cvo;
    cvo.fit = fit_options_from(p);
    cvo.workers = static_cast<int>(p.integer("workers", 1));
    const auto seed = static_cast<std::uint64_t>(p.integer("seed", 1));
    const std::string method = p.str("method", "likelihood");

    CvResult cv;
    json method_echo{{"method", method}, {"seed", seed}};
    if (method == "likelihood") {
        const int k = static_cast<int>(p.integer("folds", 5));
        method_echo["folds"] = k;
        cv = cv_likelihood(Y, model.basis.phi.values, tau2, candidates,
                           kfold_partition(Y.cols(), k, seed), cvo);
    } else if (method == "predictive") {
        const Index count = p.integer("holdout", std::max<Index>(1, Y.rows() / 10));
        method_echo["holdout"] = count;
        const auto heldout = holdout_indices(Y.rows(), count, seed);
        cv = cv_predictive(Y, model.basis.phi.values, tau2, candidates, heldout, cvo).cv;
    } else {
        throw ConfigError("unknown --method '" + method + "' (likelihood | predictive)");
    }

    std::ostringstream scores;
    scores << "candidate_id,fold,score\n";
    for (const auto& c : cv.cells)
        scores << c.candidate << ',' << c.fold << ','
               << (c.ok ? io::format_double(c.score) : std::string("nan")) << '\n';
    io::write_text(dir / "scores.csv", scores.str());

    json cands = json::array();
    for (std::size_t i = 0; i < candidates.size(); ++i) {
        json c{{"candidate_id", i}};
        c.update(penalty_echo(candidates[i].spec));
        c["mean_score"] = finite_or_null(cv.mean_score[i]);
        c["excluded"] = static_cast<bool>(cv.excluded[i]);
        cands.push_back(c);
    }
    json errors = json::array();
    for (const auto& c : cv.cells)
        if (!c.ok)
            errors.push_back({{"candidate_id", c.candidate}, {"fold", c.fold}, {"error", c.error}});

    json config = json::object();
    if (p.has("data"))
        config["data"] = p.str("data", "");
    config.update(model_echo(model));
    config.update(method_echo);
    config["lambdas"] = lambdas;
    config["penalty"] = to_string(specs.front().form);
    config["gamma"] = specs.front().gamma ? json(*specs.front().gamma) : json(nullptr);
    config.update(fit_options_echo(cvo.fit));

    json selected = nullptr;
    if (cv.selected) {
        selected = json{{"candidate_id", *cv.selected}};
        selected.update(penalty_echo(candidates[*cv.selected].spec));
    }
    json selection{{"format_version", format_version},
                   {"command", "cv"},
                   {"config", config},
                   {"tau2", tau2},
                   {"tau2_source", nugget ? "estimated" : "given"},
                   {"candidates", cands},
                   {"selected", selected},
                   {"boundary", cv.boundary},
                   {"warning", cv.warning},
                   {"failed_cells", errors}};
    write_json(dir / "selection.json", selection);

    if (!cv.warning.empty())
        err << "warning: " << cv.warning << "\n";
    if (!cv.selected)
        throw NonconvergenceError("cross-validation excluded every candidate");
    out << "cv: selected lambda=" << io::format_double(candidates[*cv.selected].spec.lambda)
        << " -> " << dir.string() << "\n";
    return 0;
}

// ---- predict / metrics shared -----------------------------------------

struct FittedModel
{
    Matrix Q;
    double tau2 = 0.0;
    json fit_config;  // null when Q and tau2 were passed directly
};

FittedModel load_fitted(const Params& p)
{
    FittedModel f;
    if (p.has("fit")) {
        const fs::path dir = p.str("fit", "");
        const json report = read_json(dir / "fit.json");
        f.fit_config = report.at("config");
        f.Q = io::read_triplets(dir / report.at("files").at("q_hat").get<std::string>());
        f.tau2 = report.at("result").at("tau2").get<double>();
    }
    if (auto q = p.opt_str("q_hat"))
        f.Q = io::read_triplets(*q);
    if (auto t = p.opt_num("tau2"))
        f.tau2 = *t;
    if (f.Q.size() == 0)
        throw ConfigError("need --fit or --q-hat");
    return f;
}

json fit_model_layer(const json& fit_config)
{
    if (fit_config.is_null())
        return json::object();
    json layer = basis_layer(fit_config);
    for (const char* k : {"scale_n", "detrend", "global_covariate"})
        if (fit_config.contains(k) && !fit_config[k].is_null())
            layer[k] = fit_config[k];
    return layer;
}

// ---- predict -----------------------------------------------------------

int cmd_predict(const CLI::App& app, std::ostream& out)
{
    const Params first = resolve(app, {});
    const FittedModel fitted = load_fitted(first);
    json base = json::object();
    if (!first.has("data") && fitted.fit_config.contains("data"))
        base["data"] = fitted.fit_config["data"];
    const Params p0 = resolve(app, {base, fit_model_layer(fitted.fit_config)});
    const Params p = resolve(app, {data_layer(manifest_of(p0)), base, fit_model_layer(fitted.fit_config)});
    const fs::path dir = out_dir(p);
    const Dataset d = load_data(p);
    const Model model = build_model(p, d);
    const Index n = d.Y.rows();
    const Index ell = model.basis.phi.cols();
    if (fitted.Q.rows() != ell)
        throw DataError("fitted Q is " + std::to_string(fitted.Q.rows()) + "x" +
                        std::to_string(fitted.Q.cols()) + " but the basis has " +
                        std::to_string(ell) + " columns");
    if (!(fitted.tau2 > 0.0))
        throw ConfigError("need a positive nugget (--tau2 or --fit)");

    const Index count = p.integer("holdout", std::min<Index>(400, n / 10));
    const auto seed = static_cast<std::uint64_t>(p.integer("seed", 1));
    const Index reps = p.integer("replicates_used", d.Y.cols());
    if (count < 1 || count >= n)
        throw ConfigError("--holdout must be in [1, n)");
    if (reps < 1 || reps > d.Y.cols())
        throw ConfigError("--replicates-used must be in [1, m]");
    const auto held = holdout_indices(n, count, seed);
    const auto kept = complement(n, held);

    const Matrix Yr = d.Y.leftCols(reps);
    Matrix Yobs = select_rows(Yr, kept);
    Matrix trend = Matrix::Zero(count, reps);
    if (!model.detrend.empty()) {
        const Matrix Xo = covariate_matrix(d.locations, model.detrend, kept);
        const Matrix Xh = covariate_matrix(d.locations, model.detrend, held);
        const Matrix beta = Xo.colPivHouseholderQr().solve(Yobs);
        Yobs -= Xo * beta;
        trend = Xh * beta;
    }
    const Matrix& phi = model.basis.phi.values;
    const auto kb = krige_batch(select_rows(phi, kept), select_rows(phi, held), fitted.Q,
                                fitted.tau2, Yobs, true);

    std::ostringstream csv;
    csv << "point_id,replicate,mean,sd,observed,sq_error,crps\n";
    double sse = 0.0, crps_sum = 0.0;
    for (Index a = 0; a < count; ++a) {
        const Index row = held[static_cast<std::size_t>(a)];
        const double sd = std::sqrt(kb.variance(a));
        for (Index r = 0; r < reps; ++r) {
            const double mean = kb.mean(a, r) + trend(a, r);
            const double obs = Yr(row, r);
            const double se = (mean - obs) * (mean - obs);
            const double crps = crps_gaussian(mean, sd, obs);
            sse += se;
            crps_sum += crps;
            csv << d.locations.ids[static_cast<std::size_t>(row)] << ',' << r << ','
                << io::format_double(mean) << ',' << io::format_double(sd) << ','
                << io::format_double(obs) << ',' << io::format_double(se) << ','
                << io::format_double(crps) << '\n';
        }
    }
    io::write_text(dir / "predictions.csv", csv.str());
    const double pairs = static_cast<double>(count) * static_cast<double>(reps);

    json files{{"predictions", "predictions.csv"}};
    const Index grid_n = p.integer("sd_grid", 0);
    if (grid_n > 0) {
        if (model.global_covariate)
            throw ConfigError("--sd-grid is unavailable with a global covariate column");
        double x0 = d.locations.points.front()[0], x1 = x0;
        double y0 = d.locations.points.front()[1], y1 = y0;
        for (const auto& pt : d.locations.points) {
            x0 = std::min(x0, pt[0]);
            x1 = std::max(x1, pt[0]);
            y0 = std::min(y0, pt[1]);
            y1 = std::max(y1, pt[1]);
        }
        std::vector<Point> grid;
        for (Index j = 0; j < grid_n; ++j)
            for (Index i = 0; i < grid_n; ++i) {
                const double fx = grid_n == 1 ? 0.5 : static_cast<double>(i) / (grid_n - 1);
                const double fy = grid_n == 1 ? 0.5 : static_cast<double>(j) / (grid_n - 1);
                grid.push_back({x0 + fx * (x1 - x0), y0 + fy * (y1 - y0)});
            }
        const auto gb = build_basis(model.spec, grid, model.scale_n);
        const Vector sd = implied_sd(gb.phi.values, fitted.Q);
        std::ostringstream f;
        f << "x,y,value\n";
        for (std::size_t k = 0; k < grid.size(); ++k)
            f << io::format_double(grid[k][0]) << ',' << io::format_double(grid[k][1]) << ','
              << io::format_double(sd(static_cast<Index>(k))) << '\n';
        io::write_text(dir / "sd_field.csv", f.str());
        files["sd_field"] = "sd_field.csv";
    }

    json config = json::object();
    if (p.has("data"))
        config["data"] = p.str("data", "");
    if (p.has("fit"))
        config["fit"] = p.str("fit", "");
    config.update(model_echo(model));
    config["tau2"] = fitted.tau2;
    config["holdout"] = count;
    config["seed"] = seed;
    config["replicates_used"] = reps;
    config["sd_grid"] = grid_n;
    json summary{{"format_version", format_version},
                 {"command", "predict"},
                 {"config", config},
                 {"heldout_points", count},
                 {"replicates", reps},
                 {"count", static_cast<Index>(pairs)},
                 {"mse", sse / pairs},
                 {"rmse", std::sqrt(sse / pairs)},
                 {"crps", crps_sum / pairs},
                 {"files", files}};
    write_json(dir / "prediction_summary.json", summary);
    out << "predict: " << static_cast<Index>(pairs) << " scored pairs, mse="
        << io::format_double(sse / pairs) << ", crps=" << io::format_double(crps_sum / pairs)
        << " -> " << dir.string() << "\n";
    return 0;
}

// ---- metrics -----------------------------------------------------------

int cmd_metrics(const CLI::App& app, std::ostream& out)
{
    const Params first = resolve(app, {});
    const FittedModel fitted = load_fitted(first);
    json base = json::object();
    if (!first.has("data") && fitted.fit_config.contains("data"))
        base["data"] = fitted.fit_config["data"];
    const Params p0 = resolve(app, {base, fit_model_layer(fitted.fit_config)});
    const json manifest = manifest_of(p0);
    const Params p = resolve(app, {data_layer(manifest), base, fit_model_layer(fitted.fit_config)});
    const fs::path dir = out_dir(p);

    json report{{"format_version", format_version}, {"command", "metrics"}};
    json config = json::object();

    std::optional<fs::path> truth_path;
    if (auto t = p.opt_str("q_true"))
        truth_path = *t;
    else if (!manifest.is_null() && manifest["files"].contains("q_true"))
        truth_path = fs::path(p.str("data", "")) / manifest["files"]["q_true"].get<std::string>();
    if (truth_path) {
        const Matrix Qt = io::read_triplets(*truth_path);
        if (Qt.rows() != fitted.Q.rows())
            throw DataError(truth_path->string() + ": dimension does not match the fitted Q");
        const auto rm = recovery_metrics(fitted.Q, Qt, p.opt_num("zero_tol"));
        config["q_true"] = truth_path->string();
        report["recovery"] = json{{"rel_frobenius", rm.rel_frobenius},
                                  {"kl_score", rm.kl_score ? json(*rm.kl_score) : json(nullptr)},
                                  {"kl_conventional", rm.kl_conventional ? json(*rm.kl_conventional)
                                                                         : json(nullptr)},
                                  {"kl_diagnostic", rm.kl_diagnostic},
                                  {"pct_missed_zeros", rm.pct_missed_zeros},
                                  {"pct_missed_nonzeros", rm.pct_missed_nonzeros},
                                  {"zero_tol", rm.zero_tol}};
    }

    std::optional<Model> model;
    if (p.has("data") || p.has("locations")) {
        const Dataset d = load_data(p);
        model = build_model(p, d);
        const Matrix Y = detrended(d, *model);
        const auto kernel = empirical_cov_projections(Y, model->basis.phi.values);
        if (kernel.ell() != fitted.Q.rows())
            throw DataError("fitted Q does not match the basis size");
        if (!(fitted.tau2 > 0.0))
            throw ConfigError("need a positive nugget (--tau2 or --fit)");
        const double df = effective_df(fitted.Q, kernel.PhiTPhi, fitted.tau2);
        const double nll = replicate_nll(fitted.Q, fitted.tau2, kernel);
        report["model"] = json{{"n", kernel.n},
                               {"m", kernel.m},
                               {"ell", kernel.ell()},
                               {"tau2", fitted.tau2},
                               {"nll", nll},
                               {"eff_df", df},
                               {"aic", aic(nll, df)}};
        config.update(model_echo(*model));
    }

    if (p.has("node")) {
        const Index j = p.integer("node", 0);
        const double thr = p.num("neighbor_threshold", 0.0);
        if (j < 0 || j >= fitted.Q.rows())
            throw ConfigError("--node out of range");
        const NodeGrid* grid = model && model->basis.grid ? &*model->basis.grid : nullptr;
        const auto nb = neighborhood(fitted.Q, j, thr, grid);
        std::ostringstream csv;
        csv << "index,value,x,y\n";
        for (const auto& e : nb) {
            csv << e.index << ',' << io::format_double(e.value) << ',';
            if (e.location)
                csv << io::format_double((*e.location)[0]) << ','
                    << io::format_double((*e.location)[1]);
            else
                csv << ',';
            csv << '\n';
        }
        io::write_text(dir / "neighbors.csv", csv.str());
        config["node"] = j;
        config["neighbor_threshold"] = thr;
        report["neighbors"] = json{{"node", j}, {"count", nb.size()}, {"file", "neighbors.csv"}};
    }
    if (p.has("fit"))
        config["fit"] = p.str("fit", "");
    if (p.has("data"))
        config["data"] = p.str("data", "");
    report["config"] = config;
    write_json(dir / "metrics.json", report);
    out << "metrics -> " << dir.string() << "\n";
    return 0;
}

// ---- study -------------------------------------------------------------

int cmd_study(const CLI::App& app, std::ostream& out)
{
    const Params p = resolve(app, {});
    const fs::path spec_path = p.required_str("spec");
    StudySpec spec = parse_study_config(io::read_text(spec_path));
    if (p.has("workers"))
        spec.workers = static_cast<int>(p.integer("workers", 1));
    const fs::path dir = out_dir(p);
    const auto results = run_study(spec);
    io::write_text(dir / "results.csv", results_csv(results));
    io::write_text(dir / "trials.csv", trials_csv(results));

    json cells = json::array();
    for (const auto& c : results.cells)
        cells.push_back({{"n", c.n},
                         {"ell", c.ell},
                         {"m", c.m},
                         {"trials_ok", c.trials_ok},
                         {"trials_failed", c.trials_failed},
                         {"frob", finite_or_null(c.frob)},
                         {"kl", finite_or_null(c.kl)},
                         {"pct_mz", finite_or_null(c.pct_mz)},
                         {"pct_mnz", finite_or_null(c.pct_mnz)},
                         {"tau2_hat", finite_or_null(c.tau2_hat)},
                         {"tau2", finite_or_null(c.tau2)},
                         {"f_hat", finite_or_null(c.f_hat)},
                         {"f_true", finite_or_null(c.f_true)}});
    json failures = json::array();
    for (const auto& t : results.trials)
        if (!t.ok)
            failures.push_back({{"cell", t.cell}, {"trial", t.trial}, {"error", t.error}});
    json spec_echo{{"name", spec.name},
                   {"n", spec.n_values},
                   {"ell", spec.ell_values},
                   {"m", spec.m_values},
                   {"trials", spec.trials},
                   {"noise_to_signal", spec.noise_to_signal},
                   {"lambdas", spec.lambdas},
                   {"cv_folds", spec.cv_folds},
                   {"seed", spec.seed}};
    spec_echo.update(basis_echo(spec.basis));
    spec_echo.update(graph_echo(spec.graph));
    spec_echo.update(fit_options_echo(spec.fit));
    write_json(dir / "summary.json", json{{"format_version", format_version},
                                          {"command", "study"},
                                          {"spec", spec_echo},
                                          {"cells", cells},
                                          {"failures", failures},
                                          {"files", {{"results", "results.csv"},
                                                     {"trials", "trials.csv"}}}});
    out << "study '" << spec.name << "': " << results.cells.size() << " cells, "
        << failures.size() << " failed trials -> " << dir.string() << "\n";
    return 0;
}

} // namespace

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err)
{
    CLI::App app{"Sparse precision estimation for basis-function spatial models", "basisglasso"};
    app.require_subcommand(1);
    app.set_help_all_flag("--help-all", "Show help for every subcommand");

    auto* sim = app.add_subcommand("simulate", "Simulate a dataset with a known precision matrix");
    sim->add_option("--out", "Output directory")->required();
    sim->add_option("--n", "Number of locations (default 400)");
    sim->add_option("--m", "Number of replicates (default 50)");
    sim->add_option("--noise-to-signal", "Noise-to-signal ratio (default 0.1)");
    sim->add_option("--seed", "Random seed (default 1)");
    sim->add_flag("--csv", "Also write the replicates as Y.csv");
    sim->add_option("--config", "JSON file whose keys override the flags");
    add_basis_options(sim);
    add_graph_options(sim);

    auto* fit = app.add_subcommand("fit", "Estimate a sparse precision matrix");
    add_data_options(fit);
    add_basis_options(fit);
    add_fit_options(fit);
    fit->add_option("--out", "Output directory");
    fit->add_option("--lambda", "Penalty level");
    fit->add_option("--threshold", "Off-diagonal magnitude below which Q_hat entries are omitted");
    fit->add_option("--selection", "selection.json from `cv`; supplies lambda, penalty, gamma, tau2");
    fit->add_flag("--timing", "Record wall time in fit.json");
    fit->add_option("--config", "JSON file (or a previous fit.json) whose keys override the flags");

    auto* cv = app.add_subcommand("cv", "Select the penalty level by cross-validation");
    add_data_options(cv);
    add_basis_options(cv);
    add_fit_options(cv);
    cv->add_option("--out", "Output directory");
    cv->add_option("--lambdas", "Comma-separated candidate penalty levels");
    cv->add_option("--method", "likelihood (k-fold over replicates) | predictive (spatial hold-out)");
    cv->add_option("--folds", "Fold count for likelihood CV (default 5)");
    cv->add_option("--holdout", "Held-out location count for predictive CV (default n/10)");
    cv->add_option("--seed", "Random seed for the split (default 1)");
    cv->add_option("--workers", "Worker threads (default 1)");
    cv->add_option("--config", "JSON file whose keys override the flags");

    auto* pred = app.add_subcommand("predict", "Krige held-out locations and score the predictions");
    add_data_options(pred);
    add_basis_options(pred);
    pred->add_option("--detrend", "Covariate columns regressed out before kriging");
    pred->add_option("--global-covariate", "Covariate column appended to Phi");
    pred->add_option("--out", "Output directory");
    pred->add_option("--fit", "Directory written by `fit`");
    pred->add_option("--q-hat", "Q_hat triplet CSV (instead of --fit)");
    pred->add_option("--tau2", "Nugget variance (instead of --fit)");
    pred->add_option("--holdout", "Held-out location count (default min(400, n/10))");
    pred->add_option("--seed", "Random seed for the hold-out draw (default 1)");
    pred->add_option("--replicates-used", "Use the first k replicates (default all)");
    pred->add_option("--sd-grid", "Also export the implied SD on a k x k grid");
    pred->add_option("--config", "JSON file whose keys override the flags");

    auto* met = app.add_subcommand("metrics", "Recovery scores, effective df, AIC and neighborhoods");
    add_data_options(met);
    add_basis_options(met);
    met->add_option("--detrend", "Covariate columns regressed out before scoring");
    met->add_option("--global-covariate", "Covariate column appended to Phi");
    met->add_option("--out", "Output directory");
    met->add_option("--fit", "Directory written by `fit`");
    met->add_option("--q-hat", "Q_hat triplet CSV (instead of --fit)");
    met->add_option("--tau2", "Nugget variance (instead of --fit)");
    met->add_option("--q-true", "True Q triplet CSV (default: the dataset's Q_true.csv)");
    met->add_option("--zero-tol", "Magnitude below which Q_hat entries count as zero");
    met->add_option("--node", "Basis index whose neighborhood is exported");
    met->add_option("--neighbor-threshold", "Magnitude threshold for neighbors (default 0)");
    met->add_option("--config", "JSON file whose keys override the flags");

    auto* study = app.add_subcommand("study", "Run a simulation study grid");
    study->add_option("--spec", "Study configuration (key = value lines)")->required();
    study->add_option("--out", "Output directory")->required();
    study->add_option("--workers", "Worker threads (overrides the spec; results do not depend on it)");

    std::vector<std::string> argv_store{"basisglasso"};
    argv_store.insert(argv_store.end(), args.begin(), args.end());
    std::vector<const char*> argv;
    for (const auto& a : argv_store)
        argv.push_back(a.c_str());
    try {
        app.parse(static_cast<int>(argv.size()), argv.data());
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e, out, err);
    } catch (const CLI::CallForAllHelp& e) {
        return app.exit(e, out, err);
    } catch (const CLI::ParseError& e) {
        app.exit(e, out, err);
        return static_cast<int>(ErrorCategory::config);
    }

    try {
        if (sim->parsed()) return cmd_simulate(*sim, out);
        if (fit->parsed()) return cmd_fit(*fit, out, err);
        if (cv->parsed()) return cmd_cv(*cv, out, err);
        if (pred->parsed()) return cmd_predict(*pred, out);
        if (met->parsed()) return cmd_metrics(*met, out);
        if (study->parsed()) return cmd_study(*study, out);
    } catch (const Error& e) {
        const char* names[] = {"", "", "config", "data", "numeric", "nonconvergence"};
        err << "error (" << names[static_cast<int>(e.category())] << "): " << e.what() << "\n";
        return static_cast<int>(e.category());
    } catch (const nlohmann::json::exception& e) {
        err << "error (data): " << e.what() << "\n";
        return static_cast<int>(ErrorCategory::data);
    } catch (const std::exception& e) {
        err << "error: " << e.what() << "\n";
        return 1;
    }
    return 1;
}

} // namespace bgl
