#include <basisglasso/error.hpp>
#include <basisglasso/experiments.hpp>
#include <basisglasso/io.hpp>
#include <basisglasso/parallel.hpp>
#include <basisglasso/select.hpp>

#include <cmath>
#include <map>
#include <sstream>

namespace bgl {

namespace {

std::string trim(const std::string& s)
{
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string::npos)
        return {};
    const auto e = s.find_last_not_of(" \t\r");
    return s.substr(b, e - b + 1);
}

std::vector<std::string> split_list(const std::string& s)
{
    std::vector<std::string> out;
    std::stringstream ss(s);
    std::string item;
    while (std::getline(ss, item, ','))
        if (auto t = trim(item); !t.empty())
            out.push_back(t);
    return out;
}

double to_double(const std::string& key, const std::string& v)
{
    try {
        std::size_t pos = 0;
        const double d = std::stod(v, &pos);
        if (pos != v.size())
            throw std::invalid_argument(v);
        return d;
    } catch (const std::exception&) {
        throw ConfigError("study config: '" + key + "' expects a number, got '" + v + "'");
    }
}

long long to_int(const std::string& key, const std::string& v)
{
    const double d = to_double(key, v);
    if (d != std::floor(d))
        throw ConfigError("study config: '" + key + "' expects an integer, got '" + v + "'");
    return static_cast<long long>(d);
}

std::vector<Index> to_index_list(const std::string& key, const std::string& v)
{
    std::vector<Index> out;
    for (const auto& s : split_list(v))
        out.push_back(static_cast<Index>(to_int(key, s)));
    return out;
}

} // namespace

StudySpec parse_study_config(const std::string& text)
{
    StudySpec spec;
    std::stringstream in(text);
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (const auto hash = line.find('#'); hash != std::string::npos)
            line.resize(hash);
        line = trim(line);
        if (line.empty())
            continue;
        const auto eq = line.find('=');
        if (eq == std::string::npos)
            throw ConfigError("study config line " + std::to_string(lineno) +
                              ": expected 'key = value'");
        const std::string key = trim(line.substr(0, eq));
        const std::string val = trim(line.substr(eq + 1));

        if (key == "name") spec.name = val;
        else if (key == "basis") spec.basis.family = parse_basis_family(val);
        else if (key == "overlap") spec.basis.overlap = to_double(key, val);
        else if (key == "coarse_count") spec.basis.coarse_count = to_int(key, val);
        else if (key == "levels") spec.basis.levels = static_cast<int>(to_int(key, val));
        else if (key == "graph") spec.graph.family = parse_graph_family(val);
        else if (key == "a_wght") spec.graph.a_wght = to_double(key, val);
        else if (key == "nu") spec.graph.nu = to_double(key, val);
        else if (key == "edge_prob") spec.graph.edge_prob = to_double(key, val);
        else if (key == "block_count") spec.graph.block_count = to_int(key, val);
        else if (key == "fill_prob") spec.graph.fill_prob = to_double(key, val);
        else if (key == "spd_margin") spec.graph.spd_margin = to_double(key, val);
        else if (key == "n") spec.n_values = to_index_list(key, val);
        else if (key == "ell") spec.ell_values = to_index_list(key, val);
        else if (key == "m") spec.m_values = to_index_list(key, val);
        else if (key == "trials") spec.trials = static_cast<int>(to_int(key, val));
        else if (key == "noise_to_signal") spec.noise_to_signal = to_double(key, val);
        else if (key == "lambdas") {
            spec.lambdas.clear();
            for (const auto& s : split_list(val))
                spec.lambdas.push_back(to_double(key, s));
        } else if (key == "lambda_grid") {
            std::vector<std::string> parts;
            std::stringstream ss(val);
            std::string p;
            while (std::getline(ss, p, ':'))
                parts.push_back(trim(p));
            if (parts.size() != 3)
                throw ConfigError("study config: lambda_grid expects lo:hi:count");
            const double lo = to_double(key, parts[0]);
            const double hi = to_double(key, parts[1]);
            const auto count = to_int(key, parts[2]);
            if (count < 1)
                throw ConfigError("study config: lambda_grid count must be >= 1");
            spec.lambdas.clear();
            for (long long i = 0; i < count; ++i)
                spec.lambdas.push_back(count == 1 ? lo
                                                  : lo + (hi - lo) * static_cast<double>(i) /
                                                             static_cast<double>(count - 1));
        }
        else if (key == "cv_folds") spec.cv_folds = static_cast<int>(to_int(key, val));
        else if (key == "seed") spec.seed = static_cast<std::uint64_t>(to_int(key, val));
        else if (key == "workers") spec.workers = static_cast<int>(to_int(key, val));
        else if (key == "tol") spec.fit.tol = to_double(key, val);
        else if (key == "inner_tol") spec.fit.inner.tol = to_double(key, val);
        else if (key == "max_iters") spec.fit.max_iters = static_cast<int>(to_int(key, val));
        else if (key == "max_seconds") spec.fit.max_seconds = to_double(key, val);
        else
            throw ConfigError("study config line " + std::to_string(lineno) + ": unknown key '" +
                              key + "'");
    }
    validate(spec);
    return spec;
}

void validate(const StudySpec& spec)
{
    auto positive = [](const std::vector<Index>& v) {
        return !v.empty() && std::all_of(v.begin(), v.end(), [](Index x) { return x > 0; });
    };
    if (!positive(spec.n_values) || !positive(spec.m_values))
        throw ConfigError("study: n and m grids must be nonempty and positive");
    if (spec.basis.family != BasisFamily::wendland_multires && !positive(spec.ell_values))
        throw ConfigError("study: ell grid must be nonempty and positive");
    if (spec.basis.family != BasisFamily::wendland_multires)
        for (Index ell : spec.ell_values) {
            const auto side = static_cast<Index>(std::llround(std::sqrt(static_cast<double>(ell))));
            if (side * side != ell)
                throw ConfigError("study: ell = " + std::to_string(ell) +
                                  " is not a perfect square");
        }
    if (spec.trials < 1)
        throw ConfigError("study: trials must be >= 1");
    if (spec.lambdas.empty() ||
        std::any_of(spec.lambdas.begin(), spec.lambdas.end(), [](double l) { return l < 0.0; }))
        throw ConfigError("study: need at least one nonnegative lambda");
    if (!(spec.noise_to_signal > 0.0))
        throw ConfigError("study: noise_to_signal must be positive");
}

TrialResult run_trial(const StudySpec& spec, Index n, Index ell, Index m, std::size_t cell,
                      int trial)
{
    TrialResult r;
    r.cell = cell;
    r.trial = trial;
    r.n = n;
    r.m = m;
    auto rng = make_rng(spec.seed, {static_cast<std::uint64_t>(cell),
                                    static_cast<std::uint64_t>(trial)});

    BasisSpec bs = spec.basis;
    if (bs.family == BasisFamily::wendland_single) {
        bs.grid_count = static_cast<Index>(std::llround(std::sqrt(static_cast<double>(ell))));
        if (bs.grid_count * bs.grid_count != ell)
            throw ConfigError("study: single-level Wendland ell must be a perfect square");
    } else if (bs.family == BasisFamily::harmonic) {
        bs.ell = ell;
    }
    auto locations = uniform_locations(n, sampling_domain(bs, n), rng);
    const auto basis = build_basis(bs, locations, static_cast<double>(n));
    r.ell = basis.phi.cols();
    const auto truth = make_truth(spec.graph, basis, rng);
    const std::uint64_t sim_seed = rng();
    const auto ds = simulate_replicates(basis.phi, std::move(locations), truth, m,
                                        spec.noise_to_signal, sim_seed);
    r.tau2 = ds.tau2;

    const auto kernel = empirical_cov_projections(ds.Y, basis.phi.values);
    const auto nugget = estimate_nugget(kernel);
    r.tau2_hat = nugget.tau2;

    std::vector<PenaltySpec> specs;
    for (double l : spec.lambdas)
        specs.push_back({PenaltyForm::constant_offdiag, l, std::nullopt});
    const auto candidates = make_candidates(specs, r.ell);
    std::size_t chosen = 0;
    if (spec.cv_folds >= 2 && candidates.size() > 1) {
        const auto folds = kfold_partition(m, spec.cv_folds, rng());
        const auto cv = cv_likelihood(ds.Y, basis.phi.values, nugget.tau2, candidates, folds,
                                      {spec.fit, 1});
        if (!cv.selected)
            throw NumericError("cross-validation excluded every candidate");
        chosen = *cv.selected;
    }
    r.lambda = candidates[chosen].spec.lambda;

    const auto fit = dc_fit(kernel, nugget.tau2, candidates[chosen].Lambda, spec.fit);
    r.outer_iterations = fit.iterations;
    r.monotonicity_violations = fit.monotonicity_violations;
    r.metrics = recovery_metrics(fit.Q, truth.Q);
    r.f_hat = total_nll(fit.Q, nugget.tau2, kernel);
    r.f_true = total_nll(truth.Q, ds.tau2, kernel);
    r.ok = true;
    return r;
}

StudyResults run_study(const StudySpec& spec)
{
    validate(spec);
    struct Cell { Index n, ell, m; };
    std::vector<Cell> cells;
    const std::vector<Index> ells = spec.basis.family == BasisFamily::wendland_multires
                                        ? std::vector<Index>{basis_size(spec.basis)}
                                        : spec.ell_values;
    for (Index n : spec.n_values)
        for (Index ell : ells)
            for (Index m : spec.m_values)
                cells.push_back({n, ell, m});

    StudyResults out;
    out.trials.resize(cells.size() * static_cast<std::size_t>(spec.trials));
    parallel_for(out.trials.size(), spec.workers, [&](std::size_t job) {
        const std::size_t c = job / static_cast<std::size_t>(spec.trials);
        const int t = static_cast<int>(job % static_cast<std::size_t>(spec.trials));
        const auto& cell = cells[c];
        try {
            out.trials[job] = run_trial(spec, cell.n, cell.ell, cell.m, c, t);
        } catch (const std::exception& e) {
            TrialResult r;
            r.cell = c;
            r.trial = t;
            r.n = cell.n;
            r.ell = cell.ell;
            r.m = cell.m;
            r.error = e.what();
            out.trials[job] = r;
        }
    });

    for (std::size_t c = 0; c < cells.size(); ++c) {
        CellSummary s;
        s.n = cells[c].n;
        s.ell = cells[c].ell;
        s.m = cells[c].m;
        int kl_count = 0;
        for (int t = 0; t < spec.trials; ++t) {
            const auto& r = out.trials[c * static_cast<std::size_t>(spec.trials) + static_cast<std::size_t>(t)];
            if (!r.ok) {
                ++s.trials_failed;
                continue;
            }
            ++s.trials_ok;
            s.ell = r.ell;
            s.frob += r.metrics.rel_frobenius;
            if (r.metrics.kl_score) {
                s.kl += *r.metrics.kl_score;
                ++kl_count;
            }
            s.pct_mz += r.metrics.pct_missed_zeros;
            s.pct_mnz += r.metrics.pct_missed_nonzeros;
            s.tau2_hat += r.tau2_hat;
            s.tau2 += r.tau2;
            s.f_hat += r.f_hat;
            s.f_true += r.f_true;
        }
        if (s.trials_ok > 0) {
            const double k = s.trials_ok;
            s.frob /= k;
            s.pct_mz /= k;
            s.pct_mnz /= k;
            s.tau2_hat /= k;
            s.tau2 /= k;
            s.f_hat /= k;
            s.f_true /= k;
        }
        s.kl = kl_count > 0 ? s.kl / kl_count : std::nan("");
        out.cells.push_back(s);
    }
    return out;
}

std::string results_csv(const StudyResults& results)
{
    using io::format_double;
    std::ostringstream os;
    os << "n,ell,m,frob,kl,pct_mz,pct_mnz,tau2_hat,tau2,f_hat,f_true\n";
    for (const auto& s : results.cells) {
        os << s.n << ',' << s.ell << ',' << s.m << ',' << format_double(s.frob) << ','
           << format_double(s.kl) << ',' << format_double(s.pct_mz) << ','
           << format_double(s.pct_mnz) << ',' << format_double(s.tau2_hat) << ','
           << format_double(s.tau2) << ',' << format_double(s.f_hat) << ','
           << format_double(s.f_true) << '\n';
    }
    return os.str();
}

std::string trials_csv(const StudyResults& results)
{
    using io::format_double;
    std::ostringstream os;
    os << "cell,trial,n,ell,m,ok,lambda,frob,kl,kl_conventional,pct_mz,pct_mnz,tau2_hat,tau2,"
          "f_hat,f_true,outer_iterations,error\n";
    for (const auto& r : results.trials) {
        const double nan = std::nan("");
        os << r.cell << ',' << r.trial << ',' << r.n << ',' << r.ell << ',' << r.m << ','
           << (r.ok ? 1 : 0) << ',' << format_double(r.lambda) << ','
           << format_double(r.metrics.rel_frobenius) << ','
           << format_double(r.metrics.kl_score.value_or(nan)) << ','
           << format_double(r.metrics.kl_conventional.value_or(nan)) << ','
           << format_double(r.metrics.pct_missed_zeros) << ','
           << format_double(r.metrics.pct_missed_nonzeros) << ',' << format_double(r.tau2_hat)
           << ',' << format_double(r.tau2) << ',' << format_double(r.f_hat) << ','
           << format_double(r.f_true) << ',' << r.outer_iterations << ',';
        std::string err = r.error;
        for (auto& ch : err)
            if (ch == ',' || ch == '\n')
                ch = ';';
        os << err << '\n';
    }
    return os.str();
}

} // namespace bgl
