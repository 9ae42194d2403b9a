#include "experiment.hpp"

#include <chrono>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <memory>
#include <optional>
#include <set>
#include <sstream>

#include <CLI11.hpp>
#include <Eigen/Core>
#include <oneapi/tbb/version.h>

#include "validate.hpp"

namespace dbsde::app {

namespace {

std::string where(const YAML::Node& n) {
    const YAML::Mark m = n.Mark();
    if (m.is_null()) return "override";
    return "line " + std::to_string(m.line + 1);
}

[[noreturn]] void fail(const YAML::Node& n, const std::string& msg) {
    throw ConfigurationError(where(n) + ": " + msg);
}

/// Section node; missing optional sections come back undefined.
YAML::Node section(const YAML::Node& root, const std::string& name, bool required) {
    const YAML::Node s = root[name];
    if (!s.IsDefined() || s.IsNull()) {
        if (required) fail(root, "missing section '" + name + "'");
        return YAML::Node(YAML::NodeType::Undefined);
    }
    if (!s.IsMap()) fail(s, "section '" + name + "' must be a mapping");
    return s;
}

void check_keys(const YAML::Node& sec, const std::string& name, const std::set<std::string>& allowed) {
    if (!sec.IsDefined()) return;
    for (const auto& kv : sec) {
        const std::string key = kv.first.as<std::string>();
        if (!allowed.count(key)) fail(kv.first, "unknown key '" + name + "." + key + "'");
    }
}

bool has(const YAML::Node& sec, const std::string& key) {
    return sec.IsDefined() && sec[key].IsDefined() && !sec[key].IsNull();
}

double number(const YAML::Node& sec, const std::string& name, const std::string& key,
              std::optional<double> def = std::nullopt) {
    if (!has(sec, key)) {
        if (def) return *def;
        fail(sec, "missing key '" + name + "." + key + "'");
    }
    const YAML::Node n = sec[key];
    try {
        return n.as<double>();
    } catch (const YAML::Exception&) {
        fail(n, "'" + name + "." + key + "' must be a number");
    }
}

std::uint64_t count(const YAML::Node& sec, const std::string& name, const std::string& key,
                    std::optional<std::uint64_t> def = std::nullopt) {
    if (!has(sec, key)) {
        if (def) return *def;
        fail(sec, "missing key '" + name + "." + key + "'");
    }
    const YAML::Node n = sec[key];
    try {
        const auto v = n.as<long long>();
        if (v < 0) fail(n, "'" + name + "." + key + "' must be nonnegative");
        return static_cast<std::uint64_t>(v);
    } catch (const YAML::Exception&) {
        fail(n, "'" + name + "." + key + "' must be an integer");
    }
}

std::string text(const YAML::Node& sec, const std::string& name, const std::string& key,
                 std::optional<std::string> def = std::nullopt) {
    if (!has(sec, key)) {
        if (def) return *def;
        fail(sec, "missing key '" + name + "." + key + "'");
    }
    const YAML::Node n = sec[key];
    if (!n.IsScalar()) fail(n, "'" + name + "." + key + "' must be a scalar");
    return n.as<std::string>();
}

std::vector<double> number_list(const YAML::Node& sec, const std::string& name, const std::string& key,
                                std::vector<double> def) {
    if (!has(sec, key)) return def;
    const YAML::Node n = sec[key];
    std::vector<double> out;
    if (n.IsScalar()) return {number(sec, name, key)};
    if (!n.IsSequence()) fail(n, "'" + name + "." + key + "' must be a list of numbers");
    for (const auto& v : n) {
        try {
            out.push_back(v.as<double>());
        } catch (const YAML::Exception&) {
            fail(v, "'" + name + "." + key + "' must contain numbers only");
        }
    }
    if (out.empty()) fail(n, "'" + name + "." + key + "' is empty");
    return out;
}

ForwardModel build_model(const YAML::Node& sec) {
    const std::string kind = text(sec, "forward", "model");
    auto p = [&](const char* key, std::optional<double> def = std::nullopt) { return number(sec, "forward", key, def); };
    if (kind == "brownian") return models::brownian(p("vol", 1.0));
    if (kind == "gbm") return models::gbm(p("mu", 0.0), p("vol"));
    if (kind == "deterministic") return models::deterministic(p("drift", 0.0));
    if (kind == "linear") return models::linear(p("a"), p("vol", 0.0));
    if (kind == "lagged_drift") return models::lagged_drift(p("a"), p("c"), p("delta"), p("vol", 0.0));
    if (kind == "running_average") return models::running_average(p("kappa"), p("vol", 0.0));
    fail(sec["model"], "unknown forward model '" + kind + "'");
}

GeneratorSpec build_generator(const YAML::Node& sec, const TimeGrid& grid) {
    if (!sec.IsDefined()) return drivers::zero();
    const std::string kind = text(sec, "generator", "name");
    auto p = [&](const char* key, std::optional<double> def = std::nullopt) {
        return number(sec, "generator", key, def);
    };
    GeneratorSpec g;
    if (kind == "zero") {
        g = drivers::zero();
    } else if (kind == "moving_average") {
        g = make_moving_average(p("beta"), p("delta"));
    } else if (kind == "lagged") {
        g = make_lagged(p("kappa"), p("delta"));
    } else if (kind == "weighted_linear") {
        const std::string wname = text(sec, "generator", "g", "constant");
        const double scale = p("scale", 1.0), rate = p("rate", 1.0), T = grid.T();
        std::function<double(double)> w;
        if (wname == "constant") {
            w = [scale](double) { return scale; };
        } else if (wname == "linear") {
            w = [scale, T](double s) { return scale * s / T; };
        } else if (wname == "exp_decay") {
            if (!(rate >= 0.0)) fail(sec["rate"], "'generator.rate' must be nonnegative");
            w = [scale, rate](double s) { return scale * std::exp(-rate * s); };
        } else {
            fail(sec["g"], "unknown weight function '" + wname + "'");
        }
        const std::string measure = text(sec, "generator", "measure", "uniform");
        DelayMeasure alpha = DelayMeasure::uniform();
        if (measure == "dirac")
            alpha = DelayMeasure::dirac();
        else if (measure != "uniform")
            fail(sec["measure"], "unknown delay measure '" + measure + "'");
        g = make_weighted_linear(w, std::abs(scale), alpha, p("delta"));
    } else if (kind == "markovian") {
        const std::string driver = text(sec, "generator", "driver", "zero");
        if (driver == "zero")
            g = drivers::zero();
        else if (driver == "discount")
            g = drivers::discount(p("r"));
        else if (driver == "linear")
            g = drivers::linear(p("a", 0.0), p("b", 0.0));
        else
            fail(sec["driver"], "unknown Markovian driver '" + driver + "'");
    } else {
        fail(sec["name"], "unknown generator '" + kind + "'");
    }
    if (g.has_delay()) {
        try {
            grid.delay_steps(g.delta);
        } catch (const Error& e) {
            fail(sec["delta"], e.what());
        }
    }
    return g;
}

Payoff build_payoff(const YAML::Node& sec) {
    const std::string kind = text(sec, "payoff", "name");
    auto p = [&](const char* key, std::optional<double> def = std::nullopt) { return number(sec, "payoff", key, def); };
    if (kind == "call") return payoffs::call(p("strike"));
    if (kind == "put") return payoffs::put(p("strike"));
    if (kind == "linear") return payoffs::linear(p("a", 1.0), p("b", 0.0));
    if (kind == "constant") return payoffs::constant(p("c"));
    if (kind == "asian_call") return payoffs::asian_call(p("strike"));
    if (kind == "lookback_call") return payoffs::lookback_call(p("strike"));
    fail(sec["name"], "unknown payoff '" + kind + "'");
}

SolverConfig build_solver(const YAML::Node& sec, bool tree) {
    SolverConfig c;
    if (!sec.IsDefined()) {
        if (tree) c.basis = RegressionBasis::indicator();
        return c;
    }
    c.picard_tol = number(sec, "solver", "picard_tol", c.picard_tol);
    if (!(c.picard_tol > 0.0)) fail(sec["picard_tol"], "'solver.picard_tol' must be positive");
    c.picard_max_iter = count(sec, "solver", "max_iter", c.picard_max_iter);
    if (c.picard_max_iter == 0) fail(sec["max_iter"], "'solver.max_iter' must be positive");
    c.beta_weight = number(sec, "solver", "beta_weight", 0.0);
    if (!(c.beta_weight >= 0.0)) fail(sec["beta_weight"], "'solver.beta_weight' must be nonnegative");
    c.implicit_iterations = count(sec, "solver", "implicit_iterations", c.implicit_iterations);
    c.ridge_fallback = !has(sec, "ridge_fallback") || sec["ridge_fallback"].as<bool>();
    const std::string policy = text(sec, "solver", "contraction_policy", "warn");
    if (policy == "warn")
        c.contraction_policy = ContractionPolicy::Warn;
    else if (policy == "abort")
        c.contraction_policy = ContractionPolicy::Abort;
    else
        fail(sec["contraction_policy"], "'solver.contraction_policy' must be warn or abort");
    const std::string basis = text(sec, "solver", "basis", tree ? "indicator" : "polynomial");
    const int degree = static_cast<int>(count(sec, "solver", "degree", 2));
    if (basis == "polynomial")
        c.basis = RegressionBasis::polynomial(degree);
    else if (basis == "running_average")
        c.basis = RegressionBasis::running_average(degree);
    else if (basis == "lagged")
        c.basis = RegressionBasis::lagged(degree, count(sec, "solver", "lag", 1));
    else if (basis == "indicator")
        c.basis = RegressionBasis::indicator();
    else
        fail(sec["basis"], "unknown basis '" + basis + "'");
    if (c.basis.kind == BasisKind::Indicator && !tree)
        fail(sec["basis"], "the indicator basis needs ensemble.kind = tree");
    return c;
}

std::string version_string() {
    std::ostringstream s;
    s << "dbsde 0.1.0; Eigen " << EIGEN_WORLD_VERSION << '.' << EIGEN_MAJOR_VERSION << '.' << EIGEN_MINOR_VERSION
      << "; oneTBB " << TBB_VERSION_MAJOR << '.' << TBB_VERSION_MINOR << "; compiler " << __VERSION__;
    return s.str();
}

}  // namespace

std::shared_ptr<const BrownianEnsemble> Experiment::brownian() const { return brownian(grid, paths); }

std::shared_ptr<const BrownianEnsemble> Experiment::brownian(const TimeGrid& g, std::size_t m) const {
    if (tree) return std::make_shared<const BrownianEnsemble>(BrownianEnsemble::bernoulli_tree(g, seed));
    return std::make_shared<const BrownianEnsemble>(BrownianEnsemble::gaussian(g, m, model.noise_dim, seed));
}

YAML::Node parse_config(const std::string& text_in, const std::string& origin) {
    try {
        YAML::Node n = YAML::Load(text_in);
        if (!n.IsMap()) throw ConfigurationError(origin + ": top level must be a mapping of sections");
        return n;
    } catch (const YAML::Exception& e) {
        throw ConfigurationError(origin + ":" + std::to_string(e.mark.line + 1) + ": " + e.msg);
    }
}

YAML::Node load_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigurationError("cannot open config '" + path + "'");
    std::stringstream ss;
    ss << in.rdbuf();
    return parse_config(ss.str(), path);
}

void apply_override(YAML::Node& root, const std::string& assignment) {
    const auto eq = assignment.find('=');
    if (eq == std::string::npos || eq == 0) throw ConfigurationError("override '" + assignment + "' is not key=value");
    const std::string key = assignment.substr(0, eq), value = assignment.substr(eq + 1);
    std::vector<std::string> parts;
    std::size_t pos = 0;
    while (true) {
        const auto dot = key.find('.', pos);
        parts.push_back(key.substr(pos, dot - pos));
        if (dot == std::string::npos) break;
        pos = dot + 1;
    }
    for (const auto& p : parts)
        if (p.empty()) throw ConfigurationError("override '" + assignment + "' has an empty key segment");
    YAML::Node cur = root;
    for (std::size_t j = 0; j + 1 < parts.size(); ++j) {
        YAML::Node next = cur[parts[j]];
        if (next.IsDefined() && !next.IsNull() && !next.IsMap())
            throw ConfigurationError("override '" + assignment + "': '" + parts[j] + "' is not a section");
        cur.reset(next);
    }
    try {
        cur[parts.back()] = YAML::Load(value);
    } catch (const YAML::Exception& e) {
        throw ConfigurationError("override '" + assignment + "': " + e.msg);
    }
}

Experiment build_experiment(const YAML::Node& root) {
    Experiment ex;
    ex.root = root;
    static const std::set<std::string> sections{"grid",   "ensemble", "forward", "generator",   "payoff",
                                                "solver", "market",   "risk",    "convergence", "surface",
                                                "output"};
    for (const auto& kv : root) {
        const std::string key = kv.first.as<std::string>();
        if (!sections.count(key)) fail(kv.first, "unknown section '" + key + "'");
    }

    const YAML::Node grid = section(root, "grid", true);
    check_keys(grid, "grid", {"t0", "T", "N"});
    const std::uint64_t N = count(grid, "grid", "N");
    try {
        ex.grid = TimeGrid(number(grid, "grid", "t0", 0.0), number(grid, "grid", "T"), N);
    } catch (const DomainError& e) {
        fail(grid, e.what());
    }

    const YAML::Node ens = section(root, "ensemble", true);
    check_keys(ens, "ensemble", {"M", "seed", "kind"});
    if (!has(ens, "seed")) fail(ens, "missing key 'ensemble.seed' (runs must be seeded explicitly)");
    ex.seed = count(ens, "ensemble", "seed");
    const std::string kind = text(ens, "ensemble", "kind", "gaussian");
    if (kind == "tree") {
        ex.tree = true;
        if (N > 14) fail(grid["N"], "tree ensembles need grid.N <= 14");
        ex.paths = std::size_t{1} << N;
    } else if (kind == "gaussian") {
        ex.paths = count(ens, "ensemble", "M");
        if (ex.paths < 2) fail(ens["M"], "'ensemble.M' must be at least 2");
    } else {
        fail(ens["kind"], "'ensemble.kind' must be gaussian or tree");
    }

    const YAML::Node fwd = section(root, "forward", true);
    check_keys(fwd, "forward", {"model", "x0", "phi_csv", "mu", "vol", "drift", "a", "c", "delta", "kappa"});
    ex.model = build_model(fwd);
    if (ex.tree && ex.model.noise_dim != 1) fail(fwd, "tree ensembles are one-dimensional");
    if (has(fwd, "phi_csv")) {
        try {
            ex.phi = read_path_csv(text(fwd, "forward", "phi_csv"));
        } catch (const Error& e) {
            fail(fwd["phi_csv"], e.what());
        }
        if (!(ex.phi.grid() == ex.grid)) fail(fwd["phi_csv"], "initial path grid differs from the experiment grid");
    } else {
        ex.phi = DiscretePath::constant(ex.grid, number(fwd, "forward", "x0", 0.0));
    }

    const YAML::Node gen = section(root, "generator", false);
    check_keys(gen, "generator", {"name", "beta", "delta", "kappa", "g", "scale", "rate", "measure", "driver", "r", "a", "b"});
    ex.generator = build_generator(gen, ex.grid);

    const YAML::Node pay = section(root, "payoff", true);
    check_keys(pay, "payoff", {"name", "strike", "a", "b", "c"});
    ex.payoff = build_payoff(pay);

    const YAML::Node sol = section(root, "solver", false);
    check_keys(sol, "solver", {"picard_tol", "max_iter", "beta_weight", "implicit_iterations", "ridge_fallback",
                               "contraction_policy", "basis", "degree", "lag"});
    ex.solver = build_solver(sol, ex.tree);

    check_keys(section(root, "market", false), "market", {"r", "r_borrow", "mu", "sigma", "s0", "sigma_floor"});
    check_keys(section(root, "risk", false), "risk", {"beta", "delta", "sign"});
    check_keys(section(root, "convergence", false), "convergence", {"N", "M", "oracle", "r", "reference_N"});
    check_keys(section(root, "surface", false), "surface", {"stride"});
    const YAML::Node out = section(root, "output", false);
    check_keys(out, "output", {"dir"});
    ex.out_dir = text(out, "output", "dir", "out");
    return ex;
}

namespace {

struct ResultTable {
    std::vector<std::string> lines{"quantity,value,std_error"};

    void add(const std::string& q, double v) { lines.push_back(q + "," + csv::format(v) + ","); }
    void add(const std::string& q, double v, double se) {
        lines.push_back(q + "," + csv::format(v) + "," + csv::format(se));
    }
    void write(const std::filesystem::path& p) const {
        std::ofstream o(p);
        if (!o) throw ResourceError("cannot write " + p.string());
        for (const auto& l : lines) o << l << '\n';
    }
};

class Run {
public:
    Run(std::string command, Experiment ex, std::ostream& out)
        : command_(std::move(command)), ex_(std::move(ex)), out_(out), dir_(ex_.out_dir),
          t_start_(std::chrono::steady_clock::now()) {
        std::filesystem::create_directories(dir_);
    }

    std::filesystem::path file(const char* name) const { return dir_ / name; }

    void manifest(const std::string& status) const {
        const double wall =
            std::chrono::duration<double>(std::chrono::steady_clock::now() - t_start_).count();
        const std::time_t now = std::time(nullptr);
        std::ostringstream ts;
        ts << std::put_time(std::gmtime(&now), "%Y-%m-%dT%H:%M:%SZ");
        YAML::Emitter e;
        e << YAML::BeginMap;
        e << YAML::Key << "command" << YAML::Value << command_;
        e << YAML::Key << "status" << YAML::Value << status;
        e << YAML::Key << "seed" << YAML::Value << ex_.seed;
        e << YAML::Key << "threads" << YAML::Value << num_threads();
        e << YAML::Key << "versions" << YAML::Value << version_string();
        e << YAML::Key << "wall_time_s" << YAML::Value << wall;
        e << YAML::Key << "timestamp" << YAML::Value << ts.str();
        e << YAML::Key << "config" << YAML::Value << ex_.root;
        e << YAML::EndMap;
        std::ofstream o(file("manifest.txt"));
        o << e.c_str() << '\n';
    }

    const Experiment& ex() const { return ex_; }
    std::ostream& out() const { return out_; }

private:
    std::string command_;
    Experiment ex_;
    std::ostream& out_;
    std::filesystem::path dir_;
    std::chrono::steady_clock::time_point t_start_;
};

void write_trace(const std::vector<double>& residuals, const std::filesystem::path& p) {
    PicardTrace t;
    t.residuals = residuals;
    write_trace_csv(t, p.string());
}

int cmd_price(Run& run) {
    const Experiment& ex = run.ex();
    const DelayedProblem p =
        solve_delayed_bsde(ex.grid.t0(), ex.phi, ex.model, ex.generator, ex.payoff, {}, ex.solver, ex.brownian());
    const BsdeSolution& s = p.result.solution;
    ResultTable r;
    r.add("u0", s.u0()[0], s.u0_std_error()[0]);
    r.add("picard_iterations", static_cast<double>(p.result.trace.iterations));
    r.add("contraction_lhs", p.result.contraction.lhs);
    r.add("contraction_satisfied", p.result.contraction.satisfied ? 1.0 : 0.0);
    r.add("max_regression_residual", s.max_regression_residual());
    r.write(run.file("result.csv"));
    write_trace_csv(p.result.trace, run.file("picard_trace.csv").string());
    write_solution_csv(s, run.file("solution.csv").string());
    run.out() << "u0 = " << csv::format(s.u0()[0]) << " (std error " << csv::format(s.u0_std_error()[0]) << ", "
              << p.result.trace.iterations << " Picard iterations)\n";
    return kOk;
}

int cmd_risk(Run& run) {
    const Experiment& ex = run.ex();
    const YAML::Node sec = section(ex.root, "risk", true);
    RiskMeasureSpec spec;
    spec.beta = number(sec, "risk", "beta");
    spec.delta = number(sec, "risk", "delta");
    spec.sign = number(sec, "risk", "sign", 1.0);
    if (spec.sign != 1.0 && spec.sign != -1.0) fail(sec["sign"], "'risk.sign' must be 1 or -1");
    try {
        ex.grid.delay_steps(spec.delta);
    } catch (const Error& e) {
        fail(sec["delta"], e.what());
    }
    spec.payoff = ex.payoff;
    const auto bm = ex.brownian();
    const RiskResult res = risk_measure(spec, ex.model, ex.phi, ex.solver, bm);
    const auto [mean, se] = payoff_mean(ex.payoff, simulate_forward(ex.grid.t0(), ex.phi, ex.model, bm));
    ResultTable r;
    r.add("rho0", res.rho0, res.std_error);
    r.add("payoff_mean", spec.sign * mean, se);
    r.add("picard_iterations", static_cast<double>(res.trace.iterations));
    r.add("contraction_lhs", res.contraction.lhs);
    r.add("contraction_satisfied", res.contraction.satisfied ? 1.0 : 0.0);
    r.write(run.file("result.csv"));
    write_trace_csv(res.trace, run.file("picard_trace.csv").string());
    run.out() << "rho0 = " << csv::format(res.rho0) << " (std error " << csv::format(res.std_error) << ")\n";
    return kOk;
}

int cmd_large_investor(Run& run) {
    const Experiment& ex = run.ex();
    const YAML::Node sec = section(ex.root, "market", true);
    const double r = number(sec, "market", "r"), mu = number(sec, "market", "mu");
    const double sigma = number(sec, "market", "sigma"), s0 = number(sec, "market", "s0");
    if (!(sigma > 0.0)) fail(sec["sigma"], "'market.sigma' must be positive");
    if (!(s0 > 0.0)) fail(sec["s0"], "'market.s0' must be positive");
    LargeInvestorMarket mk = has(sec, "r_borrow")
                                 ? LargeInvestorMarket::two_rates(r, number(sec, "market", "r_borrow"), mu, sigma, s0)
                                 : LargeInvestorMarket::constant(r, mu, sigma, s0);
    mk.sigma_floor = number(sec, "market", "sigma_floor", mk.sigma_floor);
    if (ex.model.noise_dim != 1) fail(section(ex.root, "forward", true), "large-investor pricing needs d' = 1");
    const LargeInvestorResult res =
        price_large_investor(mk, stock_claim(ex.payoff, s0, mu, sigma), ex.solver, ex.brownian());
    ResultTable t;
    t.add("price", res.price, res.std_error);
    t.add("replication_mean", res.hedge.replication_mean);
    t.add("replication_mean_abs", res.hedge.replication_mean_abs);
    t.add("replication_relative", res.hedge.replication_relative);
    t.add("picard_iterations", static_cast<double>(res.trace.iterations));
    t.add("contraction_lhs", res.contraction.lhs);
    t.write(run.file("result.csv"));
    write_trace_csv(res.trace, run.file("picard_trace.csv").string());
    write_hedge_csv(res.hedge, run.file("hedge.csv").string());
    run.out() << "price = " << csv::format(res.price) << " (std error " << csv::format(res.std_error)
              << "), replication residual mean " << csv::format(res.hedge.replication_mean) << '\n';
    return kOk;
}

int cmd_surface(Run& run) {
    const Experiment& ex = run.ex();
    const YAML::Node sec = section(ex.root, "surface", false);
    const std::size_t stride = count(sec, "surface", "stride", 1);
    if (stride == 0) fail(sec["stride"], "'surface.stride' must be positive");
    const ValueSurface s = u_surface(ex.phi, ex.model, ex.generator, ex.payoff, ex.solver, ex.brownian(), stride);
    write_surface_csv(s, run.file("surface.csv").string());
    ResultTable r;
    r.add("u0", s.value(0), s.std_error(0));
    r.add("uT", s.value(s.size() - 1));
    r.write(run.file("result.csv"));
    run.out() << "surface with " << s.size() << " initial times written\n";
    return kOk;
}

int cmd_convergence(Run& run) {
    const Experiment& ex = run.ex();
    const YAML::Node sec = section(ex.root, "convergence", false);
    const auto Ns = number_list(sec, "convergence", "N", {25, 50, 100, 200});
    const auto Ms = number_list(sec, "convergence", "M", {1e3, 1e4, 1e5});
    const std::string oracle = text(sec, "convergence", "oracle", "black_scholes");
    double reference = 0.0;
    if (oracle == "black_scholes") {
        const double r = number(sec, "convergence", "r", 0.0);
        const double x0 = ex.phi.value(0, 0);
        const double vol = number(section(ex.root, "forward", true), "forward", "vol");
        const YAML::Node pay = section(ex.root, "payoff", true);
        const std::string pname = text(pay, "payoff", "name");
        const double strike = number(pay, "payoff", "strike");
        if (pname == "call")
            reference = oracles::black_scholes_call(x0, strike, r, vol, ex.grid.T() - ex.grid.t0());
        else if (pname == "put")
            reference = oracles::black_scholes_put(x0, strike, r, vol, ex.grid.T() - ex.grid.t0());
        else
            fail(pay["name"], "black_scholes oracle needs a call or put payoff");
    } else if (oracle == "delay_ode") {
        const std::size_t Nref = count(sec, "convergence", "reference_N", 2000);
        const YAML::Node pay = section(ex.root, "payoff", true);
        if (text(pay, "payoff", "name") != "constant") fail(pay["name"], "delay_ode oracle needs a constant payoff");
        const double c = number(pay, "payoff", "c");
        const auto y = oracles::delay_ode_backward(std::span<const double>(&c, 1), ex.generator,
                                                   TimeGrid(ex.grid.t0(), ex.grid.T(), Nref));
        reference = y.y0();
    } else {
        fail(sec["oracle"], "'convergence.oracle' must be black_scholes or delay_ode");
    }
    csv::Writer w(run.file("convergence.csv").string());
    w.header({"N", "M", "u0", "std_error", "oracle", "abs_error"});
    for (double Nd : Ns)
        for (double Md : Ms) {
            if (!(Nd >= 1.0) || !(Md >= 2.0)) throw ConfigurationError("convergence grid needs N >= 1 and M >= 2");
            const TimeGrid g(ex.grid.t0(), ex.grid.T(), static_cast<std::size_t>(Nd));
            // constant initial path at phi(t0) on the refined grid
            const DiscretePath phi = DiscretePath::constant(g, ex.phi.values().subspan(0, ex.phi.dim()));
            const DelayedProblem p = solve_delayed_bsde(g.t0(), phi, ex.model, ex.generator, ex.payoff, {}, ex.solver,
                                                        ex.brownian(g, static_cast<std::size_t>(Md)));
            const double u = p.result.solution.u0()[0], se = p.result.solution.u0_std_error()[0];
            w.row({Nd, Md, u, se, reference, std::abs(u - reference)});
            run.out() << "N=" << Nd << " M=" << Md << " u0=" << csv::format(u) << " error "
                      << csv::format(std::abs(u - reference)) << '\n';
        }
    return kOk;
}

int cmd_validate(Run& run) {
    const auto rows = run_validation(run.ex().seed);
    bool ok = true;
    for (const auto& r : rows) {
        run.out() << (r.pass ? "PASS  " : "FAIL  ") << r.name << "  " << r.detail << '\n';
        ok = ok && r.pass;
    }
    std::ofstream o(run.file("validate.csv"));
    o << "check,pass,detail\n";
    for (const auto& r : rows) o << r.name << ',' << (r.pass ? 1 : 0) << ",\"" << r.detail << "\"\n";
    return ok ? kOk : kNumericalFailure;
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
    CLI::App app{"Delayed BSDE solver suite"};
    app.require_subcommand(1);
    std::string config_path, out_dir;
    std::vector<std::string> sets;
    int threads = 0;
    app.add_option("-c,--config", config_path, "experiment config (YAML)");
    app.add_option("--set", sets, "override a config value, e.g. solver.picard_tol=1e-7");
    app.add_option("--threads", threads, "cap on worker threads (results do not depend on it)")->check(CLI::NonNegativeNumber);
    app.add_option("--out", out_dir, "output directory (overrides output.dir)");
    const std::vector<std::pair<std::string, std::string>> commands{
        {"price", "u(t0, phi) for the configured problem"},
        {"risk", "moving-average g-expectation rho0"},
        {"price-large-investor", "large-investor price and hedge"},
        {"surface", "u(t, phi) on all initial times"},
        {"convergence", "error against an oracle over N and M grids"},
        {"validate", "oracle self-checks"}};
    for (const auto& [name, help] : commands) app.add_subcommand(name, help)->fallthrough();

    std::vector<std::string> rev(args.rbegin(), args.rend() - 1);
    try {
        app.parse(rev);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e, out, err);
        return code == 0 ? kOk : kConfigError;
    }
    const std::string command = app.get_subcommands().front()->get_name();
    set_num_threads(threads);

    std::unique_ptr<Run> r;
    try {
        YAML::Node root;
        if (config_path.empty()) {
            if (command != "validate") throw ConfigurationError("--config is required for '" + command + "'");
            root = parse_config("grid: {T: 1, N: 10}\nensemble: {M: 2, seed: 1}\nforward: {model: brownian}\n"
                                "payoff: {name: constant, c: 0}\n", "builtin");
        } else {
            root = load_config(config_path);
        }
        for (const auto& s : sets) apply_override(root, s);
        if (!out_dir.empty()) apply_override(root, "output.dir=" + out_dir);
        r = std::make_unique<Run>(command, build_experiment(root), out);
    } catch (const ConfigurationError& e) {
        err << "config error: " << e.what() << '\n';
        return kConfigError;
    } catch (const std::exception& e) {
        err << "error: " << e.what() << '\n';
        return kConfigError;
    }

    try {
        int code = kOk;
        if (command == "price") code = cmd_price(*r);
        else if (command == "risk") code = cmd_risk(*r);
        else if (command == "price-large-investor") code = cmd_large_investor(*r);
        else if (command == "surface") code = cmd_surface(*r);
        else if (command == "convergence") code = cmd_convergence(*r);
        else code = cmd_validate(*r);
        r->manifest(code == kOk ? "ok" : "failed");
        return code;
    } catch (const ConfigurationError& e) {
        err << "config error: " << e.what() << '\n';
        r->manifest("config error");
        return kConfigError;
    } catch (const NonConvergenceError& e) {
        const auto path = r->file("picard_trace.csv");
        write_trace(e.residuals(), path);
        err << "numerical failure: " << e.what() << "\ntrace written to " << path.string() << '\n';
        r->manifest("numerical failure");
        return kNumericalFailure;
    } catch (const Error& e) {
        err << "numerical failure: " << e.what() << '\n';
        r->manifest("numerical failure");
        return kNumericalFailure;
    }
}

}  // namespace dbsde::app
