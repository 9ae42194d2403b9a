#pragma once

// Large-investor pricing and hedging with a wealth-dependent market, and
// dynamic risk measures given by a moving-average g-expectation.
//
// Wealth Y with hedge pi in the stock and Y - pi in the bond:
//   dY = [r (Y - pi) + mu pi] ds + pi sigma dW,   Y(T) = claim,
// so Z = pi sigma and the driver is F(s, y, z, y_hat) = -(y - z/sigma) r - (z/sigma) mu,
// with r, mu, sigma free to depend on the wealth history.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <functional>
#include <limits>
#include <utility>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "csv.hpp"
#include "delayed_bsde.hpp"
#include "errors.hpp"
#include "forward_sde.hpp"
#include "generators.hpp"
#include "log.hpp"
#include "paths.hpp"

namespace dbsde {

/// r(t, y, pi, y_hat) and mu(t, y, pi, y_hat) with y the wealth and y_hat its
/// window on [t - delta, t]; sigma(t, y, y_hat).
struct LargeInvestorMarket {
    using RateFn = std::function<double(double t, double y, double pi, const SegmentView& y_hat)>;
    using VolFn = std::function<double(double t, double y, const SegmentView& y_hat)>;

    RateFn r;
    RateFn mu;
    VolFn sigma;
    double s0 = 100.0;
    double sigma_floor = 1e-8;
    double L = 0.0;  // Lipschitz constant of the driver in (y, z)
    double K = 0.0;  // in y_hat
    double delta = 0.0;

    /// Constant coefficients; no market impact and no memory.
    static LargeInvestorMarket constant(double r, double mu, double sigma, double s0) {
        if (!(sigma > 0.0)) throw DomainError("volatility must be positive");
        LargeInvestorMarket mk;
        mk.r = [r](double, double, double, const SegmentView&) { return r; };
        mk.mu = [mu](double, double, double, const SegmentView&) { return mu; };
        mk.sigma = [sigma](double, double, const SegmentView&) { return sigma; };
        mk.s0 = s0;
        mk.L = std::max(std::abs(r), std::abs(r - mu) / sigma);
        return mk;
    }

    /// Lending at r_lend and borrowing at r_borrow >= r_lend: the rate seen
    /// by the bond position y - pi depends on its sign.
    static LargeInvestorMarket two_rates(double r_lend, double r_borrow, double mu, double sigma, double s0) {
        if (!(sigma > 0.0)) throw DomainError("volatility must be positive");
        LargeInvestorMarket mk;
        mk.r = [=](double, double y, double pi, const SegmentView&) { return y - pi >= 0.0 ? r_lend : r_borrow; };
        mk.mu = [mu](double, double, double, const SegmentView&) { return mu; };
        mk.sigma = [sigma](double, double, const SegmentView&) { return sigma; };
        mk.s0 = s0;
        mk.L = std::max({std::abs(r_lend), std::abs(r_borrow), std::abs(r_lend - mu) / sigma,
                         std::abs(r_borrow - mu) / sigma});
        return mk;
    }
};

/// Driver in (t, y, z, y_hat) form; throws when sigma drops below the floor.
inline GeneratorSpec large_investor_generator(const LargeInvestorMarket& mk) {
    GeneratorSpec g;
    g.name = "large_investor";
    g.L = mk.L;
    g.K = mk.K;
    g.delta = mk.delta;
    g.eval = [mk](const GeneratorArgs& a, std::span<double> out) {
        const double y = a.y[0], z = a.z[0];
        const double s = mk.sigma(a.t, y, a.y_hat);
        if (!(std::abs(s) >= mk.sigma_floor))
            throw SingularVolatilityError("volatility " + csv::format(s) + " below floor " +
                                          csv::format(mk.sigma_floor) + " at t=" + csv::format(a.t));
        const double pi = z / s;
        out[0] = -(y - pi) * mk.r(a.t, y, pi, a.y_hat) - pi * mk.mu(a.t, y, pi, a.y_hat);
    };
    return g;
}

/// Claim as a functional of the Brownian path and, optionally, of the
/// solution (Y and Z node-major along the sample).
struct LargeInvestorClaim {
    std::string name;
    std::function<double(const PathView& w, std::span<const double> y, std::span<const double> z)> eval;
    bool uses_solution = false;
};

/// Payoff on the stock path S(t) = s0 exp((mu - sigma^2/2) t + sigma W(t)),
/// the reference stock of a market with constant (mu, sigma).
inline LargeInvestorClaim stock_claim(Payoff payoff, double s0, double mu, double sigma) {
    LargeInvestorClaim c;
    c.name = payoff.name;
    c.eval = [payoff = std::move(payoff), s0, mu, sigma](const PathView& w, std::span<const double>,
                                                         std::span<const double>) {
        const TimeGrid& g = w.grid();
        std::vector<double> s(g.points());
        for (std::size_t i = 0; i < g.points(); ++i) {
            const double t = g.time(i) - g.t0();
            s[i] = s0 * std::exp((mu - 0.5 * sigma * sigma) * t + sigma * (w.at(i, 0) - w.at(0, 0)));
        }
        return payoff(PathView(g, 1, s, g.steps()));
    };
    return c;
}

struct HedgeStats {
    std::vector<double> times;
    std::vector<double> mean_pi;
    std::vector<double> std_pi;
    double replication_mean = 0.0;      // mean of V(T) - claim
    double replication_mean_abs = 0.0;  // mean of |V(T) - claim|
    double replication_relative = 0.0;  // |replication_mean| / |price|
};

struct LargeInvestorResult {
    double price = 0.0;
    double std_error = 0.0;
    PicardTrace trace;
    ContractionReport contraction;
    HedgeStats hedge;
    std::size_t terminal_iterations = 0;
};

struct LargeInvestorOptions {
    double terminal_tol = 1e-6;
    std::size_t terminal_max_iter = 20;
};

/// X(0) for a claim on the Brownian path, the hedge pi = Z / sigma, and a
/// replay of the self-financing wealth on each sample:
///   V(i+1) = V(i) + pi R(i) + (V(i) - pi)(e^{r dt} - 1),
/// with R(i) the simple stock return over the step.
inline LargeInvestorResult price_large_investor(const LargeInvestorMarket& mk, const LargeInvestorClaim& claim,
                                                const SolverConfig& cfg, std::shared_ptr<const BrownianEnsemble> bm,
                                                const LargeInvestorOptions& opt = {}) {
    if (!bm) throw DomainError("missing Brownian ensemble");
    if (bm->noise_dim() != 1) throw DomainError("large-investor market is one-dimensional");
    const TimeGrid& grid = bm->grid();
    const std::size_t M = bm->paths(), N = grid.steps();
    const double dt = grid.dt();
    const DiscretePath w0 = DiscretePath::constant(grid, 0.0);
    const ForwardEnsemble fe = simulate_forward(grid.t0(), w0, models::brownian(1.0), bm);
    const GeneratorSpec gen = large_investor_generator(mk);

    LargeInvestorResult res;
    std::vector<double> terminal(M);
    auto fill_terminal = [&](const BsdeSolution* sol) {
        parallel_for_each(M, [&](std::size_t k) {
            std::span<const double> y, z;
            if (sol) {
                y = sol->y_path(k);
                z = sol->z_path(k);
            }
            terminal[k] = claim.eval(fe.view(k), y, z);
        });
    };

    fill_terminal(nullptr);
    DelayedSolveResult out = solve_delayed_bsde(fe, gen, terminal, {}, cfg);
    res.terminal_iterations = 1;
    if (claim.uses_solution) {
        // the claim sees (Y, Z): iterate on the terminal value itself
        double prev = out.solution.u0()[0];
        bool done = false;
        for (std::size_t n = 2; n <= opt.terminal_max_iter && !done; ++n) {
            fill_terminal(&out.solution);
            out = solve_delayed_bsde(fe, gen, terminal, {}, cfg);
            res.terminal_iterations = n;
            done = std::abs(out.solution.u0()[0] - prev) < opt.terminal_tol * std::max(1.0, std::abs(prev));
            prev = out.solution.u0()[0];
        }
        if (!done) throw NonConvergenceError("terminal fixed point did not converge", {});
    }
    const BsdeSolution& sol = out.solution;
    res.price = sol.u0()[0];
    res.std_error = sol.u0_std_error()[0];
    res.trace = out.trace;
    res.contraction = out.contraction;

    const std::size_t lag = mk.delta > 0.0 ? grid.delay_steps(mk.delta) : 0;
    std::vector<double> pis(M * N);
    const auto moments = parallel_sum(M, 2 * N + 2, [&](std::size_t k, double* acc) {
        std::vector<double> window(lag + 1);
        auto segment = [&](std::size_t i) {
            for (std::size_t j = 0; j <= lag; ++j) window[j] = sol.Y(k, i + j >= lag ? i + j - lag : 0);
            return SegmentView{mk.delta, 1, window};
        };
        double v = res.price, s = mk.s0;
        for (std::size_t i = 0; i < N; ++i) {
            const double t = grid.time(i), y = sol.Y(k, i);
            const SegmentView seg = segment(i);
            const double sig = mk.sigma(t, y, seg);
            if (!(std::abs(sig) >= mk.sigma_floor))
                throw SingularVolatilityError("volatility below floor at t=" + csv::format(t));
            const double pi = sol.Z(k, i) / sig;
            const double r = mk.r(t, y, pi, seg), mu = mk.mu(t, y, pi, seg);
            const double next_s = s * std::exp((mu - 0.5 * sig * sig) * dt + sig * bm->increment(k, i, 0));
            v += pi * (next_s / s - 1.0) + (v - pi) * std::expm1(r * dt);
            s = next_s;
            pis[k * N + i] = pi;
            acc[i] += pi;
            acc[N + i] += pi * pi;
        }
        const double err = v - terminal[k];
        acc[2 * N] += err;
        acc[2 * N + 1] += std::abs(err);
    });
    const double Md = static_cast<double>(M);
    for (std::size_t i = 0; i < N; ++i) {
        const double mean = moments[i] / Md;
        res.hedge.times.push_back(grid.time(i));
        res.hedge.mean_pi.push_back(mean);
        res.hedge.std_pi.push_back(std::sqrt(std::max(0.0, moments[N + i] / Md - mean * mean)));
    }
    res.hedge.replication_mean = moments[2 * N] / Md;
    res.hedge.replication_mean_abs = moments[2 * N + 1] / Md;
    res.hedge.replication_relative =
        std::abs(res.hedge.replication_mean) / std::max(std::abs(res.price), std::numeric_limits<double>::min());
    return res;
}

/// `t,mean_pi,std_pi`
inline void write_hedge_csv(const HedgeStats& h, const std::string& path) {
    csv::Writer w(path);
    w.header({"t", "mean_pi", "std_pi"});
    for (std::size_t i = 0; i < h.times.size(); ++i) w.row({h.times[i], h.mean_pi[i], h.std_pi[i]});
}

/// rho_t(xi) = Y(t) for the moving-average driver (beta/delta) int Y(t+theta) dtheta.
/// sign = -1 evaluates the position -h instead.
struct RiskMeasureSpec {
    double beta = 0.0;
    double delta = 0.1;
    Payoff payoff;
    double sign = 1.0;
};

struct RiskResult {
    double rho0 = 0.0;
    double std_error = 0.0;
    PicardTrace trace;
    ContractionReport contraction;
};

inline RiskResult risk_measure(const RiskMeasureSpec& spec, const ForwardModel& asset, const DiscretePath& s_init,
                               const SolverConfig& cfg, std::shared_ptr<const BrownianEnsemble> bm) {
    if (spec.sign != 1.0 && spec.sign != -1.0) throw DomainError("risk measure sign must be +1 or -1");
    const GeneratorSpec gen = make_moving_average(spec.beta, spec.delta);
    if (!bm) throw DomainError("missing Brownian ensemble");
    const double t0 = bm->grid().t0();
    const ForwardEnsemble fe = simulate_forward(t0, s_init, asset, std::move(bm));
    std::vector<double> terminal = evaluate_payoff(spec.payoff, fe);
    if (spec.sign < 0.0)
        for (double& v : terminal) v = -v;
    const DelayedSolveResult out = solve_delayed_bsde(fe, gen, terminal, {}, cfg);
    return {out.solution.u0()[0], out.solution.u0_std_error()[0], out.trace, out.contraction};
}

/// Plain Monte Carlo mean of h(X) and its standard error.
inline std::pair<double, double> payoff_mean(const Payoff& h, const ForwardEnsemble& fe) {
    const std::vector<double> v = evaluate_payoff(h, fe);
    const auto s = parallel_sum(fe.paths(), 2, [&](std::size_t k, double* acc) {
        acc[0] += v[k];
        acc[1] += v[k] * v[k];
    });
    const double M = static_cast<double>(fe.paths());
    const double mean = s[0] / M;
    const double var = std::max(0.0, (s[1] - M * mean * mean) / (M - 1.0));
    return {mean, std::sqrt(var / M)};
}

}  // namespace dbsde
