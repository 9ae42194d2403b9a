#pragma once

// Independent reference solutions: Black-Scholes closed forms, a deterministic
// delay integral equation solved by quadrature, and exact backward induction
// on a non-recombining binary tree.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <functional>
#include <span>
#include <vector>

#include "errors.hpp"
#include "generators.hpp"
#include "paths.hpp"

namespace dbsde::oracles {

/// Standard normal CDF, Abramowitz-Stegun 26.2.17 (|error| < 7.5e-8).
inline double normal_cdf(double x) {
    if (std::isinf(x)) return x > 0 ? 1.0 : 0.0;
    constexpr double p = 0.2316419;
    constexpr double b1 = 0.319381530, b2 = -0.356563782, b3 = 1.781477937, b4 = -1.821255978, b5 = 1.330274429;
    const double ax = std::abs(x);
    const double t = 1.0 / (1.0 + p * ax);
    const double pdf = std::exp(-0.5 * ax * ax) / std::sqrt(2.0 * M_PI);
    const double tail = pdf * t * (b1 + t * (b2 + t * (b3 + t * (b4 + t * b5))));
    return x >= 0.0 ? 1.0 - tail : tail;
}

inline double black_scholes_call(double s0, double strike, double r, double vol, double T) {
    if (!(vol > 0.0) || !(T > 0.0)) throw DomainError("Black-Scholes needs vol > 0 and T > 0");
    const double df = std::exp(-r * T);
    if (strike <= 0.0) return s0 - strike * df;
    const double sd = vol * std::sqrt(T);
    const double d1 = (std::log(s0 / strike) + (r + 0.5 * vol * vol) * T) / sd;
    const double d2 = d1 - sd;
    return s0 * normal_cdf(d1) - strike * df * normal_cdf(d2);
}

inline double black_scholes_put(double s0, double strike, double r, double vol, double T) {
    if (!(vol > 0.0) || !(T > 0.0)) throw DomainError("Black-Scholes needs vol > 0 and T > 0");
    const double df = std::exp(-r * T);
    if (strike <= 0.0) return 0.0;
    const double sd = vol * std::sqrt(T);
    const double d1 = (std::log(s0 / strike) + (r + 0.5 * vol * vol) * T) / sd;
    const double d2 = d1 - sd;
    return strike * df * normal_cdf(-d2) - s0 * normal_cdf(-d1);
}

struct DelayOdeSolution {
    TimeGrid grid;
    std::size_t m = 1;
    std::vector<double> y;  // (N+1) x m
    std::size_t sweeps = 0;

    double at(std::size_t i, std::size_t c = 0) const { return y[i * m + c]; }
    double y0(std::size_t c = 0) const { return y[c]; }
};

/// y(t) = c + int_t^T f(s, y_s) ds with y(s) = y(t0) for s < t0, for a
/// generator that ignores z and the forward path. Trapezoid rule in time and
/// the generator's own quadrature on the window; the window reaches back to
/// earlier, not yet known, times, so the whole path is iterated to a fixed
/// point (sup change below 1e-13).
inline DelayOdeSolution delay_ode_backward(std::span<const double> terminal, const GeneratorSpec& gen,
                                           const TimeGrid& grid, std::size_t max_sweeps = 500) {
    const std::size_t m = gen.m, N = grid.steps();
    if (terminal.size() != m) throw DomainError("terminal value has the wrong dimension");
    const std::size_t lag = gen.has_delay() ? grid.delay_steps(gen.delta) : 0;
    const double dt = grid.dt();

    DelayOdeSolution sol{grid, m, std::vector<double>((N + 1) * m), 0};
    for (std::size_t i = 0; i <= N; ++i)
        for (std::size_t c = 0; c < m; ++c) sol.y[i * m + c] = terminal[c];

    const std::vector<double> x_dummy(N + 1, 0.0);
    const std::vector<double> z(m * gen.noise_dim, 0.0);
    std::vector<double> f((N + 1) * m), window((lag + 1) * m), next((N + 1) * m);
    for (std::size_t sweep = 1; sweep <= max_sweeps; ++sweep) {
        for (std::size_t i = 0; i <= N; ++i) {
            for (std::size_t j = 0; j <= lag; ++j) {
                const std::size_t node = i + j >= lag ? i + j - lag : 0;
                for (std::size_t c = 0; c < m; ++c) window[j * m + c] = sol.y[node * m + c];
            }
            GeneratorArgs a;
            a.t = grid.time(i);
            a.step = i;
            a.x = PathView(grid, 1, x_dummy, i);
            a.y = std::span<const double>(sol.y).subspan(i * m, m);
            a.z = z;
            a.y_hat = SegmentView{gen.delta, m, window};
            gen.eval(a, std::span<double>(f).subspan(i * m, m));
        }
        for (std::size_t c = 0; c < m; ++c) next[N * m + c] = terminal[c];
        for (std::size_t i = N; i-- > 0;)
            for (std::size_t c = 0; c < m; ++c)
                next[i * m + c] = next[(i + 1) * m + c] + 0.5 * dt * (f[i * m + c] + f[(i + 1) * m + c]);
        double change = 0.0, size = 0.0;
        for (std::size_t j = 0; j < next.size(); ++j) {
            change = std::max(change, std::abs(next[j] - sol.y[j]));
            size = std::max(size, std::abs(next[j]));
        }
        sol.y.swap(next);
        sol.sweeps = sweep;
        if (change <= 1e-13 * std::max(1.0, size)) return sol;
    }
    throw StepSizeError("delay ODE fixed point did not converge; reduce T or the generator constants");
}

/// Binary tree of +/- sqrt(dt) moves started at x0. Node (i, h) is the
/// history h of length i, bit j set meaning an up-move at step j. Every node
/// at depth i has probability 2^-i and each child is reached with 1/2.
class ScenarioTree {
public:
    ScenarioTree(const TimeGrid& grid, double x0) : grid_(grid), x0_(x0) {
        if (grid.steps() > 14) throw ResourceError("scenario tree depth above 14");
    }

    const TimeGrid& grid() const noexcept { return grid_; }
    std::size_t depth() const noexcept { return grid_.steps(); }
    std::size_t nodes(std::size_t i) const noexcept { return std::size_t{1} << i; }
    std::size_t leaves() const noexcept { return nodes(depth()); }
    double probability(std::size_t i) const noexcept { return std::ldexp(1.0, -static_cast<int>(i)); }
    double child_probability() const noexcept { return 0.5; }

    /// Forward values x_0 .. x_i along history h (accumulated left to right).
    std::vector<double> path(std::size_t i, std::size_t h) const {
        std::vector<double> v(grid_.points());
        const double sq = std::sqrt(grid_.dt());
        v[0] = x0_;
        for (std::size_t j = 0; j < grid_.steps(); ++j) {
            const double inc = ((h >> j) & 1U) ? sq : -sq;
            v[j + 1] = j < i ? v[j] + 1.0 * inc : v[j];
        }
        return v;
    }

    double value(std::size_t i, std::size_t h) const { return path(i, h)[i]; }

private:
    TimeGrid grid_;
    double x0_;
};

struct TreeSolution {
    std::vector<std::vector<double>> Y;  // Y[i][h]
    std::vector<std::vector<double>> Z;  // Z[i][h], i < N
    std::vector<double> residuals;
    std::size_t iterations = 0;

    double y0() const { return Y[0][0]; }
};

namespace detail {

/// One backward pass with the window frozen at `prev` (exact expectations).
inline TreeSolution tree_pass(const ScenarioTree& tree, std::span<const double> terminal, const GeneratorSpec& gen,
                              const std::vector<std::vector<double>>& prev, std::size_t lag,
                              std::size_t implicit_iterations) {
    const std::size_t N = tree.depth();
    const TimeGrid& grid = tree.grid();
    const double dt = grid.dt(), sq = std::sqrt(dt);
    TreeSolution s;
    s.Y.resize(N + 1);
    s.Z.resize(N);
    s.Y[N].assign(terminal.begin(), terminal.end());
    std::vector<double> window(lag + 1);
    for (std::size_t i = N; i-- > 0;) {
        s.Y[i].resize(tree.nodes(i));
        s.Z[i].resize(tree.nodes(i));
        for (std::size_t h = 0; h < tree.nodes(i); ++h) {
            const double down = s.Y[i + 1][h], up = s.Y[i + 1][h | (std::size_t{1} << i)];
            const double e = 0.5 * (up + down);
            const double z = 0.5 * (up - e) * sq / dt + 0.5 * (down - e) * (-sq) / dt;
            for (std::size_t j = 0; j <= lag; ++j) {
                const std::ptrdiff_t a = static_cast<std::ptrdiff_t>(i + j) - static_cast<std::ptrdiff_t>(lag);
                const std::size_t node = a < 0 ? 0 : static_cast<std::size_t>(a);
                window[j] = prev[node][h & ((std::size_t{1} << node) - 1)];
            }
            const std::vector<double> xs = tree.path(i, h);
            GeneratorArgs args;
            args.t = grid.time(i);
            args.step = i;
            args.x = PathView(grid, 1, xs, i);
            args.z = std::span<const double>(&z, 1);
            args.y_hat = SegmentView{gen.delta, 1, window};
            double y = e, f = 0.0;
            const std::size_t sweeps = gen.L == 0.0 ? 1 : std::max<std::size_t>(1, implicit_iterations);
            for (std::size_t it = 0; it < sweeps; ++it) {
                args.y = std::span<const double>(&y, 1);
                gen.eval(args, std::span<double>(&f, 1));
                const double next = e + dt * f;
                const double change = std::abs(next - y);
                y = next;
                if (change <= 1e-15 * (1.0 + std::abs(y))) break;
            }
            s.Y[i][h] = y;
            s.Z[i][h] = z;
        }
    }
    return s;
}

}  // namespace detail

/// Exact expectations over the tree; the delayed window is frozen at the
/// previous iterate and the loop runs to a sup change below tol.
inline TreeSolution tree_bsde_exact(const ScenarioTree& tree, std::span<const double> terminal,
                                    const GeneratorSpec& gen, double tol = 1e-13, std::size_t max_iter = 200,
                                    std::size_t implicit_iterations = 5) {
    if (gen.m != 1) throw DomainError("tree oracle supports scalar Y only");
    if (terminal.size() != tree.leaves()) throw DomainError("terminal needs one value per leaf");
    const std::size_t N = tree.depth();
    const std::size_t lag = gen.has_delay() ? tree.grid().delay_steps(gen.delta) : 0;
    std::vector<std::vector<double>> prev(N + 1);
    for (std::size_t i = 0; i <= N; ++i) prev[i].assign(tree.nodes(i), 0.0);
    std::vector<double> residuals;
    for (std::size_t n = 1; n <= max_iter; ++n) {
        TreeSolution next = detail::tree_pass(tree, terminal, gen, prev, lag, implicit_iterations);
        double r = 0.0;
        for (std::size_t i = 0; i <= N; ++i)
            for (std::size_t h = 0; h < tree.nodes(i); ++h) r = std::max(r, std::abs(next.Y[i][h] - prev[i][h]));
        residuals.push_back(r);
        prev = next.Y;
        if (r < tol) {
            next.residuals = std::move(residuals);
            next.iterations = n;
            return next;
        }
    }
    throw NonConvergenceError("tree Picard iteration did not converge", residuals);
}

/// Single backward pass with a zero window; equals tree_bsde_exact when K = 0.
inline TreeSolution tree_backward_induction(const ScenarioTree& tree, std::span<const double> terminal,
                                            const GeneratorSpec& gen, std::size_t implicit_iterations = 5) {
    const std::size_t N = tree.depth();
    std::vector<std::vector<double>> zero(N + 1);
    for (std::size_t i = 0; i <= N; ++i) zero[i].assign(tree.nodes(i), 0.0);
    const std::size_t lag = gen.has_delay() ? tree.grid().delay_steps(gen.delta) : 0;
    TreeSolution s = detail::tree_pass(tree, terminal, gen, zero, lag, implicit_iterations);
    s.iterations = 1;
    return s;
}

}  // namespace dbsde::oracles
