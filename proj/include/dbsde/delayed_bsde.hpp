#pragma once

// Regression Monte Carlo for BSDEs with a time-delayed generator
//
//   Y(s) = h(X) + int_s^T F(r, X_(r), Y(r), Z(r), Y_r) dr - int_s^T Z(r) dW(r),
//   Y(s) = u(s) for s < t (values supplied by the caller),
//
// where Y_r = (Y(r + theta))_{theta in [-delta, 0]}. The delayed argument is
// frozen at the previous iterate and the resulting standard Lipschitz BSDE is
// solved by backward induction; the outer loop is the Picard map.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <functional>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "csv.hpp"
#include "errors.hpp"
#include "forward_sde.hpp"
#include "generators.hpp"
#include "log.hpp"
#include "parallel.hpp"
#include "regression.hpp"

namespace dbsde {

enum class ContractionPolicy { Warn, Abort };

struct SolverConfig {
    double picard_tol = 1e-6;  // relative to max(1, |||Y|||)
    std::size_t picard_max_iter = 50;
    double beta_weight = 0.0;  // exponential weight e^{beta s} in residual norms
    ContractionPolicy contraction_policy = ContractionPolicy::Warn;
    RegressionBasis basis = RegressionBasis::polynomial(2);
    bool ridge_fallback = true;
    std::size_t implicit_iterations = 5;
};

/// Terminal functional h of the forward path, with growth metadata.
struct Payoff {
    std::string name;
    std::size_t m = 1;
    double M = 0.0;
    double p = 1.0;
    std::function<void(const PathView&, std::span<double>)> eval;

    double operator()(const PathView& x) const {
        double v = 0.0;
        eval(x, std::span<double>(&v, 1));
        return v;
    }
};

namespace payoffs {

inline Payoff call(double strike) {
    return {"call", 1, 1.0 + std::abs(strike), 1.0,
            [strike](const PathView& x, std::span<double> out) { out[0] = std::max(x.at(x.grid().steps(), 0) - strike, 0.0); }};
}

inline Payoff put(double strike) {
    return {"put", 1, 1.0 + std::abs(strike), 1.0,
            [strike](const PathView& x, std::span<double> out) { out[0] = std::max(strike - x.at(x.grid().steps(), 0), 0.0); }};
}

/// a * X(T) + b
inline Payoff linear(double a = 1.0, double b = 0.0) {
    return {"linear", 1, std::abs(a) + std::abs(b), 1.0,
            [a, b](const PathView& x, std::span<double> out) { out[0] = a * x.at(x.grid().steps(), 0) + b; }};
}

inline Payoff constant(double c) {
    return {"constant", 1, std::abs(c), 1.0, [c](const PathView&, std::span<double> out) { out[0] = c; }};
}

/// Call on the trapezoid average of X over [t0, T].
inline Payoff asian_call(double strike) {
    return {"asian_call", 1, 1.0 + std::abs(strike), 1.0, [strike](const PathView& x, std::span<double> out) {
                const std::size_t N = x.grid().steps();
                double s = 0.5 * (x.at(0, 0) + x.at(N, 0));
                for (std::size_t j = 1; j < N; ++j) s += x.at(j, 0);
                out[0] = std::max(s / static_cast<double>(N) - strike, 0.0);
            }};
}

/// max over the path minus strike, floored at zero.
inline Payoff lookback_call(double strike) {
    return {"lookback_call", 1, 1.0 + std::abs(strike), 1.0, [strike](const PathView& x, std::span<double> out) {
                double best = x.at(0, 0);
                for (std::size_t j = 1; j <= x.grid().steps(); ++j) best = std::max(best, x.at(j, 0));
                out[0] = std::max(best - strike, 0.0);
            }};
}

}  // namespace payoffs

/// Payoff samples h(X_k), M x m.
inline std::vector<double> evaluate_payoff(const Payoff& h, const ForwardEnsemble& fe) {
    std::vector<double> out(fe.paths() * h.m);
    parallel_for_each(fe.paths(), [&](std::size_t k) {
        h.eval(fe.view(k), std::span<double>(out).subspan(k * h.m, h.m));
    });
    return out;
}

/// Generator with the delayed argument already fixed pathwise:
/// eval(step, sample, x, y, z, out).
struct FrozenGenerator {
    std::size_t m = 1;
    double L = 0.0;
    std::function<void(std::size_t, std::size_t, const PathView&, std::span<const double>, std::span<const double>,
                       std::span<double>)>
        eval;
};

class BsdeSolution {
public:
    BsdeSolution() = default;
    BsdeSolution(const TimeGrid& grid, std::size_t paths, std::size_t m, std::size_t noise_dim, std::size_t start)
        : grid_(grid), paths_(paths), m_(m), noise_dim_(noise_dim), start_(start),
          y_(paths * grid.points() * m, 0.0), z_(paths * grid.steps() * m * noise_dim, 0.0), u0_(m, 0.0),
          u0_se_(m, 0.0), reg_residual_(grid.steps(), 0.0), condition_(grid.steps(), 1.0) {}

    const TimeGrid& grid() const noexcept { return grid_; }
    std::size_t paths() const noexcept { return paths_; }
    std::size_t m() const noexcept { return m_; }
    std::size_t noise_dim() const noexcept { return noise_dim_; }
    std::size_t start_step() const noexcept { return start_; }

    double& Y(std::size_t k, std::size_t i, std::size_t c = 0) noexcept { return y_[(k * grid_.points() + i) * m_ + c]; }
    double Y(std::size_t k, std::size_t i, std::size_t c = 0) const noexcept {
        return y_[(k * grid_.points() + i) * m_ + c];
    }
    std::span<double> y_at(std::size_t k, std::size_t i) noexcept {
        return std::span<double>(y_).subspan((k * grid_.points() + i) * m_, m_);
    }
    std::span<const double> y_at(std::size_t k, std::size_t i) const noexcept {
        return std::span<const double>(y_).subspan((k * grid_.points() + i) * m_, m_);
    }
    /// Y of sample k on all nodes, node-major.
    std::span<const double> y_path(std::size_t k) const noexcept {
        return std::span<const double>(y_).subspan(k * grid_.points() * m_, grid_.points() * m_);
    }

    double& Z(std::size_t k, std::size_t i, std::size_t c = 0, std::size_t j = 0) noexcept {
        return z_[((k * grid_.steps() + i) * m_ + c) * noise_dim_ + j];
    }
    double Z(std::size_t k, std::size_t i, std::size_t c = 0, std::size_t j = 0) const noexcept {
        return z_[((k * grid_.steps() + i) * m_ + c) * noise_dim_ + j];
    }
    std::span<double> z_at(std::size_t k, std::size_t i) noexcept {
        return std::span<double>(z_).subspan((k * grid_.steps() + i) * m_ * noise_dim_, m_ * noise_dim_);
    }
    std::span<const double> z_at(std::size_t k, std::size_t i) const noexcept {
        return std::span<const double>(z_).subspan((k * grid_.steps() + i) * m_ * noise_dim_, m_ * noise_dim_);
    }
    std::span<const double> z_path(std::size_t k) const noexcept {
        const std::size_t n = grid_.steps() * m_ * noise_dim_;
        return std::span<const double>(z_).subspan(k * n, n);
    }

    const std::vector<double>& u0() const noexcept { return u0_; }
    std::vector<double>& u0() noexcept { return u0_; }
    /// Standard error of the pathwise estimator h(X) + sum_i dt F_i of u0.
    const std::vector<double>& u0_std_error() const noexcept { return u0_se_; }
    std::vector<double>& u0_std_error() noexcept { return u0_se_; }

    /// Mean |Y(i+1) - E^[Y(i+1) | F_i]| of the regression at step i.
    const std::vector<double>& regression_residual() const noexcept { return reg_residual_; }
    std::vector<double>& regression_residual() noexcept { return reg_residual_; }
    double max_regression_residual() const noexcept {
        double r = 0.0;
        for (std::size_t i = start_; i < grid_.steps(); ++i) r = std::max(r, reg_residual_[i]);
        return r;
    }
    const std::vector<double>& condition_numbers() const noexcept { return condition_; }
    std::vector<double>& condition_numbers() noexcept { return condition_; }

    /// Fitted u(s, .) for s = start .. N-1, indexed by step - start.
    const std::vector<StepSurrogate>& surrogates() const noexcept { return surrogates_; }
    std::vector<StepSurrogate>& surrogates() noexcept { return surrogates_; }
    bool has_surrogates() const noexcept { return surrogates_.size() == grid_.steps() - start_; }

    double mean_Y(std::size_t i, std::size_t c = 0) const {
        const auto s = parallel_sum(paths_, 1, [&](std::size_t k, double* acc) { acc[0] += Y(k, i, c); });
        return s[0] / static_cast<double>(paths_);
    }

    double std_Y(std::size_t i, std::size_t c = 0) const {
        const double mu = mean_Y(i, c);
        const auto s = parallel_sum(paths_, 1, [&](std::size_t k, double* acc) {
            const double d = Y(k, i, c) - mu;
            acc[0] += d * d;
        });
        return std::sqrt(s[0] / static_cast<double>(paths_ - 1));
    }

    /// Ensemble mean of the Frobenius norm of Z at step i.
    double mean_abs_Z(std::size_t i) const {
        const auto s = parallel_sum(paths_, 1, [&](std::size_t k, double* acc) {
            double n = 0.0;
            for (double v : z_at(k, i)) n += v * v;
            acc[0] += std::sqrt(n);
        });
        return s[0] / static_cast<double>(paths_);
    }

    /// Ensemble variance of Z(c, j) at step i.
    double var_Z(std::size_t i, std::size_t c = 0, std::size_t j = 0) const {
        const auto s = parallel_sum(paths_, 2, [&](std::size_t k, double* acc) {
            acc[0] += Z(k, i, c, j);
            acc[1] += Z(k, i, c, j) * Z(k, i, c, j);
        });
        const double M = static_cast<double>(paths_);
        const double mu = s[0] / M;
        return std::max(0.0, s[1] / M - mu * mu);
    }

private:
    TimeGrid grid_;
    std::size_t paths_ = 0;
    std::size_t m_ = 1;
    std::size_t noise_dim_ = 1;
    std::size_t start_ = 0;
    std::vector<double> y_;
    std::vector<double> z_;
    std::vector<double> u0_;
    std::vector<double> u0_se_;
    std::vector<double> reg_residual_;
    std::vector<double> condition_;
    std::vector<StepSurrogate> surrogates_;
};

struct PicardTrace {
    std::vector<double> residuals;
    std::size_t iterations = 0;
    bool converged = false;
    double tolerance = 0.0;  // absolute threshold applied to the last residual
};

/// Backward induction from terminal samples (M x m):
///   Z_i = E^[(Y_{i+1} - E^[Y_{i+1}]) dW_i^T] / dt,
///   Y_i = E^[Y_{i+1}] + dt F(i, X, Y_i, Z_i)   (fixed point in Y_i),
/// with E^ the least-squares projection on the step basis. At the start step
/// the conditioning is trivial and E^ is the ensemble mean, giving u0.
inline BsdeSolution solve_standard_bsde(std::span<const double> terminal, const FrozenGenerator& gen,
                                        const ForwardEnsemble& fe, const RegressionBasis& basis,
                                        const SolverConfig& cfg = {}) {
    const TimeGrid& grid = fe.grid();
    const std::size_t M = fe.paths(), N = grid.steps(), m = gen.m, dn = fe.brownian().noise_dim();
    const std::size_t start = fe.start_step();
    const double dt = grid.dt();
    if (terminal.size() != M * m) throw DomainError("terminal samples do not match the ensemble");
    if (m * dn > 64) throw DomainError("m * d' above 64 is not supported");
    if (gen.L * dt >= 1.0)
        throw StepSizeError("L * dt = " + csv::format(gen.L * dt) + " >= 1; refine the time grid");

    BsdeSolution sol(grid, M, m, dn, start);
    for (std::size_t k = 0; k < M; ++k)
        for (std::size_t c = 0; c < m; ++c) sol.Y(k, N, c) = terminal[k * m + c];
    std::vector<double> fsum(M * m, 0.0);
    std::vector<StepSurrogate> surrogates(N - start);

    for (std::size_t step = N; step-- > start;) {
        const std::size_t i = step;
        Design design(i == start ? StepBasis::constant(i) : StepBasis::build(basis, fe, i), fe, cfg.ridge_fallback);
        sol.condition_numbers()[i] = design.condition();

        const auto cy = design.fit(m, [&](std::size_t k, std::span<double> out) {
            for (std::size_t c = 0; c < m; ++c) out[c] = sol.Y(k, i + 1, c);
        });
        const auto cz = design.fit(m * dn, [&](std::size_t k, std::span<double> out) {
            double e[64];
            design.predict(k, cy, std::span<double>(e, m));
            for (std::size_t c = 0; c < m; ++c)
                for (std::size_t j = 0; j < dn; ++j)
                    out[c * dn + j] = (sol.Y(k, i + 1, c) - e[c]) * fe.brownian().increment(k, i, j) / dt;
        });

        const auto resid = parallel_sum(M, 1, [&](std::size_t k, double* acc) {
            double e[64], y[64], f[64], prev[64];
            design.predict(k, cy, std::span<double>(e, m));
            auto z = sol.z_at(k, i);
            design.predict(k, cz, z);
            double r2 = 0.0;
            for (std::size_t c = 0; c < m; ++c) {
                const double d = sol.Y(k, i + 1, c) - e[c];
                r2 += d * d;
                y[c] = e[c];
            }
            acc[0] += std::sqrt(r2);
            const PathView x = fe.view(k, i);
            // a generator flat in y needs a single evaluation
            const std::size_t sweeps = gen.L == 0.0 ? 1 : std::max<std::size_t>(1, cfg.implicit_iterations);
            for (std::size_t it = 0; it < sweeps; ++it) {
                gen.eval(i, k, x, std::span<const double>(y, m), z, std::span<double>(f, m));
                double change = 0.0, size = 0.0;
                for (std::size_t c = 0; c < m; ++c) {
                    prev[c] = y[c];
                    y[c] = e[c] + dt * f[c];
                    change = std::max(change, std::abs(y[c] - prev[c]));
                    size = std::max(size, std::abs(y[c]));
                }
                if (change <= 1e-15 * (1.0 + size)) break;
            }
            for (std::size_t c = 0; c < m; ++c) {
                if (!std::isfinite(y[c]))
                    throw SimulationError("non-finite backward value", i, k);
                sol.Y(k, i, c) = y[c];
                fsum[k * m + c] += dt * f[c];
            }
        });
        sol.regression_residual()[i] = resid[0] / static_cast<double>(M);

        if (i == start) {
            // deterministic value: every sample carries the same conditional mean
            const auto s = parallel_sum(M, m, [&](std::size_t k, double* acc) {
                for (std::size_t c = 0; c < m; ++c) acc[c] += sol.Y(k, i, c);
            });
            for (std::size_t c = 0; c < m; ++c) sol.u0()[c] = s[c] / static_cast<double>(M);
            for (std::size_t k = 0; k < M; ++k)
                for (std::size_t c = 0; c < m; ++c) sol.Y(k, i, c) = sol.u0()[c];
            surrogates[0] = StepSurrogate{design.basis(), sol.u0(), m};
        } else {
            auto cs = design.fit(m, [&](std::size_t k, std::span<double> out) {
                for (std::size_t c = 0; c < m; ++c) out[c] = sol.Y(k, i, c);
            });
            surrogates[i - start] = StepSurrogate{design.basis(), std::move(cs), m};
        }
    }
    sol.surrogates() = std::move(surrogates);

    // standard error of the pathwise estimator h(X) + sum dt F
    const auto mom = parallel_sum(M, 2 * m, [&](std::size_t k, double* acc) {
        for (std::size_t c = 0; c < m; ++c) {
            const double v = terminal[k * m + c] + fsum[k * m + c];
            acc[c] += v;
            acc[m + c] += v * v;
        }
    });
    for (std::size_t c = 0; c < m; ++c) {
        const double mean = mom[c] / static_cast<double>(M);
        const double var = std::max(0.0, (mom[m + c] - static_cast<double>(M) * mean * mean) / static_cast<double>(M - 1));
        sol.u0_std_error()[c] = std::sqrt(var / static_cast<double>(M));
    }
    return sol;
}

/// Discrete analogue of the Picard norm: sqrt(max_i mean e^{b t_i}|dY_i|^2 +
/// dt sum_i mean e^{b t_i}|dZ_i|^2) over the steps from the start step.
inline double picard_residual(const BsdeSolution& prev, const BsdeSolution& next, double beta_weight = 0.0) {
    if (!(prev.grid() == next.grid()) || prev.paths() != next.paths() || prev.m() != next.m() ||
        prev.noise_dim() != next.noise_dim() || prev.start_step() != next.start_step())
        throw DomainError("picard residual needs aligned solutions");
    const TimeGrid& grid = next.grid();
    const std::size_t N = grid.steps(), start = next.start_step(), M = next.paths();
    const std::size_t width = 2 * (N + 1);
    const auto s = parallel_sum(M, width, [&](std::size_t k, double* acc) {
        for (std::size_t i = start; i <= N; ++i) {
            double dy = 0.0;
            const auto a = prev.y_at(k, i), b = next.y_at(k, i);
            for (std::size_t c = 0; c < a.size(); ++c) dy += (a[c] - b[c]) * (a[c] - b[c]);
            acc[i] += dy;
            if (i < N) {
                double dz = 0.0;
                const auto p = prev.z_at(k, i), q = next.z_at(k, i);
                for (std::size_t c = 0; c < p.size(); ++c) dz += (p[c] - q[c]) * (p[c] - q[c]);
                acc[N + 1 + i] += dz;
            }
        }
    });
    double ymax = 0.0, zsum = 0.0;
    for (std::size_t i = start; i <= N; ++i) {
        const double w = std::exp(beta_weight * grid.time(i)) / static_cast<double>(M);
        ymax = std::max(ymax, w * s[i]);
        if (i < N) zsum += grid.dt() * w * s[N + 1 + i];
    }
    return std::sqrt(ymax + zsum);
}

/// sqrt(max_i mean |Y_i|^2) over steps from the start step.
inline double sup_mean_square_norm(const BsdeSolution& sol) {
    const std::size_t N = sol.grid().steps(), start = sol.start_step();
    const auto s = parallel_sum(sol.paths(), N + 1, [&](std::size_t k, double* acc) {
        for (std::size_t i = start; i <= N; ++i)
            for (double v : sol.y_at(k, i)) acc[i] += v * v;
    });
    double best = 0.0;
    for (std::size_t i = start; i <= N; ++i) best = std::max(best, s[i] / static_cast<double>(sol.paths()));
    return std::sqrt(best);
}

/// u(s) for s before the start time: writes m values.
using PastValues = std::function<void(double s, std::span<double> out)>;

struct DelayedSolveResult {
    BsdeSolution solution;
    PicardTrace trace;
    ContractionReport contraction;
};

namespace detail {

/// Freezes y_hat at the previous iterate: samples on [t, T], caller values on
/// [t0, t) and the value at t0 before the grid start.
inline FrozenGenerator freeze(const GeneratorSpec& gen, const ForwardEnsemble& fe, const BsdeSolution& prev,
                              std::shared_ptr<const std::vector<double>> past, std::size_t lag) {
    const std::size_t m = gen.m, start = fe.start_step();
    const TimeGrid* grid = &fe.grid();
    FrozenGenerator fg;
    fg.m = m;
    fg.L = gen.L;
    fg.eval = [&gen, &prev, past = std::move(past), lag, m, start, grid](
                  std::size_t i, std::size_t k, const PathView& x, std::span<const double> y,
                  std::span<const double> z, std::span<double> out) {
        constexpr std::size_t kStack = 256;
        double stack_buf[kStack];
        thread_local std::vector<double> heap_buf;
        const std::size_t n = (lag + 1) * m;
        double* buf = stack_buf;
        if (n > kStack) {
            heap_buf.resize(n);
            buf = heap_buf.data();
        }
        for (std::size_t j = 0; j <= lag; ++j) {
            const std::ptrdiff_t s = static_cast<std::ptrdiff_t>(i + j) - static_cast<std::ptrdiff_t>(lag);
            const std::size_t node = s < 0 ? 0 : static_cast<std::size_t>(s);
            for (std::size_t c = 0; c < m; ++c)
                buf[j * m + c] = node >= start ? prev.Y(k, node, c) : (*past)[node * m + c];
        }
        GeneratorArgs a;
        a.t = grid->time(i);
        a.step = i;
        a.x = x;
        a.y = y;
        a.z = z;
        a.y_hat = SegmentView{gen.delta > 0.0 ? gen.delta : 0.0, m, std::span<const double>(buf, n)};
        gen.eval(a, out);
    };
    return fg;
}

}  // namespace detail

/// Picard iteration on an already simulated forward ensemble.
inline DelayedSolveResult solve_delayed_bsde(const ForwardEnsemble& fe, const GeneratorSpec& gen,
                                             std::span<const double> terminal, const PastValues& past_u,
                                             const SolverConfig& cfg) {
    const TimeGrid& grid = fe.grid();
    const std::size_t m = gen.m, start = fe.start_step();
    if (!(cfg.picard_tol > 0.0) || cfg.picard_max_iter == 0) throw DomainError("Picard tolerance must be positive");
    const std::size_t lag = gen.has_delay() ? grid.delay_steps(gen.delta) : 0;

    DelayedSolveResult res;
    res.contraction = check_contraction(gen, grid.T());
    if (!res.contraction.satisfied) {
        const std::string msg = "contraction condition violated for generator '" + gen.name +
                                "': value " + csv::format(res.contraction.lhs) + " >= 1/290";
        if (cfg.contraction_policy == ContractionPolicy::Abort) throw ContractionError(msg);
        warn(msg);
    }

    auto past = std::make_shared<std::vector<double>>(std::max<std::size_t>(start, 1) * m, 0.0);
    if (start > 0) {
        if (!past_u) throw DomainError("start time after t0 requires past values u(s), s < t");
        for (std::size_t s = 0; s < start; ++s) past_u(grid.time(s), std::span<double>(*past).subspan(s * m, m));
    }

    auto fill_past = [&](BsdeSolution& sol) {
        for (std::size_t k = 0; k < sol.paths(); ++k)
            for (std::size_t s = 0; s < start; ++s)
                for (std::size_t c = 0; c < m; ++c) sol.Y(k, s, c) = (*past)[s * m + c];
    };

    BsdeSolution prev(grid, fe.paths(), m, fe.brownian().noise_dim(), start);
    fill_past(prev);
    for (std::size_t n = 1; n <= cfg.picard_max_iter; ++n) {
        const FrozenGenerator fg = detail::freeze(gen, fe, prev, past, lag);
        BsdeSolution next = solve_standard_bsde(terminal, fg, fe, cfg.basis, cfg);
        fill_past(next);
        const double r = picard_residual(prev, next, cfg.beta_weight);
        res.trace.residuals.push_back(r);
        res.trace.iterations = n;
        res.trace.tolerance = cfg.picard_tol * std::max(1.0, sup_mean_square_norm(next));
        prev = std::move(next);
        if (r < res.trace.tolerance) {
            res.trace.converged = true;
            res.solution = std::move(prev);
            return res;
        }
    }
    throw NonConvergenceError("Picard iteration did not converge in " + std::to_string(cfg.picard_max_iter) +
                                  " iterations (last residual " + csv::format(res.trace.residuals.back()) + ")",
                              res.trace.residuals);
}

/// Simulates X^{t,phi} on the Brownian ensemble and solves the delayed BSDE with terminal h(X).
struct DelayedProblem {
    ForwardEnsemble forward;
    DelayedSolveResult result;
};

inline DelayedProblem solve_delayed_bsde(double t, const DiscretePath& phi, const ForwardModel& model,
                                         const GeneratorSpec& gen, const Payoff& h, const PastValues& past_u,
                                         const SolverConfig& cfg, std::shared_ptr<const BrownianEnsemble> bm) {
    if (h.m != gen.m) throw DomainError("payoff and generator dimensions differ");
    ForwardEnsemble fe = simulate_forward(t, phi, model, std::move(bm));
    const auto terminal = evaluate_payoff(h, fe);
    auto result = solve_delayed_bsde(fe, gen, terminal, past_u, cfg);
    return DelayedProblem{std::move(fe), std::move(result)};
}

/// `step,t,mean_Y,std_Y,mean_abs_Z` for the first component of Y.
inline void write_solution_csv(const BsdeSolution& sol, const std::string& path) {
    csv::Writer w(path);
    w.header({"step", "t", "mean_Y", "std_Y", "mean_abs_Z"});
    const std::size_t N = sol.grid().steps();
    for (std::size_t i = sol.start_step(); i <= N; ++i)
        w.row({static_cast<double>(i), sol.grid().time(i), sol.mean_Y(i), sol.std_Y(i),
               i < N ? sol.mean_abs_Z(i) : 0.0});
}

inline void write_trace_csv(const PicardTrace& trace, const std::string& path) {
    csv::Writer w(path);
    w.header({"iteration", "residual"});
    for (std::size_t n = 0; n < trace.residuals.size(); ++n) w.row({static_cast<double>(n + 1), trace.residuals[n]});
}

}  // namespace dbsde
