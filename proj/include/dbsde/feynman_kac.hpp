#pragma once

// u(t, phi) = Y^{t,phi}(t) on a sub-grid of initial times. The solve at t
// needs u(s, phi) for s in [t - delta, t), so initial times are swept upward.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "csv.hpp"
#include "delayed_bsde.hpp"
#include "errors.hpp"
#include "forward_sde.hpp"
#include "generators.hpp"
#include "paths.hpp"

namespace dbsde {

struct ValueSurface {
    std::vector<double> times;
    std::vector<std::size_t> steps;
    std::vector<double> values;  // per time, m values
    std::vector<double> std_errors;
    std::vector<std::size_t> iterations;
    std::size_t m = 1;
    DiscretePath phi;
    std::vector<std::vector<StepSurrogate>> surrogates;  // per time, fitted u(s, .) for s >= t

    std::size_t size() const noexcept { return times.size(); }
    double value(std::size_t j, std::size_t c = 0) const { return values[j * m + c]; }
    double std_error(std::size_t j, std::size_t c = 0) const { return std_errors[j * m + c]; }

    /// Linear interpolation between nodes; held constant past the last node.
    void interpolate(double s, std::span<double> out) const {
        if (times.empty()) throw StateError("empty value surface");
        if (s <= times.front()) {
            for (std::size_t c = 0; c < m; ++c) out[c] = value(0, c);
            return;
        }
        const auto it = std::upper_bound(times.begin(), times.end(), s);
        if (it == times.end()) {
            for (std::size_t c = 0; c < m; ++c) out[c] = value(times.size() - 1, c);
            return;
        }
        const std::size_t j = static_cast<std::size_t>(it - times.begin());
        const double w = (s - times[j - 1]) / (times[j] - times[j - 1]);
        for (std::size_t c = 0; c < m; ++c) out[c] = (1.0 - w) * value(j - 1, c) + w * value(j, c);
    }
};

/// Sweeps initial times t0, t0 + stride dt, ... (always ending at T, or at
/// `until` when given) on the common Brownian ensemble.
inline ValueSurface u_surface(const DiscretePath& phi, const ForwardModel& model, const GeneratorSpec& gen,
                              const Payoff& h, const SolverConfig& cfg, std::shared_ptr<const BrownianEnsemble> bm,
                              std::size_t stride = 1, std::optional<double> until = std::nullopt,
                              bool keep_surrogates = false) {
    if (!bm) throw DomainError("missing Brownian ensemble");
    if (stride == 0) throw DomainError("surface stride must be positive");
    if (h.m != gen.m) throw DomainError("payoff and generator dimensions differ");
    const TimeGrid& grid = bm->grid();
    const std::size_t N = grid.steps(), m = gen.m;
    const std::size_t last = until ? grid.snap_index(*until) : N;

    std::vector<std::size_t> nodes;
    for (std::size_t i = 0; i < last; i += stride) nodes.push_back(i);
    if (gen.has_delay() == false && until) nodes = {};  // no memory: only the target time matters
    nodes.push_back(last);

    ValueSurface surf;
    surf.m = m;
    surf.phi = phi;
    for (std::size_t i : nodes) {
        const double t = grid.time(i);
        std::vector<double> u(m, 0.0), se(m, 0.0);
        std::size_t iters = 0;
        if (i == N) {
            h.eval(phi.view(), u);  // terminal condition, exact
        } else {
            // without memory the earlier values are never read
            const PastValues past = [&surf, &gen](double s, std::span<double> out) {
                if (surf.size()) return surf.interpolate(s, out);
                if (gen.has_delay()) throw StateError("surface sweep reached t > t0 without earlier values");
                std::fill(out.begin(), out.end(), 0.0);
            };
            const std::string where = " at initial time " + csv::format(t);
            try {
                DelayedProblem p = solve_delayed_bsde(t, phi, model, gen, h, past, cfg, bm);
                u = p.result.solution.u0();
                se = p.result.solution.u0_std_error();
                iters = p.result.trace.iterations;
                if (keep_surrogates) surf.surrogates.push_back(p.result.solution.surrogates());
            } catch (const NonConvergenceError& e) {
                throw NonConvergenceError(e.what() + where, e.residuals());
            } catch (const ContractionError& e) {
                throw ContractionError(e.what() + where);
            } catch (const StepSizeError& e) {
                throw StepSizeError(e.what() + where);
            } catch (const IllConditionedRegressionError& e) {
                warn(e.what() + where);
                throw;
            } catch (const SimulationError& e) {
                warn(e.what() + where);
                throw;
            }
        }
        surf.times.push_back(t);
        surf.steps.push_back(i);
        surf.values.insert(surf.values.end(), u.begin(), u.end());
        surf.std_errors.insert(surf.std_errors.end(), se.begin(), se.end());
        surf.iterations.push_back(iters);
    }
    return surf;
}

/// u(t, phi) alone: the sweep below t is still needed when the generator has memory.
inline std::vector<double> u_value(double t, const DiscretePath& phi, const ForwardModel& model,
                                   const GeneratorSpec& gen, const Payoff& h, const SolverConfig& cfg,
                                   std::shared_ptr<const BrownianEnsemble> bm, std::size_t stride = 1) {
    const ValueSurface s = u_surface(phi, model, gen, h, cfg, std::move(bm), stride, t);
    const std::size_t j = s.size() - 1;
    return std::vector<double>(s.values.begin() + static_cast<std::ptrdiff_t>(j * s.m), s.values.end());
}

/// `t,u,std_error` (first component).
inline void write_surface_csv(const ValueSurface& s, const std::string& path) {
    csv::Writer w(path);
    w.header({"t", "u", "std_error"});
    for (std::size_t j = 0; j < s.size(); ++j) w.row({s.times[j], s.value(j), s.std_error(j)});
}

struct FkConsistencyReport {
    std::vector<double> times;
    std::vector<double> mean_error;
    std::vector<double> max_error;
    double max_abs_error = 0.0;       // max over steps of the mean error
    double in_sample_residual = 0.0;  // largest one-step regression residual of the training solve
};

/// Out-of-sample check of Y(s) = u(s, X(s)): the fitted u(s, .) of a solve on
/// `bm_train` is evaluated on paths driven by `bm_test` and compared with Y
/// re-solved on those paths.
inline FkConsistencyReport check_fk_consistency(double t, const DiscretePath& phi, const ForwardModel& model,
                                                const GeneratorSpec& gen, const Payoff& h, const SolverConfig& cfg,
                                                std::shared_ptr<const BrownianEnsemble> bm_train,
                                                std::shared_ptr<const BrownianEnsemble> bm_test,
                                                const PastValues& past_u = {}) {
    const DelayedProblem train = solve_delayed_bsde(t, phi, model, gen, h, past_u, cfg, std::move(bm_train));
    const BsdeSolution& fit = train.result.solution;
    if (!fit.has_surrogates()) throw StateError("solution carries no regression surrogates");
    const DelayedProblem test = solve_delayed_bsde(t, phi, model, gen, h, past_u, cfg, std::move(bm_test));
    const BsdeSolution& fresh = test.result.solution;
    const ForwardEnsemble& fe = test.forward;
    const std::size_t start = fe.start_step(), N = fe.grid().steps(), m = gen.m;

    FkConsistencyReport rep;
    rep.in_sample_residual = fit.max_regression_residual();
    for (std::size_t i = start; i < N; ++i) {
        const StepSurrogate& sur = fit.surrogates()[i - start];
        const auto s = parallel_sum(fe.paths(), 1, [&](std::size_t k, double* acc) {
            double u[64];
            sur.evaluate(fe.view(k, i), std::span<double>(u, m));
            double e = 0.0;
            for (std::size_t c = 0; c < m; ++c) e = std::max(e, std::abs(fresh.Y(k, i, c) - u[c]));
            acc[0] += e;
        });
        // max is order independent, a plain loop keeps it exact
        double worst = 0.0;
        std::vector<double> u(m);
        for (std::size_t k = 0; k < fe.paths(); ++k) {
            sur.evaluate(fe.view(k, i), u);
            for (std::size_t c = 0; c < m; ++c) worst = std::max(worst, std::abs(fresh.Y(k, i, c) - u[c]));
        }
        rep.times.push_back(fe.grid().time(i));
        rep.mean_error.push_back(s[0] / static_cast<double>(fe.paths()));
        rep.max_error.push_back(worst);
        rep.max_abs_error = std::max(rep.max_abs_error, rep.mean_error.back());
    }
    return rep;
}

/// `s,mean_error,max_error`
inline void write_fk_csv(const FkConsistencyReport& r, const std::string& path) {
    csv::Writer w(path);
    w.header({"s", "mean_error", "max_error"});
    for (std::size_t j = 0; j < r.times.size(); ++j) w.row({r.times[j], r.mean_error[j], r.max_error[j]});
}

struct ContinuityRow {
    double eps = 0.0;
    double delta_u = 0.0;
};

/// |u(t, phi + eps psi) - u(t, phi)| for each eps, common random numbers throughout.
inline std::vector<ContinuityRow> check_u_continuity(double t, const DiscretePath& phi, const DiscretePath& psi,
                                                     std::span<const double> eps_list, const ForwardModel& model,
                                                     const GeneratorSpec& gen, const Payoff& h,
                                                     const SolverConfig& cfg,
                                                     std::shared_ptr<const BrownianEnsemble> bm,
                                                     std::size_t stride = 1) {
    const std::vector<double> base = u_value(t, phi, model, gen, h, cfg, bm, stride);
    std::vector<ContinuityRow> rows;
    for (double eps : eps_list) {
        double d = 0.0;
        if (eps != 0.0) {
            const std::vector<double> v = u_value(t, phi + psi.scaled(eps), model, gen, h, cfg, bm, stride);
            for (std::size_t c = 0; c < v.size(); ++c) d = std::max(d, std::abs(v[c] - base[c]));
        }
        rows.push_back({eps, d});
    }
    return rows;
}

}  // namespace dbsde
