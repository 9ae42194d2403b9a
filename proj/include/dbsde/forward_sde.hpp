#pragma once

// Euler-Maruyama simulation of path-dependent forward SDEs
//   X(s) = phi(t) + int_t^s b(r, X_(r)) dr + int_t^s sigma(r, X_(r)) dW(r),  s >= t,
//   X(s) = phi(s),  s < t,
// where the coefficients see the stopped path X_(r) = X(. ^ r).

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <memory>
#include <numeric>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "csv.hpp"
#include "errors.hpp"
#include "parallel.hpp"
#include "paths.hpp"
#include "rng.hpp"

namespace dbsde {

/// Writes a coefficient value for (t, stopped path) into `out`.
using PathFunctional = std::function<void(double t, const PathView& x, std::span<double> out)>;

/// Non-anticipative drift b (d values) and diffusion sigma (d x d', row-major).
struct ForwardModel {
    std::string name;
    std::size_t dim = 1;
    std::size_t noise_dim = 1;
    double ell = 0.0;  // Lipschitz constant of b and sigma, metadata only
    PathFunctional drift;
    PathFunctional diffusion;
};

namespace models {

/// b = 0, sigma = vol * I.
inline ForwardModel brownian(double vol = 1.0) {
    return {"brownian", 1, 1, std::abs(vol),
            [](double, const PathView&, std::span<double> out) { out[0] = 0.0; },
            [vol](double, const PathView&, std::span<double> out) { out[0] = vol; }};
}

/// dX = mu X dt + vol X dW.
inline ForwardModel gbm(double mu, double vol) {
    return {"gbm", 1, 1, std::max(std::abs(mu), std::abs(vol)),
            [mu](double, const PathView& x, std::span<double> out) { out[0] = mu * x.current(0); },
            [vol](double, const PathView& x, std::span<double> out) { out[0] = vol * x.current(0); }};
}

/// dX = drift dt, no noise.
inline ForwardModel deterministic(double drift = 0.0) {
    return {"deterministic", 1, 1, 0.0,
            [drift](double, const PathView&, std::span<double> out) { out[0] = drift; },
            [](double, const PathView&, std::span<double> out) { out[0] = 0.0; }};
}

/// dX = a X dt + vol dW.
inline ForwardModel linear(double a, double vol = 0.0) {
    return {"linear", 1, 1, std::max(std::abs(a), std::abs(vol)),
            [a](double, const PathView& x, std::span<double> out) { out[0] = a * x.current(0); },
            [vol](double, const PathView&, std::span<double> out) { out[0] = vol; }};
}

/// dX = (a X(t) + c X(t - delta)) dt + vol dW, prolonged by X(t0) before the start.
inline ForwardModel lagged_drift(double a, double c, double delta, double vol) {
    return {"lagged_drift", 1, 1, std::abs(a) + std::abs(c) + std::abs(vol),
            [=](double t, const PathView& x, std::span<double> out) {
                out[0] = a * x.current(0) + c * x.at_time(t - delta, 0);
            },
            [vol](double, const PathView&, std::span<double> out) { out[0] = vol; }};
}

/// dX = kappa (mean_{[t0,t]} X - X(t)) dt + vol dW: reversion to the running average.
inline ForwardModel running_average(double kappa, double vol) {
    return {"running_average", 1, 1, 2.0 * std::abs(kappa) + std::abs(vol),
            [kappa](double, const PathView& x, std::span<double> out) {
                const std::size_t i = x.stop();
                double avg = x.at(0, 0);
                if (i > 0) {
                    // trapezoid mean over [t0, t]
                    double s = 0.5 * (x.at(0, 0) + x.at(i, 0));
                    for (std::size_t j = 1; j < i; ++j) s += x.at(j, 0);
                    avg = s / static_cast<double>(i);
                }
                out[0] = kappa * (avg - x.current(0));
            },
            [vol](double, const PathView&, std::span<double> out) { out[0] = vol; }};
}

}  // namespace models

/// Brownian increments Delta W for M sample paths on a grid. Gaussian
/// ensembles are addressed by (seed, path, step, component), so any subset
/// of paths can be regenerated independently.
class BrownianEnsemble {
public:
    static BrownianEnsemble gaussian(const TimeGrid& grid, std::size_t paths, std::size_t noise_dim,
                                     std::uint64_t seed) {
        if (paths < 2) throw DomainError("ensemble needs at least two paths");
        if (noise_dim == 0) throw DomainError("noise dimension must be at least 1");
        BrownianEnsemble e(grid, paths, noise_dim, seed, false);
        const double sq = std::sqrt(grid.dt());
        const std::size_t N = grid.steps();
        parallel_for_each(paths, [&](std::size_t k) {
            double* row = e.incr_.data() + k * N * noise_dim;
            for (std::size_t i = 0; i < N; ++i)
                for (std::size_t j = 0; j < noise_dim; ++j) row[i * noise_dim + j] = sq * rng::normal(seed, k, i, j);
        });
        return e;
    }

    /// All 2^N histories of a scalar walk with increments +/- sqrt(dt), each
    /// with probability 2^-N. Path k follows history perm(k): bit i set means
    /// an up-move at step i. seed 0 keeps the natural order.
    static BrownianEnsemble bernoulli_tree(const TimeGrid& grid, std::uint64_t seed = 0) {
        const std::size_t N = grid.steps();
        if (N > 14) throw ResourceError("tree depth " + std::to_string(N) + " exceeds 14");
        const std::size_t paths = std::size_t{1} << N;
        BrownianEnsemble e(grid, paths, 1, seed, true);
        std::vector<std::size_t> order(paths);
        std::iota(order.begin(), order.end(), std::size_t{0});
        if (seed != 0) {
            std::mt19937_64 gen(seed);
            std::shuffle(order.begin(), order.end(), gen);
        }
        const double sq = std::sqrt(grid.dt());
        for (std::size_t k = 0; k < paths; ++k)
            for (std::size_t i = 0; i < N; ++i) e.incr_[k * N + i] = ((order[k] >> i) & 1U) ? sq : -sq;
        return e;
    }

    const TimeGrid& grid() const noexcept { return grid_; }
    std::size_t paths() const noexcept { return paths_; }
    std::size_t noise_dim() const noexcept { return noise_dim_; }
    std::uint64_t seed() const noexcept { return seed_; }
    bool is_tree() const noexcept { return tree_; }

    std::span<const double> increment(std::size_t path, std::size_t step) const noexcept {
        return std::span<const double>(incr_).subspan((path * grid_.steps() + step) * noise_dim_, noise_dim_);
    }
    double increment(std::size_t path, std::size_t step, std::size_t j) const noexcept {
        return incr_[(path * grid_.steps() + step) * noise_dim_ + j];
    }

private:
    BrownianEnsemble(const TimeGrid& grid, std::size_t paths, std::size_t noise_dim, std::uint64_t seed, bool tree)
        : grid_(grid), paths_(paths), noise_dim_(noise_dim), seed_(seed), tree_(tree),
          incr_(paths * grid.steps() * noise_dim) {}

    TimeGrid grid_;
    std::size_t paths_;
    std::size_t noise_dim_;
    std::uint64_t seed_;
    bool tree_;
    std::vector<double> incr_;
};

/// M simulated paths of X^{t,phi}, all sharing the deterministic history phi on [t0, t].
class ForwardEnsemble {
public:
    ForwardEnsemble(std::shared_ptr<const BrownianEnsemble> bm, std::size_t dim, std::size_t start, DiscretePath phi,
                    std::string model_name)
        : bm_(std::move(bm)), dim_(dim), start_(start), phi_(std::move(phi)), model_name_(std::move(model_name)),
          values_(bm_->paths() * bm_->grid().points() * dim) {}

    const TimeGrid& grid() const noexcept { return bm_->grid(); }
    const BrownianEnsemble& brownian() const noexcept { return *bm_; }
    std::shared_ptr<const BrownianEnsemble> brownian_ptr() const noexcept { return bm_; }
    std::size_t paths() const noexcept { return bm_->paths(); }
    std::size_t dim() const noexcept { return dim_; }
    std::size_t start_step() const noexcept { return start_; }
    double start_time() const noexcept { return grid().time(start_); }
    const DiscretePath& initial_path() const noexcept { return phi_; }
    const std::string& model_name() const noexcept { return model_name_; }

    std::span<const double> row(std::size_t k) const noexcept {
        const std::size_t n = grid().points() * dim_;
        return std::span<const double>(values_).subspan(k * n, n);
    }
    std::span<double> row(std::size_t k) noexcept {
        const std::size_t n = grid().points() * dim_;
        return std::span<double>(values_).subspan(k * n, n);
    }

    PathView view(std::size_t k, std::size_t stop) const noexcept { return PathView(grid(), dim_, row(k), stop); }
    PathView view(std::size_t k) const noexcept { return view(k, grid().steps()); }
    double value(std::size_t k, std::size_t step, std::size_t c = 0) const noexcept {
        return values_[(k * grid().points() + step) * dim_ + c];
    }

    DiscretePath path(std::size_t k) const {
        return DiscretePath(grid(), dim_, std::vector<double>(row(k).begin(), row(k).end()));
    }

private:
    std::shared_ptr<const BrownianEnsemble> bm_;
    std::size_t dim_;
    std::size_t start_;
    DiscretePath phi_;
    std::string model_name_;
    std::vector<double> values_;
};

/// Euler-Maruyama with coefficients frozen at the left node and evaluated on
/// the stopped simulated path. Paths equal phi on [t0, t] exactly.
inline ForwardEnsemble simulate_forward(double t, const DiscretePath& phi, const ForwardModel& model,
                                        std::shared_ptr<const BrownianEnsemble> bm) {
    if (!bm) throw DomainError("missing Brownian ensemble");
    const TimeGrid& grid = bm->grid();
    if (!(phi.grid() == grid)) throw DomainError("initial path and Brownian ensemble use different grids");
    if (phi.dim() != model.dim) throw DomainError("initial path dimension does not match the model");
    if (bm->noise_dim() != model.noise_dim) throw DomainError("noise dimension does not match the model");
    const std::size_t start = grid.snap_index(t);
    const std::size_t d = model.dim, dn = model.noise_dim, N = grid.steps();
    const double dt = grid.dt();

    ForwardEnsemble fe(bm, d, start, phi, model.name);
    parallel_blocks(fe.paths(), [&](std::size_t lo, std::size_t hi, std::size_t) {
        std::vector<double> b(d), s(d * dn);
        for (std::size_t k = lo; k < hi; ++k) {
            auto x = fe.row(k);
            std::copy(phi.values().begin(), phi.values().end(), x.begin());
            for (std::size_t i = start; i < N; ++i) {
                const PathView view(grid, d, x, i);
                const double ti = grid.time(i);
                model.drift(ti, view, b);
                model.diffusion(ti, view, s);
                for (std::size_t c = 0; c < d; ++c) {
                    double next = x[i * d + c] + b[c] * dt;
                    for (std::size_t j = 0; j < dn; ++j) next += s[c * dn + j] * bm->increment(k, i, j);
                    if (!std::isfinite(b[c]) || !std::isfinite(next))
                        throw SimulationError("non-finite forward value", i, k);
                    x[(i + 1) * d + c] = next;
                }
            }
        }
    });
    return fe;
}

/// E[sup_s |X^{t,phi}(s) - X^{t,phi'}(s)|^2] / ||phi - phi'||_T^2 with common
/// random numbers.
inline double lipschitz_probe(const ForwardModel& model, double t, const DiscretePath& phi,
                              const DiscretePath& phi2, std::shared_ptr<const BrownianEnsemble> bm) {
    const double base = sup_norm(phi - phi2);
    if (base == 0.0) throw DomainError("lipschitz probe needs distinct initial paths");
    const auto a = simulate_forward(t, phi, model, bm);
    const auto b = simulate_forward(t, phi2, model, bm);
    const std::size_t n = a.grid().points(), d = a.dim();
    const auto total = parallel_sum(a.paths(), 1, [&](std::size_t k, double* acc) {
        double best = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            double s = 0.0;
            for (std::size_t c = 0; c < d; ++c) {
                const double diff = a.value(k, i, c) - b.value(k, i, c);
                s += diff * diff;
            }
            best = std::max(best, s);
        }
        acc[0] += best;
    });
    return total[0] / static_cast<double>(a.paths()) / (base * base);
}

/// One file per ensemble: `sample,t,x1..xd`, one row per (sample, node).
inline void write_ensemble_csv(const ForwardEnsemble& fe, const std::string& path) {
    csv::Writer w(path);
    std::vector<std::string> names{"sample", "t"};
    for (std::size_t c = 0; c < fe.dim(); ++c) names.push_back("x" + std::to_string(c + 1));
    w.header(names);
    std::vector<double> row(fe.dim() + 2);
    for (std::size_t k = 0; k < fe.paths(); ++k)
        for (std::size_t i = 0; i < fe.grid().points(); ++i) {
            row[0] = static_cast<double>(k);
            row[1] = fe.grid().time(i);
            for (std::size_t c = 0; c < fe.dim(); ++c) row[c + 2] = fe.value(k, i, c);
            w.row(row);
        }
}

}  // namespace dbsde
