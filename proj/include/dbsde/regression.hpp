#pragma once

// Least-squares conditional expectations E[V | F_i] ~ phi_i(X)^T c on a
// simulated ensemble.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "errors.hpp"
#include "forward_sde.hpp"
#include "parallel.hpp"

namespace dbsde {

enum class BasisKind {
    Polynomial,           // monomials in X(t_i)
    StateRunningAverage,  // monomials in (X(t_i), running mean of X on [t0, t_i])
    StateLagged,          // monomials in (X(t_i), X(t_i - lag dt))
    Indicator,            // one-hot of the +/- history of X since the start step (tree ensembles)
};

struct RegressionBasis {
    BasisKind kind = BasisKind::Polynomial;
    int degree = 2;
    std::size_t lag_steps = 1;

    static RegressionBasis polynomial(int degree) { return {BasisKind::Polynomial, degree, 1}; }
    static RegressionBasis running_average(int degree) { return {BasisKind::StateRunningAverage, degree, 1}; }
    static RegressionBasis lagged(int degree, std::size_t lag) { return {BasisKind::StateLagged, degree, lag}; }
    static RegressionBasis indicator() { return {BasisKind::Indicator, 0, 1}; }

    std::string name() const {
        switch (kind) {
            case BasisKind::Polynomial: return "polynomial";
            case BasisKind::StateRunningAverage: return "running_average";
            case BasisKind::StateLagged: return "lagged";
            case BasisKind::Indicator: return "indicator";
        }
        return "?";
    }
};

/// Feature map at one step, with its standardisation frozen from the
/// ensemble it was built on so it can be evaluated on fresh paths.
class StepBasis {
public:
    /// The constant function only; used where the conditioning is trivial.
    static StepBasis constant(std::size_t step) {
        StepBasis b;
        b.kind_ = BasisKind::Polynomial;
        b.step_ = step;
        b.exponents_.push_back({});
        return b;
    }

    static StepBasis build(const RegressionBasis& spec, const ForwardEnsemble& fe, std::size_t step) {
        if (step <= fe.start_step()) return constant(step);
        StepBasis b;
        b.kind_ = spec.kind;
        b.step_ = step;
        b.start_ = fe.start_step();
        b.lag_ = spec.lag_steps;
        if (spec.kind == BasisKind::Indicator) {
            const std::size_t bits = step - b.start_;
            if (bits > 14) throw ResourceError("indicator basis limited to 14 steps of history");
            b.groups_ = std::size_t{1} << bits;
            return b;
        }
        if (spec.degree < 0) throw DomainError("basis degree must be nonnegative");
        const std::size_t nv = b.raw_count(fe.dim());
        // per-variable mean and std over the ensemble
        const auto sums = parallel_sum(fe.paths(), 2 * nv, [&](std::size_t k, double* acc) {
            double v[16];
            b.raw(fe.view(k, step), std::span<double>(v, nv));
            for (std::size_t j = 0; j < nv; ++j) {
                acc[j] += v[j];
                acc[nv + j] += v[j] * v[j];
            }
        });
        const double M = static_cast<double>(fe.paths());
        for (std::size_t j = 0; j < nv; ++j) {
            const double mean = sums[j] / M;
            const double var = std::max(0.0, sums[nv + j] / M - mean * mean);
            const double sd = std::sqrt(var);
            if (sd > 1e-12 * std::max(1.0, std::abs(mean))) {
                b.active_.push_back(j);
                b.center_.push_back(mean);
                b.scale_.push_back(sd);
            }
        }
        b.enumerate_monomials(static_cast<std::size_t>(spec.degree));
        return b;
    }

    BasisKind kind() const noexcept { return kind_; }
    std::size_t step() const noexcept { return step_; }
    bool is_indicator() const noexcept { return kind_ == BasisKind::Indicator && groups_ > 0; }
    std::size_t size() const noexcept { return is_indicator() ? groups_ : exponents_.size(); }

    /// History index of a path for the indicator basis.
    std::size_t group(const PathView& x) const noexcept {
        std::size_t g = 0;
        for (std::size_t j = start_; j < step_; ++j)
            if (x.at(j + 1, 0) > x.at(j, 0)) g |= std::size_t{1} << (j - start_);
        return g;
    }

    /// Dense feature vector of a path (stopped at or after this step).
    void features(const PathView& path, std::span<double> out) const {
        const PathView x = path.stopped_at(step_);
        if (is_indicator()) {
            std::fill(out.begin(), out.end(), 0.0);
            out[group(x)] = 1.0;
            return;
        }
        double raw_v[16], z[16];
        const std::size_t nv = exponents_.empty() || active_.empty() ? 0 : raw_count(x.dim());
        if (nv > 0) {
            raw(x, std::span<double>(raw_v, nv));
            for (std::size_t a = 0; a < active_.size(); ++a) z[a] = (raw_v[active_[a]] - center_[a]) / scale_[a];
        }
        for (std::size_t f = 0; f < exponents_.size(); ++f) {
            double v = 1.0;
            for (std::size_t a = 0; a < exponents_[f].size(); ++a)
                for (int p = 0; p < exponents_[f][a]; ++p) v *= z[a];
            out[f] = v;
        }
    }

private:
    std::size_t raw_count(std::size_t d) const noexcept {
        return kind_ == BasisKind::Polynomial ? d : 2 * d;
    }

    void raw(const PathView& x, std::span<double> out) const {
        const std::size_t d = x.dim();
        for (std::size_t c = 0; c < d; ++c) out[c] = x.current(c);
        if (kind_ == BasisKind::StateRunningAverage) {
            const std::size_t i = x.stop();
            for (std::size_t c = 0; c < d; ++c) {
                double s = x.at(0, c);
                if (i > 0) {
                    s = 0.5 * (x.at(0, c) + x.at(i, c));
                    for (std::size_t j = 1; j < i; ++j) s += x.at(j, c);
                    s /= static_cast<double>(i);
                }
                out[d + c] = s;
            }
        } else if (kind_ == BasisKind::StateLagged) {
            for (std::size_t c = 0; c < d; ++c) out[d + c] = x.lagged(lag_, c);
        }
    }

    // All exponent tuples over the active variables with total degree <= D,
    // graded order, constant first.
    void enumerate_monomials(std::size_t D) {
        const std::size_t nv = active_.size();
        if (nv > 16) throw DomainError("too many regression variables");
        exponents_.clear();
        std::vector<int> e(nv, 0);
        for (std::size_t total = 0; total <= D; ++total) {
            if (nv == 0) {
                if (total == 0) exponents_.push_back({});
                continue;
            }
            compositions(e, 0, static_cast<int>(total));
        }
    }

    void compositions(std::vector<int>& e, std::size_t pos, int left) {
        if (pos + 1 == e.size()) {
            e[pos] = left;
            exponents_.push_back(e);
            return;
        }
        for (int v = left; v >= 0; --v) {
            e[pos] = v;
            compositions(e, pos + 1, left - v);
        }
    }

    BasisKind kind_ = BasisKind::Polynomial;
    std::size_t step_ = 0;
    std::size_t start_ = 0;
    std::size_t lag_ = 1;
    std::size_t groups_ = 0;
    std::vector<std::size_t> active_;
    std::vector<double> center_, scale_;
    std::vector<std::vector<int>> exponents_;
};

/// Design matrix of one step plus the factored normal equations.
class Design {
public:
    Design(StepBasis basis, const ForwardEnsemble& fe, bool ridge_fallback)
        : basis_(std::move(basis)), paths_(fe.paths()), q_(basis_.size()) {
        const std::size_t step = basis_.step();
        if (basis_.is_indicator()) {
            group_.resize(paths_);
            parallel_for_each(paths_, [&](std::size_t k) { group_[k] = basis_.group(fe.view(k, step)); });
            count_.assign(q_, 0.0);
            for (std::size_t g : group_) count_[g] += 1.0;
            double lo = std::numeric_limits<double>::infinity(), hi = 0.0;
            for (double c : count_)
                if (c > 0.0) {
                    lo = std::min(lo, c);
                    hi = std::max(hi, c);
                }
            // unobserved histories never enter a fit or a prediction on this ensemble
            condition_ = hi / lo;
            return;
        }
        phi_.resize(paths_ * q_);
        parallel_for_each(paths_, [&](std::size_t k) {
            basis_.features(fe.view(k, step), std::span<double>(phi_).subspan(k * q_, q_));
        });
        const auto g = parallel_sum(paths_, q_ * q_, [&](std::size_t k, double* acc) {
            const double* f = phi_.data() + k * q_;
            for (std::size_t a = 0; a < q_; ++a)
                for (std::size_t b = 0; b <= a; ++b) acc[a * q_ + b] += f[a] * f[b];
        });
        Eigen::MatrixXd gram(q_, q_);
        for (std::size_t a = 0; a < q_; ++a)
            for (std::size_t b = 0; b <= a; ++b) gram(a, b) = gram(b, a) = g[a * q_ + b];
        // Jacobi scaling before judging conditioning
        scale_.resize(q_);
        for (std::size_t a = 0; a < q_; ++a) scale_[a] = gram(a, a) > 0.0 ? 1.0 / std::sqrt(gram(a, a)) : 1.0;
        for (std::size_t a = 0; a < q_; ++a)
            for (std::size_t b = 0; b < q_; ++b) gram(a, b) *= scale_[a] * scale_[b];
        condition_ = condition_number(gram);
        if (condition_ > kMaxCondition && ridge_fallback) {
            const double lambda = 1e-10 * gram.trace() / static_cast<double>(q_);
            gram.diagonal().array() += lambda;
            ridged_ = true;
            condition_ = condition_number(gram);
        }
        if (!(condition_ <= kMaxCondition)) throw IllConditionedRegressionError(step, condition_);
        ldlt_.compute(gram);
    }

    static constexpr double kMaxCondition = 1e12;

    const StepBasis& basis() const noexcept { return basis_; }
    std::size_t size() const noexcept { return q_; }
    double condition() const noexcept { return condition_; }
    bool ridged() const noexcept { return ridged_; }

    /// Least-squares coefficients (q x r, row-major) for targets given by
    /// target(k, out) with out of length r.
    template <class Target>
    std::vector<double> fit(std::size_t r, Target&& target) const {
        std::vector<double> coef(q_ * r, 0.0);
        if (basis_.is_indicator()) {
            const auto sums = parallel_sum(paths_, q_ * r, [&](std::size_t k, double* acc) {
                double v[64];
                target(k, std::span<double>(v, r));
                for (std::size_t j = 0; j < r; ++j) acc[group_[k] * r + j] += v[j];
            });
            for (std::size_t g = 0; g < q_; ++g)
                if (count_[g] > 0.0)
                    for (std::size_t j = 0; j < r; ++j) coef[g * r + j] = sums[g * r + j] / count_[g];
            return coef;
        }
        const auto rhs = parallel_sum(paths_, q_ * r, [&](std::size_t k, double* acc) {
            double v[64];
            target(k, std::span<double>(v, r));
            const double* f = phi_.data() + k * q_;
            for (std::size_t a = 0; a < q_; ++a)
                for (std::size_t j = 0; j < r; ++j) acc[a * r + j] += f[a] * v[j];
        });
        Eigen::MatrixXd b(q_, r);
        for (std::size_t a = 0; a < q_; ++a)
            for (std::size_t j = 0; j < r; ++j) b(a, j) = rhs[a * r + j] * scale_[a];
        const Eigen::MatrixXd c = ldlt_.solve(b);
        for (std::size_t a = 0; a < q_; ++a)
            for (std::size_t j = 0; j < r; ++j) coef[a * r + j] = c(a, j) * scale_[a];
        return coef;
    }

    /// Fitted value for in-sample path k.
    void predict(std::size_t k, std::span<const double> coef, std::span<double> out) const noexcept {
        const std::size_t r = out.size();
        if (basis_.is_indicator()) {
            for (std::size_t j = 0; j < r; ++j) out[j] = coef[group_[k] * r + j];
            return;
        }
        const double* f = phi_.data() + k * q_;
        for (std::size_t j = 0; j < r; ++j) {
            double s = 0.0;
            for (std::size_t a = 0; a < q_; ++a) s += f[a] * coef[a * r + j];
            out[j] = s;
        }
    }

private:
    static double condition_number(const Eigen::MatrixXd& g) {
        if (g.rows() == 1) return g(0, 0) > 0.0 ? 1.0 : std::numeric_limits<double>::infinity();
        Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(g, Eigen::EigenvaluesOnly);
        const double lo = es.eigenvalues().minCoeff(), hi = es.eigenvalues().maxCoeff();
        return lo > 0.0 ? hi / lo : std::numeric_limits<double>::infinity();
    }

    StepBasis basis_;
    std::size_t paths_;
    std::size_t q_;
    std::vector<double> phi_;
    std::vector<double> scale_;
    std::vector<std::size_t> group_;
    std::vector<double> count_;
    double condition_ = 1.0;
    bool ridged_ = false;
    Eigen::LDLT<Eigen::MatrixXd> ldlt_;
};

/// Fitted function of the path at one step: x -> phi(x)^T c.
struct StepSurrogate {
    StepBasis basis;
    std::vector<double> coef;  // q x m, row-major
    std::size_t m = 1;

    void evaluate(const PathView& x, std::span<double> out) const {
        const std::size_t q = basis.size();
        if (basis.is_indicator()) {
            const std::size_t g = basis.group(x.stopped_at(basis.step()));
            for (std::size_t j = 0; j < m; ++j) out[j] = coef[g * m + j];
            return;
        }
        std::vector<double> f(q);
        basis.features(x, f);
        for (std::size_t j = 0; j < m; ++j) {
            double s = 0.0;
            for (std::size_t a = 0; a < q; ++a) s += f[a] * coef[a * m + j];
            out[j] = s;
        }
    }
};

}  // namespace dbsde
