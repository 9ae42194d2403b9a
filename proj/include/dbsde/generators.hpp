#pragma once

// Delayed BSDE generators F(t, x_(t), y, z, y_hat) and the smallness
// condition on (K, L, delta, T) under which the Picard map contracts.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <functional>
#include <limits>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "errors.hpp"
#include "paths.hpp"

namespace dbsde {

/// Probability measure alpha on [-delta, 0], resolved to quadrature weights on
/// the uniform segment sub-grid.
class DelayMeasure {
public:
    enum class Kind { Uniform, Dirac, Discrete };

    /// Normalised Lebesgue measure; trapezoid weights.
    static DelayMeasure uniform() { return DelayMeasure(Kind::Uniform, {}); }

    /// Point mass at theta = -delta.
    static DelayMeasure dirac() { return DelayMeasure(Kind::Dirac, {}); }

    /// Explicit weights on the k+1 sub-grid nodes, theta_0 = -delta first.
    static DelayMeasure discrete(std::vector<double> weights) {
        if (weights.empty()) throw DomainError("discrete delay measure needs weights");
        double sum = 0.0;
        for (double w : weights) {
            if (!(w >= 0.0) || !std::isfinite(w)) throw DomainError("delay measure weights must be nonnegative");
            sum += w;
        }
        if (std::abs(sum - 1.0) > 1e-12) throw DomainError("delay measure weights must sum to 1");
        return DelayMeasure(Kind::Discrete, std::move(weights));
    }

    Kind kind() const noexcept { return kind_; }

    std::string name() const {
        switch (kind_) {
            case Kind::Uniform: return "uniform";
            case Kind::Dirac: return "dirac";
            case Kind::Discrete: return "discrete";
        }
        return "?";
    }

    /// Weight of node j among k+1 nodes.
    double weight(std::size_t j, std::size_t k) const {
        switch (kind_) {
            case Kind::Uniform:
                if (k == 0) return 1.0;
                return (j == 0 || j == k ? 0.5 : 1.0) / static_cast<double>(k);
            case Kind::Dirac:
                return j == 0 ? 1.0 : 0.0;
            case Kind::Discrete:
                if (weights_.size() != k + 1)
                    throw ConfigurationError("discrete delay measure has " + std::to_string(weights_.size()) +
                                             " weights but the segment has " + std::to_string(k + 1) + " nodes");
                return weights_[j];
        }
        return 0.0;
    }

    std::vector<double> weights(std::size_t k) const {
        std::vector<double> w(k + 1);
        for (std::size_t j = 0; j <= k; ++j) w[j] = weight(j, k);
        return w;
    }

    /// int f(theta) alpha(dtheta) for component c of the segment.
    double integrate(const SegmentView& seg, std::size_t c = 0) const {
        const std::size_t k = seg.intervals();
        double s = 0.0;
        for (std::size_t j = 0; j <= k; ++j) s += weight(j, k) * seg.at(j, c);
        return s;
    }

private:
    DelayMeasure(Kind kind, std::vector<double> w) : kind_(kind), weights_(std::move(w)) {}

    Kind kind_;
    std::vector<double> weights_;
};

/// Arguments of one generator evaluation. `x` is the forward path stopped at
/// `step`; `y_hat` is the window of Y on [t - delta, t]. `z_hat` is only set by
/// callers that model a delay in Z.
struct GeneratorArgs {
    double t = 0.0;
    std::size_t step = 0;
    PathView x;
    std::span<const double> y;
    std::span<const double> z;  // m x d', row-major
    SegmentView y_hat;
    const SegmentView* z_hat = nullptr;
};

struct GeneratorSpec {
    std::string name;
    std::size_t m = 1;
    std::size_t noise_dim = 1;
    double L = 0.0;  // Lipschitz in (y, z)
    double K = 0.0;  // Lipschitz in y_hat, squared form
    double M = 0.0;  // growth: |F(t, phi, 0, 0, 0)| <= M (1 + ||phi||^p)
    double p = 1.0;
    double delta = 0.0;  // 0 means no memory
    DelayMeasure alpha = DelayMeasure::uniform();
    std::function<void(const GeneratorArgs&, std::span<double>)> eval;

    bool has_delay() const noexcept { return delta > 0.0; }

    double operator()(const GeneratorArgs& a) const {
        double out = 0.0;
        eval(a, std::span<double>(&out, 1));
        return out;
    }
};

/// (beta / delta) int_{-delta}^0 y_hat(theta) dtheta, componentwise.
inline GeneratorSpec make_moving_average(double beta, double delta, std::size_t m = 1) {
    if (!(delta > 0.0)) throw DomainError("moving average needs delta > 0");
    GeneratorSpec g;
    g.name = "moving_average";
    g.m = m;
    g.L = 0.0;
    g.K = beta * beta;
    g.delta = delta;
    g.alpha = DelayMeasure::uniform();
    g.eval = [beta, alpha = g.alpha, m](const GeneratorArgs& a, std::span<double> out) {
        for (std::size_t c = 0; c < m; ++c) out[c] = beta * alpha.integrate(a.y_hat, c);
    };
    return g;
}

/// kappa * y_hat(-delta).
inline GeneratorSpec make_lagged(double kappa, double delta, std::size_t m = 1) {
    if (!(delta > 0.0)) throw DomainError("lagged generator needs delta > 0");
    GeneratorSpec g;
    g.name = "lagged";
    g.m = m;
    g.L = 0.0;
    g.K = kappa * kappa;
    g.delta = delta;
    g.alpha = DelayMeasure::dirac();
    g.eval = [kappa, m](const GeneratorArgs& a, std::span<double> out) {
        for (std::size_t c = 0; c < m; ++c) out[c] = kappa * a.y_hat.at(0, c);
    };
    return g;
}

/// int_{-delta}^0 weight(t + theta) y_hat(theta) alpha(dtheta), with weight
/// taken as 0 at negative times. `weight_bound` bounds |weight| and gives K.
inline GeneratorSpec make_weighted_linear(std::function<double(double)> weight, double weight_bound,
                                          DelayMeasure alpha, double delta) {
    if (!(delta > 0.0)) throw DomainError("weighted linear generator needs delta > 0");
    GeneratorSpec g;
    g.name = "weighted_linear";
    g.L = 0.0;
    g.K = weight_bound * weight_bound;
    g.delta = delta;
    g.alpha = alpha;
    g.eval = [weight = std::move(weight), alpha](const GeneratorArgs& a, std::span<double> out) {
        const std::size_t k = a.y_hat.intervals();
        double s = 0.0;
        for (std::size_t j = 0; j <= k; ++j) {
            const double w = alpha.weight(j, k);
            if (w == 0.0) continue;
            const double r = a.t + a.y_hat.theta(j);
            if (r < 0.0) continue;
            s += w * weight(r) * a.y_hat.at(j);
        }
        out[0] = s;
    };
    return g;
}

/// Memoryless driver f(t, x, y, z); y_hat is ignored and K = 0.
using MarkovianDriver = std::function<void(double t, const PathView& x, std::span<const double> y,
                                           std::span<const double> z, std::span<double> out)>;

inline GeneratorSpec make_markovian(std::string name, MarkovianDriver f, double L, std::size_t m = 1,
                                    double growth_M = 0.0) {
    GeneratorSpec g;
    g.name = std::move(name);
    g.m = m;
    g.L = L;
    g.K = 0.0;
    g.M = growth_M;
    g.delta = 0.0;
    g.eval = [f = std::move(f)](const GeneratorArgs& a, std::span<double> out) { f(a.t, a.x, a.y, a.z, out); };
    return g;
}

namespace drivers {

inline GeneratorSpec zero(std::size_t m = 1) {
    return make_markovian(
        "zero", [](double, const PathView&, std::span<const double>, std::span<const double>, std::span<double> out) {
            std::fill(out.begin(), out.end(), 0.0);
        },
        0.0, m);
}

/// -r y
inline GeneratorSpec discount(double r) {
    return make_markovian(
        "discount",
        [r](double, const PathView&, std::span<const double> y, std::span<const double>, std::span<double> out) {
            out[0] = -r * y[0];
        },
        std::abs(r));
}

/// a y + b z (scalar y, z)
inline GeneratorSpec linear(double a, double b) {
    return make_markovian(
        "linear",
        [a, b](double, const PathView&, std::span<const double> y, std::span<const double> z, std::span<double> out) {
            out[0] = a * y[0] + b * z[0];
        },
        std::max(std::abs(a), std::abs(b)));
}

}  // namespace drivers

struct ContractionReport {
    static constexpr double kThreshold = 1.0 / 290.0;

    double lhs = 0.0;
    double threshold = kThreshold;
    double gamma_star = 0.5;
    double lipschitz_used = 0.0;
    bool satisfied = true;
    double margin = kThreshold;
};

/// K gamma exp((gamma + 6 L^2 / gamma) delta) / ((1 - gamma) L^2) * max(1, T).
inline double contraction_lhs(double K, double L, double delta, double T, double gamma) {
    if (K == 0.0) return 0.0;
    return K * gamma * std::exp((gamma + 6.0 * L * L / gamma) * delta) / ((1.0 - gamma) * L * L) *
           std::max(1.0, T);
}

namespace detail {
inline ContractionReport make_report(double lhs, double gamma, double L) {
    ContractionReport r;
    r.lhs = lhs;
    r.gamma_star = gamma;
    r.lipschitz_used = L;
    r.satisfied = lhs < ContractionReport::kThreshold;
    r.margin = ContractionReport::kThreshold - lhs;
    return r;
}

inline constexpr int kGammaGrid = 999;  // gamma = 0.001, 0.002, ..., 0.999
inline double gamma_node(int j) { return static_cast<double>(j) / 1000.0; }
}  // namespace detail

/// Evaluates the smallness condition at the given gamma, or minimises it over
/// a gamma grid of resolution 1e-3 when gamma is omitted.
inline ContractionReport check_contraction(double K, double L, double delta, double T,
                                           std::optional<double> gamma = std::nullopt) {
    if (!(K >= 0.0)) throw DomainError("K must be nonnegative");
    if (!(L > 0.0)) throw DomainError("L must be positive");
    if (!(delta >= 0.0) || !(T > 0.0)) throw DomainError("delta must be >= 0 and T > 0");
    if (gamma) {
        if (!(*gamma > 0.0 && *gamma < 1.0)) throw DomainError("gamma must lie in (0, 1)");
        return detail::make_report(contraction_lhs(K, L, delta, T, *gamma), *gamma, L);
    }
    double best = std::numeric_limits<double>::infinity(), best_gamma = detail::gamma_node(1);
    for (int j = 1; j <= detail::kGammaGrid; ++j) {
        const double g = detail::gamma_node(j);
        const double v = contraction_lhs(K, L, delta, T, g);
        if (v < best) {
            best = v;
            best_gamma = g;
        }
    }
    return detail::make_report(best, best_gamma, L);
}

/// Same condition with L treated as a free parameter bounded below by the
/// declared constant: any L' >= L is also a valid Lipschitz constant. For each
/// gamma the best L' is max(L, sqrt(gamma / (6 delta))).
inline ContractionReport check_contraction_tuned(double K, double L, double delta, double T) {
    if (!(K >= 0.0) || !(L >= 0.0)) throw DomainError("K and L must be nonnegative");
    if (!(delta >= 0.0) || !(T > 0.0)) throw DomainError("delta must be >= 0 and T > 0");
    if (K == 0.0 || delta == 0.0) return detail::make_report(0.0, 0.5, std::max(L, 1.0));
    double best = std::numeric_limits<double>::infinity(), best_gamma = 0.0, best_L = L;
    for (int j = 1; j <= detail::kGammaGrid; ++j) {
        const double g = detail::gamma_node(j);
        const double l = std::max(L, std::sqrt(g / (6.0 * delta)));
        const double v = contraction_lhs(K, l, delta, T, g);
        if (v < best) {
            best = v;
            best_gamma = g;
            best_L = l;
        }
    }
    return detail::make_report(best, best_gamma, best_L);
}

inline ContractionReport check_contraction(const GeneratorSpec& g, double T) {
    return check_contraction_tuned(g.K, g.L, g.delta, T);
}

}  // namespace dbsde
