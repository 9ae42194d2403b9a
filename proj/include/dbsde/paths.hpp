#pragma once

// Discrete stand-ins for continuous paths on [t0, T]: uniform time grids,
// sampled paths, stopped views and delayed windows.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <fstream>
#include <span>
#include <sstream>
#include <string>
#include <vector>

#include "csv.hpp"
#include "errors.hpp"
#include "log.hpp"

namespace dbsde {

class TimeGrid {
public:
    TimeGrid() = default;

    TimeGrid(double t0, double T, std::size_t N) : t0_(t0), T_(T), N_(N) {
        if (N == 0) throw DomainError("time grid needs at least one step");
        if (!(t0 >= 0.0) || !std::isfinite(T) || !(T > t0))
            throw DomainError("time grid requires 0 <= t0 < T < inf");
    }

    double t0() const noexcept { return t0_; }
    double T() const noexcept { return T_; }
    std::size_t steps() const noexcept { return N_; }
    std::size_t points() const noexcept { return N_ + 1; }
    double dt() const noexcept { return (T_ - t0_) / static_cast<double>(N_); }

    double time(std::size_t i) const noexcept {
        return i == N_ ? T_ : t0_ + static_cast<double>(i) * dt();
    }

    bool contains(double t) const noexcept {
        const double eps = 1e-12 * std::max(1.0, std::abs(T_));
        return t >= t0_ - eps && t <= T_ + eps;
    }

    /// True when t coincides with a grid node up to rounding.
    bool on_grid(double t) const noexcept {
        const double x = (t - t0_) / dt();
        return std::abs(x - std::round(x)) <= 1e-9;
    }

    /// Index of the node nearest to t. Throws if t is outside [t0, T].
    std::size_t nearest_index(double t) const {
        if (!contains(t)) throw DomainError("time " + csv::format(t) + " outside grid range");
        const double x = std::round((t - t0_) / dt());
        return static_cast<std::size_t>(std::clamp(x, 0.0, static_cast<double>(N_)));
    }

    /// Nearest node, warning when t had to be snapped.
    std::size_t snap_index(double t) const {
        const std::size_t i = nearest_index(t);
        if (!on_grid(t)) warn("time " + csv::format(t) + " snapped to grid node " + csv::format(time(i)));
        return i;
    }

    /// Number of steps spanned by a delay. The delay must be a positive
    /// integer multiple of dt.
    std::size_t delay_steps(double delta) const {
        if (!(delta > 0.0)) throw DomainError("delay must be positive");
        const double x = delta / dt();
        const double k = std::round(x);
        if (k < 1.0 || std::abs(x - k) > 1e-9 * std::max(1.0, x))
            throw ConfigurationError("delay " + csv::format(delta) + " is not an integer multiple of dt=" +
                                     csv::format(dt()));
        return static_cast<std::size_t>(k);
    }

    friend bool operator==(const TimeGrid& a, const TimeGrid& b) noexcept {
        return a.t0_ == b.t0_ && a.T_ == b.T_ && a.N_ == b.N_;
    }

private:
    double t0_ = 0.0;
    double T_ = 1.0;
    std::size_t N_ = 1;
};

/// Non-owning view of a sampled path stopped at node `stop`: every read past
/// `stop` returns the value at `stop`. This is how non-anticipative
/// functionals see a path.
class PathView {
public:
    PathView() = default;
    PathView(const TimeGrid& grid, std::size_t dim, std::span<const double> values, std::size_t stop)
        : grid_(&grid), dim_(dim), values_(values), stop_(std::min(stop, grid.steps())) {}

    const TimeGrid& grid() const noexcept { return *grid_; }
    std::size_t dim() const noexcept { return dim_; }
    std::size_t stop() const noexcept { return stop_; }
    double time() const noexcept { return grid_->time(stop_); }

    std::span<const double> at(std::size_t i) const noexcept {
        return values_.subspan(std::min(i, stop_) * dim_, dim_);
    }
    double at(std::size_t i, std::size_t c) const noexcept { return values_[std::min(i, stop_) * dim_ + c]; }

    std::span<const double> current() const noexcept { return at(stop_); }
    double current(std::size_t c) const noexcept { return at(stop_, c); }

    /// Value at step i - lag, with constant prolongation before the grid start.
    double lagged(std::size_t lag, std::size_t c = 0) const noexcept {
        return at(stop_ >= lag ? stop_ - lag : 0, c);
    }

    /// Piecewise-linear readout at time s of the stopped path; constant
    /// outside the grid.
    double at_time(double s, std::size_t c = 0) const noexcept {
        const double x = (std::clamp(s, grid_->t0(), grid_->T()) - grid_->t0()) / grid_->dt();
        const auto lo = static_cast<std::size_t>(std::floor(x));
        if (lo >= grid_->steps()) return at(grid_->steps(), c);
        const double w = x - static_cast<double>(lo);
        const double a = at(lo, c);
        return w == 0.0 ? a : a + w * (at(lo + 1, c) - a);
    }

    /// Same data, stopped earlier (or later, up to the underlying stop).
    PathView stopped_at(std::size_t i) const noexcept {
        PathView v = *this;
        v.stop_ = std::min(i, grid_->steps());
        return v;
    }

private:
    const TimeGrid* grid_ = nullptr;
    std::size_t dim_ = 0;
    std::span<const double> values_;
    std::size_t stop_ = 0;
};

/// Owned grid samples of a d-dimensional path, one vector per node.
class DiscretePath {
public:
    DiscretePath() = default;

    DiscretePath(TimeGrid grid, std::size_t dim, std::vector<double> values)
        : grid_(grid), dim_(dim), values_(std::move(values)) {
        if (dim_ == 0) throw DomainError("path dimension must be at least 1");
        if (values_.size() != grid_.points() * dim_)
            throw DomainError("path needs " + std::to_string(grid_.points() * dim_) + " values, got " +
                              std::to_string(values_.size()));
        for (double v : values_)
            if (!std::isfinite(v)) throw DomainError("path values must be finite");
    }

    static DiscretePath constant(const TimeGrid& grid, std::span<const double> value) {
        std::vector<double> v;
        v.reserve(grid.points() * value.size());
        for (std::size_t i = 0; i < grid.points(); ++i) v.insert(v.end(), value.begin(), value.end());
        return DiscretePath(grid, value.size(), std::move(v));
    }

    static DiscretePath constant(const TimeGrid& grid, double value) {
        return constant(grid, std::span<const double>(&value, 1));
    }

    /// Scalar path from a function of time.
    template <class F>
    static DiscretePath from_function(const TimeGrid& grid, F&& f) {
        std::vector<double> v(grid.points());
        for (std::size_t i = 0; i < grid.points(); ++i) v[i] = f(grid.time(i));
        return DiscretePath(grid, 1, std::move(v));
    }

    const TimeGrid& grid() const noexcept { return grid_; }
    std::size_t dim() const noexcept { return dim_; }
    std::span<const double> values() const noexcept { return values_; }

    std::span<const double> value(std::size_t i) const noexcept {
        return std::span<const double>(values_).subspan(i * dim_, dim_);
    }
    double value(std::size_t i, std::size_t c) const noexcept { return values_[i * dim_ + c]; }

    PathView view() const noexcept { return PathView(grid_, dim_, values_, grid_.steps()); }
    PathView view(std::size_t stop) const noexcept { return PathView(grid_, dim_, values_, stop); }

    DiscretePath operator-(const DiscretePath& o) const {
        if (!(grid_ == o.grid_) || dim_ != o.dim_) throw DomainError("path shape mismatch");
        std::vector<double> v(values_.size());
        for (std::size_t j = 0; j < v.size(); ++j) v[j] = values_[j] - o.values_[j];
        return DiscretePath(grid_, dim_, std::move(v));
    }

    DiscretePath operator+(const DiscretePath& o) const {
        if (!(grid_ == o.grid_) || dim_ != o.dim_) throw DomainError("path shape mismatch");
        std::vector<double> v(values_.size());
        for (std::size_t j = 0; j < v.size(); ++j) v[j] = values_[j] + o.values_[j];
        return DiscretePath(grid_, dim_, std::move(v));
    }

    DiscretePath scaled(double a) const {
        std::vector<double> v(values_);
        for (double& x : v) x *= a;
        return DiscretePath(grid_, dim_, std::move(v));
    }

    friend bool operator==(const DiscretePath& a, const DiscretePath& b) {
        return a.grid_ == b.grid_ && a.dim_ == b.dim_ && a.values_ == b.values_;
    }

private:
    TimeGrid grid_;
    std::size_t dim_ = 1;
    std::vector<double> values_;
};

/// Non-owning window (y(t+theta)) for theta on the uniform sub-grid
/// -delta = theta_0 < ... < theta_k = 0.
struct SegmentView {
    double delta = 0.0;
    std::size_t dim = 1;
    std::span<const double> samples;  // (k+1) * dim, node-major

    std::size_t intervals() const noexcept { return samples.size() / dim - 1; }
    double spacing() const noexcept { return delta / static_cast<double>(intervals()); }
    double theta(std::size_t j) const noexcept { return -delta + static_cast<double>(j) * spacing(); }
    double at(std::size_t j, std::size_t c = 0) const noexcept { return samples[j * dim + c]; }
};

class PathSegment {
public:
    PathSegment() = default;
    PathSegment(double delta, std::size_t dim, std::vector<double> samples)
        : delta_(delta), dim_(dim), samples_(std::move(samples)) {
        if (!(delta > 0.0)) throw DomainError("segment delay must be positive");
        if (dim == 0 || samples_.size() < 2 * dim || samples_.size() % dim != 0)
            throw DomainError("segment needs at least two nodes");
        for (double v : samples_)
            if (!std::isfinite(v)) throw DomainError("segment samples must be finite");
    }

    /// Scalar window sampled from f(theta) on k sub-intervals.
    template <class F>
    static PathSegment from_function(double delta, std::size_t k, F&& f) {
        std::vector<double> s(k + 1);
        for (std::size_t j = 0; j <= k; ++j) s[j] = f(-delta + delta * static_cast<double>(j) / static_cast<double>(k));
        return PathSegment(delta, 1, std::move(s));
    }

    double delta() const noexcept { return delta_; }
    std::size_t dim() const noexcept { return dim_; }
    std::span<const double> samples() const noexcept { return samples_; }
    SegmentView view() const noexcept { return SegmentView{delta_, dim_, samples_}; }

private:
    double delta_ = 0.0;
    std::size_t dim_ = 1;
    std::vector<double> samples_;
};

/// phi(. ^ t): equal to phi up to t, frozen afterwards. Off-grid t is
/// snapped to the nearest node with a warning.
inline DiscretePath stop_path(const DiscretePath& phi, double t) {
    const std::size_t i = phi.grid().snap_index(t);
    std::vector<double> v(phi.values().begin(), phi.values().end());
    const std::size_t d = phi.dim();
    for (std::size_t j = i + 1; j < phi.grid().points(); ++j)
        std::copy_n(v.begin() + static_cast<std::ptrdiff_t>(i * d), d, v.begin() + static_cast<std::ptrdiff_t>(j * d));
    return DiscretePath(phi.grid(), d, std::move(v));
}

/// (y(t+theta)) for theta in [-delta, 0], prolonged by y(t0) before the grid start.
inline PathSegment delayed_segment(const DiscretePath& y, double t, double delta) {
    if (!(delta > 0.0)) throw DomainError("delay must be positive");
    const std::size_t k = y.grid().delay_steps(delta);
    const std::size_t i = y.grid().snap_index(t);
    const std::size_t d = y.dim();
    std::vector<double> s((k + 1) * d);
    for (std::size_t j = 0; j <= k; ++j) {
        const std::size_t src = (i + j >= k) ? i + j - k : 0;
        for (std::size_t c = 0; c < d; ++c) s[j * d + c] = y.value(src, c);
    }
    return PathSegment(delta, d, std::move(s));
}

/// max over grid nodes of the Euclidean norm.
inline double sup_norm(const DiscretePath& phi) {
    double best = 0.0;
    for (std::size_t i = 0; i < phi.grid().points(); ++i) {
        double s = 0.0;
        for (double x : phi.value(i)) s += x * x;
        best = std::max(best, std::sqrt(s));
    }
    return best;
}

/// |t - t'| + max_r |phi(r ^ t) - phi'(r ^ t')| over the shared grid nodes.
inline double pseudometric(double t, const DiscretePath& phi, double t2, const DiscretePath& phi2) {
    if (!(phi.grid() == phi2.grid()) || phi.dim() != phi2.dim())
        throw DomainError("pseudometric needs paths on the same grid");
    const TimeGrid& g = phi.grid();
    if (!g.contains(t) || !g.contains(t2)) throw DomainError("time outside grid range");
    const PathView a = phi.view(), b = phi2.view();
    double best = 0.0;
    for (std::size_t i = 0; i < g.points(); ++i) {
        const double r = g.time(i);
        double s = 0.0;
        for (std::size_t c = 0; c < phi.dim(); ++c) {
            const double diff = a.at_time(std::min(r, t), c) - b.at_time(std::min(r, t2), c);
            s += diff * diff;
        }
        best = std::max(best, std::sqrt(s));
    }
    return std::abs(t - t2) + best;
}

inline void write_path_csv(const DiscretePath& phi, const std::string& path) {
    csv::Writer w(path);
    std::vector<std::string> names{"t"};
    for (std::size_t c = 0; c < phi.dim(); ++c) names.push_back("x" + std::to_string(c + 1));
    w.header(names);
    std::vector<double> row(phi.dim() + 1);
    for (std::size_t i = 0; i < phi.grid().points(); ++i) {
        row[0] = phi.grid().time(i);
        std::copy(phi.value(i).begin(), phi.value(i).end(), row.begin() + 1);
        w.row(row);
    }
}

/// Reads a `t,x1,...,xd` file. Times must form a uniform grid.
inline DiscretePath read_path_csv(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigurationError("cannot open path file '" + path + "'");
    std::string line;
    if (!std::getline(in, line)) throw ConfigurationError(path + ": empty file");
    const auto head = csv::split(line);
    if (head.size() < 2 || head[0] != "t") throw ConfigurationError(path + ":1: header must be t,x1,...,xd");
    const std::size_t d = head.size() - 1;
    std::vector<double> times, values;
    std::size_t lineno = 1;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty() || line == "\r") continue;
        const auto cells = csv::split(line);
        if (cells.size() != d + 1)
            throw ConfigurationError(path + ":" + std::to_string(lineno) + ": expected " + std::to_string(d + 1) + " columns");
        try {
            times.push_back(csv::parse_double(cells[0]));
            for (std::size_t c = 1; c <= d; ++c) values.push_back(csv::parse_double(cells[c]));
        } catch (const ConfigurationError& e) {
            throw ConfigurationError(path + ":" + std::to_string(lineno) + ": " + e.what());
        }
    }
    if (times.size() < 2) throw ConfigurationError(path + ": need at least two rows");
    const TimeGrid grid(times.front(), times.back(), times.size() - 1);
    for (std::size_t i = 0; i < times.size(); ++i)
        if (std::abs(times[i] - grid.time(i)) > 1e-9 * std::max(1.0, grid.T()))
            throw ConfigurationError(path + ":" + std::to_string(i + 2) + ": times are not a uniform grid");
    return DiscretePath(grid, d, std::move(values));
}

}  // namespace dbsde
