#include <cmath>
#include <fstream>
#include <random>

#include "support.hpp"

using namespace dbsde;
using dbsde::testing::WarningCapture;

namespace {

DiscretePath identity_path(std::size_t N = 10) {
    return DiscretePath::from_function(TimeGrid(0, 1, N), [](double s) { return s; });
}

DiscretePath random_path(const TimeGrid& g, std::mt19937_64& rng) {
    std::normal_distribution<double> n;
    return DiscretePath::from_function(g, [&](double) { return n(rng); });
}

}  // namespace

TEST(TimeGrid, RejectsDegenerateGrids) {
    EXPECT_THROW(TimeGrid(0, 1, 0), DomainError);
    EXPECT_THROW(TimeGrid(1, 1, 10), DomainError);
    EXPECT_THROW(TimeGrid(-0.5, 1, 10), DomainError);
    EXPECT_THROW(TimeGrid(0, INFINITY, 10), DomainError);
}

TEST(TimeGrid, NodesAndDelays) {
    const TimeGrid g(0, 1, 10);
    EXPECT_DOUBLE_EQ(g.dt(), 0.1);
    EXPECT_EQ(g.time(10), 1.0);
    for (std::size_t i = 0; i < 10; ++i) EXPECT_LT(g.time(i), g.time(i + 1));
    EXPECT_EQ(g.delay_steps(0.3), 3u);
    EXPECT_THROW(g.delay_steps(0.25), ConfigurationError);
    EXPECT_THROW(g.delay_steps(0.0), DomainError);
    EXPECT_THROW(g.nearest_index(1.5), DomainError);
}

TEST(StopPath, AtHorizonIsIdentity) {
    const auto phi = identity_path();
    EXPECT_EQ(stop_path(phi, 1.0), phi);
}

TEST(StopPath, AtStartFreezesInitialValue) {
    const auto phi = identity_path();
    EXPECT_EQ(stop_path(phi, 0.0), DiscretePath::constant(phi.grid(), 0.0));
}

TEST(StopPath, LinearPathStoppedAtHalf) {
    const auto stopped = stop_path(identity_path(), 0.5);
    for (std::size_t i = 0; i <= 10; ++i) EXPECT_DOUBLE_EQ(stopped.value(i, 0), std::min(0.1 * i, 0.5));
}

TEST(StopPath, OffGridSnapsWithWarning) {
    WarningCapture w;
    const auto stopped = stop_path(identity_path(), 0.52);
    EXPECT_EQ(stopped, stop_path(identity_path(), 0.5));
    ASSERT_EQ(w.messages.size(), 1u);
    EXPECT_NE(w.messages[0].find("snapped"), std::string::npos);
}

TEST(StopPath, OutsideRangeThrows) {
    EXPECT_THROW(stop_path(identity_path(), 1.2), DomainError);
    EXPECT_THROW(stop_path(identity_path(), -0.2), DomainError);
}

TEST(StopPath, Idempotent) {
    std::mt19937_64 rng(1);
    const TimeGrid g(0, 2, 40);
    for (int rep = 0; rep < 20; ++rep) {
        const auto phi = random_path(g, rng);
        const double t = g.time(rng() % 41);
        EXPECT_EQ(stop_path(stop_path(phi, t), t), stop_path(phi, t));
    }
}

TEST(DelayedSegment, ConstantPath) {
    const auto y = DiscretePath::constant(TimeGrid(0, 1, 10), 2.5);
    const auto seg = delayed_segment(y, 0.7, 0.3);
    for (double v : seg.samples()) EXPECT_EQ(v, 2.5);
}

TEST(DelayedSegment, LinearPathReadout) {
    const auto seg = delayed_segment(identity_path(), 0.5, 0.2);
    ASSERT_EQ(seg.samples().size(), 3u);
    EXPECT_NEAR(seg.samples()[0], 0.3, 1e-15);
    EXPECT_NEAR(seg.samples()[1], 0.4, 1e-15);
    EXPECT_NEAR(seg.samples()[2], 0.5, 1e-15);
}

TEST(DelayedSegment, ConstantProlongationBeforeStart) {
    const auto y = DiscretePath::from_function(TimeGrid(0, 1, 20), [](double s) { return 1.0 + s * s; });
    const auto seg = delayed_segment(y, 0.05, 0.2);
    ASSERT_EQ(seg.samples().size(), 5u);
    for (std::size_t j = 0; j < 4; ++j) EXPECT_EQ(seg.samples()[j], y.value(0, 0));
    EXPECT_EQ(seg.samples()[4], y.value(1, 0));
}

TEST(DelayedSegment, DelayValidation) {
    EXPECT_THROW(delayed_segment(identity_path(), 0.5, 0.25), ConfigurationError);
    EXPECT_THROW(delayed_segment(identity_path(), 0.5, 0.0), DomainError);
    EXPECT_THROW(delayed_segment(identity_path(), 0.5, -0.1), DomainError);
}

TEST(DelayedSegment, DependsOnlyOnWindow) {
    std::mt19937_64 rng(2);
    const TimeGrid g(0, 1, 20);
    for (int rep = 0; rep < 10; ++rep) {
        const auto y = random_path(g, rng);
        const std::size_t i = 2 + rng() % 19;
        std::vector<double> v(y.values().begin(), y.values().end());
        // disturb everything outside [t_i - 0.2, t_i] except the prolongation node 0
        for (std::size_t j = 1; j < v.size(); ++j)
            if (j + 4 < i || j > i) v[j] += 10.0;
        const DiscretePath z(g, 1, v);
        const auto a = delayed_segment(y, g.time(i), 0.2), b = delayed_segment(z, g.time(i), 0.2);
        EXPECT_TRUE(std::equal(a.samples().begin(), a.samples().end(), b.samples().begin()));
    }
}

TEST(SupNorm, Examples) {
    const TimeGrid g(0, 1, 10);
    EXPECT_EQ(sup_norm(DiscretePath::constant(g, 0.0)), 0.0);
    EXPECT_EQ(sup_norm(identity_path()), 1.0);
    const auto phi = DiscretePath::from_function(g, [](double s) { return s < 0.5 ? -3.0 : 2.0; });
    EXPECT_EQ(sup_norm(phi), 3.0);
}

TEST(SupNorm, ZeroExactlyForEqualPaths) {
    std::mt19937_64 rng(3);
    const TimeGrid g(0, 1, 16);
    const auto a = random_path(g, rng);
    EXPECT_EQ(sup_norm(a - a), 0.0);
    std::vector<double> v(a.values().begin(), a.values().end());
    v[7] += 1e-300;
    v[7] = std::nextafter(v[7], 1e9);
    EXPECT_GT(sup_norm(a - DiscretePath(g, 1, v)), 0.0);
}

TEST(Pseudometric, Examples) {
    const auto phi = identity_path();
    EXPECT_EQ(pseudometric(0.4, phi, 0.4, phi), 0.0);
    // |0.2 - 0.3| + max_r |r ^ 0.2 - r ^ 0.3| = 0.1 + 0.1
    EXPECT_NEAR(pseudometric(0.2, phi, 0.3, phi), 0.2, 1e-14);
    const TimeGrid g(0, 1, 10);
    EXPECT_EQ(pseudometric(0.5, DiscretePath::constant(g, 0.0), 0.5, DiscretePath::constant(g, 1.0)), 1.0);
}

TEST(Pseudometric, GridMismatchThrows) {
    EXPECT_THROW(pseudometric(0.5, identity_path(10), 0.5, identity_path(20)), DomainError);
}

TEST(Pseudometric, MetricProperties) {
    std::mt19937_64 rng(4);
    const TimeGrid g(0, 1, 20);
    for (int rep = 0; rep < 50; ++rep) {
        const auto a = random_path(g, rng), b = random_path(g, rng), c = random_path(g, rng);
        const double ta = g.time(rng() % 21), tb = g.time(rng() % 21), tc = g.time(rng() % 21);
        const double ab = pseudometric(ta, a, tb, b), ba = pseudometric(tb, b, ta, a);
        EXPECT_EQ(ab, ba);
        EXPECT_GE(ab, 0.0);
        EXPECT_LE(ab, pseudometric(ta, a, tc, c) + pseudometric(tc, c, tb, b) + 1e-12);
    }
}

TEST(PathCsv, RoundTrip) {
    std::mt19937_64 rng(5);
    const TimeGrid g(0.25, 2, 7);
    std::normal_distribution<double> n;
    std::vector<double> v(16);
    for (double& x : v) x = n(rng);
    const DiscretePath phi(g, 2, v);
    const auto path = dbsde::testing::temp_path("path.csv");
    write_path_csv(phi, path);
    const auto back = read_path_csv(path);
    EXPECT_EQ(back.dim(), 2u);
    EXPECT_EQ(back.values().size(), phi.values().size());
    for (std::size_t j = 0; j < v.size(); ++j) EXPECT_EQ(back.values()[j], v[j]);
    std::remove(path.c_str());
}

TEST(PathCsv, DiagnosticsNameTheLine) {
    const auto path = dbsde::testing::temp_path("bad.csv");
    {
        std::ofstream o(path);
        o << "t,x1\n0,1\n0.5,abc\n1,2\n";
    }
    try {
        read_path_csv(path);
        FAIL() << "expected a configuration error";
    } catch (const ConfigurationError& e) {
        EXPECT_NE(std::string(e.what()).find(":3:"), std::string::npos) << e.what();
    }
    {
        std::ofstream o(path);
        o << "t,x1\n0,1\n0.4,1\n1,2\n";
    }
    EXPECT_THROW(read_path_csv(path), ConfigurationError);
    std::remove(path.c_str());
}

TEST(PathView, StoppedReadsAndInterpolation) {
    const auto phi = identity_path();
    const PathView v = phi.view(5);
    EXPECT_EQ(v.at(8, 0), phi.value(5, 0));
    EXPECT_EQ(v.current(0), phi.value(5, 0));
    EXPECT_NEAR(v.at_time(0.25), 0.25, 1e-15);
    EXPECT_NEAR(v.at_time(0.9), 0.5, 1e-15);
    EXPECT_EQ(v.lagged(7), phi.value(0, 0));
}
