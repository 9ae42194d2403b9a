#include <cmath>
#include <random>

#include "support.hpp"

using namespace dbsde;
using dbsde::testing::gaussian;

namespace {

double mean_at(const ForwardEnsemble& fe, std::size_t i, int power = 1) {
    double s = 0.0;
    for (std::size_t k = 0; k < fe.paths(); ++k) s += std::pow(fe.value(k, i), power);
    return s / static_cast<double>(fe.paths());
}

double sd_at(const ForwardEnsemble& fe, std::size_t i, int power = 1) {
    const double mu = mean_at(fe, i, power);
    double s = 0.0;
    for (std::size_t k = 0; k < fe.paths(); ++k) s += std::pow(std::pow(fe.value(k, i), power) - mu, 2);
    return std::sqrt(s / static_cast<double>(fe.paths() - 1));
}

}  // namespace

TEST(ForwardSde, FrozenWithoutCoefficients) {
    const TimeGrid g(0, 1, 20);
    const auto phi = DiscretePath::from_function(g, [](double s) { return std::sin(3 * s); });
    const auto fe = simulate_forward(0.3, phi, models::deterministic(0.0), gaussian(g, 16, 1));
    for (std::size_t k = 0; k < fe.paths(); ++k)
        for (std::size_t i = 0; i <= 20; ++i) EXPECT_EQ(fe.value(k, i), phi.value(std::min<std::size_t>(i, 6), 0));
}

TEST(ForwardSde, UnitDriftReachesOne) {
    const TimeGrid g(0, 1, 100);
    const auto fe = simulate_forward(0.0, DiscretePath::constant(g, 0.0), models::deterministic(1.0), gaussian(g, 4, 1));
    for (std::size_t k = 0; k < 4; ++k) EXPECT_NEAR(fe.value(k, 100), 1.0, 1e-12);
}

TEST(ForwardSde, InitialSegmentIsExact) {
    const TimeGrid g(0, 1, 40);
    const auto phi = DiscretePath::from_function(g, [](double s) { return 1.0 + s * s; });
    const auto fe = simulate_forward(0.5, phi, models::gbm(0.1, 0.3), gaussian(g, 64, 3));
    for (std::size_t k = 0; k < fe.paths(); ++k)
        for (std::size_t i = 0; i <= 20; ++i) EXPECT_EQ(fe.value(k, i), phi.value(i, 0));
}

TEST(ForwardSde, GbmMean) {
    const TimeGrid g(0, 1, 50);
    const auto fe = simulate_forward(0.0, DiscretePath::constant(g, 100.0), models::gbm(0.05, 0.2),
                                     gaussian(g, 100000, 11));
    const double se = sd_at(fe, 50) / std::sqrt(1e5);
    EXPECT_NEAR(mean_at(fe, 50), 100.0 * std::exp(0.05), 3 * se);
}

TEST(ForwardSde, WeakErrorDecreasesWithSteps) {
    // mu = 1 makes the Euler bias (1 + mu dt)^N - e^mu dominate the sampling error
    double prev_m1 = INFINITY, prev_m2 = INFINITY;
    for (std::size_t N : {25, 50, 100}) {
        const TimeGrid g(0, 1, N);
        const auto fe = simulate_forward(0.0, DiscretePath::constant(g, 1.0), models::gbm(1.0, 0.2),
                                         gaussian(g, 100000, 5));
        const double e1 = std::abs(mean_at(fe, N) - std::exp(1.0));
        const double e2 = std::abs(mean_at(fe, N, 2) - std::exp(2.0 + 0.04));
        const double se1 = sd_at(fe, N) / std::sqrt(1e5), se2 = sd_at(fe, N, 2) / std::sqrt(1e5);
        EXPECT_LT(e1, prev_m1 + 3 * se1) << "N = " << N;
        EXPECT_LT(e2, prev_m2 + 3 * se2) << "N = " << N;
        prev_m1 = e1;
        prev_m2 = e2;
    }
    EXPECT_LT(prev_m1, 0.02);
}

TEST(ForwardSde, LipschitzProbe) {
    const TimeGrid g(0, 1, 100);
    const auto bm = gaussian(g, 2000, 2);
    const auto zero = DiscretePath::constant(g, 0.0), one = DiscretePath::constant(g, 1.0);
    EXPECT_DOUBLE_EQ(lipschitz_probe(models::deterministic(0.0), 0.0, zero, one, bm), 1.0);

    // X' = X: the gap grows like (1 + dt)^N, squared
    const double r = lipschitz_probe(models::linear(1.0), 0.0, zero, one, bm);
    EXPECT_NEAR(r, std::exp(2.0), 0.01 * std::exp(2.0));

    std::vector<double> ratios;
    for (double eps : {1e-3, 1.0, 1e3}) {
        const auto a = DiscretePath::constant(g, 100.0), b = DiscretePath::constant(g, 100.0 + eps);
        ratios.push_back(lipschitz_probe(models::gbm(0.05, 0.2), 0.0, a, b, bm));
    }
    for (double v : ratios) EXPECT_NEAR(v, ratios[0], 1e-6 * ratios[0]);
    EXPECT_LT(ratios[0], 10.0);
}

TEST(ForwardSde, CoefficientsAreNonAnticipative) {
    const TimeGrid g(0, 1, 20);
    std::mt19937_64 rng(7);
    std::normal_distribution<double> n;
    const std::vector<ForwardModel> bundled{models::brownian(0.5), models::gbm(0.05, 0.2),
                                            models::deterministic(0.3), models::linear(-1.0, 0.4),
                                            models::lagged_drift(0.5, -0.3, 0.2, 0.1), models::running_average(2.0, 0.3)};
    for (const auto& m : bundled) {
        for (int rep = 0; rep < 10; ++rep) {
            std::vector<double> v(21);
            for (double& x : v) x = 1.0 + 0.3 * n(rng);
            const std::size_t i = rng() % 21;
            std::vector<double> w = v;
            for (std::size_t j = i + 1; j < w.size(); ++j) w[j] += 5.0;
            const PathView a(g, 1, v, i), b(g, 1, w, i);
            double da = 0, db = 0, sa = 0, sb = 0;
            m.drift(g.time(i), a, std::span<double>(&da, 1));
            m.drift(g.time(i), b, std::span<double>(&db, 1));
            m.diffusion(g.time(i), a, std::span<double>(&sa, 1));
            m.diffusion(g.time(i), b, std::span<double>(&sb, 1));
            EXPECT_EQ(da, db) << m.name;
            EXPECT_EQ(sa, sb) << m.name;
        }
    }
}

TEST(ForwardSde, DeterministicAcrossThreadCounts) {
    const TimeGrid g(0, 1, 30);
    const auto phi = DiscretePath::constant(g, 1.0);
    std::vector<double> ref;
    for (int threads : {1, 4, 8}) {
        dbsde::testing::ThreadCap cap(threads);
        const auto fe = simulate_forward(0.0, phi, models::running_average(1.0, 0.3), gaussian(g, 3000, 9));
        std::vector<double> v;
        for (std::size_t k = 0; k < fe.paths(); ++k) v.push_back(fe.value(k, 30));
        if (ref.empty()) ref = v;
        EXPECT_EQ(v, ref) << threads << " threads";
    }
}

TEST(ForwardSde, SameSeedSamePaths) {
    const TimeGrid g(0, 1, 10);
    const auto a = BrownianEnsemble::gaussian(g, 100, 1, 42), b = BrownianEnsemble::gaussian(g, 100, 1, 42);
    const auto c = BrownianEnsemble::gaussian(g, 100, 1, 43);
    bool differs = false;
    for (std::size_t k = 0; k < 100; ++k)
        for (std::size_t i = 0; i < 10; ++i) {
            EXPECT_EQ(a.increment(k, i, 0), b.increment(k, i, 0));
            differs |= a.increment(k, i, 0) != c.increment(k, i, 0);
        }
    EXPECT_TRUE(differs);
}

TEST(ForwardSde, NonFiniteValuesAreReported) {
    const TimeGrid g(0, 1, 10);
    ForwardModel bad = models::deterministic(0.0);
    bad.drift = [](double t, const PathView&, std::span<double> out) { out[0] = t > 0.45 ? NAN : 0.0; };
    try {
        simulate_forward(0.0, DiscretePath::constant(g, 0.0), bad, gaussian(g, 8, 1));
        FAIL() << "expected a simulation error";
    } catch (const SimulationError& e) {
        EXPECT_EQ(e.step(), 5u);
    }
}

TEST(ForwardSde, TreeIncrementsAreSignedRootDt) {
    const TimeGrid g(0, 1, 4);
    const auto bm = BrownianEnsemble::bernoulli_tree(g);
    EXPECT_EQ(bm.paths(), 16u);
    for (std::size_t k = 0; k < 16; ++k)
        for (std::size_t i = 0; i < 4; ++i) EXPECT_DOUBLE_EQ(std::abs(bm.increment(k, i, 0)), 0.5);
}
