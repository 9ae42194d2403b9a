#include <cmath>

#include "support.hpp"

using namespace dbsde;
using dbsde::testing::gaussian;
using dbsde::testing::QuietWarnings;

TEST(ValueSurface, Interpolation) {
    ValueSurface s;
    s.times = {0.0, 0.5, 1.0};
    s.values = {1.0, 2.0, 4.0};
    s.std_errors = {0, 0, 0};
    double v = 0.0;
    s.interpolate(0.25, std::span<double>(&v, 1));
    EXPECT_DOUBLE_EQ(v, 1.5);
    s.interpolate(0.75, std::span<double>(&v, 1));
    EXPECT_DOUBLE_EQ(v, 3.0);
    s.interpolate(-1.0, std::span<double>(&v, 1));
    EXPECT_EQ(v, 1.0);
    s.interpolate(2.0, std::span<double>(&v, 1));
    EXPECT_EQ(v, 4.0);
    EXPECT_THROW(ValueSurface{}.interpolate(0.0, std::span<double>(&v, 1)), StateError);
}

TEST(FeynmanKac, MartingaleSurfaceFollowsInitialPath) {
    const TimeGrid g(0, 1, 20);
    const auto phi = DiscretePath::from_function(g, [](double s) { return std::sin(4 * s); });
    const auto s = u_surface(phi, models::brownian(), drivers::zero(), payoffs::linear(), {}, gaussian(g, 4000, 1), 5);
    ASSERT_EQ(s.size(), 5u);
    for (std::size_t j = 0; j < s.size(); ++j)
        EXPECT_NEAR(s.value(j), phi.value(s.steps[j], 0), 4 * s.std_error(j) + 1e-12) << s.times[j];
}

TEST(FeynmanKac, TerminalTimeIsExact) {
    const TimeGrid g(0, 1, 10);
    const auto phi = DiscretePath::from_function(g, [](double s) { return 90.0 + 20.0 * s; });
    QuietWarnings quiet;
    const auto s = u_surface(phi, models::gbm(0.05, 0.2), make_moving_average(0.3, 0.2), payoffs::asian_call(95), {},
                             gaussian(g, 200, 2), 2);
    EXPECT_EQ(s.times.back(), 1.0);
    EXPECT_EQ(s.value(s.size() - 1), payoffs::asian_call(95)(phi.view()));
    EXPECT_EQ(s.std_error(s.size() - 1), 0.0);
}

TEST(FeynmanKac, DiscountSurface) {
    const TimeGrid g(0, 1, 50);
    const auto s = u_surface(DiscretePath::constant(g, 0.0), models::brownian(), drivers::discount(0.05),
                             payoffs::constant(1.0), {}, gaussian(g, 64, 1), 10);
    for (std::size_t j = 0; j < s.size(); ++j) EXPECT_NEAR(s.value(j), std::exp(-0.05 * (1 - s.times[j])), 1e-4);
}

TEST(FeynmanKac, ConsistencyOnFreshPaths) {
    const TimeGrid g(0, 1, 20);
    const auto phi = DiscretePath::constant(g, 100.0);
    // constant value: every surrogate is exact
    const auto flat = check_fk_consistency(0.0, phi, models::gbm(0.05, 0.2), drivers::zero(), payoffs::constant(2.0),
                                           {}, gaussian(g, 500, 1), gaussian(g, 500, 2));
    EXPECT_LT(flat.max_abs_error, 1e-12);

    SolverConfig cfg;
    cfg.basis = RegressionBasis::polynomial(3);
    const auto rep = check_fk_consistency(0.0, phi, models::gbm(0.0, 0.2), drivers::discount(0.02), payoffs::call(100),
                                          cfg, gaussian(g, 20000, 3), gaussian(g, 20000, 4));
    EXPECT_GT(rep.in_sample_residual, 0.0);
    EXPECT_LE(rep.max_abs_error, 2.0 * rep.in_sample_residual);
}

TEST(FeynmanKac, ConsistencyIsExactOnTheTree) {
    const TimeGrid g(0, 1, 8);
    SolverConfig cfg;
    cfg.basis = RegressionBasis::indicator();
    cfg.picard_tol = 1e-13;
    QuietWarnings quiet;
    const auto rep = check_fk_consistency(0.0, DiscretePath::constant(g, 0.0), models::brownian(),
                                          make_lagged(0.1, 2 * g.dt()), payoffs::call(0.0), cfg,
                                          dbsde::testing::tree(g, 0), dbsde::testing::tree(g, 7));
    EXPECT_LT(rep.max_abs_error, 1e-10);
    for (double e : rep.max_error) EXPECT_LT(e, 1e-10);
}

TEST(FeynmanKac, ContinuityInTheInitialPath) {
    const TimeGrid g(0, 1, 20);
    const auto phi = DiscretePath::constant(g, 0.0);
    const auto psi = DiscretePath::from_function(g, [](double s) { return 1.0 + s; });
    const std::vector<double> eps{0.0, 1e-3, 1e-2, 1e-1};
    const auto rows = check_u_continuity(0.5, phi, psi, eps, models::brownian(), drivers::zero(), payoffs::linear(), {},
                                         gaussian(g, 500, 1));
    EXPECT_EQ(rows[0].delta_u, 0.0);
    for (std::size_t j = 1; j < rows.size(); ++j) EXPECT_NEAR(rows[j].delta_u, eps[j] * 1.5, 1e-9);

    QuietWarnings quiet;
    const auto ma = check_u_continuity(0.5, DiscretePath::constant(g, 100.0), psi, eps, models::gbm(0.05, 0.2),
                                       make_moving_average(0.2, 0.1), payoffs::call(100), {}, gaussian(g, 2000, 2), 2);
    for (std::size_t j = 1; j < ma.size(); ++j) EXPECT_LT(ma[j].delta_u / eps[j], 20.0);
    EXPECT_LT(ma[1].delta_u, ma[3].delta_u);
}

TEST(FeynmanKac, IgnoresThePathAfterTheInitialTime) {
    const TimeGrid g(0, 1, 20);
    const auto phi = DiscretePath::from_function(g, [](double s) { return 1.0 + s; });
    const auto phi2 = DiscretePath::from_function(g, [](double s) { return s <= 0.5 ? 1.0 + s : -7.0; });
    QuietWarnings quiet;
    const auto a = u_value(0.5, phi, models::running_average(1.0, 0.3), make_moving_average(0.2, 0.1),
                           payoffs::asian_call(1.0), {}, gaussian(g, 500, 3), 2);
    const auto b = u_value(0.5, phi2, models::running_average(1.0, 0.3), make_moving_average(0.2, 0.1),
                           payoffs::asian_call(1.0), {}, gaussian(g, 500, 3), 2);
    EXPECT_EQ(a, b);
}

TEST(FeynmanKac, MarkovianCaseDependsOnCurrentValueOnly) {
    const TimeGrid g(0, 1, 20);
    const auto phi = DiscretePath::from_function(g, [](double s) { return 100.0 + 10.0 * s; });
    const auto phi2 = DiscretePath::from_function(g, [](double s) { return 105.0 + 10.0 * std::cos(20 * s); });
    ASSERT_EQ(phi.value(10, 0), 105.0);
    ASSERT_NE(phi2.value(10, 0), 105.0);
    std::vector<double> v2(phi2.values().begin(), phi2.values().end());
    v2[10] = 105.0;
    const DiscretePath psi(g, 1, v2);
    const auto a = u_value(0.5, phi, models::gbm(0.05, 0.2), drivers::discount(0.05), payoffs::call(100), {},
                           gaussian(g, 1000, 4));
    const auto b = u_value(0.5, psi, models::gbm(0.05, 0.2), drivers::discount(0.05), payoffs::call(100), {},
                           gaussian(g, 1000, 4));
    EXPECT_EQ(a, b);
}

TEST(FeynmanKac, SurfaceIsMonotoneInTheClaim) {
    const TimeGrid g(0, 1, 20);
    QuietWarnings quiet;
    const auto phi = DiscretePath::constant(g, 100.0);
    const auto bm = gaussian(g, 2000, 5);
    const auto lo = u_surface(phi, models::gbm(0.05, 0.2), make_moving_average(0.3, 0.1), payoffs::call(105), {}, bm, 4);
    const auto hi = u_surface(phi, models::gbm(0.05, 0.2), make_moving_average(0.3, 0.1), payoffs::call(95), {}, bm, 4);
    for (std::size_t j = 0; j < lo.size(); ++j) EXPECT_LE(lo.value(j), hi.value(j)) << lo.times[j];
}

TEST(FeynmanKac, MemoryNeedsEarlierValues) {
    const TimeGrid g(0, 1, 10);
    QuietWarnings quiet;
    // sweeping from t0 supplies the earlier values itself
    const auto s = u_surface(DiscretePath::constant(g, 1.0), models::brownian(), make_moving_average(0.2, 0.2),
                             payoffs::linear(), {}, gaussian(g, 100, 1), 3, 0.6);
    EXPECT_DOUBLE_EQ(s.times.back(), 0.6);
    EXPECT_EQ(s.size(), 3u);
}
