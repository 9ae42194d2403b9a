#include <cmath>

#include "support.hpp"

using namespace dbsde;
using dbsde::testing::gaussian;

TEST(StepBasis, PolynomialSizes) {
    const TimeGrid g(0, 1, 10);
    const auto fe = simulate_forward(0.0, DiscretePath::constant(g, 1.0), models::gbm(0.05, 0.2), gaussian(g, 500, 1));
    EXPECT_EQ(StepBasis::build(RegressionBasis::polynomial(2), fe, 5).size(), 3u);
    EXPECT_EQ(StepBasis::build(RegressionBasis::polynomial(4), fe, 5).size(), 5u);
    // two state variables, total degree 2
    EXPECT_EQ(StepBasis::build(RegressionBasis::running_average(2), fe, 5).size(), 6u);
    EXPECT_EQ(StepBasis::build(RegressionBasis::polynomial(3), fe, 0).size(), 1u);
}

TEST(StepBasis, DegenerateVariablesDropOut) {
    const TimeGrid g(0, 1, 10);
    const auto fe = simulate_forward(0.0, DiscretePath::constant(g, 1.0), models::deterministic(0.5), gaussian(g, 50, 1));
    EXPECT_EQ(StepBasis::build(RegressionBasis::polynomial(3), fe, 5).size(), 1u);
}

TEST(StepBasis, FeaturesIgnoreTheFuture) {
    const TimeGrid g(0, 1, 10);
    const auto fe = simulate_forward(0.0, DiscretePath::constant(g, 1.0), models::gbm(0.05, 0.2), gaussian(g, 200, 2));
    for (const auto& spec : {RegressionBasis::polynomial(3), RegressionBasis::running_average(2),
                             RegressionBasis::lagged(2, 2), RegressionBasis::indicator()}) {
        const auto b = StepBasis::build(spec, fe, 4);
        const DiscretePath path = fe.path(3);
        std::vector<double> v(path.values().begin(), path.values().end()), w = v;
        for (std::size_t j = 5; j < w.size(); ++j) w[j] *= 3.0;
        std::vector<double> fa(b.size()), fb(b.size());
        b.features(PathView(g, 1, v, 4), fa);
        b.features(PathView(g, 1, w, 4), fb);
        EXPECT_EQ(fa, fb) << spec.name();
    }
}

TEST(Design, ReproducesLinearTargetsExactly) {
    const TimeGrid g(0, 1, 10);
    const auto fe = simulate_forward(0.0, DiscretePath::constant(g, 0.0), models::brownian(), gaussian(g, 1000, 3));
    const Design d(StepBasis::build(RegressionBasis::polynomial(2), fe, 6), fe, true);
    const auto coef = d.fit(1, [&](std::size_t k, std::span<double> out) { out[0] = 2.0 - 3.0 * fe.value(k, 6); });
    for (std::size_t k = 0; k < fe.paths(); k += 37) {
        double y = 0.0;
        d.predict(k, coef, std::span<double>(&y, 1));
        EXPECT_NEAR(y, 2.0 - 3.0 * fe.value(k, 6), 1e-10);
    }
}

TEST(Design, CollinearFeaturesWithoutRidgeThrow) {
    // one tree step: X takes two values, so 1, X, X^2 are collinear
    const TimeGrid g(0, 1, 4);
    const auto fe = simulate_forward(0.0, DiscretePath::constant(g, 0.0), models::brownian(), dbsde::testing::tree(g));
    try {
        Design d(StepBasis::build(RegressionBasis::polynomial(2), fe, 1), fe, false);
        FAIL() << "expected an ill-conditioned regression";
    } catch (const IllConditionedRegressionError& e) {
        EXPECT_EQ(e.step(), 1u);
    }
    const Design ridged(StepBasis::build(RegressionBasis::polynomial(2), fe, 1), fe, true);
    EXPECT_TRUE(ridged.ridged());
    EXPECT_LE(ridged.condition(), Design::kMaxCondition);
}

TEST(Design, IndicatorGroupsAreConditionalMeans) {
    const TimeGrid g(0, 1, 3);
    const auto fe = simulate_forward(0.0, DiscretePath::constant(g, 0.0), models::brownian(), dbsde::testing::tree(g, 5));
    const Design d(StepBasis::build(RegressionBasis::indicator(), fe, 2), fe, false);
    EXPECT_EQ(d.size(), 4u);
    const auto coef = d.fit(1, [&](std::size_t k, std::span<double> out) { out[0] = fe.value(k, 3); });
    for (std::size_t k = 0; k < fe.paths(); ++k) {
        double y = 0.0;
        d.predict(k, coef, std::span<double>(&y, 1));
        EXPECT_NEAR(y, fe.value(k, 2), 1e-15);
    }
}
