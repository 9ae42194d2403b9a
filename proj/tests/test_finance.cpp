#include <cmath>

#include "support.hpp"

using namespace dbsde;
using dbsde::testing::gaussian;
using dbsde::testing::QuietWarnings;

namespace {

LargeInvestorClaim stock_payoff(const Payoff& h, const LargeInvestorMarket&, double mu, double sigma) {
    return stock_claim(h, 100.0, mu, sigma);
}

}  // namespace

TEST(LargeInvestor, ForwardPriceOfTheStock) {
    const TimeGrid g(0, 1, 50);
    const auto mk = LargeInvestorMarket::constant(0.0, 0.0, 0.2, 100.0);
    const auto res = price_large_investor(mk, stock_payoff(payoffs::linear(), mk, 0.0, 0.2), {}, gaussian(g, 5000, 1));
    EXPECT_NEAR(res.price, 100.0, 3 * res.std_error + 1e-6);
}

TEST(LargeInvestor, ConstantClaimNeedsNoStock) {
    const TimeGrid g(0, 1, 20);
    const auto mk = LargeInvestorMarket::constant(0.0, 0.05, 0.2, 100.0);
    LargeInvestorClaim c;
    c.name = "cash";
    c.eval = [](const PathView&, std::span<const double>, std::span<const double>) { return 7.0; };
    const auto res = price_large_investor(mk, c, {}, gaussian(g, 500, 2));
    EXPECT_NEAR(res.price, 7.0, 1e-12);
    for (double pi : res.hedge.mean_pi) EXPECT_NEAR(pi, 0.0, 1e-10);
    EXPECT_NEAR(res.hedge.replication_mean_abs, 0.0, 1e-10);
}

TEST(LargeInvestor, ConstantMarketIsBlackScholes) {
    const TimeGrid g(0, 1, 50);
    const double r = 0.03, mu = 0.08, sigma = 0.2;
    const auto mk = LargeInvestorMarket::constant(r, mu, sigma, 100.0);
    SolverConfig cfg;
    cfg.basis = RegressionBasis::polynomial(3);
    const auto res = price_large_investor(mk, stock_claim(payoffs::call(100), 100.0, mu, sigma), cfg,
                                          gaussian(g, 20000, 3));
    const double bs = oracles::black_scholes_call(100, 100, r, sigma, 1);
    EXPECT_NEAR(res.price, bs, std::max(3 * res.std_error, 0.01 * bs));
    EXPECT_EQ(res.trace.iterations, 2u);
    EXPECT_LT(res.hedge.replication_relative, 0.02);
    // delta of an at-the-money call sits between 0 and the stock price
    EXPECT_GT(res.hedge.mean_pi[0], 0.0);
    EXPECT_LT(res.hedge.mean_pi[0], 100.0);
}

TEST(LargeInvestor, BorrowingSpreadRaisesThePrice) {
    const TimeGrid g(0, 1, 50);
    const auto bm = gaussian(g, 10000, 4);
    SolverConfig cfg;
    cfg.basis = RegressionBasis::polynomial(3);
    const auto claim = stock_claim(payoffs::call(100), 100.0, 0.08, 0.2);
    const auto flat = price_large_investor(LargeInvestorMarket::constant(0.03, 0.08, 0.2, 100.0), claim, cfg, bm);
    const auto spread = price_large_investor(LargeInvestorMarket::two_rates(0.03, 0.08, 0.08, 0.2, 100.0), claim, cfg, bm);
    EXPECT_GT(spread.price, flat.price);
}

TEST(LargeInvestor, VolatilityFloor) {
    const TimeGrid g(0, 1, 10);
    auto mk = LargeInvestorMarket::constant(0.0, 0.0, 0.2, 100.0);
    mk.sigma = [](double, double, const SegmentView&) { return 1e-12; };
    EXPECT_THROW(price_large_investor(mk, stock_claim(payoffs::call(100), 100.0, 0.0, 0.2), {}, gaussian(g, 50, 1)),
                 SingularVolatilityError);
    EXPECT_THROW(LargeInvestorMarket::constant(0.0, 0.0, 0.0, 100.0), DomainError);
}

TEST(LargeInvestor, ClaimsOnTheSolutionIterateTheTerminalValue) {
    const TimeGrid g(0, 1, 20);
    const auto mk = LargeInvestorMarket::constant(0.0, 0.0, 0.2, 100.0);
    LargeInvestorClaim c = stock_claim(payoffs::call(100), 100.0, 0.0, 0.2);
    c.uses_solution = true;
    const auto inner = c.eval;
    c.eval = [inner](const PathView& w, std::span<const double> y, std::span<const double> z) {
        return inner(w, y, z) + (y.empty() ? 0.0 : 0.0 * y[0]);
    };
    const auto res = price_large_investor(mk, c, {}, gaussian(g, 2000, 5));
    EXPECT_EQ(res.terminal_iterations, 2u);
}

TEST(RiskMeasure, NoMemoryIsTheExpectation) {
    const TimeGrid g(0, 1, 20);
    const auto s0 = DiscretePath::constant(g, 100.0);
    const auto bm = gaussian(g, 20000, 6);
    const auto plain = payoff_mean(payoffs::call(100), simulate_forward(0.0, s0, models::gbm(0.05, 0.2), bm));
    const auto r = risk_measure({0.0, 0.1, payoffs::call(100), 1.0}, models::gbm(0.05, 0.2), s0, {}, bm);
    EXPECT_NEAR(r.rho0, plain.first, 2 * plain.second);
    const auto neg = risk_measure({0.0, 0.1, payoffs::call(100), -1.0}, models::gbm(0.05, 0.2), s0, {}, bm);
    EXPECT_NEAR(neg.rho0, -plain.first, 2 * plain.second);
    EXPECT_THROW(risk_measure({0.0, 0.1, payoffs::call(100), 0.5}, models::gbm(0.05, 0.2), s0, {}, bm), DomainError);
}

TEST(RiskMeasure, CashAdditiveWithoutMemory) {
    const TimeGrid g(0, 1, 20);
    const auto s0 = DiscretePath::constant(g, 100.0);
    const auto bm = gaussian(g, 2000, 7);
    Payoff shifted = payoffs::call(100);
    const auto base = shifted.eval;
    shifted.eval = [base](const PathView& x, std::span<double> out) {
        base(x, out);
        out[0] += 3.0;
    };
    const auto a = risk_measure({0.0, 0.1, payoffs::call(100), 1.0}, models::gbm(0.05, 0.2), s0, {}, bm);
    const auto b = risk_measure({0.0, 0.1, shifted, 1.0}, models::gbm(0.05, 0.2), s0, {}, bm);
    EXPECT_NEAR(b.rho0 - a.rho0, 3.0, 1e-10);
}

TEST(RiskMeasure, ConstantPositionMatchesDelayOde) {
    const TimeGrid g(0, 1, 100);
    const auto s0 = DiscretePath::constant(g, 100.0);
    const auto r = risk_measure({0.01, 0.1, payoffs::constant(1.0), 1.0}, models::gbm(0.05, 0.2), s0, {},
                                gaussian(g, 200, 8));
    const double c = 1.0;
    const double ref =
        oracles::delay_ode_backward(std::span<const double>(&c, 1), make_moving_average(0.01, 0.1), TimeGrid(0, 1, 2000))
            .y0();
    EXPECT_NEAR(r.rho0, ref, 5e-3);
}

TEST(RiskMeasure, MonotoneInThePosition) {
    const TimeGrid g(0, 1, 20);
    const auto s0 = DiscretePath::constant(g, 100.0);
    const auto bm = gaussian(g, 5000, 9);
    double prev = INFINITY;
    for (double k : {80.0, 90.0, 100.0, 110.0}) {
        const auto r = risk_measure({0.01, 0.1, payoffs::call(k), 1.0}, models::gbm(0.05, 0.2), s0, {}, bm);
        EXPECT_LT(r.rho0, prev) << k;
        prev = r.rho0;
    }
}
