#include "doctest.h"

#include "dualrate/market_model.hpp"

#include <cmath>
#include <random>

using namespace dualrate;

namespace {

// Classical RK4 for dB = r(t) B dt with many steps; independent of the
// closed-form exponential used by the library. The rate is sampled at each
// step's midpoint, so breakpoints on the step grid never straddle a stage.
double rk4_account(const PiecewiseConstantRate& r, double t, int steps = 20000) {
    double b = 1.0;
    const double h = t / steps;
    for (int i = 0; i < steps; ++i) {
        const double u = i * h;
        const double rate = r.at(u + h / 2);
        const double k1 = rate * b;
        const double k2 = rate * (b + h / 2 * k1);
        const double k3 = rate * (b + h / 2 * k2);
        const double k4 = rate * (b + h * k3);
        b += h / 6 * (k1 + 2 * k2 + 2 * k3 + k4);
    }
    return b;
}

SamplePath uniform_path(double t_end, int n, double s0 = 100.0) {
    SamplePath p;
    for (int k = 0; k <= n; ++k) {
        p.times.push_back(t_end * k / n);
        p.prices.push_back(s0);
    }
    return p;
}

}  // namespace

TEST_CASE("account value at zero rate is one") {
    const auto rates = RateModel::flat(0.0, 0.0, 0.0, 2.0);
    for (double t : {0.0, 0.3, 1.0, 2.0}) CHECK(account_value(rates, Account::lend, t) == 1.0);
}

TEST_CASE("account value for a constant borrowing rate") {
    const auto rates = RateModel::flat(0.0, 0.05, 0.0, 1.0);
    const double b = account_value(rates, Account::borrow, 1.0);
    CHECK(b == doctest::Approx(1.0512710963760241).epsilon(1e-15));
    CHECK(b == doctest::Approx(rk4_account(rates.curve(Account::borrow), 1.0)).epsilon(1e-12));
}

TEST_CASE("account value for a piecewise lending rate") {
    const PiecewiseConstantRate rl({{0.0, 0.02}, {0.5, 0.04}});
    const RateModel rates(rl, PiecewiseConstantRate::constant(0.05), PiecewiseConstantRate::constant(0.0), 1.0);
    CHECK(account_value(rates, Account::lend, 1.0) == doctest::Approx(std::exp(0.03)).epsilon(1e-14));
    CHECK(account_value(rates, Account::lend, 1.0) == doctest::Approx(rk4_account(rl, 1.0)).epsilon(1e-9));
}

TEST_CASE("account value outside the horizon is a domain error") {
    const auto rates = RateModel::flat(0.01, 0.02, 0.0, 1.0);
    CHECK_THROWS_AS(account_value(rates, Account::lend, -0.1), DomainError);
    CHECK_THROWS_AS(account_value(rates, Account::lend, 1.5), DomainError);
}

TEST_CASE("rate model enforces 0 <= r_l <= r_b") {
    CHECK_THROWS(RateModel::flat(0.05, 0.02, 0.0, 1.0));
    CHECK_THROWS(RateModel::flat(-0.01, 0.02, 0.0, 1.0));
    const PiecewiseConstantRate rb({{0.0, 0.05}, {0.5, 0.01}});
    CHECK_THROWS(RateModel(PiecewiseConstantRate::constant(0.02), rb, PiecewiseConstantRate::constant(0.0), 1.0));
    CHECK_NOTHROW(RateModel::flat(0.03, 0.03, 0.1, 1.0));
}

TEST_CASE("property: account values are positive, nondecreasing and multiplicative") {
    std::mt19937_64 gen(7);
    std::uniform_real_distribution<double> rate(0.0, 0.1), time(0.0, 3.0);
    for (int trial = 0; trial < 200; ++trial) {
        std::vector<RateSegment> segs{{0.0, rate(gen)}};
        for (int k = 1; k < 5; ++k) segs.push_back({segs.back().start + 0.1 + time(gen) / 5, rate(gen)});
        std::vector<RateSegment> upper = segs;
        for (auto& s : upper) s.rate += 0.01;
        const RateModel rates(PiecewiseConstantRate(segs), PiecewiseConstantRate(upper),
                              PiecewiseConstantRate::constant(0.0), 3.0);
        double t = time(gen), u = time(gen);
        if (t > u) std::swap(t, u);
        const double bt = account_value(rates, Account::lend, t);
        const double bu = account_value(rates, Account::lend, u);
        CHECK(bt >= 1.0);
        CHECK(bu >= bt);
        CHECK(bt * account_growth(rates, Account::lend, t, u) == doctest::Approx(bu).epsilon(1e-12));
    }
}

TEST_CASE("F^C vanishes without collateral") {
    const auto rates = RateModel::flat(0.02, 0.05, 0.03, 1.0);
    ContractSpec c;
    const auto fc = funding_process_fc(rates, c, uniform_path(1.0, 10));
    for (double v : fc) CHECK(v == 0.0);
}

TEST_CASE("F^C vanishes at zero collateral rate") {
    const auto rates = RateModel::flat(0.02, 0.05, 0.0, 1.0);
    ContractSpec c;
    c.collateral = [](double t, double) { return 5.0 * (1.0 - t); };
    for (double v : funding_process_fc(rates, c, uniform_path(1.0, 10))) CHECK(v == 0.0);
}

TEST_CASE("F^C for constant collateral") {
    const auto rates = RateModel::flat(0.0, 0.05, 0.03, 2.0);
    ContractSpec c;
    c.maturity = 2.0;
    c.collateral = [](double, double) { return 10.0; };
    const auto fc = funding_process_fc(rates, c, uniform_path(2.0, 20));
    CHECK(fc.back() == doctest::Approx(-0.6).epsilon(1e-13));
}

TEST_CASE("F^C for linear collateral") {
    const auto rates = RateModel::flat(0.0, 0.1, 0.1, 1.0);
    ContractSpec c;
    c.collateral = [](double t, double) { return t; };
    const auto fc = funding_process_fc(rates, c, uniform_path(1.0, 7));
    CHECK(fc.back() == doctest::Approx(-0.05).epsilon(1e-13));
}

TEST_CASE("A^C is zero for an empty contract") {
    const auto rates = RateModel::flat(0.02, 0.05, 0.03, 1.0);
    ContractSpec c;
    for (auto d : {Discounting::none, Discounting::lend, Discounting::borrow})
        for (double v : cumulative_ac(rates, c, uniform_path(1.0, 10), d)) CHECK(v == 0.0);
}

TEST_CASE("A^C picks up the terminal payment") {
    ContractSpec c;
    c.payoff = Payoff({{0.0, 5.0}}, 0.0, 0.0);  // H = 5
    const auto zero = RateModel::flat(0.0, 0.0, 0.0, 1.0);
    const auto path = uniform_path(1.0, 10);
    const auto plain = cumulative_ac(zero, c, path, Discounting::lend);
    CHECK(plain.back() - plain.front() == doctest::Approx(-5.0));
    const auto none = cumulative_ac(zero, c, path, Discounting::none);
    CHECK(none.back() == doctest::Approx(-5.0));
    CHECK(none[9] == 0.0);

    const auto rates = RateModel::flat(0.05, 0.05, 0.0, 1.0);
    const auto disc = cumulative_ac(rates, c, path, Discounting::lend);
    CHECK(disc.back() == doctest::Approx(-5.0 * std::exp(-0.05)).epsilon(1e-14));
}

TEST_CASE("A^C discounts intermediate flows at their own time") {
    ContractSpec c;
    c.flows.push_back({0.35, [](double) { return 2.0; }});
    const auto rates = RateModel::flat(0.04, 0.06, 0.0, 1.0);
    const auto ac = cumulative_ac(rates, c, uniform_path(1.0, 10), Discounting::borrow);
    CHECK(ac[3] == 0.0);
    CHECK(ac[4] == doctest::Approx(2.0 * std::exp(-0.06 * 0.35)).epsilon(1e-14));
}

TEST_CASE("U is zero for an empty contract") {
    const auto rates = RateModel::flat(0.02, 0.05, 0.03, 1.0);
    ContractSpec c;
    for (double v : netted_funding_u(rates, c, uniform_path(1.0, 10))) CHECK(v == 0.0);
}

TEST_CASE("U for an upfront payment follows the borrowing branch") {
    const double p = 3.0;
    const auto rates = RateModel::flat(0.02, 0.05, 0.0, 2.0);
    ContractSpec c;
    c.maturity = 2.0;
    c.initial_flow = p;
    const auto path = uniform_path(2.0, 8);
    const double exact = -p * std::exp(0.05 * 2.0);
    const double err_coarse = std::abs(netted_funding_u(rates, c, path, 2e-3).back() - exact);
    const double err_fine = std::abs(netted_funding_u(rates, c, path, 1e-3).back() - exact);
    const double err_finer = std::abs(netted_funding_u(rates, c, path, 5e-4).back() - exact);
    CHECK(err_fine < 1e-3);
    // First-order convergence: halving the step halves the error.
    CHECK(err_coarse / err_fine == doctest::Approx(2.0).epsilon(0.01));
    CHECK(err_fine / err_finer == doctest::Approx(2.0).epsilon(0.01));
    // The lending branch would give -p e^{r_l t}; the answer is far from it.
    CHECK(std::abs(netted_funding_u(rates, c, path).back() + p * std::exp(0.02 * 2.0)) > 0.05);
}

TEST_CASE("U at a single rate matches the linear ODE") {
    const auto rates = RateModel::flat(0.04, 0.04, 0.0, 1.0);
    ContractSpec c;
    c.initial_flow = -2.0;
    const auto path = uniform_path(1.0, 4);
    const auto u = netted_funding_u(rates, c, path, 1e-4);
    for (std::size_t k = 0; k < path.times.size(); ++k)
        CHECK(u[k] == doctest::Approx(2.0 * std::exp(0.04 * path.times[k])).epsilon(1e-5));
    CHECK_THROWS(netted_funding_u(rates, c, path, 0.0));
}

TEST_CASE("endowment leg") {
    const auto rates = RateModel::flat(0.02, 0.05, 0.0, 1.0);
    for (double t : {0.0, 0.5, 1.0}) CHECK(endowment_leg(rates, {0.0}, t) == 0.0);
    CHECK(endowment_leg(rates, {100.0}, 1.0) == doctest::Approx(100.0 * std::exp(0.02)).epsilon(1e-15));
    CHECK(endowment_leg(rates, {-100.0}, 1.0) == doctest::Approx(-100.0 * std::exp(0.05)).epsilon(1e-15));
}

TEST_CASE("property: endowment leg is positively homogeneous on each sign branch") {
    const auto rates = RateModel::flat(0.015, 0.045, 0.0, 1.0);
    std::mt19937_64 gen(11);
    std::uniform_real_distribution<double> x(-500.0, 500.0), lam(0.0, 10.0), t(0.0, 1.0);
    for (int i = 0; i < 1000; ++i) {
        const double xv = x(gen), l = lam(gen), tv = t(gen);
        CHECK(endowment_leg(rates, {l * xv}, tv) == doctest::Approx(l * endowment_leg(rates, {xv}, tv)).epsilon(1e-13));
    }
}

TEST_CASE("payoffs") {
    const auto call = Payoff::call(100.0);
    CHECK(call(90.0) == 0.0);
    CHECK(call(130.0) == doctest::Approx(30.0));
    CHECK(call.slope(50.0) == 0.0);
    CHECK(call.slope(150.0) == 1.0);
    const auto put = Payoff::put(100.0, 2.0);
    CHECK(put(90.0) == doctest::Approx(20.0));
    CHECK(put(110.0) == 0.0);
    CHECK(put.slope(10.0) == -2.0);
    const Payoff spread({{90.0, 0.0}, {110.0, 20.0}}, 0.0, 0.0);
    CHECK(spread(100.0) == doctest::Approx(10.0));
    CHECK(spread(200.0) == doctest::Approx(20.0));
    CHECK(spread.slope(95.0) == doctest::Approx(1.0));
    CHECK(spread.scaled(-1.0)(100.0) == doctest::Approx(-10.0));
    CHECK_THROWS(Payoff({{110.0, 0.0}, {90.0, 0.0}}, 0.0, 0.0));
}

TEST_CASE("contract validation") {
    ContractSpec c;
    c.collateral = [](double, double s) { return 0.1 * s; };
    CHECK_THROWS_AS(c.validate(), ContractError);
    c.collateral = [](double t, double s) { return 0.1 * s * (1.0 - t); };
    CHECK_NOTHROW(c.validate());
    c.flows.push_back({0.0, [](double) { return 1.0; }});
    CHECK_THROWS_AS(c.validate(), ContractError);
    c.flows.back().time = 1.5;
    CHECK_THROWS_AS(c.validate(), ContractError);
    c.flows.back().time = 1.0;
    CHECK_NOTHROW(c.validate());
}

TEST_CASE("negated contract swaps every flow") {
    ContractSpec c;
    c.payoff = Payoff::call(100.0);
    c.initial_flow = 4.0;
    c.flows.push_back({0.5, [](double s) { return 0.01 * s; }});
    c.collateral = [](double t, double s) { return (1.0 - t) * s; };
    const auto n = c.negated();
    CHECK(n.payoff(120.0) == doctest::Approx(-20.0));
    CHECK(n.initial_flow == -4.0);
    CHECK(n.flows[0].amount(100.0) == doctest::Approx(-1.0));
    CHECK(n.collateral_at(0.5, 10.0) == doctest::Approx(-5.0));
}

TEST_CASE("pricing requirements on the asset") {
    const auto rates = RateModel::flat(0.02, 0.05, 0.0, 1.0);
    AssetModel a;
    a.sigma = Coefficient::lognormal(0.2);
    a.beta = Coefficient::constant(0.05);
    CHECK_NOTHROW(a.validate_for_pricing(rates));
    a.beta = Coefficient::constant(0.04);
    CHECK_THROWS_AS(a.validate_for_pricing(rates), DomainError);
    a.beta = Coefficient::proportional(0.1);  // beta s vanishes near s = 0
    CHECK_THROWS_AS(a.validate_for_pricing(rates), DomainError);
    a.beta = Coefficient::constant(0.05);
    a.sigma = Coefficient::constant(0.0);
    CHECK_THROWS_AS(a.validate_for_pricing(rates), DomainError);
}

TEST_CASE("sample path validation and interpolation") {
    SamplePath p{{0.0, 0.5, 1.0}, {100.0, 110.0, 90.0}};
    CHECK(p.price_at(0.25) == doctest::Approx(105.0));
    CHECK(p.price_at(0.75) == doctest::Approx(100.0));
    SamplePath bad{{0.0, 0.5, 0.5}, {1.0, 1.0, 1.0}};
    CHECK_THROWS(bad.validate());
}
