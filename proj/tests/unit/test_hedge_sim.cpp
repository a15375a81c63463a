#include "doctest.h"

#include "dualrate/hedge_sim.hpp"

#include <cmath>

using namespace dualrate;

namespace {

AssetModel lognormal_asset() {
    AssetModel a;
    a.mu = Coefficient::proportional(0.07);
    a.sigma = Coefficient::lognormal(0.2);
    a.beta = Coefficient::constant(0.05);
    return a;
}

ContractSpec call_contract() {
    ContractSpec c;
    c.payoff = Payoff::call(100.0);
    return c;
}

const Grid kGrid{0.0, 400.0, 401, 400, 1.0};

double mean_of(const PathSet& paths, std::size_t step) {
    double sum = 0.0;
    for (std::size_t k = 0; k < paths.size(); ++k) sum += paths.path(k).prices[step];
    return sum / static_cast<double>(paths.size());
}

}  // namespace

TEST_CASE("zero volatility paths follow the Euler drift exactly") {
    AssetModel a;
    a.mu = Coefficient::proportional(0.05);
    a.sigma = Coefficient::constant(0.0);
    const auto paths = simulate_paths(a, 100.0, 1.0, 50, 3, 1);
    for (std::size_t k = 0; k < 3; ++k) {
        const auto p = paths.path(k);
        CHECK(p.prices.size() == 51);
        CHECK(p.prices.back() == doctest::Approx(100.0 * std::pow(1.0 + 0.05 / 50.0, 50.0)).epsilon(1e-13));
    }
    // Against the continuous ODE the Euler drift is first-order accurate.
    const double exact = 100.0 * std::exp(0.05);
    CHECK(std::abs(paths.path(0).prices.back() - exact) < 100.0 * 0.05 * 0.05 / 50.0);
    AssetModel still;
    still.sigma = Coefficient::constant(0.0);
    CHECK(simulate_paths(still, 80.0, 1.0, 10, 1, 1).path(0).prices.back() == 80.0);
}

TEST_CASE("simulated terminal mean matches the discrete drift under each measure") {
    const auto rates = RateModel::flat(0.02, 0.05, 0.02, 1.0);
    const std::size_t n = 50, m = 20000;
    struct Case {
        SimMeasure measure;
        double drift;
    };
    for (const Case c : {Case{SimMeasure::physical, 0.07}, Case{SimMeasure::beta, 0.05}, Case{SimMeasure::lending, 0.02}}) {
        const auto paths = simulate_paths(lognormal_asset(), rates, {100.0, 1.0, n, m, 11, c.measure});
        const double expected = 100.0 * std::pow(1.0 + c.drift / n, static_cast<double>(n));
        // sd of S_T is about 20.
        CHECK(std::abs(mean_of(paths, n) - expected) < 4.0 * 21.0 / std::sqrt(static_cast<double>(m)));
    }
}

TEST_CASE("lognormal log-moment") {
    AssetModel a = lognormal_asset();
    const std::size_t m = 100000;
    const auto paths = simulate_paths(a, 100.0, 1.0, 100, m, 17);
    std::vector<double> prices;
    double sum = 0.0, sum_sq = 0.0;
    for (std::size_t k = 0; k < m; ++k) {
        paths.fill(k, prices);
        const double l = std::log(prices.back() / 100.0);
        sum += l;
        sum_sq += l * l;
    }
    const double mean = sum / m;
    const double se = std::sqrt((sum_sq / m - mean * mean) / m);
    CHECK(std::abs(mean - (0.07 - 0.02)) < 3.0 * se);
}

TEST_CASE("paths are reproducible and keyed by index") {
    const auto a = simulate_paths(lognormal_asset(), 100.0, 1.0, 20, 10, 77);
    const auto b = simulate_paths(lognormal_asset(), 100.0, 1.0, 20, 10, 77);
    CHECK(a.path(4).prices == b.path(4).prices);
    CHECK(a.path(4).prices != a.path(5).prices);
    CHECK(a.times().front() == 0.0);
    CHECK(a.times().back() == 1.0);
    CHECK_THROWS(a.path(10));
    CHECK_THROWS(PathSet(lognormal_asset(), std::nullopt, {100.0, 1.0, 10, 10, 1, SimMeasure::lending}));
}

TEST_CASE("a zero contract with no hedge leaves exactly the endowment leg") {
    const auto rates = RateModel::flat(0.02, 0.05, 0.02, 1.0);
    const auto paths = simulate_paths(lognormal_asset(), 100.0, 1.0, 50, 200, 3);
    for (double x : {0.0, 10.0, -10.0}) {
        for (Party party : {Party::hedger, Party::counterparty}) {
            const auto r = replicate(NullHedgeSource(party), rates, lognormal_asset(), ContractSpec{}, {x}, paths);
            CHECK(r.stats.max_abs < 1e-12 * std::max(1.0, std::abs(x)));
            CHECK(r.premium == 0.0);
        }
    }
}

TEST_CASE("PDE hedge passes the self-financing and exclusivity audits") {
    const auto rates = RateModel::flat(0.02, 0.05, 0.02, 1.0);
    const auto h = solve_hedger_pde(rates, lognormal_asset(), call_contract(), 0.0, kGrid);
    const auto c = solve_counterparty_pde(rates, lognormal_asset(), call_contract(), 0.0, kGrid);
    const auto paths = simulate_paths(lognormal_asset(), 100.0, 1.0, 100, 2000, 5);
    ReplicationOptions keep;
    keep.keep_paths = 3;
    for (const PriceSurface* s : {&h, &c}) {
        const auto r = replicate(SurfaceHedgeSource(*s), rates, lognormal_asset(), call_contract(), {0.0}, paths, keep);
        CHECK(r.max_self_financing_residual < 1e-10);
        CHECK(r.exclusivity_violations == 0);
        CHECK(r.total_steps == 2000 * 100);
        CHECK(r.paths.size() == 3);
        CHECK(r.stats.mean_abs < 0.8);
        CHECK(std::abs(r.stats.mean) < 0.1);
        CHECK(r.branch_mismatch_fraction < 0.05);
        CHECK(r.warnings.empty());
        for (const auto& p : r.paths)
            for (std::size_t k = 0; k < p.psi_l.size(); ++k) {
                CHECK(p.psi_l[k] >= 0.0);
                CHECK(p.psi_b[k] <= 0.0);
                CHECK(p.psi_l[k] * p.psi_b[k] == 0.0);
            }
    }
}

TEST_CASE("replication error shrinks as rebalancing gets finer") {
    const auto rates = RateModel::flat(0.02, 0.05, 0.02, 1.0);
    const auto h = solve_hedger_pde(rates, lognormal_asset(), call_contract(), 0.0, kGrid);
    const SurfaceHedgeSource src(h);
    double previous = 0.0;
    for (std::size_t n : {25, 100}) {
        const auto paths = simulate_paths(lognormal_asset(), 100.0, 1.0, n, 2000, 9);
        const double err = replicate(src, rates, lognormal_asset(), call_contract(), {0.0}, paths).stats.mean_abs;
        if (previous > 0.0) CHECK(err < 0.8 * previous);
        previous = err;
    }
}

TEST_CASE("property: at a single rate the endowment shifts wealth by exactly its leg") {
    const auto rates = RateModel::flat(0.04, 0.04, 0.04, 1.0);
    AssetModel a = lognormal_asset();
    a.beta = Coefficient::constant(0.04);
    const auto h = solve_hedger_pde(rates, a, call_contract(), 0.0, Grid{0.0, 400.0, 201, 200, 1.0});
    const auto paths = simulate_paths(a, 100.0, 1.0, 50, 500, 13);
    const auto base = replicate(SurfaceHedgeSource(h), rates, a, call_contract(), {0.0}, paths);
    for (double x : {250.0, -250.0, 1e6}) {
        const auto r = replicate(SurfaceHedgeSource(h), rates, a, call_contract(), {x}, paths);
        double worst = 0.0;
        for (std::size_t k = 0; k < paths.size(); ++k)
            worst = std::max(worst, std::abs(r.terminal_error[k] - base.terminal_error[k]));
        CHECK(worst < 1e-9 * std::max(1.0, std::abs(x)));
    }
}

TEST_CASE("lattice hedge source") {
    const auto rates = RateModel::flat(0.02, 0.05, 0.02, 1.0);
    const auto lat = build_lattice(lognormal_asset(), rates, 100.0, 1.0, 200);
    const auto sol = backward_solve(lat, Party::hedger, 0.0, rates, lognormal_asset(), call_contract());
    const LatticeHedgeSource src(lat, sol);
    CHECK(src.party() == Party::hedger);
    CHECK(src.quote(0.0, 100.0).value == sol.root());
    CHECK_FALSE(src.quote(0.0, 100.0).clamped);
    CHECK(src.quote(lat.t(10), lat.s(10, 4)).value == doctest::Approx(sol.y(10, 4)));
    const double mid = 0.5 * (lat.s(10, 4) + lat.s(10, 5));
    const auto q = src.quote(lat.t(10) + 0.5 * lat.dt, mid);
    CHECK(q.value > std::min(sol.y(10, 4), sol.y(10, 5)));
    CHECK(q.value < std::max(sol.y(10, 4), sol.y(10, 5)));
    CHECK(src.quote(lat.t(10), 1e4).clamped);

    const auto paths = simulate_paths(lognormal_asset(), 100.0, 1.0, 200, 1000, 21);
    const auto r = replicate(src, rates, lognormal_asset(), call_contract(), {0.0}, paths);
    CHECK(r.stats.mean_abs < 0.6);
    CHECK(r.max_self_financing_residual < 1e-10);
}

TEST_CASE("clamped lookups warn, or throw in strict mode") {
    const auto rates = RateModel::flat(0.02, 0.05, 0.02, 1.0);
    const auto narrow = solve_hedger_pde(rates, lognormal_asset(), call_contract(), 0.0, Grid{95.0, 105.0, 21, 50, 1.0});
    const auto paths = simulate_paths(lognormal_asset(), 100.0, 1.0, 50, 200, 2);
    const auto loose = replicate(SurfaceHedgeSource(narrow), rates, lognormal_asset(), call_contract(), {0.0}, paths);
    CHECK(loose.clamp_fraction > 0.01);
    CHECK_FALSE(loose.warnings.empty());
    ReplicationOptions strict;
    strict.strict = true;
    CHECK_THROWS_AS(replicate(SurfaceHedgeSource(narrow), rates, lognormal_asset(), call_contract(), {0.0}, paths, strict),
                    ClampError);
}

TEST_CASE("netted wealth check") {
    const auto rates = RateModel::flat(0.02, 0.05, 0.02, 1.0);
    const auto lending = simulate_paths(lognormal_asset(), rates, {100.0, 1.0, 100, 4000, 31, SimMeasure::lending});

    SUBCASE("doing nothing with nothing is neutral") {
        const auto r = netted_wealth_check(NullHedgeSource(Party::hedger), rates, lognormal_asset(), ContractSpec{},
                                           {0.0}, lending);
        CHECK(std::abs(r.statistic) < 1e-12);
        CHECK_FALSE(r.arbitrage_flag);
        CHECK_FALSE(r.mispricing_flag);
    }

    const auto h = solve_hedger_pde(rates, lognormal_asset(), call_contract(), 0.0, kGrid);
    const SurfaceHedgeSource src(h);

    SUBCASE("the fair hedger price is not flagged") {
        const auto r = netted_wealth_check(src, rates, lognormal_asset(), call_contract(), {0.0}, lending);
        CHECK(r.premium == doctest::Approx(h.quote(0.0, 100.0).value));
        CHECK_FALSE(r.arbitrage_flag);
        CHECK_FALSE(r.mispricing_flag);
        CHECK(r.statistic <= 3.0 * r.standard_error);
    }

    SUBCASE("an overpriced premium is flagged") {
        ReplicationOptions over;
        over.premium = h.quote(0.0, 100.0).value + 1.0;
        const auto r = netted_wealth_check(src, rates, lognormal_asset(), call_contract(), {0.0}, lending, over);
        CHECK(r.mispricing_flag);
        CHECK(r.surplus > 0.9);
    }
}
