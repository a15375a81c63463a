#include "dualrate/tree_bsde.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

namespace dualrate {

Lattice build_lattice(const AssetModel& asset, const RateModel& rates, double s0, double maturity,
                      std::size_t n_steps) {
    if (n_steps < 1) throw std::invalid_argument("lattice needs at least one step");
    if (!(maturity > 0.0)) throw std::invalid_argument("lattice maturity must be positive");
    if (!(asset.sigma.value > 0.0)) throw DomainError("lattice volatility must be positive");
    if (rates.horizon() < maturity * (1.0 - 1e-12))
        throw std::invalid_argument("rate horizon ends before lattice maturity");

    Lattice lat;
    lat.n_steps = n_steps;
    lat.maturity = maturity;
    lat.dt = maturity / static_cast<double>(n_steps);
    lat.log_moves = asset.sigma.scales_with_price();
    lat.prices.resize((n_steps + 1) * (n_steps + 2) / 2);
    lat.up_prob.resize(n_steps * (n_steps + 1) / 2);

    const double move = asset.sigma.value * std::sqrt(lat.dt);
    for (std::size_t i = 0; i <= n_steps; ++i) {
        for (std::size_t j = 0; j <= i; ++j) {
            const double k = 2.0 * static_cast<double>(j) - static_cast<double>(i);
            lat.prices[Lattice::index(i, j)] = lat.log_moves ? s0 * std::exp(k * move) : s0 + k * move;
        }
    }
    for (std::size_t i = 0; i < n_steps; ++i) {
        const double t = lat.t(i);
        for (std::size_t j = 0; j <= i; ++j) {
            const double s = lat.s(i, j);
            const double up = lat.s(i + 1, j + 1);
            const double down = lat.s(i + 1, j);
            const double mean = s * (1.0 + asset.beta(t, s) * lat.dt) - asset.kappa(t, s) * lat.dt;
            const double p = (mean - down) / (up - down);
            if (!(p >= 0.0 && p <= 1.0)) {
                std::ostringstream msg;
                msg << "lattice probability " << p << " outside [0, 1] at t = " << t << ", s = " << s
                    << "; use more steps or a larger volatility";
                throw DomainError(msg.str());
            }
            lat.up_prob[Lattice::index(i, j)] = p;
        }
    }
    return lat;
}

namespace {

struct NodeDriver {
    double rl, rb, beta_s, e, c;
};

// Y solving Y = E - dt G(Y, z) for the selected party; G is piecewise linear
// in Y with the rate branch fixed by the sign of the cash position.
double implicit_update(Party party, const NodeDriver& d, double dt, double expect, double z, double s) {
    if (party == Party::hedger) {
        // w = Y + e - z s
        const double r = expect - dt * (z * d.beta_s - d.c) + d.e - z * s;
        const double w = r >= 0.0 ? r / (1.0 + dt * d.rl) : r / (1.0 + dt * d.rb);
        return w - d.e + z * s;
    }
    // w = -Y + e + z s
    const double r = d.e + z * s + dt * (z * d.beta_s + d.c) - expect;
    const double w = r >= 0.0 ? r / (1.0 + dt * d.rl) : r / (1.0 + dt * d.rb);
    return d.e + z * s - w;
}

double explicit_update(Party party, const NodeDriver& d, double dt, double expect, double z, double s) {
    auto branch = [&](double w) { return w >= 0.0 ? d.rl * w : d.rb * w; };
    if (party == Party::hedger) {
        const double g = z * d.beta_s - d.c + branch(expect + d.e - z * s);
        return expect - dt * g;
    }
    const double g = z * d.beta_s + d.c - branch(-expect + d.e + z * s);
    return expect - dt * g;
}

template <typename Collateral>
BackwardSolution solve(const Lattice& lat, Party party, double x, const RateModel& rates,
                       const AssetModel& asset, const ContractSpec& contract,
                       const Collateral& collateral, const TreeOptions& options) {
    const std::size_t n = lat.n_steps;
    if (std::abs(lat.maturity - contract.maturity) > 1e-12 * contract.maturity)
        throw std::invalid_argument("lattice maturity differs from contract maturity");
    asset.validate_for_pricing(rates);

    // Flows settle at the first lattice time >= their time.
    std::vector<std::vector<const CashFlow*>> flows_at(n + 1);
    for (const auto& flow : contract.flows) {
        auto level = static_cast<std::size_t>(std::ceil(flow.time / lat.dt - 1e-9));
        flows_at[std::min(level, n)].push_back(&flow);
    }
    auto flow_sum = [&](std::size_t i, double s) {
        double a = 0.0;
        for (const CashFlow* f : flows_at[i]) a += f->amount(s);
        return a;
    };

    std::vector<double> y(lat.node_count()), z(lat.node_count());
    for (std::size_t j = 0; j <= n; ++j) y[Lattice::index(n, j)] = contract.payoff(lat.s(n, j));
    for (std::size_t j = 0; j <= n; ++j) {
        const std::size_t lo = j == n ? j - 1 : j;
        const double ds = lat.s(n, lo + 1) - lat.s(n, lo);
        z[Lattice::index(n, j)] = (y[Lattice::index(n, lo + 1)] - y[Lattice::index(n, lo)]) / ds;
    }

    for (std::size_t i = n; i-- > 0;) {
        const double t = lat.t(i);
        NodeDriver d{rates.rate(Account::lend, t), rates.rate(Account::borrow, t), 0.0,
                     endowment_offset(rates, t, x), endowment_accrual(rates, t, x)};
        const double rc = rates.rate(Account::collateral, t);
        for (std::size_t j = 0; j <= i; ++j) {
            const double s = lat.s(i, j);
            const double s_up = lat.s(i + 1, j + 1);
            const double s_dn = lat.s(i + 1, j);
            const double c_here = collateral(i, j);
            const double carry = c_here * (1.0 + rc * lat.dt);
            const double x_up = y[Lattice::index(i + 1, j + 1)] - flow_sum(i + 1, s_up) -
                                collateral(i + 1, j + 1) + carry;
            const double x_dn = y[Lattice::index(i + 1, j)] - flow_sum(i + 1, s_dn) -
                                collateral(i + 1, j) + carry;
            const double p = lat.p(i, j);
            const double zz = (x_up - x_dn) / (s_up - s_dn);
            const double expect = p * x_up + (1.0 - p) * x_dn;
            d.beta_s = asset.beta(t, s) * s;
            const double yy = options.update == YUpdate::implicit
                                  ? implicit_update(party, d, lat.dt, expect, zz, s)
                                  : explicit_update(party, d, lat.dt, expect, zz, s);
            if (!std::isfinite(yy)) {
                std::ostringstream msg;
                msg << "non-finite lattice value at t = " << t << ", s = " << s;
                throw std::runtime_error(msg.str());
            }
            y[Lattice::index(i, j)] = yy;
            z[Lattice::index(i, j)] = zz;
        }
    }
    return BackwardSolution(n, party, x, std::move(y), std::move(z));
}

void validate_terminal_collateral(const Lattice& lat, const ContractSpec& contract) {
    std::vector<double> terminal(lat.n_steps + 1);
    for (std::size_t j = 0; j <= lat.n_steps; ++j) terminal[j] = lat.s(lat.n_steps, j);
    contract.validate(terminal);
    contract.validate();
}

}  // namespace

BackwardSolution backward_solve(const Lattice& lattice, Party party, double endowment,
                                const RateModel& rates, const AssetModel& asset,
                                const ContractSpec& contract, const TreeOptions& options) {
    validate_terminal_collateral(lattice, contract);
    auto collateral = [&](std::size_t i, std::size_t j) {
        return contract.collateral_at(lattice.t(i), lattice.s(i, j));
    };
    return solve(lattice, party, endowment, rates, asset, contract, collateral, options);
}

BackwardSolution backward_solve(const Lattice& lattice, Party party, double endowment,
                                const RateModel& rates, const AssetModel& asset,
                                const ContractSpec& contract,
                                std::span<const double> node_collateral, const TreeOptions& options) {
    if (node_collateral.size() != lattice.node_count())
        throw std::invalid_argument("node collateral needs one entry per lattice node");
    for (std::size_t j = 0; j <= lattice.n_steps; ++j)
        if (std::abs(node_collateral[Lattice::index(lattice.n_steps, j)]) > 1e-12)
            throw ContractError("collateral must vanish at maturity");
    ContractSpec bare = contract;
    bare.collateral = nullptr;
    bare.validate();
    auto collateral = [&](std::size_t i, std::size_t j) { return node_collateral[Lattice::index(i, j)]; };
    return solve(lattice, party, endowment, rates, asset, bare, collateral, options);
}

double price_with_collateral(const Lattice& lattice, Party party, double endowment,
                             const RateModel& rates, const AssetModel& asset,
                             const ContractSpec& contract, const TreeOptions& options) {
    const auto sol = backward_solve(lattice, party, endowment, rates, asset, contract, options);
    return sol.root() - contract.collateral_at(0.0, lattice.s(0, 0));
}

FullCollateralReport full_collateral_fixed_point(const Lattice& lattice, Party party,
                                                 double endowment, const RateModel& rates,
                                                 const AssetModel& asset,
                                                 const ContractSpec& contract, int max_iterations,
                                                 double tolerance) {
    FullCollateralReport report;
    const std::size_t n = lattice.n_steps;
    std::vector<double> c(lattice.node_count(), 0.0);
    auto sol = backward_solve(lattice, party, endowment, rates, asset, contract, c);
    report.uncollateralized_price = sol.root();
    double price = sol.root();
    for (int it = 1; it <= max_iterations; ++it) {
        std::vector<double> next(lattice.node_count(), 0.0);
        for (std::size_t i = 0; i < n; ++i)
            for (std::size_t j = 0; j <= i; ++j) {
                const std::size_t k = Lattice::index(i, j);
                next[k] = sol.y_values()[k] - c[k];
            }
        c.swap(next);
        sol = backward_solve(lattice, party, endowment, rates, asset, contract, c);
        const double updated = sol.root() - c[0];
        report.iterations = it;
        report.last_change = std::abs(updated - price);
        price = updated;
        if (report.last_change < tolerance) {
            report.converged = true;
            break;
        }
    }
    report.price = price;
    return report;
}

}  // namespace dualrate
