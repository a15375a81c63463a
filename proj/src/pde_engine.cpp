#include "dualrate/pde_engine.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

namespace dualrate {

void Grid::validate() const {
    if (!(s_min < s_max)) throw std::invalid_argument("grid requires s_min < s_max");
    if (n_space < 3) throw std::invalid_argument("grid requires at least 3 space nodes");
    if (n_time < 1) throw std::invalid_argument("grid requires at least 1 time step");
    if (!(maturity > 0.0)) throw std::invalid_argument("grid maturity must be positive");
}

Grid coarsened(const Grid& grid) {
    Grid out = grid;
    out.n_space = (grid.n_space + 1) / 2;
    out.n_time = std::max<std::size_t>(1, grid.n_time / 2);
    return out;
}

// ---------------------------------------------------------------------------
// PriceSurface

PriceSurface::PriceSurface(Grid grid, Party party, double endowment, std::vector<double> values,
                           PdeDiagnostics diagnostics)
    : grid_(grid),
      party_(party),
      endowment_(endowment),
      values_(std::move(values)),
      deltas_(values_.size()),
      diagnostics_(diagnostics) {
    const std::size_t n = grid_.n_space;
    if (values_.size() != (grid_.n_time + 1) * n)
        throw std::invalid_argument("surface values do not match the grid");
    const double ds = grid_.ds();
    for (std::size_t i = 0; i <= grid_.n_time; ++i) {
        const double* v = &values_[i * n];
        double* d = &deltas_[i * n];
        d[0] = (v[1] - v[0]) / ds;
        for (std::size_t j = 1; j + 1 < n; ++j) d[j] = (v[j + 1] - v[j - 1]) / (2.0 * ds);
        d[n - 1] = (v[n - 1] - v[n - 2]) / ds;
    }
}

HedgeQuote PriceSurface::quote(double t, double s) const {
    HedgeQuote q;
    const double t_max = grid_.maturity;
    if (s < grid_.s_min || s > grid_.s_max || t < 0.0 || t > t_max * (1.0 + 1e-12)) q.clamped = true;
    const double tc = std::clamp(t, 0.0, t_max);
    const double sc = std::clamp(s, grid_.s_min, grid_.s_max);

    const double ti = tc / grid_.dt();
    auto i0 = static_cast<std::size_t>(std::floor(ti));
    i0 = std::min(i0, grid_.n_time - 1);
    const double wt = std::clamp(ti - static_cast<double>(i0), 0.0, 1.0);

    const double sj = (sc - grid_.s_min) / grid_.ds();
    auto j0 = static_cast<std::size_t>(std::floor(sj));
    j0 = std::min(j0, grid_.n_space - 2);
    const double ws = std::clamp(sj - static_cast<double>(j0), 0.0, 1.0);

    auto blend = [&](const std::vector<double>& f) {
        const std::size_t n = grid_.n_space;
        const double lo = (1.0 - ws) * f[i0 * n + j0] + ws * f[i0 * n + j0 + 1];
        const double hi = (1.0 - ws) * f[(i0 + 1) * n + j0] + ws * f[(i0 + 1) * n + j0 + 1];
        return (1.0 - wt) * lo + wt * hi;
    };
    q.value = blend(values_);
    q.delta = blend(deltas_);
    return q;
}

// ---------------------------------------------------------------------------
// Solver

namespace {

enum class Stencil { central, forward, backward };

void solve_tridiagonal(const std::vector<double>& lower, const std::vector<double>& diag,
                       const std::vector<double>& upper, std::vector<double>& rhs,
                       std::vector<double>& scratch) {
    const std::size_t n = diag.size();
    scratch.resize(n);
    double beta = diag[0];
    rhs[0] /= beta;
    for (std::size_t j = 1; j < n; ++j) {
        scratch[j] = upper[j - 1] / beta;
        beta = diag[j] - lower[j] * scratch[j];
        rhs[j] = (rhs[j] - lower[j] * rhs[j - 1]) / beta;
    }
    for (std::size_t j = n - 1; j-- > 0;) rhs[j] -= scratch[j + 1] * rhs[j + 1];
}

struct NodeModel {
    std::vector<double> s;
    std::vector<double> half_var;  // sigma^2 / 2
    std::vector<double> kappa;
    std::vector<Stencil> stencil;
};

NodeModel build_nodes(const AssetModel& asset, const Grid& grid, double t, double rl, double rb) {
    NodeModel m;
    const std::size_t n = grid.n_space;
    const double ds = grid.ds();
    m.s.resize(n);
    m.half_var.resize(n);
    m.kappa.resize(n);
    m.stencil.assign(n, Stencil::central);
    for (std::size_t j = 0; j < n; ++j) {
        const double s = grid.s(j);
        const double sig = asset.sigma(t, s);
        m.s[j] = s;
        m.half_var[j] = 0.5 * sig * sig;
        m.kappa[j] = asset.kappa(t, s);
        // Central differences keep the system an M-matrix while the diffusion
        // dominates the drift at this node under both rates.
        const double b_l = rl * s - m.kappa[j];
        const double b_b = rb * s - m.kappa[j];
        const double worst = std::max(std::abs(b_l), std::abs(b_b));
        if (sig * sig < worst * ds) {
            if (b_l >= 0.0 && b_b >= 0.0) m.stencil[j] = Stencil::forward;
            else if (b_l <= 0.0 && b_b <= 0.0) m.stencil[j] = Stencil::backward;
        }
    }
    return m;
}

double first_difference(Stencil st, const std::vector<double>& v, std::size_t j, double ds) {
    switch (st) {
        case Stencil::forward: return (v[j + 1] - v[j]) / ds;
        case Stencil::backward: return (v[j] - v[j - 1]) / ds;
        case Stencil::central: break;
    }
    return (v[j + 1] - v[j - 1]) / (2.0 * ds);
}

}  // namespace

PriceSurface solve_pde(Party party, const RateModel& rates, const AssetModel& asset,
                       const ContractSpec& contract, double endowment, const Grid& grid,
                       const PdeOptions& options) {
    grid.validate();
    contract.validate();
    if (contract.has_collateral())
        throw ContractError("the PDE engine prices uncollateralized claims only (C must be 0)");
    if (!contract.flows.empty())
        throw ContractError("the PDE engine prices a single terminal payoff; intermediate flows are not supported");
    if (std::abs(grid.maturity - contract.maturity) > 1e-12 * contract.maturity)
        throw std::invalid_argument("grid maturity differs from contract maturity");
    if (rates.horizon() < contract.maturity * (1.0 - 1e-12))
        throw std::invalid_argument("rate horizon ends before contract maturity");
    asset.validate_for_pricing(rates);

    const std::size_t n = grid.n_space;
    const std::size_t nt = grid.n_time;
    const double ds = grid.ds();
    const double dt = grid.dt();
    const double sign = party == Party::hedger ? 1.0 : -1.0;
    const double slope_lo = contract.payoff.slope(grid.s_min);
    const double slope_hi = contract.payoff.slope(grid.s_max);

    std::vector<double> values((nt + 1) * n);
    for (std::size_t j = 0; j < n; ++j) values[nt * n + j] = contract.payoff(grid.s(j));

    std::vector<double> v(n), v_old(n), lower(n), diag(n), upper(n), rhs(n), scratch(n);
    std::vector<double> rate(n);
    PdeDiagnostics diag_out;

    auto cash_state = [&](double value, double dvds, double s, double e) {
        // Hedger: v + e - s v_s ; counterparty: -v + e + s v_s.
        return sign * (value - s * dvds) + e;
    };

    for (std::size_t i = nt; i-- > 0;) {
        const double t = grid.t(i);
        const double rl = rates.rate(Account::lend, t);
        const double rb = rates.rate(Account::borrow, t);
        const double e = endowment_offset(rates, t, endowment);
        const double c = endowment_accrual(rates, t, endowment);
        const NodeModel nodes = build_nodes(asset, grid, t, rl, rb);

        std::copy_n(values.begin() + static_cast<std::ptrdiff_t>((i + 1) * n), n, v_old.begin());
        v = v_old;

        auto select_rates = [&](const std::vector<double>& w) {
            long switches = 0;
            for (std::size_t j = 0; j < n; ++j) {
                double dvds;
                if (j == 0) dvds = slope_lo;
                else if (j == n - 1) dvds = slope_hi;
                else dvds = first_difference(nodes.stencil[j], w, j, ds);
                const double next = cash_state(w[j], dvds, nodes.s[j], e) >= 0.0 ? rl : rb;
                if (next != rate[j]) ++switches;
                rate[j] = next;
            }
            return switches;
        };
        select_rates(v);

        int iter = 0;
        double change = 0.0;
        bool converged = false;
        while (iter < options.max_iterations) {
            ++iter;
            // Rows of (I - dt L_rho) v = v_old - dt * sign * (rho e - c).
            for (std::size_t j = 0; j < n; ++j) {
                const double rho = rate[j];
                const double source = sign * (rho * e - c);
                if (j == 0 || j == n - 1) {
                    const double slope = j == 0 ? slope_lo : slope_hi;
                    lower[j] = 0.0;
                    upper[j] = 0.0;
                    diag[j] = 1.0 + dt * rho;
                    rhs[j] = v_old[j] + dt * ((rho * nodes.s[j] - nodes.kappa[j]) * slope - source);
                    continue;
                }
                const double a = nodes.half_var[j] / (ds * ds);
                const double b = rho * nodes.s[j] - nodes.kappa[j];
                double lo = a, up = a, mid = -2.0 * a - rho;
                switch (nodes.stencil[j]) {
                    case Stencil::central:
                        lo -= b / (2.0 * ds);
                        up += b / (2.0 * ds);
                        break;
                    case Stencil::forward:
                        up += b / ds;
                        mid -= b / ds;
                        break;
                    case Stencil::backward:
                        lo -= b / ds;
                        mid += b / ds;
                        break;
                }
                lower[j] = -dt * lo;
                upper[j] = -dt * up;
                diag[j] = 1.0 - dt * mid;
                rhs[j] = v_old[j] - dt * source;
            }
            solve_tridiagonal(lower, diag, upper, rhs, scratch);

            change = 0.0;
            for (std::size_t j = 0; j < n; ++j) change = std::max(change, std::abs(rhs[j] - v[j]));
            v.swap(rhs);
            const long switches = select_rates(v);
            diag_out.policy_switches += switches;
            if (switches == 0 || change < options.tolerance) {
                converged = true;
                break;
            }
        }
        diag_out.total_iterations += iter;
        diag_out.max_iterations_per_step = std::max(diag_out.max_iterations_per_step, iter);
        if (!converged) {
            std::ostringstream msg;
            msg << "rate-policy iteration did not converge at t = " << t << " after " << iter
                << " sweeps (sup-norm change " << change << ")";
            throw ConvergenceError(msg.str(), change, iter);
        }
        for (std::size_t j = 0; j < n; ++j) {
            if (!std::isfinite(v[j])) {
                std::ostringstream msg;
                msg << "non-finite value at t = " << t << ", s = " << nodes.s[j];
                throw NumericalError(msg.str());
            }
        }
        std::copy(v.begin(), v.end(), values.begin() + static_cast<std::ptrdiff_t>(i * n));
    }
    return PriceSurface(grid, party, endowment, std::move(values), diag_out);
}

double richardson_error_estimate(Party party, const RateModel& rates, const AssetModel& asset,
                                 const ContractSpec& contract, double endowment, const Grid& grid,
                                 double spot, const PdeOptions& options) {
    const auto fine = solve_pde(party, rates, asset, contract, endowment, grid, options);
    const auto coarse = solve_pde(party, rates, asset, contract, endowment, coarsened(grid), options);
    return std::abs(fine.quote(0.0, spot).value - coarse.quote(0.0, spot).value);
}

FairRange fair_range(const PriceSurface& hedger, const PriceSurface& counterparty, double t,
                     double s, double grid_tolerance) {
    if (!(hedger.grid() == counterparty.grid()))
        throw std::invalid_argument("fair range needs surfaces on the same grid");
    if (hedger.party() != Party::hedger || counterparty.party() != Party::counterparty)
        throw std::invalid_argument("fair range needs a hedger and a counterparty surface");
    FairRange r;
    r.low = counterparty.quote(t, s).value;
    r.high = hedger.quote(t, s).value;
    r.empty = r.low > r.high + 1e-8 + grid_tolerance;
    return r;
}

double girsanov_drift(const AssetModel& asset, const RateModel& rates, double t, double s,
                      MeasureKind measure) {
    const double sig = asset.sigma(t, s);
    if (!(std::abs(sig) >= 1e-10)) {
        std::ostringstream msg;
        msg << "volatility " << sig << " too small for a measure change at s = " << s;
        throw DomainError(msg.str());
    }
    const double target = measure == MeasureKind::beta ? asset.beta(t, s) * s
                                                       : rates.rate(Account::lend, t) * s;
    return (asset.mu(t, s) + asset.kappa(t, s) - target) / sig;
}

}  // namespace dualrate
