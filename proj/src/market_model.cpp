#include "dualrate/market_model.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <sstream>

namespace dualrate {

namespace {

constexpr double time_slack = 1e-12;

double positive_part(double v) { return v > 0.0 ? v : 0.0; }
double negative_part(double v) { return v < 0.0 ? -v : 0.0; }

// Index of the first path time >= t.
std::size_t first_time_at_or_after(const std::vector<double>& times, double t) {
    const double tol = time_slack * std::max(1.0, std::abs(t));
    auto it = std::lower_bound(times.begin(), times.end(), t - tol);
    return static_cast<std::size_t>(it - times.begin());
}

}  // namespace

// ---------------------------------------------------------------------------
// Rates

PiecewiseConstantRate::PiecewiseConstantRate(std::vector<RateSegment> segments)
    : segments_(std::move(segments)) {
    if (segments_.empty()) throw std::invalid_argument("rate curve needs at least one segment");
    if (segments_.front().start != 0.0)
        throw std::invalid_argument("rate curve must start at t = 0");
    for (std::size_t i = 0; i < segments_.size(); ++i) {
        if (!std::isfinite(segments_[i].rate) || !std::isfinite(segments_[i].start))
            throw std::invalid_argument("rate curve values must be finite");
        if (i > 0 && !(segments_[i].start > segments_[i - 1].start))
            throw std::invalid_argument("rate segment starts must be strictly increasing");
    }
}

PiecewiseConstantRate PiecewiseConstantRate::constant(double rate) {
    return PiecewiseConstantRate({{0.0, rate}});
}

double PiecewiseConstantRate::at(double t) const {
    auto it = std::upper_bound(segments_.begin(), segments_.end(), t,
                               [](double v, const RateSegment& s) { return v < s.start; });
    if (it == segments_.begin()) return segments_.front().rate;
    return std::prev(it)->rate;
}

double PiecewiseConstantRate::integral(double from, double to) const {
    if (to < from) throw std::invalid_argument("integral bounds must satisfy from <= to");
    double total = 0.0;
    for (std::size_t i = 0; i < segments_.size(); ++i) {
        const double lo = (i == 0) ? -std::numeric_limits<double>::infinity() : segments_[i].start;
        const double hi = (i + 1 < segments_.size()) ? segments_[i + 1].start
                                                     : std::numeric_limits<double>::infinity();
        const double a = std::max(lo, from);
        const double b = std::min(hi, to);
        if (b > a) total += segments_[i].rate * (b - a);
    }
    return total;
}

double PiecewiseConstantRate::max_rate() const {
    return std::max_element(segments_.begin(), segments_.end(),
                            [](const auto& a, const auto& b) { return a.rate < b.rate; })
        ->rate;
}

double PiecewiseConstantRate::min_rate() const {
    return std::min_element(segments_.begin(), segments_.end(),
                            [](const auto& a, const auto& b) { return a.rate < b.rate; })
        ->rate;
}

RateModel::RateModel(PiecewiseConstantRate lend, PiecewiseConstantRate borrow,
                     PiecewiseConstantRate collateral, double horizon)
    : lend_(std::move(lend)),
      borrow_(std::move(borrow)),
      collateral_(std::move(collateral)),
      horizon_(horizon) {
    if (!(horizon_ > 0.0) || !std::isfinite(horizon_))
        throw std::invalid_argument("rate horizon must be positive and finite");
    std::vector<double> probes;
    for (const auto& s : lend_.segments()) probes.push_back(s.start);
    for (const auto& s : borrow_.segments()) probes.push_back(s.start);
    for (double t : probes) {
        if (t > horizon_) continue;
        const double rl = lend_.at(t);
        const double rb = borrow_.at(t);
        if (rl < 0.0) {
            std::ostringstream msg;
            msg << "lending rate must be nonnegative (r_l(" << t << ") = " << rl << ")";
            throw std::invalid_argument(msg.str());
        }
        if (rl > rb) {
            std::ostringstream msg;
            msg << "lending rate exceeds borrowing rate at t = " << t << " (" << rl << " > " << rb
                << ")";
            throw std::invalid_argument(msg.str());
        }
    }
}

RateModel RateModel::flat(double r_lend, double r_borrow, double r_collateral, double horizon) {
    return RateModel(PiecewiseConstantRate::constant(r_lend),
                     PiecewiseConstantRate::constant(r_borrow),
                     PiecewiseConstantRate::constant(r_collateral), horizon);
}

const PiecewiseConstantRate& RateModel::curve(Account which) const {
    switch (which) {
        case Account::lend: return lend_;
        case Account::borrow: return borrow_;
        case Account::collateral: return collateral_;
    }
    throw std::invalid_argument("unknown account");
}

void RateModel::check_time(double t) const {
    const double slack = time_slack * std::max(1.0, horizon_);
    if (!(t >= -slack && t <= horizon_ + slack)) {
        std::ostringstream msg;
        msg << "time " << t << " outside [0, " << horizon_ << "]";
        throw DomainError(msg.str());
    }
}

double account_value(const RateModel& rates, Account which, double t) {
    rates.check_time(t);
    return std::exp(rates.curve(which).integral(0.0, std::max(t, 0.0)));
}

double account_growth(const RateModel& rates, Account which, double from, double to) {
    rates.check_time(from);
    rates.check_time(to);
    if (to >= from) return std::exp(rates.curve(which).integral(from, to));
    return std::exp(-rates.curve(which).integral(to, from));
}

// ---------------------------------------------------------------------------
// Asset

double Coefficient::operator()(double /*t*/, double s) const {
    return form == CoefficientForm::constant ? value : value * s;
}

void AssetModel::validate_for_pricing(const RateModel& rates) const {
    if (!(sigma.value > 0.0) || !std::isfinite(sigma.value))
        throw DomainError("volatility coefficient must be positive");
    if (sigma.scales_with_price() && !(domain_lower >= 0.0))
        throw DomainError("price-proportional volatility requires a nonnegative price domain");
    const double rb_max = rates.curve(Account::borrow).max_rate();
    double beta_min = beta.value;
    if (beta.scales_with_price())
        beta_min = beta.value >= 0.0 ? beta.value * domain_lower : -std::numeric_limits<double>::infinity();
    if (beta_min < rb_max) {
        std::ostringstream msg;
        msg << "funding rate beta must dominate the borrowing rate (min beta " << beta_min
            << " < max r_b " << rb_max << ")";
        throw DomainError(msg.str());
    }
}

// ---------------------------------------------------------------------------
// Payoff

Payoff::Payoff(std::vector<Knot> knots, double left_slope, double right_slope)
    : knots_(std::move(knots)), left_slope_(left_slope), right_slope_(right_slope) {
    if (knots_.empty()) throw std::invalid_argument("payoff needs at least one knot");
    for (std::size_t i = 1; i < knots_.size(); ++i)
        if (!(knots_[i].s > knots_[i - 1].s))
            throw std::invalid_argument("payoff knots must be strictly increasing in s");
}

Payoff Payoff::call(double strike, double quantity) {
    return Payoff({{strike, 0.0}}, 0.0, quantity);
}

Payoff Payoff::put(double strike, double quantity) {
    return Payoff({{strike, 0.0}}, -quantity, 0.0);
}

Payoff Payoff::zero() { return Payoff({{0.0, 0.0}}, 0.0, 0.0); }

double Payoff::operator()(double s) const {
    if (s <= knots_.front().s) return knots_.front().value + left_slope_ * (s - knots_.front().s);
    if (s >= knots_.back().s) return knots_.back().value + right_slope_ * (s - knots_.back().s);
    auto it = std::upper_bound(knots_.begin(), knots_.end(), s,
                               [](double v, const Knot& k) { return v < k.s; });
    const Knot& hi = *it;
    const Knot& lo = *std::prev(it);
    const double w = (s - lo.s) / (hi.s - lo.s);
    return lo.value + w * (hi.value - lo.value);
}

double Payoff::slope(double s) const {
    if (s < knots_.front().s) return left_slope_;
    if (s >= knots_.back().s) return right_slope_;
    auto it = std::upper_bound(knots_.begin(), knots_.end(), s,
                               [](double v, const Knot& k) { return v < k.s; });
    const Knot& hi = *it;
    const Knot& lo = *std::prev(it);
    return (hi.value - lo.value) / (hi.s - lo.s);
}

Payoff Payoff::scaled(double factor) const {
    auto knots = knots_;
    for (auto& k : knots) k.value *= factor;
    return Payoff(std::move(knots), left_slope_ * factor, right_slope_ * factor);
}

// ---------------------------------------------------------------------------
// Contract

void ContractSpec::validate(std::span<const double> price_samples) const {
    if (!(maturity > 0.0) || !std::isfinite(maturity))
        throw ContractError("contract maturity must be positive");
    for (const auto& flow : flows) {
        if (!(flow.time > 0.0) || flow.time > maturity * (1.0 + time_slack))
            throw ContractError("intermediate flow times must lie in (0, T]");
        if (!flow.amount) throw ContractError("intermediate flow has no amount function");
    }
    if (!collateral) return;
    for (double s : price_samples) {
        const double c = collateral(maturity, s);
        if (std::abs(c) > 1e-12) {
            std::ostringstream msg;
            msg << "collateral must vanish at maturity (C(T, " << s << ") = " << c << ")";
            throw ContractError(msg.str());
        }
    }
}

void ContractSpec::validate() const {
    static constexpr std::array<double, 10> samples{1e-3, 1e-2, 0.1, 1.0, 10.0,
                                                    50.0, 100.0, 200.0, 1e3, 1e4};
    validate(samples);
}

ContractSpec ContractSpec::negated() const {
    ContractSpec out;
    out.payoff = payoff.scaled(-1.0);
    out.maturity = maturity;
    out.initial_flow = -initial_flow;
    for (const auto& flow : flows) {
        auto amount = flow.amount;
        out.flows.push_back({flow.time, [amount](double s) { return -amount(s); }});
    }
    if (collateral) {
        auto c = collateral;
        out.collateral = [c](double t, double s) { return -c(t, s); };
    }
    return out;
}

// ---------------------------------------------------------------------------
// Path-level processes

void SamplePath::validate() const {
    if (times.empty() || times.size() != prices.size())
        throw std::invalid_argument("path needs matching, nonempty time and price samples");
    for (std::size_t k = 1; k < times.size(); ++k)
        if (!(times[k] > times[k - 1]))
            throw std::invalid_argument("path times must be strictly increasing");
}

double SamplePath::price_at(double t) const {
    if (t <= times.front()) return prices.front();
    if (t >= times.back()) return prices.back();
    auto it = std::upper_bound(times.begin(), times.end(), t);
    const std::size_t k = static_cast<std::size_t>(it - times.begin());
    const double w = (t - times[k - 1]) / (times[k] - times[k - 1]);
    return prices[k - 1] + w * (prices[k] - prices[k - 1]);
}

std::vector<double> funding_process_fc(const RateModel& rates, const ContractSpec& contract,
                                       const SamplePath& path) {
    path.validate();
    std::vector<double> out(path.times.size(), 0.0);
    if (!contract.has_collateral()) return out;
    const auto& rc = rates.curve(Account::collateral);
    double prev = rc.at(path.times[0]) * contract.collateral_at(path.times[0], path.prices[0]);
    for (std::size_t k = 1; k < path.times.size(); ++k) {
        const double cur = rc.at(path.times[k]) * contract.collateral_at(path.times[k], path.prices[k]);
        out[k] = out[k - 1] - 0.5 * (prev + cur) * (path.times[k] - path.times[k - 1]);
        prev = cur;
    }
    return out;
}

namespace {

struct PathFlow {
    std::size_t index;  // path index at which the flow is settled
    double time;
    double amount;      // A-increment
};

// Contract flows in (0, T] mapped onto the path, including -H at maturity.
std::vector<PathFlow> settle_flows(const ContractSpec& contract, const SamplePath& path) {
    std::vector<PathFlow> out;
    auto add = [&](double time, const std::function<double(double)>& amount) {
        const std::size_t k = first_time_at_or_after(path.times, time);
        if (k >= path.times.size()) return;
        out.push_back({k, time, amount(path.prices[k])});
    };
    for (const auto& flow : contract.flows) add(flow.time, flow.amount);
    add(contract.maturity, [&](double s) { return -contract.payoff(s); });
    std::stable_sort(out.begin(), out.end(),
                     [](const PathFlow& a, const PathFlow& b) { return a.index < b.index; });
    return out;
}

}  // namespace

std::vector<double> cumulative_ac(const RateModel& rates, const ContractSpec& contract,
                                  const SamplePath& path, Discounting discount) {
    path.validate();
    const auto flows = settle_flows(contract, path);
    const auto fc = funding_process_fc(rates, contract, path);
    const std::size_t n = path.times.size();
    std::vector<double> out(n, 0.0);

    if (discount == Discounting::none) {
        double a = contract.initial_flow;
        std::size_t next = 0;
        for (std::size_t k = 0; k < n; ++k) {
            while (next < flows.size() && flows[next].index <= k) a += flows[next++].amount;
            out[k] = a + contract.collateral_at(path.times[k], path.prices[k]) + fc[k];
        }
        return out;
    }

    const Account acct = discount == Discounting::lend ? Account::lend : Account::borrow;
    const auto& rc = rates.curve(Account::collateral);
    auto inv_b = [&](double t) { return 1.0 / account_value(rates, acct, t); };

    double total = 0.0;
    std::size_t next = 0;
    // Flows settled at index 0 would sit at t = 0, outside (0, t].
    while (next < flows.size() && flows[next].index == 0 && path.times[0] <= 0.0) ++next;
    double c_prev = contract.collateral_at(path.times[0], path.prices[0]);
    double d_prev = inv_b(path.times[0]);
    for (std::size_t k = 1; k < n; ++k) {
        const double c_cur = contract.collateral_at(path.times[k], path.prices[k]);
        const double d_cur = inv_b(path.times[k]);
        const double dt = path.times[k] - path.times[k - 1];
        total += 0.5 * (d_prev + d_cur) * (c_cur - c_prev);
        total -= 0.5 * dt *
                 (d_prev * rc.at(path.times[k - 1]) * c_prev + d_cur * rc.at(path.times[k]) * c_cur);
        while (next < flows.size() && flows[next].index <= k) {
            total += flows[next].amount * inv_b(flows[next].time);
            ++next;
        }
        out[k] = total;
        c_prev = c_cur;
        d_prev = d_cur;
    }
    return out;
}

std::vector<double> netted_funding_u(const RateModel& rates, const ContractSpec& contract,
                                     const SamplePath& path, double step) {
    if (!(step > 0.0)) throw std::invalid_argument("Euler step size must be positive");
    path.validate();
    const auto flows = settle_flows(contract, path);
    const auto& rl = rates.curve(Account::lend);
    const auto& rb = rates.curve(Account::borrow);
    const auto& rc = rates.curve(Account::collateral);

    std::vector<double> out(path.times.size());
    double u = -contract.initial_flow;
    std::size_t next = 0;
    while (next < flows.size() && flows[next].index == 0) u -= flows[next++].amount;
    out[0] = u;
    for (std::size_t k = 1; k < path.times.size(); ++k) {
        const double t0 = path.times[k - 1];
        const double span = path.times[k] - t0;
        const auto n_sub = static_cast<std::size_t>(std::max(1.0, std::ceil(span / step - 1e-9)));
        const double h = span / static_cast<double>(n_sub);
        for (std::size_t m = 0; m < n_sub; ++m) {
            const double tau = t0 + static_cast<double>(m) * h;
            const double c = contract.collateral_at(tau, path.price_at(tau));
            const double gap = u - c;
            u += h * (rl.at(tau) * positive_part(gap) - rb.at(tau) * negative_part(gap) + rc.at(tau) * c);
        }
        while (next < flows.size() && flows[next].index <= k) u -= flows[next++].amount;
        out[k] = u;
    }
    return out;
}

double endowment_leg(const RateModel& rates, Endowment x, double t) {
    rates.check_time(t);
    if (x.x > 0.0) return x.x * account_value(rates, Account::lend, t);
    if (x.x < 0.0) return x.x * account_value(rates, Account::borrow, t);
    return 0.0;
}

}  // namespace dualrate
