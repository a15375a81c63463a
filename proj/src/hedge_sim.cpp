#include "dualrate/hedge_sim.hpp"

#include "dualrate/rng.hpp"

#include <algorithm>
#include <cmath>
#include <exception>
#include <limits>
#include <sstream>
#include <thread>

namespace dualrate {

// ---------------------------------------------------------------------------
// Paths

PathSet::PathSet(AssetModel asset, std::optional<RateModel> rates, SimulationSpec spec)
    : asset_(std::move(asset)), rates_(std::move(rates)), spec_(spec) {
    if (spec_.n_steps < 1) throw std::invalid_argument("simulation needs at least one step");
    if (spec_.n_paths < 1) throw std::invalid_argument("simulation needs at least one path");
    if (!(spec_.maturity > 0.0)) throw std::invalid_argument("simulation horizon must be positive");
    if (spec_.measure != SimMeasure::physical && !rates_)
        throw std::invalid_argument("a measure change needs the rate model");
    times_.resize(spec_.n_steps + 1);
    for (std::size_t k = 0; k <= spec_.n_steps; ++k)
        times_[k] = spec_.maturity * static_cast<double>(k) / static_cast<double>(spec_.n_steps);
}

void PathSet::fill(std::size_t k, std::vector<double>& prices) const {
    if (k >= spec_.n_paths) throw std::out_of_range("path index out of range");
    const std::size_t n = spec_.n_steps;
    const double dt = spec_.maturity / static_cast<double>(n);
    const double sqrt_dt = std::sqrt(dt);
    prices.resize(n + 1);
    prices[0] = spec_.s0;
    NormalStream normals(spec_.seed, k);
    for (std::size_t i = 0; i < n; ++i) {
        const double t = times_[i];
        const double s = prices[i];
        const double sig = asset_.sigma(t, s);
        double drift = asset_.mu(t, s);
        if (spec_.measure != SimMeasure::physical) {
            const auto kind = spec_.measure == SimMeasure::beta ? MeasureKind::beta : MeasureKind::lending;
            drift -= sig * girsanov_drift(asset_, *rates_, t, s, kind);
        }
        prices[i + 1] = s + drift * dt + sig * sqrt_dt * normals.next();
    }
}

SamplePath PathSet::path(std::size_t k) const {
    SamplePath p;
    p.times = times_;
    fill(k, p.prices);
    return p;
}

PathSet simulate_paths(const AssetModel& asset, double s0, double maturity, std::size_t n_steps,
                       std::size_t n_paths, std::uint64_t seed) {
    return PathSet(asset, std::nullopt, {s0, maturity, n_steps, n_paths, seed, SimMeasure::physical});
}

PathSet simulate_paths(const AssetModel& asset, const RateModel& rates, const SimulationSpec& spec) {
    return PathSet(asset, rates, spec);
}

// ---------------------------------------------------------------------------
// Hedge sources

HedgeQuote LatticeHedgeSource::quote(double t, double s) const {
    const std::size_t n = lattice_.n_steps;
    const auto level = static_cast<std::size_t>(std::max(0.0, std::floor(t / lattice_.dt + 1e-9)));
    const std::size_t i = std::min(level, n);
    HedgeQuote q;
    if (t < -1e-12 || t > lattice_.maturity * (1.0 + 1e-12)) q.clamped = true;
    if (i == 0) {
        q.value = solution_.y(0, 0);
        q.delta = solution_.z(0, 0);
        q.clamped = q.clamped || std::abs(s - lattice_.s(0, 0)) > 1e-9 * std::abs(lattice_.s(0, 0));
        return q;
    }
    const double lo = lattice_.s(i, 0);
    const double hi = lattice_.s(i, i);
    if (s <= lo || s >= hi) {
        const std::size_t j = s <= lo ? 0 : i;
        q.value = solution_.y(i, j);
        q.delta = solution_.z(i, j);
        q.clamped = q.clamped || s < lo || s > hi;
        return q;
    }
    // Level prices increase with j.
    std::size_t a = 0, b = i;
    while (b - a > 1) {
        const std::size_t mid = (a + b) / 2;
        if (lattice_.s(i, mid) <= s) a = mid;
        else b = mid;
    }
    const double w = (s - lattice_.s(i, a)) / (lattice_.s(i, b) - lattice_.s(i, a));
    q.value = (1.0 - w) * solution_.y(i, a) + w * solution_.y(i, b);
    q.delta = (1.0 - w) * solution_.z(i, a) + w * solution_.z(i, b);
    return q;
}

// ---------------------------------------------------------------------------
// Replication

ErrorStats summarize(const std::vector<double>& samples) {
    ErrorStats st;
    if (samples.empty()) return st;
    double sum = 0.0, sum_abs = 0.0;
    for (double e : samples) {
        sum += e;
        sum_abs += std::abs(e);
        st.max_abs = std::max(st.max_abs, std::abs(e));
    }
    const double n = static_cast<double>(samples.size());
    st.mean = sum / n;
    st.mean_abs = sum_abs / n;
    if (samples.size() > 1) {
        double ss = 0.0;
        for (double e : samples) ss += (e - st.mean) * (e - st.mean);
        st.stddev = std::sqrt(ss / (n - 1.0));
    }
    return st;
}

namespace {

// Fixed chunking keeps every reduction independent of the thread count.
constexpr std::size_t chunk_count = 64;

template <typename Fn>
void run_chunks(std::size_t n_items, Fn&& fn) {
    const std::size_t chunks = std::min(chunk_count, n_items);
    auto bounds = [&](std::size_t c) { return std::pair{c * n_items / chunks, (c + 1) * n_items / chunks}; };
    std::vector<std::exception_ptr> errors(chunks);
    auto work = [&](std::size_t first_chunk, std::size_t stride) {
        for (std::size_t c = first_chunk; c < chunks; c += stride) {
            try {
                const auto [b, e] = bounds(c);
                fn(c, b, e);
            } catch (...) {
                errors[c] = std::current_exception();
            }
        }
    };
    const std::size_t threads = std::max<std::size_t>(1, std::min<std::size_t>(std::thread::hardware_concurrency(), chunks));
    if (threads == 1) {
        work(0, 1);
    } else {
        std::vector<std::thread> pool;
        for (std::size_t t = 0; t < threads; ++t) pool.emplace_back(work, t, threads);
        for (auto& th : pool) th.join();
    }
    for (auto& err : errors)
        if (err) std::rethrow_exception(err);
}

struct Counters {
    double max_residual = 0.0;
    std::size_t exclusivity = 0;
    std::size_t steps = 0;
    std::size_t clamped = 0;
    std::size_t mismatches = 0;
    std::size_t borrowing = 0;

    void merge(const Counters& o) {
        max_residual = std::max(max_residual, o.max_residual);
        exclusivity += o.exclusivity;
        steps += o.steps;
        clamped += o.clamped;
        mismatches += o.mismatches;
        borrowing += o.borrowing;
    }
};

// Strategy state shared by every path of one run.
class Strategy {
public:
    Strategy(const HedgeSource& source, const RateModel& rates, const AssetModel& asset,
             const ContractSpec& contract, Endowment x, const PathSet& paths,
             const ReplicationOptions& options)
        : source_(source), rates_(rates), asset_(asset), x_(x) {
        contract.validate();
        const auto& times = paths.times();
        if (rates.horizon() < times.back() * (1.0 - 1e-12))
            throw std::invalid_argument("rate horizon ends before the simulation horizon");
        if (std::abs(times.back() - contract.maturity) > 1e-12 * contract.maturity)
            throw std::invalid_argument("simulation horizon differs from contract maturity");
        sign_ = source.party() == Party::hedger ? 1.0 : -1.0;
        const double s0 = paths.spec().s0;
        premium_ = options.premium ? *options.premium
                                   : source.quote(0.0, s0).value - contract.collateral_at(0.0, s0);
        party_contract_ = source.party() == Party::hedger ? contract : contract.negated();
        party_contract_.initial_flow = sign_ * premium_;

        const std::size_t n = times.size();
        bl_.resize(n);
        bb_.resize(n);
        offset_.resize(n);
        vl_.resize(n);
        for (std::size_t k = 0; k < n; ++k) {
            bl_[k] = account_value(rates, Account::lend, times[k]);
            bb_[k] = account_value(rates, Account::borrow, times[k]);
            offset_[k] = endowment_offset(rates, times[k], x.x);
            vl_[k] = endowment_leg(rates, x, times[k]);
        }
    }

    double premium() const { return premium_; }
    double sign() const { return sign_; }
    const ContractSpec& party_contract() const { return party_contract_; }
    double lend_account(std::size_t k) const { return bl_[k]; }
    double endowment_leg_at(std::size_t k) const { return vl_[k]; }

    // Runs one path; fills `wealth` with V_k and, when `record` is given, the
    // full holdings. Returns V_T - V^L_T(x).
    double run(const SamplePath& path, std::vector<double>& wealth, Counters& counters,
               HedgePath* record) const {
        const auto& t = path.times;
        const auto& s = path.prices;
        const std::size_t n = t.size() - 1;
        const auto ac = cumulative_ac(rates_, party_contract_, path, Discounting::none);
        wealth.resize(n + 1);
        if (record) {
            record->times = t;
            record->prices = s;
            record->xi.assign(n + 1, 0.0);
            record->psi_l.assign(n + 1, 0.0);
            record->psi_b.assign(n + 1, 0.0);
            record->vp.assign(n + 1, 0.0);
            record->v.assign(n + 1, 0.0);
        }
        double vp = x_.x + ac[0];
        for (std::size_t k = 0; k < n; ++k) {
            const HedgeQuote q = source_.quote(t[k], s[k]);
            ++counters.steps;
            if (q.clamped) ++counters.clamped;
            const double xi = sign_ * q.delta;
            const double cash = vp - xi * s[k];
            const double psi_l = cash > 0.0 ? cash / bl_[k] : 0.0;
            const double psi_b = cash < 0.0 ? cash / bb_[k] : 0.0;
            if (psi_l * psi_b != 0.0) ++counters.exclusivity;
            if (cash < 0.0) ++counters.borrowing;

            const double rebuilt = xi * s[k] + psi_l * bl_[k] + psi_b * bb_[k];
            counters.max_residual =
                std::max(counters.max_residual, std::abs(rebuilt - vp) / std::max(1.0, std::abs(vp)));

            const double model_cash = sign_ * q.value + offset_[k] - xi * s[k];
            const double scale = 1e-8 * std::max(1.0, std::abs(xi * s[k]));
            if (std::abs(model_cash) > scale && std::abs(cash) > scale && ((model_cash < 0.0) != (cash < 0.0)))
                ++counters.mismatches;

            const double c_k = party_contract_.collateral_at(t[k], s[k]);
            wealth[k] = vp - c_k;
            if (record) {
                record->xi[k] = xi;
                record->psi_l[k] = psi_l;
                record->psi_b[k] = psi_b;
                record->vp[k] = vp;
                record->v[k] = wealth[k];
            }
            const double dt = t[k + 1] - t[k];
            vp = xi * (s[k + 1] + asset_.kappa(t[k], s[k]) * dt) + psi_l * bl_[k + 1] +
                 psi_b * bb_[k + 1] + (ac[k + 1] - ac[k]);
        }
        wealth[n] = vp - party_contract_.collateral_at(t[n], s[n]);
        const double error = wealth[n] - vl_[n];
        if (record) {
            record->vp[n] = vp;
            record->v[n] = wealth[n];
            record->xi[n] = record->xi[n - 1];
            record->error = error;
        }
        return error;
    }

    void check_clamps(const Counters& c, const ReplicationOptions& options,
                      std::vector<std::string>& warnings) const {
        if (c.steps == 0) return;
        const double fraction = static_cast<double>(c.clamped) / static_cast<double>(c.steps);
        if (fraction <= options.clamp_limit) return;
        std::ostringstream msg;
        msg << "hedge lookups clamped at the solver boundary on " << fraction * 100.0
            << "% of path-steps (limit " << options.clamp_limit * 100.0 << "%)";
        if (options.strict) throw ClampError(msg.str());
        warnings.push_back(msg.str());
    }

private:
    const HedgeSource& source_;
    const RateModel& rates_;
    const AssetModel& asset_;
    Endowment x_;
    double sign_ = 1.0;
    double premium_ = 0.0;
    ContractSpec party_contract_;
    std::vector<double> bl_, bb_, offset_, vl_;
};

}  // namespace

ReplicationResult replicate(const HedgeSource& source, const RateModel& rates,
                            const AssetModel& asset, const ContractSpec& contract, Endowment x,
                            const PathSet& paths, const ReplicationOptions& options) {
    const Strategy strategy(source, rates, asset, contract, x, paths, options);
    const std::size_t n_paths = paths.size();

    ReplicationResult out;
    out.party = source.party();
    out.endowment = x.x;
    out.premium = strategy.premium();
    out.terminal_error.resize(n_paths);
    out.terminal_wealth.resize(n_paths);
    out.paths.resize(std::min(options.keep_paths, n_paths));

    std::vector<Counters> partial(chunk_count);
    run_chunks(n_paths, [&](std::size_t chunk, std::size_t begin, std::size_t end) {
        SamplePath path;
        path.times = paths.times();
        std::vector<double> wealth;
        for (std::size_t k = begin; k < end; ++k) {
            paths.fill(k, path.prices);
            HedgePath* record = k < out.paths.size() ? &out.paths[k] : nullptr;
            out.terminal_error[k] = strategy.run(path, wealth, partial[chunk], record);
            out.terminal_wealth[k] = wealth.back();
        }
    });
    Counters total;
    for (const auto& c : partial) total.merge(c);

    out.stats = summarize(out.terminal_error);
    out.max_self_financing_residual = total.max_residual;
    out.exclusivity_violations = total.exclusivity;
    out.total_steps = total.steps;
    out.clamped_steps = total.clamped;
    out.borrowing_steps = total.borrowing;
    out.branch_mismatches = total.mismatches;
    const double steps = static_cast<double>(std::max<std::size_t>(1, total.steps));
    out.clamp_fraction = static_cast<double>(total.clamped) / steps;
    out.branch_mismatch_fraction = static_cast<double>(total.mismatches) / steps;
    strategy.check_clamps(total, options, out.warnings);
    return out;
}

NettedWealthReport netted_wealth_check(const HedgeSource& source, const RateModel& rates,
                                       const AssetModel& asset, const ContractSpec& contract,
                                       Endowment x, const PathSet& paths,
                                       const ReplicationOptions& replication,
                                       const NettedWealthOptions& options) {
    const Strategy strategy(source, rates, asset, contract, x, paths, replication);
    const std::size_t n_paths = paths.size();
    const std::size_t n = paths.n_steps();

    std::vector<double> netted(n_paths), surplus(n_paths);
    std::vector<double> chunk_min(chunk_count, std::numeric_limits<double>::infinity());
    std::vector<Counters> partial(chunk_count);
    run_chunks(n_paths, [&](std::size_t chunk, std::size_t begin, std::size_t end) {
        SamplePath path;
        path.times = paths.times();
        std::vector<double> wealth;
        for (std::size_t k = begin; k < end; ++k) {
            paths.fill(k, path.prices);
            strategy.run(path, wealth, partial[chunk], nullptr);
            const auto u = netted_funding_u(rates, strategy.party_contract(), path, options.u_step);
            for (std::size_t i = 0; i <= n; ++i) {
                const double d = (wealth[i] + u[i] - strategy.endowment_leg_at(i)) / strategy.lend_account(i);
                chunk_min[chunk] = std::min(chunk_min[chunk], d);
            }
            netted[k] = (wealth[n] + u[n] - strategy.endowment_leg_at(n)) / strategy.lend_account(n);
            surplus[k] = (wealth[n] - strategy.endowment_leg_at(n)) / strategy.lend_account(n);
        }
    });
    Counters total;
    for (const auto& c : partial) total.merge(c);
    std::vector<std::string> ignored;
    strategy.check_clamps(total, replication, ignored);

    NettedWealthReport r;
    r.n_paths = n_paths;
    r.premium = strategy.premium();
    const auto root_n = std::sqrt(static_cast<double>(n_paths));
    const ErrorStats net = summarize(netted);
    r.statistic = net.mean;
    r.standard_error = net.stddev / root_n;
    // The floor absorbs rounding when every path is exactly neutral.
    const double noise = 1e-10 * std::max(1.0, std::abs(x.x));
    r.arbitrage_flag = r.statistic > 3.0 * r.standard_error + noise;
    r.min_discounted_netted_wealth = *std::min_element(chunk_min.begin(), chunk_min.end());
    const ErrorStats sur = summarize(surplus);
    r.surplus = sur.mean;
    r.surplus_standard_error = sur.stddev / root_n;
    r.mispricing_flag = r.surplus > 3.0 * r.surplus_standard_error + options.price_tolerance;
    return r;
}

}  // namespace dualrate
