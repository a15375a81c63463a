#include "dualrate/commands.hpp"

#include "dualrate/hedge_sim.hpp"
#include "dualrate/pde_engine.hpp"
#include "dualrate/tree_bsde.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <memory>
#include <sstream>

namespace dualrate {

using nlohmann::json;

namespace {

struct Quote {
    double price = 0.0;
    double delta = 0.0;
};

struct TwoSided {
    Quote hedger;
    Quote counterparty;
    double tolerance = 0.0;  ///< combined error estimate of the two prices
    json diagnostics;
};

struct Market {
    RateModel rates;
    AssetModel asset;
    ContractSpec contract;
};

Market build_market(const RunConfig& cfg) { return {cfg.rate_model(), cfg.asset_model(), cfg.contract()}; }

bool pde_usable(const RunConfig& cfg, const ContractSpec& contract) {
    return cfg.pde_enabled && !contract.has_collateral() && contract.flows.empty();
}

TwoSided pde_prices(const RunConfig& cfg, const Market& m) {
    const Grid grid = cfg.grid();
    TwoSided out;
    const auto h = solve_hedger_pde(m.rates, m.asset, m.contract, cfg.x1, grid);
    const auto c = solve_counterparty_pde(m.rates, m.asset, m.contract, cfg.x2, grid);
    const auto qh = h.quote(0.0, cfg.spot);
    const auto qc = c.quote(0.0, cfg.spot);
    out.hedger = {qh.value, qh.delta};
    out.counterparty = {qc.value, qc.delta};
    out.tolerance = richardson_error_estimate(Party::hedger, m.rates, m.asset, m.contract, cfg.x1, grid, cfg.spot) +
                    richardson_error_estimate(Party::counterparty, m.rates, m.asset, m.contract, cfg.x2, grid,
                                              cfg.spot);
    out.diagnostics = {
        {"grid", {{"s_min", grid.s_min}, {"s_max", grid.s_max}, {"n_space", grid.n_space}, {"n_time", grid.n_time}}},
        {"hedger_policy_sweeps", h.diagnostics().total_iterations},
        {"counterparty_policy_sweeps", c.diagnostics().total_iterations},
    };
    return out;
}

Quote tree_quote(const RunConfig& cfg, const Market& m, Party party, double x, std::size_t steps) {
    const Lattice lat = build_lattice(m.asset, m.rates, cfg.spot, cfg.maturity, steps);
    const auto sol = backward_solve(lat, party, x, m.rates, m.asset, m.contract);
    return {sol.root() - m.contract.collateral_at(0.0, cfg.spot), sol.z(0, 0)};
}

TwoSided tree_prices(const RunConfig& cfg, const Market& m) {
    TwoSided out;
    const std::size_t n = cfg.tree_steps;
    out.hedger = tree_quote(cfg, m, Party::hedger, cfg.x1, n);
    out.counterparty = tree_quote(cfg, m, Party::counterparty, cfg.x2, n);
    const std::size_t half = std::max<std::size_t>(1, n / 2);
    out.tolerance = std::abs(out.hedger.price - tree_quote(cfg, m, Party::hedger, cfg.x1, half).price) +
                    std::abs(out.counterparty.price - tree_quote(cfg, m, Party::counterparty, cfg.x2, half).price);
    out.diagnostics = {{"n_steps", n}};
    return out;
}

json range_json(const TwoSided& p) {
    const double low = p.counterparty.price;
    const double high = p.hedger.price;
    return {{"low", low},
            {"high", high},
            {"width", high - low},
            {"tolerance", p.tolerance},
            {"empty", low > high + 1e-8 + p.tolerance}};
}

json solver_json(const TwoSided& p, const RunConfig& cfg) {
    json out = p.diagnostics;
    out["hedger"] = {{"endowment", cfg.x1}, {"price", p.hedger.price}, {"delta", p.hedger.delta}};
    out["counterparty"] = {{"endowment", cfg.x2}, {"price", p.counterparty.price}, {"delta", p.counterparty.delta}};
    out["fair_range"] = range_json(p);
    return out;
}

// Prices from the preferred solver: PDE when it applies, else the tree.
std::pair<TwoSided, std::string> primary_prices(const RunConfig& cfg, const Market& m) {
    if (pde_usable(cfg, m.contract)) return {pde_prices(cfg, m), "pde"};
    if (cfg.tree_enabled) return {tree_prices(cfg, m), "tree"};
    throw ConfigError({"solver: no enabled solver can price this contract"});
}

json stats_json(const ReplicationResult& r) {
    json warnings = r.warnings;
    return {{"party", to_string(r.party)},
            {"endowment", r.endowment},
            {"premium", r.premium},
            {"error_mean", r.stats.mean},
            {"error_std", r.stats.stddev},
            {"error_mean_abs", r.stats.mean_abs},
            {"error_max_abs", r.stats.max_abs},
            {"self_financing_residual", r.max_self_financing_residual},
            {"exclusivity_violations", r.exclusivity_violations},
            {"path_steps", r.total_steps},
            {"borrowing_steps", r.borrowing_steps},
            {"clamped_steps", r.clamped_steps},
            {"clamp_fraction", r.clamp_fraction},
            {"branch_mismatches", r.branch_mismatches},
            {"branch_mismatch_fraction", r.branch_mismatch_fraction},
            {"warnings", warnings}};
}

json netted_json(const NettedWealthReport& r) {
    return {{"n_paths", r.n_paths},
            {"premium", r.premium},
            {"statistic", r.statistic},
            {"standard_error", r.standard_error},
            {"arbitrage_flag", r.arbitrage_flag},
            {"min_discounted_netted_wealth", r.min_discounted_netted_wealth},
            {"surplus", r.surplus},
            {"surplus_standard_error", r.surplus_standard_error},
            {"mispricing_flag", r.mispricing_flag}};
}

}  // namespace

std::string format12(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.12g", v);
    return buf;
}

json rounded(const json& doc) {
    if (doc.is_number_float()) return round12(doc.get<double>());
    if (doc.is_array()) {
        json out = json::array();
        for (const auto& v : doc) out.push_back(rounded(v));
        return out;
    }
    if (doc.is_object()) {
        json out = json::object();
        for (const auto& item : doc.items()) out[item.key()] = rounded(item.value());
        return out;
    }
    return doc;
}

std::optional<SweepAxis> parse_sweep_axis(const std::string& name) {
    if (name == "x1") return SweepAxis::x1;
    if (name == "x2") return SweepAxis::x2;
    if (name == "spot") return SweepAxis::spot;
    if (name == "rate-spread") return SweepAxis::rate_spread;
    return std::nullopt;
}

const char* to_string(SweepAxis axis) {
    switch (axis) {
        case SweepAxis::x1: return "x1";
        case SweepAxis::x2: return "x2";
        case SweepAxis::spot: return "spot";
        case SweepAxis::rate_spread: return "rate-spread";
    }
    return "?";
}

CommandResult cmd_price(const RunConfig& cfg, const CommandOptions& options) {
    cfg.validate();
    const Market m = build_market(cfg);
    CommandResult res;
    json report = {{"command", "price"}, {"config", to_json(cfg)}};

    std::optional<TwoSided> pde, tree;
    if (pde_usable(cfg, m.contract)) {
        pde = pde_prices(cfg, m);
        report["pde"] = solver_json(*pde, cfg);
    } else {
        report["pde"] = {{"skipped", cfg.pde_enabled ? "the PDE engine requires C = 0 and no intermediate flows"
                                                     : "disabled"}};
    }
    if (cfg.tree_enabled) {
        tree = tree_prices(cfg, m);
        report["tree"] = solver_json(*tree, cfg);
    } else {
        report["tree"] = {{"skipped", "disabled"}};
    }
    if (!pde && !tree) throw ConfigError({"solver: no enabled solver can price this contract"});

    const TwoSided& primary = pde ? *pde : *tree;
    json range = range_json(primary);
    range["source"] = pde ? "pde" : "tree";
    report["fair_range"] = range;
    if (options.require_nonempty_range && range["empty"].get<bool>()) res.exit_code = exit_codes::empty_range;
    report["exit_code"] = res.exit_code;
    res.report = rounded(report);
    return res;
}

CommandResult cmd_crosscheck(const RunConfig& cfg, const CommandOptions&) {
    cfg.validate();
    const Market m = build_market(cfg);
    if (!pde_usable(cfg, m.contract) || !cfg.tree_enabled)
        throw ConfigError({"solver: crosscheck needs both solvers enabled and an uncollateralized contract"});
    const TwoSided pde = pde_prices(cfg, m);
    const TwoSided tree = tree_prices(cfg, m);

    CommandResult res;
    json rows = json::array();
    bool breach = false;
    auto row = [&](const char* party, double x, double p, double t) {
        const double tol = std::max(0.005 * std::abs(p), 0.02);
        const bool pass = std::abs(p - t) <= tol;
        breach = breach || !pass;
        rows.push_back({{"party", party},
                        {"endowment", x},
                        {"pde", p},
                        {"tree", t},
                        {"abs_diff", std::abs(p - t)},
                        {"tolerance", tol},
                        {"pass", pass}});
    };
    row("hedger", cfg.x1, pde.hedger.price, tree.hedger.price);
    row("counterparty", cfg.x2, pde.counterparty.price, tree.counterparty.price);
    if (breach) res.exit_code = exit_codes::crosscheck_breach;
    res.report = rounded({{"command", "crosscheck"},
                          {"config", to_json(cfg)},
                          {"rows", rows},
                          {"pass", !breach},
                          {"exit_code", res.exit_code}});
    return res;
}

CommandResult cmd_hedge(const RunConfig& cfg, const CommandOptions& options) {
    cfg.validate();
    const Market m = build_market(cfg);
    const bool use_pde = pde_usable(cfg, m.contract);
    if (!use_pde && !cfg.tree_enabled) throw ConfigError({"solver: no enabled solver can hedge this contract"});

    SimulationSpec spec{cfg.spot, cfg.maturity, cfg.sim_steps, cfg.n_paths, cfg.seed, SimMeasure::physical};
    const PathSet physical = simulate_paths(m.asset, m.rates, spec);
    spec.measure = SimMeasure::lending;
    const PathSet lending = simulate_paths(m.asset, m.rates, spec);

    ReplicationOptions ropt;
    ropt.strict = options.strict;
    json parties = json::array();
    CommandResult res;

    for (Party party : {Party::hedger, Party::counterparty}) {
        const double x = party == Party::hedger ? cfg.x1 : cfg.x2;
        std::optional<PriceSurface> surface;
        std::optional<Lattice> lattice;
        std::optional<BackwardSolution> solution;
        std::unique_ptr<HedgeSource> source;
        if (use_pde) {
            surface = solve_pde(party, m.rates, m.asset, m.contract, x, cfg.grid());
            source = std::make_unique<SurfaceHedgeSource>(*surface);
        } else {
            lattice = build_lattice(m.asset, m.rates, cfg.spot, cfg.maturity, cfg.tree_steps);
            solution = backward_solve(*lattice, party, x, m.rates, m.asset, m.contract);
            source = std::make_unique<LatticeHedgeSource>(*lattice, *solution);
        }
        ReplicationOptions po = ropt;
        if (party == Party::hedger) po.keep_paths = options.dump_paths;
        const auto rep = replicate(*source, m.rates, m.asset, m.contract, {x}, physical, po);
        json entry = stats_json(rep);
        if (x >= 0.0) {
            entry["netted_wealth"] = netted_json(netted_wealth_check(*source, m.rates, m.asset, m.contract, {x},
                                                                     lending, ropt));
        } else {
            entry["netted_wealth"] = {{"skipped", "the netted-wealth check applies to x >= 0"}};
        }
        parties.push_back(entry);

        if (party == Party::hedger && !rep.paths.empty()) {
            std::ostringstream csv;
            csv << "path,step,t,s,xi,psi_l,psi_b,vp,v\n";
            for (std::size_t p = 0; p < rep.paths.size(); ++p) {
                const HedgePath& hp = rep.paths[p];
                for (std::size_t k = 0; k < hp.times.size(); ++k)
                    csv << p << ',' << k << ',' << format12(hp.times[k]) << ',' << format12(hp.prices[k]) << ','
                        << format12(hp.xi[k]) << ',' << format12(hp.psi_l[k]) << ',' << format12(hp.psi_b[k])
                        << ',' << format12(hp.vp[k]) << ',' << format12(hp.v[k]) << '\n';
            }
            res.csv = csv.str();
            res.csv_name = "hedge_paths.csv";
        }
    }
    res.report = rounded({{"command", "hedge"},
                          {"config", to_json(cfg)},
                          {"hedge_source", use_pde ? "pde" : "tree"},
                          {"simulation_measure", "physical"},
                          {"netted_wealth_measure", "lending"},
                          {"parties", parties},
                          {"exit_code", res.exit_code}});
    return res;
}

CommandResult cmd_sweep(const RunConfig& cfg, SweepAxis axis, const std::vector<double>& values,
                        const CommandOptions& options) {
    cfg.validate();
    if (values.empty()) throw ConfigError({"sweep: at least one value is required"});
    CommandResult res;
    std::ostringstream csv;
    csv << to_string(axis) << ",hedger_price,counterparty_price,range_width,range_empty,solver\n";
    json rows = json::array();
    bool any_empty = false;
    for (double v : values) {
        RunConfig point = cfg;
        switch (axis) {
            case SweepAxis::x1: point.x1 = v; break;
            case SweepAxis::x2: point.x2 = v; break;
            case SweepAxis::spot: point.spot = v; break;
            case SweepAxis::rate_spread: {
                point.r_b = point.r_l;
                for (auto& seg : point.r_b) seg.rate += v;
                double rb_max = 0.0;
                for (const auto& seg : point.r_b) rb_max = std::max(rb_max, seg.rate);
                if (!point.beta.scales_with_price()) point.beta.value = std::max(point.beta.value, rb_max);
                break;
            }
        }
        point.validate();
        const Market m = build_market(point);
        const auto [prices, solver] = primary_prices(point, m);
        const json range = range_json(prices);
        const bool empty = range["empty"].get<bool>();
        any_empty = any_empty || empty;
        csv << format12(v) << ',' << format12(prices.hedger.price) << ',' << format12(prices.counterparty.price)
            << ',' << format12(prices.hedger.price - prices.counterparty.price) << ',' << (empty ? 1 : 0) << ','
            << solver << '\n';
        rows.push_back({{"value", v},
                        {"hedger_price", prices.hedger.price},
                        {"counterparty_price", prices.counterparty.price},
                        {"range_width", prices.hedger.price - prices.counterparty.price},
                        {"range_empty", empty},
                        {"solver", solver}});
    }
    if (options.require_nonempty_range && any_empty) res.exit_code = exit_codes::empty_range;
    res.csv = csv.str();
    res.csv_name = std::string("sweep_") + to_string(axis) + ".csv";
    res.report = rounded({{"command", "sweep"},
                          {"config", to_json(cfg)},
                          {"axis", to_string(axis)},
                          {"rows", rows},
                          {"exit_code", res.exit_code}});
    return res;
}

}  // namespace dualrate
