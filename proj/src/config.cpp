#include "dualrate/config.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <set>
#include <sstream>

namespace dualrate {

namespace {

using nlohmann::json;

std::string join(const std::vector<std::string>& parts) {
    std::string out = "invalid configuration:";
    for (const auto& p : parts) out += "\n  " + p;
    return out;
}

// Reads typed fields and records one problem per bad field instead of
// stopping at the first.
class Reader {
public:
    std::vector<std::string> problems;

    void fail(const std::string& field, const std::string& why) { problems.push_back(field + ": " + why); }

    const json* object(const json& parent, const std::string& key, const std::string& field,
                       std::initializer_list<const char*> allowed) {
        if (!parent.contains(key)) return nullptr;
        const json& node = parent.at(key);
        if (!node.is_object()) {
            fail(field, "expected an object");
            return nullptr;
        }
        check_keys(node, field, allowed);
        return &node;
    }

    void check_keys(const json& node, const std::string& field, std::initializer_list<const char*> allowed) {
        std::set<std::string> ok(allowed.begin(), allowed.end());
        for (const auto& item : node.items())
            if (!ok.count(item.key()))
                fail((field.empty() ? "" : field + ".") + item.key(), "unknown field");
    }

    void number(const json& parent, const std::string& key, const std::string& field, double& out) {
        if (!parent.contains(key)) return;
        const json& v = parent.at(key);
        if (!v.is_number() || !std::isfinite(v.get<double>())) return fail(field, "expected a finite number");
        out = v.get<double>();
    }

    template <typename Int>
    void count(const json& parent, const std::string& key, const std::string& field, Int& out) {
        if (!parent.contains(key)) return;
        const json& v = parent.at(key);
        if (!v.is_number_integer() || v.get<long long>() < 0)
            return fail(field, "expected a nonnegative integer");
        out = static_cast<Int>(v.get<unsigned long long>());
    }

    void boolean(const json& parent, const std::string& key, const std::string& field, bool& out) {
        if (!parent.contains(key)) return;
        const json& v = parent.at(key);
        if (!v.is_boolean()) return fail(field, "expected true or false");
        out = v.get<bool>();
    }

    void text(const json& parent, const std::string& key, const std::string& field, std::string& out) {
        if (!parent.contains(key)) return;
        const json& v = parent.at(key);
        if (!v.is_string()) return fail(field, "expected a string");
        out = v.get<std::string>();
    }

    void curve(const json& parent, const std::string& key, const std::string& field,
               std::vector<RateSegment>& out) {
        if (!parent.contains(key)) return;
        const json& v = parent.at(key);
        if (v.is_number()) {
            out = {{0.0, v.get<double>()}};
            return;
        }
        if (!v.is_array() || v.empty()) return fail(field, "expected a rate or a list of [t_start, rate] pairs");
        std::vector<RateSegment> segs;
        for (const auto& seg : v) {
            if (!seg.is_array() || seg.size() != 2 || !seg[0].is_number() || !seg[1].is_number())
                return fail(field, "each segment must be [t_start, rate]");
            segs.push_back({seg[0].get<double>(), seg[1].get<double>()});
        }
        out = std::move(segs);
    }

    void coefficient(const json& parent, const std::string& key, const std::string& field, Coefficient& out) {
        if (!parent.contains(key)) return;
        const json& v = parent.at(key);
        if (v.is_number()) {
            out = Coefficient::constant(v.get<double>());
            return;
        }
        if (!v.is_object()) return fail(field, "expected a number or {form, value}");
        check_keys(v, field, {"form", "value"});
        std::string form = "constant";
        text(v, "form", field + ".form", form);
        double value = 0.0;
        number(v, "value", field + ".value", value);
        if (form == "constant") out = Coefficient::constant(value);
        else if (form == "proportional") out = Coefficient::proportional(value);
        else if (form == "lognormal") out = Coefficient::lognormal(value);
        else fail(field + ".form", "unknown form '" + form + "' (constant, proportional, lognormal)");
    }
};

const char* form_name(CoefficientForm f) {
    switch (f) {
        case CoefficientForm::constant: return "constant";
        case CoefficientForm::proportional: return "proportional";
        case CoefficientForm::lognormal: return "lognormal";
    }
    return "constant";
}

json curve_json(const std::vector<RateSegment>& segs) {
    json out = json::array();
    for (const auto& s : segs) out.push_back({s.start, s.rate});
    return out;
}

json coefficient_json(const Coefficient& c) { return {{"form", form_name(c.form)}, {"value", c.value}}; }

}  // namespace

ConfigError::ConfigError(std::vector<std::string> problems)
    : std::runtime_error(join(problems)), problems_(std::move(problems)) {}

double round12(double v) {
    if (!std::isfinite(v) || v == 0.0) return v;
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.12g", v);
    return std::strtod(buf, nullptr);
}

RunConfig parse_config(const json& doc) {
    Reader rd;
    RunConfig cfg;
    if (!doc.is_object()) throw ConfigError({"(root): expected a JSON object"});
    rd.check_keys(doc, "", {"rates", "asset", "contract", "endowments", "solver", "simulation", "output"});

    if (const json* r = rd.object(doc, "rates", "rates", {"r_l", "r_b", "r_c"})) {
        rd.curve(*r, "r_l", "rates.r_l", cfg.r_l);
        rd.curve(*r, "r_b", "rates.r_b", cfg.r_b);
        rd.curve(*r, "r_c", "rates.r_c", cfg.r_c);
    }
    if (const json* a = rd.object(doc, "asset", "asset", {"spot", "mu", "sigma", "kappa", "beta"})) {
        rd.number(*a, "spot", "asset.spot", cfg.spot);
        rd.coefficient(*a, "mu", "asset.mu", cfg.mu);
        rd.coefficient(*a, "sigma", "asset.sigma", cfg.sigma);
        rd.coefficient(*a, "kappa", "asset.kappa", cfg.kappa);
        rd.coefficient(*a, "beta", "asset.beta", cfg.beta);
    }
    if (const json* c = rd.object(doc, "contract", "contract",
                                  {"payoff", "strikes", "quantity", "points", "left_slope", "right_slope",
                                   "maturity", "collateral"})) {
        rd.text(*c, "payoff", "contract.payoff", cfg.payoff.kind);
        if (c->contains("strikes")) {
            const json& s = c->at("strikes");
            if (s.is_number()) cfg.payoff.strikes = {s.get<double>()};
            else if (s.is_array() && std::all_of(s.begin(), s.end(), [](const json& v) { return v.is_number(); }))
                cfg.payoff.strikes = s.get<std::vector<double>>();
            else rd.fail("contract.strikes", "expected a number or a list of numbers");
        }
        rd.number(*c, "quantity", "contract.quantity", cfg.payoff.quantity);
        if (c->contains("points")) {
            const json& pts = c->at("points");
            bool ok = pts.is_array();
            std::vector<Payoff::Knot> knots;
            if (ok)
                for (const auto& p : pts) {
                    if (!p.is_array() || p.size() != 2 || !p[0].is_number() || !p[1].is_number()) {
                        ok = false;
                        break;
                    }
                    knots.push_back({p[0].get<double>(), p[1].get<double>()});
                }
            if (ok) cfg.payoff.points = std::move(knots);
            else rd.fail("contract.points", "expected a list of [s, value] pairs");
        }
        rd.number(*c, "left_slope", "contract.left_slope", cfg.payoff.left_slope);
        rd.number(*c, "right_slope", "contract.right_slope", cfg.payoff.right_slope);
        rd.number(*c, "maturity", "contract.maturity", cfg.maturity);
        if (const json* col = rd.object(*c, "collateral", "contract.collateral", {"form", "constant", "slope"})) {
            rd.text(*col, "form", "contract.collateral.form", cfg.collateral.form);
            rd.number(*col, "constant", "contract.collateral.constant", cfg.collateral.constant);
            rd.number(*col, "slope", "contract.collateral.slope", cfg.collateral.slope);
        }
    }
    if (const json* e = rd.object(doc, "endowments", "endowments", {"x1", "x2"})) {
        rd.number(*e, "x1", "endowments.x1", cfg.x1);
        rd.number(*e, "x2", "endowments.x2", cfg.x2);
    }
    if (const json* s = rd.object(doc, "solver", "solver", {"pde", "tree"})) {
        if (const json* p = rd.object(*s, "pde", "solver.pde", {"enabled", "s_min", "s_max", "n_space", "n_time"})) {
            rd.boolean(*p, "enabled", "solver.pde.enabled", cfg.pde_enabled);
            rd.number(*p, "s_min", "solver.pde.s_min", cfg.s_min);
            rd.number(*p, "s_max", "solver.pde.s_max", cfg.s_max);
            rd.count(*p, "n_space", "solver.pde.n_space", cfg.n_space);
            rd.count(*p, "n_time", "solver.pde.n_time", cfg.n_time);
        }
        if (const json* t = rd.object(*s, "tree", "solver.tree", {"enabled", "n_steps"})) {
            rd.boolean(*t, "enabled", "solver.tree.enabled", cfg.tree_enabled);
            rd.count(*t, "n_steps", "solver.tree.n_steps", cfg.tree_steps);
        }
    }
    if (const json* m = rd.object(doc, "simulation", "simulation", {"n_paths", "n_steps", "seed"})) {
        rd.count(*m, "n_paths", "simulation.n_paths", cfg.n_paths);
        rd.count(*m, "n_steps", "simulation.n_steps", cfg.sim_steps);
        rd.count(*m, "seed", "simulation.seed", cfg.seed);
    }
    if (const json* o = rd.object(doc, "output", "output", {"dir"})) rd.text(*o, "dir", "output.dir", cfg.output_dir);

    // Fields that failed to parse keep their defaults, so the semantic checks
    // still run and every problem is reported at once.
    try {
        cfg.validate();
    } catch (const ConfigError& e) {
        rd.problems.insert(rd.problems.end(), e.problems().begin(), e.problems().end());
    }
    if (!rd.problems.empty()) throw ConfigError(rd.problems);
    return cfg;
}

RunConfig parse_config_text(const std::string& text) {
    json doc;
    try {
        doc = json::parse(text);
    } catch (const json::parse_error& e) {
        throw ConfigError({std::string("(document): ") + e.what()});
    }
    return parse_config(doc);
}

RunConfig load_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError({path + ": cannot open file"});
    std::stringstream buf;
    buf << in.rdbuf();
    return parse_config_text(buf.str());
}

json to_json(const RunConfig& c) {
    json contract = {{"payoff", c.payoff.kind}, {"quantity", c.payoff.quantity}, {"maturity", c.maturity}};
    if (c.payoff.kind == "custom_piecewise_linear") {
        json pts = json::array();
        for (const auto& k : c.payoff.points) pts.push_back({k.s, k.value});
        contract["points"] = pts;
        contract["left_slope"] = c.payoff.left_slope;
        contract["right_slope"] = c.payoff.right_slope;
    } else {
        contract["strikes"] = c.payoff.strikes;
    }
    contract["collateral"] = {{"form", c.collateral.form}};
    if (c.collateral.form != "none") {
        contract["collateral"]["constant"] = c.collateral.constant;
        contract["collateral"]["slope"] = c.collateral.slope;
    }
    return {
        {"rates", {{"r_l", curve_json(c.r_l)}, {"r_b", curve_json(c.r_b)}, {"r_c", curve_json(c.r_c)}}},
        {"asset",
         {{"spot", c.spot},
          {"mu", coefficient_json(c.mu)},
          {"sigma", coefficient_json(c.sigma)},
          {"kappa", coefficient_json(c.kappa)},
          {"beta", coefficient_json(c.beta)}}},
        {"contract", contract},
        {"endowments", {{"x1", c.x1}, {"x2", c.x2}}},
        {"solver",
         {{"pde",
           {{"enabled", c.pde_enabled},
            {"s_min", c.s_min},
            {"s_max", c.s_max},
            {"n_space", c.n_space},
            {"n_time", c.n_time}}},
          {"tree", {{"enabled", c.tree_enabled}, {"n_steps", c.tree_steps}}}}},
        {"simulation", {{"n_paths", c.n_paths}, {"n_steps", c.sim_steps}, {"seed", c.seed}}},
        {"output", {{"dir", c.output_dir}}},
    };
}

// ---------------------------------------------------------------------------
// Model construction

RateModel RunConfig::rate_model() const {
    return RateModel(PiecewiseConstantRate(r_l), PiecewiseConstantRate(r_b), PiecewiseConstantRate(r_c),
                     maturity);
}

AssetModel RunConfig::asset_model() const {
    AssetModel a;
    a.mu = mu;
    a.sigma = sigma;
    a.kappa = kappa;
    a.beta = beta;
    return a;
}

ContractSpec RunConfig::contract() const {
    ContractSpec c;
    c.maturity = maturity;
    if (payoff.kind == "call") c.payoff = Payoff::call(payoff.strikes.at(0), payoff.quantity);
    else if (payoff.kind == "put") c.payoff = Payoff::put(payoff.strikes.at(0), payoff.quantity);
    else c.payoff = Payoff(payoff.points, payoff.left_slope, payoff.right_slope).scaled(payoff.quantity);
    if (collateral.form == "linear_decay") {
        const double a = collateral.constant, b = collateral.slope, T = maturity;
        c.collateral = [a, b, T](double t, double s) { return (a + b * s) * (T - t) / T; };
    }
    return c;
}

Grid RunConfig::grid() const { return {s_min, s_max, n_space, n_time, maturity}; }

void RunConfig::validate() const {
    std::vector<std::string> p;
    auto fail = [&](const std::string& field, const std::string& why) { p.push_back(field + ": " + why); };

    if (!(maturity > 0.0)) fail("contract.maturity", "must be positive");
    if (!(spot > 0.0)) fail("asset.spot", "must be positive");
    if (!(sigma.value > 0.0)) fail("asset.sigma", "must be positive");
    if (maturity > 0.0) {
        try {
            const RateModel rates = rate_model();
            try {
                asset_model().validate_for_pricing(rates);
            } catch (const std::exception& e) {
                fail("asset.beta", e.what());
            }
        } catch (const std::exception& e) {
            fail("rates", e.what());
        }
    }
    if (payoff.kind == "call" || payoff.kind == "put") {
        if (payoff.strikes.size() != 1) fail("contract.strikes", "call and put need exactly one strike");
    } else if (payoff.kind == "custom_piecewise_linear") {
        try {
            Payoff(payoff.points, payoff.left_slope, payoff.right_slope);
        } catch (const std::exception& e) {
            fail("contract.points", e.what());
        }
    } else {
        fail("contract.payoff", "unknown payoff '" + payoff.kind + "' (call, put, custom_piecewise_linear)");
    }
    if (collateral.form != "none" && collateral.form != "linear_decay")
        fail("contract.collateral.form", "unknown form '" + collateral.form + "' (none, linear_decay)");
    if (!(s_min >= 0.0)) fail("solver.pde.s_min", "must be nonnegative");
    if (!(s_max > s_min)) fail("solver.pde.s_max", "must exceed s_min");
    if (!(spot > s_min && spot < s_max)) fail("solver.pde", "spot must lie strictly inside [s_min, s_max]");
    if (n_space < 5) fail("solver.pde.n_space", "must be at least 5");
    if (n_time < 2) fail("solver.pde.n_time", "must be at least 2");
    if (tree_steps < 2) fail("solver.tree.n_steps", "must be at least 2");
    if (n_paths < 2) fail("simulation.n_paths", "must be at least 2");
    if (sim_steps < 1) fail("simulation.n_steps", "must be positive");
    if (output_dir.empty()) fail("output.dir", "must not be empty");
    if (!p.empty()) throw ConfigError(p);
}

}  // namespace dualrate
