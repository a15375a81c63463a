#pragma once

// Run configuration: JSON parsing, validation and serialization.

#include "dualrate/market_model.hpp"
#include "dualrate/pde_engine.hpp"

#include "json.hpp"

#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

namespace dualrate {

/// Validation failure; carries one message per offending field.
class ConfigError : public std::runtime_error {
public:
    explicit ConfigError(std::vector<std::string> problems);
    const std::vector<std::string>& problems() const { return problems_; }

private:
    std::vector<std::string> problems_;
};

struct PayoffSpec {
    std::string kind = "call";  ///< call | put | custom_piecewise_linear
    std::vector<double> strikes;
    std::vector<Payoff::Knot> points;
    double left_slope = 0.0;
    double right_slope = 0.0;
    double quantity = 1.0;
};

/// C(t, s) = (constant + slope * s) (T - t) / T for `linear_decay`.
struct CollateralSpec {
    std::string form = "none";  ///< none | linear_decay
    double constant = 0.0;
    double slope = 0.0;
};

struct RunConfig {
    std::vector<RateSegment> r_l{{0.0, 0.0}};
    std::vector<RateSegment> r_b{{0.0, 0.0}};
    std::vector<RateSegment> r_c{{0.0, 0.0}};

    double spot = 100.0;
    Coefficient mu = Coefficient::constant(0.0);
    Coefficient sigma = Coefficient::lognormal(0.2);
    Coefficient kappa = Coefficient::constant(0.0);
    Coefficient beta = Coefficient::constant(0.0);

    PayoffSpec payoff;
    double maturity = 1.0;
    CollateralSpec collateral;

    double x1 = 0.0;
    double x2 = 0.0;

    bool pde_enabled = true;
    double s_min = 0.0;
    double s_max = 400.0;
    std::size_t n_space = 401;
    std::size_t n_time = 500;

    bool tree_enabled = true;
    std::size_t tree_steps = 1000;

    std::size_t n_paths = 10000;
    std::size_t sim_steps = 250;
    std::uint64_t seed = 1;

    std::string output_dir = "out";

    RateModel rate_model() const;
    AssetModel asset_model() const;
    ContractSpec contract() const;
    Grid grid() const;

    /// Throws ConfigError listing every invalid field.
    void validate() const;
};

RunConfig parse_config(const nlohmann::json& doc);
RunConfig parse_config_text(const std::string& text);
RunConfig load_config(const std::string& path);
nlohmann::json to_json(const RunConfig& config);

/// Rounds to 12 significant digits, the precision of every report.
double round12(double v);

}  // namespace dualrate
