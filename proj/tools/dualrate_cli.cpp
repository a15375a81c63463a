// dualrate: batch pricing, cross-checking, hedging and sweeps from a JSON config.

#include "dualrate/commands.hpp"
#include "dualrate/config.hpp"

#include "CLI11.hpp"

#include <filesystem>
#include <fstream>
#include <iostream>
#include <regex>

namespace {

using namespace dualrate;

struct Overrides {
    std::string grid;
    std::size_t tree_steps = 0;
    std::size_t paths = 0;
    std::optional<std::uint64_t> seed;
    std::string out;
};

void apply(const Overrides& o, RunConfig& cfg) {
    if (!o.grid.empty()) {
        static const std::regex shape(R"((\d+)x(\d+))");
        std::smatch m;
        if (!std::regex_match(o.grid, m, shape)) throw ConfigError({"--grid: expected NxM (space nodes x time steps)"});
        cfg.n_space = std::stoul(m[1]);
        cfg.n_time = std::stoul(m[2]);
    }
    if (o.tree_steps) cfg.tree_steps = o.tree_steps;
    if (o.paths) cfg.n_paths = o.paths;
    if (o.seed) cfg.seed = *o.seed;
    if (!o.out.empty()) cfg.output_dir = o.out;
    cfg.validate();
}

void write_outputs(const RunConfig& cfg, const std::string& name, const CommandResult& res,
                   bool print_csv = false) {
    namespace fs = std::filesystem;
    fs::create_directories(cfg.output_dir);
    const std::string text = res.report.dump(2) + "\n";
    std::ofstream(fs::path(cfg.output_dir) / (name + ".json")) << text;
    if (!res.csv.empty()) std::ofstream(fs::path(cfg.output_dir) / res.csv_name) << res.csv;
    std::cout << (print_csv ? res.csv : text);
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Pricing and hedging under differential lending/borrowing rates, collateral and endowments"};
    app.require_subcommand(1);

    std::string config_path;
    Overrides over;
    CommandOptions opts;
    std::string axis_name;
    std::vector<double> values;

    auto common = [&](CLI::App* sub) {
        sub->add_option("config", config_path, "JSON run configuration")->required();
        sub->add_option("--grid", over.grid, "PDE grid as NxM (space nodes x time steps)");
        sub->add_option("--tree-steps", over.tree_steps, "lattice steps");
        sub->add_option("--paths", over.paths, "simulated paths");
        sub->add_option("--seed", over.seed, "random seed");
        sub->add_option("--out", over.out, "output directory");
        sub->add_flag("--strict", opts.strict, "treat diagnostics warnings as errors");
        sub->add_flag("--require-nonempty-range", opts.require_nonempty_range,
                      "exit with code 2 when the fair price range is empty");
    };
    auto* price = app.add_subcommand("price", "prices for both parties and the fair range");
    auto* cross = app.add_subcommand("crosscheck", "PDE against lattice agreement table");
    auto* hedge = app.add_subcommand("hedge", "replication statistics and netted-wealth check");
    auto* sweep = app.add_subcommand("sweep", "price table over one parameter");
    for (auto* sub : {price, cross, hedge, sweep}) common(sub);
    hedge->add_option("--dump-paths", opts.dump_paths, "write the first N hedger paths to hedge_paths.csv");
    sweep->add_option("--axis", axis_name, "x1, x2, spot or rate-spread")->required();
    sweep->add_option("--values", values, "sweep points")->required()->delimiter(',');

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : exit_codes::config_error;
    }

    try {
        RunConfig cfg = load_config(config_path);
        apply(over, cfg);
        if (price->parsed()) {
            const auto res = cmd_price(cfg, opts);
            write_outputs(cfg, "price", res);
            return res.exit_code;
        }
        if (cross->parsed()) {
            const auto res = cmd_crosscheck(cfg, opts);
            write_outputs(cfg, "crosscheck", res);
            return res.exit_code;
        }
        if (hedge->parsed()) {
            const auto res = cmd_hedge(cfg, opts);
            write_outputs(cfg, "hedge", res);
            return res.exit_code;
        }
        const auto axis = parse_sweep_axis(axis_name);
        if (!axis) throw ConfigError({"--axis: expected x1, x2, spot or rate-spread"});
        const auto res = cmd_sweep(cfg, *axis, values, opts);
        write_outputs(cfg, "sweep", res, true);
        return res.exit_code;
    } catch (const ConfigError& e) {
        std::cerr << e.what() << "\n";
        return exit_codes::config_error;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return exit_codes::runtime_error;
    }
}
