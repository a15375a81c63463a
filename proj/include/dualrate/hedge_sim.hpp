#pragma once

// Path simulation and discrete-time replication of a contract by either
// party, with the audits of a self-financing strategy and the netted-wealth
// no-arbitrage diagnostic.

#include "dualrate/market_model.hpp"
#include "dualrate/pde_engine.hpp"
#include "dualrate/tree_bsde.hpp"

#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

namespace dualrate {

enum class SimMeasure {
    physical,  ///< drift mu
    beta,      ///< drift beta s - kappa
    lending,   ///< drift r_l s - kappa
};

struct SimulationSpec {
    double s0 = 100.0;
    double maturity = 1.0;
    std::size_t n_steps = 250;
    std::size_t n_paths = 1000;
    std::uint64_t seed = 1;
    SimMeasure measure = SimMeasure::physical;
};

/// Euler-Maruyama paths on a uniform grid. Path k is regenerated on demand
/// from the (seed, k) random stream, so the set holds no per-path storage.
class PathSet {
public:
    PathSet(AssetModel asset, std::optional<RateModel> rates, SimulationSpec spec);

    std::size_t size() const { return spec_.n_paths; }
    std::size_t n_steps() const { return spec_.n_steps; }
    const SimulationSpec& spec() const { return spec_; }
    const std::vector<double>& times() const { return times_; }

    /// Writes the n_steps + 1 prices of path k into `prices`.
    void fill(std::size_t k, std::vector<double>& prices) const;
    SamplePath path(std::size_t k) const;

private:
    AssetModel asset_;
    std::optional<RateModel> rates_;
    SimulationSpec spec_;
    std::vector<double> times_;
};

/// Paths under the physical measure.
PathSet simulate_paths(const AssetModel& asset, double s0, double maturity, std::size_t n_steps,
                       std::size_t n_paths, std::uint64_t seed);

/// Paths re-drifted by girsanov_drift (or left under P for `physical`).
PathSet simulate_paths(const AssetModel& asset, const RateModel& rates, const SimulationSpec& spec);

/// Price state and hedge ratio of one party's pricing BSDE, as a function
/// of (t, S). Values are Y (price plus collateral), deltas are Z.
class HedgeSource {
public:
    virtual ~HedgeSource() = default;
    virtual Party party() const = 0;
    virtual HedgeQuote quote(double t, double s) const = 0;
};

class SurfaceHedgeSource : public HedgeSource {
public:
    explicit SurfaceHedgeSource(const PriceSurface& surface) : surface_(surface) {}
    Party party() const override { return surface_.party(); }
    HedgeQuote quote(double t, double s) const override { return surface_.quote(t, s); }

private:
    const PriceSurface& surface_;
};

/// Reads the lattice level at or before t and interpolates linearly in s
/// between its nodes.
class LatticeHedgeSource : public HedgeSource {
public:
    LatticeHedgeSource(const Lattice& lattice, const BackwardSolution& solution)
        : lattice_(lattice), solution_(solution) {}
    Party party() const override { return solution_.party(); }
    HedgeQuote quote(double t, double s) const override;

private:
    const Lattice& lattice_;
    const BackwardSolution& solution_;
};

/// No position in the asset and a zero price state.
class NullHedgeSource : public HedgeSource {
public:
    explicit NullHedgeSource(Party party) : party_(party) {}
    Party party() const override { return party_; }
    HedgeQuote quote(double, double) const override { return {}; }

private:
    Party party_;
};

/// Raised in strict mode when too many hedge lookups fall outside the source.
class ClampError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

struct HedgePath {
    std::vector<double> times;
    std::vector<double> prices;
    std::vector<double> xi;     ///< asset units held over [t_k, t_k+1)
    std::vector<double> psi_l;  ///< lending-account units (>= 0)
    std::vector<double> psi_b;  ///< borrowing-account units (<= 0)
    std::vector<double> vp;     ///< portfolio value V^p
    std::vector<double> v;      ///< wealth V = V^p - C
    double error = 0.0;         ///< V_T - V^L_T(x)
};

struct ErrorStats {
    double mean = 0.0;
    double stddev = 0.0;
    double mean_abs = 0.0;
    double max_abs = 0.0;
};

ErrorStats summarize(const std::vector<double>& samples);

struct ReplicationOptions {
    std::optional<double> premium;  ///< defaults to the source's price at (0, s0)
    bool strict = false;
    double clamp_limit = 0.01;   ///< tolerated fraction of clamped lookups
    std::size_t keep_paths = 0;  ///< number of full HedgePath records to keep
};

struct ReplicationResult {
    Party party = Party::hedger;
    double endowment = 0.0;
    double premium = 0.0;
    std::vector<double> terminal_error;
    std::vector<double> terminal_wealth;  ///< V_T
    ErrorStats stats;
    double max_self_financing_residual = 0.0;
    std::size_t exclusivity_violations = 0;  ///< steps with psi_l psi_b != 0
    std::size_t total_steps = 0;
    std::size_t clamped_steps = 0;
    double clamp_fraction = 0.0;
    std::size_t branch_mismatches = 0;  ///< cash sign differs from the model's cash sign
    double branch_mismatch_fraction = 0.0;
    std::size_t borrowing_steps = 0;
    std::vector<HedgePath> paths;
    std::vector<std::string> warnings;
};

/// Runs the strategy xi = +-Z, cash split between the lending and borrowing
/// accounts by sign, along every path. The party receives x + A^C_0 at 0
/// (A_0 = +premium for the hedger, -premium for the counterparty) and the
/// contract flows, including -H (hedger) or +H (counterparty) at maturity.
ReplicationResult replicate(const HedgeSource& source, const RateModel& rates,
                            const AssetModel& asset, const ContractSpec& contract, Endowment x,
                            const PathSet& paths, const ReplicationOptions& options = {});

struct NettedWealthOptions {
    double u_step = 1e-3;
    double price_tolerance = 0.02;  ///< allowance for grid and hedging error in the surplus
};

struct NettedWealthReport {
    std::size_t n_paths = 0;
    double premium = 0.0;
    double statistic = 0.0;  ///< mean of (B^l_T)^-1 (V^net_T - V^L_T(x))
    double standard_error = 0.0;
    bool arbitrage_flag = false;  ///< statistic > 3 standard errors
    double min_discounted_netted_wealth = 0.0;  ///< over all paths and dates
    double surplus = 0.0;  ///< mean of (B^l_T)^-1 (V_T - V^L_T(x))
    double surplus_standard_error = 0.0;
    bool mispricing_flag = false;  ///< surplus > 3 standard errors + price_tolerance
};

/// Runs the strategy of `replicate` and adds the funding value U of the
/// unwound contract (A_0 = the premium) to its wealth, V^net = V + U.
NettedWealthReport netted_wealth_check(const HedgeSource& source, const RateModel& rates,
                                       const AssetModel& asset, const ContractSpec& contract,
                                       Endowment x, const PathSet& paths,
                                       const ReplicationOptions& replication = {},
                                       const NettedWealthOptions& options = {});

}  // namespace dualrate
