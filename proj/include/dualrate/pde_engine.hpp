#pragma once

// Finite-difference solver for the hedger's and counterparty's quasi-linear
// pricing PDEs of an uncollateralized European claim H(S_T).
//
// Each time step is implicit in every term. The piecewise-linear funding
// source r_l w^+ - r_b w^- (w = the cash account of the replicating
// portfolio) is handled by freezing the active rate at every node and
// re-solving until the rate pattern is stable (policy iteration, which
// terminates after finitely many sweeps).

#include "dualrate/drivers.hpp"
#include "dualrate/market_model.hpp"

#include <cstddef>
#include <stdexcept>
#include <string>
#include <vector>

namespace dualrate {

class ConvergenceError : public std::runtime_error {
public:
    ConvergenceError(const std::string& what, double residual, int iterations)
        : std::runtime_error(what), residual_(residual), iterations_(iterations) {}
    double residual() const { return residual_; }
    int iterations() const { return iterations_; }

private:
    double residual_;
    int iterations_;
};

/// Non-finite values appeared in a solve.
class NumericalError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

struct Grid {
    double s_min = 0.0;
    double s_max = 0.0;
    std::size_t n_space = 0;  ///< node count
    std::size_t n_time = 0;   ///< step count
    double maturity = 0.0;

    void validate() const;
    double ds() const { return (s_max - s_min) / static_cast<double>(n_space - 1); }
    double dt() const { return maturity / static_cast<double>(n_time); }
    double s(std::size_t j) const { return s_min + static_cast<double>(j) * ds(); }
    double t(std::size_t i) const { return static_cast<double>(i) * dt(); }

    bool operator==(const Grid&) const = default;
};

struct PdeOptions {
    int max_iterations = 20;
    double tolerance = 1e-10;
};

struct PdeDiagnostics {
    long total_iterations = 0;
    int max_iterations_per_step = 0;
    long policy_switches = 0;  ///< node-rate changes after the first sweep of each step
};

/// Value-and-hedge lookup used by the replication simulator.
struct HedgeQuote {
    double value = 0.0;
    double delta = 0.0;
    bool clamped = false;  ///< the query fell outside the covered region
};

/// Grid solution v(t_i, s_j) and dv/ds for one party and endowment.
class PriceSurface {
public:
    PriceSurface(Grid grid, Party party, double endowment, std::vector<double> values,
                 PdeDiagnostics diagnostics);

    const Grid& grid() const { return grid_; }
    Party party() const { return party_; }
    double endowment() const { return endowment_; }
    const PdeDiagnostics& diagnostics() const { return diagnostics_; }

    double value(std::size_t i, std::size_t j) const { return values_[i * grid_.n_space + j]; }
    double delta(std::size_t i, std::size_t j) const { return deltas_[i * grid_.n_space + j]; }

    /// Bilinear interpolation of value and delta; points outside the grid are clamped.
    HedgeQuote quote(double t, double s) const;

private:
    Grid grid_;
    Party party_;
    double endowment_;
    std::vector<double> values_;
    std::vector<double> deltas_;
    PdeDiagnostics diagnostics_;
};

PriceSurface solve_pde(Party party, const RateModel& rates, const AssetModel& asset,
                       const ContractSpec& contract, double endowment, const Grid& grid,
                       const PdeOptions& options = {});

inline PriceSurface solve_hedger_pde(const RateModel& rates, const AssetModel& asset,
                                     const ContractSpec& contract, double x, const Grid& grid,
                                     const PdeOptions& options = {}) {
    return solve_pde(Party::hedger, rates, asset, contract, x, grid, options);
}

inline PriceSurface solve_counterparty_pde(const RateModel& rates, const AssetModel& asset,
                                           const ContractSpec& contract, double x,
                                           const Grid& grid, const PdeOptions& options = {}) {
    return solve_pde(Party::counterparty, rates, asset, contract, x, grid, options);
}

/// Grid with every other space node and half the time steps.
Grid coarsened(const Grid& grid);

/// |v_grid(0, s) - v_coarse(0, s)|: the two-grid error estimate at the spot.
double richardson_error_estimate(Party party, const RateModel& rates, const AssetModel& asset,
                                 const ContractSpec& contract, double endowment, const Grid& grid,
                                 double spot, const PdeOptions& options = {});

struct FairRange {
    double low = 0.0;   ///< counterparty's price
    double high = 0.0;  ///< hedger's price
    bool empty = false;
    double width() const { return high - low; }
};

/// [P^c(t, s), P^h(t, s)]; empty when P^c > P^h + 1e-8 + grid_tolerance.
FairRange fair_range(const PriceSurface& hedger, const PriceSurface& counterparty, double t,
                     double s, double grid_tolerance = 0.0);

enum class MeasureKind {
    beta,     ///< S^cld (drift beta * S - kappa) is a martingale
    lending,  ///< S discounted by B^l with dividends reinvested is a martingale
};

/// Market price of risk (mu + kappa - target) / sigma, where target is
/// beta(t, s) s or r_l(t) s depending on the measure.
double girsanov_drift(const AssetModel& asset, const RateModel& rates, double t, double s,
                      MeasureKind measure = MeasureKind::beta);

}  // namespace dualrate
