#pragma once

// Recombining binomial lattice and backward Euler scheme for the pricing
// BSDEs. Works for collateralized contracts and intermediate flows, which
// the PDE engine does not handle.

#include "dualrate/drivers.hpp"
#include "dualrate/market_model.hpp"

#include <cstddef>
#include <span>
#include <vector>

namespace dualrate {

/// Node (i, j) sits at time t_i = i * dt after j up-moves; nodes are stored
/// level by level at offset i (i + 1) / 2 + j.
struct Lattice {
    std::size_t n_steps = 0;
    double maturity = 0.0;
    double dt = 0.0;
    bool log_moves = false;       ///< true for price-proportional volatility
    std::vector<double> prices;   ///< (n + 1)(n + 2) / 2 entries
    std::vector<double> up_prob;  ///< n (n + 1) / 2 entries (levels 0..n-1)

    static std::size_t index(std::size_t i, std::size_t j) { return i * (i + 1) / 2 + j; }
    double s(std::size_t i, std::size_t j) const { return prices[index(i, j)]; }
    double p(std::size_t i, std::size_t j) const { return up_prob[index(i, j)]; }
    double t(std::size_t i) const { return static_cast<double>(i) * dt; }
    std::size_t node_count() const { return prices.size(); }
};

/// Moves are exp(+-sigma sqrt(dt)) for proportional volatility and
/// +-sigma sqrt(dt) otherwise. The up-probability makes the cum-dividend
/// price discounted at beta a martingale:
///   p = (s (1 + beta dt) - kappa dt - s_down) / (s_up - s_down).
Lattice build_lattice(const AssetModel& asset, const RateModel& rates, double s0, double maturity,
                      std::size_t n_steps);

enum class YUpdate {
    implicit,  ///< Y solved exactly from Y = E - dt G(Y, Z)
    explicit_euler,  ///< Y = E - dt G(E, Z)
};

struct TreeOptions {
    YUpdate update = YUpdate::implicit;
};

class BackwardSolution {
public:
    BackwardSolution(std::size_t n_steps, Party party, double endowment, std::vector<double> y,
                     std::vector<double> z)
        : n_steps_(n_steps), party_(party), endowment_(endowment), y_(std::move(y)), z_(std::move(z)) {}

    std::size_t n_steps() const { return n_steps_; }
    Party party() const { return party_; }
    double endowment() const { return endowment_; }
    double y(std::size_t i, std::size_t j) const { return y_[Lattice::index(i, j)]; }
    double z(std::size_t i, std::size_t j) const { return z_[Lattice::index(i, j)]; }
    double root() const { return y_[0]; }
    const std::vector<double>& y_values() const { return y_; }

private:
    std::size_t n_steps_;
    Party party_;
    double endowment_;
    std::vector<double> y_;
    std::vector<double> z_;
};

/// Backward induction with Y_N = H and, on each edge into level i + 1,
///   X = Y_{i+1} - (A_{i+1} - A_i) - (C_{i+1} - C_i) + r_c(t_i) C_i dt,
///   Z = (X_up - X_down) / (s_up - s_down),  Y_i = E[X] - dt G(Y_i, Z).
/// The counterparty's Y is the price it pays for the hedger's contract.
BackwardSolution backward_solve(const Lattice& lattice, Party party, double endowment,
                                const RateModel& rates, const AssetModel& asset,
                                const ContractSpec& contract, const TreeOptions& options = {});

/// As above with collateral given per node (`node_collateral` has one entry
/// per lattice node); the contract's own collateral function is ignored.
BackwardSolution backward_solve(const Lattice& lattice, Party party, double endowment,
                                const RateModel& rates, const AssetModel& asset,
                                const ContractSpec& contract,
                                std::span<const double> node_collateral,
                                const TreeOptions& options = {});

/// Y_0 - C(0, s0).
double price_with_collateral(const Lattice& lattice, Party party, double endowment,
                             const RateModel& rates, const AssetModel& asset,
                             const ContractSpec& contract, const TreeOptions& options = {});

struct FullCollateralReport {
    double price = 0.0;
    double uncollateralized_price = 0.0;
    int iterations = 0;
    double last_change = 0.0;
    bool converged = false;
};

/// Iterates C <- P node-wise (C = 0 at maturity) until the root price moves
/// by less than `tolerance`.
FullCollateralReport full_collateral_fixed_point(const Lattice& lattice, Party party,
                                                 double endowment, const RateModel& rates,
                                                 const AssetModel& asset,
                                                 const ContractSpec& contract,
                                                 int max_iterations = 100,
                                                 double tolerance = 1e-10);

}  // namespace dualrate
