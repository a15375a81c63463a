#pragma once

// Generators of the pricing BSDEs under differential lending/borrowing
// rates, and the algebraic inequalities between them that order the
// hedger's and counterparty's prices.

#include "dualrate/market_model.hpp"

namespace dualrate {

/// Side of the bilateral contract. The hedger holds (A, C); the counterparty
/// holds (-A, -C).
enum class Party { hedger, counterparty };

const char* to_string(Party party);

struct DriverInput {
    double t = 0.0;
    double x = 0.0;  ///< endowment (cash)
    double s = 0.0;  ///< asset price
    double y = 0.0;  ///< value state (cash, or account units for discounted drivers)
    double z = 0.0;  ///< hedge ratio (units of asset)
};

/// Driver of Y^l = V^p / B^l (discounted by the lending account).
double g_lending(const RateModel& rates, const DriverInput& in);

/// Driver of Y^b = V^p / B^b (discounted by the borrowing account).
double g_borrowing(const RateModel& rates, const DriverInput& in);

/// r_l (y - z s)^+ - r_b (y - z s)^-.
double g_core(const RateModel& rates, double t, double y, double z, double s);

/// Cash the endowment contributes to the portfolio at t: x B^l_t for x >= 0,
/// x B^b_t otherwise.
double endowment_offset(const RateModel& rates, double t, double x);

/// Time derivative of endowment_offset: x r_l B^l or x r_b B^b.
double endowment_accrual(const RateModel& rates, double t, double x);

/// Hedger's driver in price form (undiscounted value state).
double g_hedger(const RateModel& rates, const AssetModel& asset, const DriverInput& in);

/// Counterparty's driver in price form.
double g_counterparty(const RateModel& rates, const AssetModel& asset, const DriverInput& in);

/// G_l(t, y + x1, z) + G_l(t, -y + x2, -z) for x1, x2 >= 0; never positive.
double delta_same_sign(const RateModel& rates, double t, double x1, double x2, double s, double y,
                       double z);

/// G_b(t, y + x1, z) + G_b(t, -y + x2, -z) for x1, x2 <= 0; never positive.
double delta_same_sign_borrowing(const RateModel& rates, double t, double x1, double x2, double s,
                                 double y, double z);

struct MixedSignDelta {
    double delta;
    double bound;  ///< min{(r_l - r_b) x2 B^b, (r_b - r_l) x1 B^l}; delta <= bound
};

/// Driver gap for x1 >= 0 >= x2:
///   g(t, y + x1 B^l, z) + g(t, -y + x2 B^b, -z) - x1 r_l B^l - x2 r_b B^b
/// with g = g_core. The bound is nonpositive exactly when x1 x2 == 0.
MixedSignDelta delta_mixed_sign(const RateModel& rates, double t, double x1, double x2, double s,
                                double y, double z);

}  // namespace dualrate
