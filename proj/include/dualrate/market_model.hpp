#pragma once

// Financial primitives: deterministic lending/borrowing/collateral rates,
// the single risky asset, contracts with cash collateral, and the processes
// derived from them along a sampled price path (collateral interest F^C,
// collateral-adjusted flows A^C, the netted funding value U and the
// endowment leg V^L).

#include <functional>
#include <limits>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace dualrate {

/// Thrown when an argument lies outside the domain where an operation is defined.
class DomainError : public std::domain_error {
public:
    using std::domain_error::domain_error;
};

/// Thrown when a contract violates one of its structural requirements.
class ContractError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

struct RateSegment {
    double start = 0.0;  ///< segment start time (years)
    double rate = 0.0;   ///< continuously compounded rate per year
};

/// Right-continuous piecewise-constant rate curve starting at t = 0.
class PiecewiseConstantRate {
public:
    explicit PiecewiseConstantRate(std::vector<RateSegment> segments);

    static PiecewiseConstantRate constant(double rate);

    double at(double t) const;
    /// Exact integral of the rate over [from, to]; requires from <= to.
    double integral(double from, double to) const;
    double max_rate() const;
    double min_rate() const;

    const std::vector<RateSegment>& segments() const { return segments_; }

private:
    std::vector<RateSegment> segments_;
};

enum class Account { lend, borrow, collateral };

/// Lending, borrowing and collateral remuneration rates on [0, T].
///
/// Construction enforces 0 <= r_l(t) <= r_b(t) at every breakpoint of
/// either curve, which covers the whole horizon for piecewise-constant rates.
class RateModel {
public:
    RateModel(PiecewiseConstantRate lend, PiecewiseConstantRate borrow,
              PiecewiseConstantRate collateral, double horizon);

    /// All three rates constant.
    static RateModel flat(double r_lend, double r_borrow, double r_collateral, double horizon);

    const PiecewiseConstantRate& curve(Account which) const;
    double rate(Account which, double t) const { return curve(which).at(t); }
    double horizon() const { return horizon_; }

    /// Rejects t outside [0, T] (up to a relative rounding slack).
    void check_time(double t) const;

private:
    PiecewiseConstantRate lend_;
    PiecewiseConstantRate borrow_;
    PiecewiseConstantRate collateral_;
    double horizon_;
};

/// B(t) = exp(int_0^t r(u) du) for the selected account.
double account_value(const RateModel& rates, Account which, double t);

/// Growth factor B(to) / B(from).
double account_growth(const RateModel& rates, Account which, double from, double to);

enum class CoefficientForm { constant, proportional, lognormal };

/// Coefficient of the asset dynamics: c (constant) or c * s (proportional;
/// "lognormal" is the same law, named for volatility specifications).
struct Coefficient {
    CoefficientForm form = CoefficientForm::constant;
    double value = 0.0;

    double operator()(double t, double s) const;
    bool scales_with_price() const { return form != CoefficientForm::constant; }

    static Coefficient constant(double c) { return {CoefficientForm::constant, c}; }
    static Coefficient proportional(double c) { return {CoefficientForm::proportional, c}; }
    static Coefficient lognormal(double c) { return {CoefficientForm::lognormal, c}; }
};

/// Dynamics dS = mu dt + sigma dW with dividend intensity kappa and funding
/// rate beta (a rate: the funding cost of a position z is z * beta * S).
struct AssetModel {
    Coefficient mu;
    Coefficient sigma;
    Coefficient kappa;
    Coefficient beta;
    double domain_lower = 0.0;
    double domain_upper = std::numeric_limits<double>::infinity();

    /// Requirements for pricing: sigma nonzero on the domain, beta >= r_b.
    void validate_for_pricing(const RateModel& rates) const;
};

/// Piecewise-linear payoff through a set of knots with linear extrapolation.
class Payoff {
public:
    struct Knot {
        double s;
        double value;
    };

    Payoff(std::vector<Knot> knots, double left_slope, double right_slope);

    static Payoff call(double strike, double quantity = 1.0);
    static Payoff put(double strike, double quantity = 1.0);
    static Payoff zero();

    double operator()(double s) const;
    /// Slope of the linear piece containing s (right-continuous at knots).
    double slope(double s) const;
    Payoff scaled(double factor) const;

    const std::vector<Knot>& knots() const { return knots_; }
    double left_slope() const { return left_slope_; }
    double right_slope() const { return right_slope_; }

private:
    std::vector<Knot> knots_;
    double left_slope_;
    double right_slope_;
};

/// Cash flow A-increment received by the hedger at a fixed time.
struct CashFlow {
    double time = 0.0;
    std::function<double(double)> amount;
};

using CollateralFunction = std::function<double(double t, double s)>;

/// Contract seen from the hedger: receives `initial_flow` at 0 and the
/// intermediate flows, pays payoff(S_T) at maturity, and exchanges cash
/// collateral C(t, S_t) (C > 0: received by the hedger).
struct ContractSpec {
    Payoff payoff = Payoff::zero();
    double maturity = 1.0;
    double initial_flow = 0.0;
    std::vector<CashFlow> flows;
    CollateralFunction collateral;  ///< empty means C == 0

    bool has_collateral() const { return static_cast<bool>(collateral); }
    double collateral_at(double t, double s) const { return collateral ? collateral(t, s) : 0.0; }

    /// Flow times in (0, T]; C(T, s) == 0 at every sample price.
    void validate(std::span<const double> price_samples) const;
    void validate() const;

    /// The same contract seen from the other side, (A, C) -> (-A, -C).
    ContractSpec negated() const;
};

struct Endowment {
    double x = 0.0;
};

/// A sampled trajectory (t_k, S_k) with strictly increasing times.
struct SamplePath {
    std::vector<double> times;
    std::vector<double> prices;

    void validate() const;
    /// Linear interpolation of the price at t inside the path range.
    double price_at(double t) const;
};

/// F^C_t = -int_0^t r_c(u) C(u, S_u) du by the trapezoidal rule on the path grid.
std::vector<double> funding_process_fc(const RateModel& rates, const ContractSpec& contract,
                                       const SamplePath& path);

enum class Discounting { none, lend, borrow };

/// Cumulative flows A^C = A + C + F^C, or its (0, t] Stieltjes integral
/// against 1/B^l or 1/B^b. Contract flows (including -H at maturity) are
/// applied at their exact times with the discount factor at that time.
std::vector<double> cumulative_ac(const RateModel& rates, const ContractSpec& contract,
                                  const SamplePath& path, Discounting discount);

/// Funding value U of the unwound contract:
///   U_t = int r_l (U - C)^+ du - int r_b (U - C)^- du + int r_c C du - A_t,
/// by explicit Euler with sub-steps no larger than `step`.
std::vector<double> netted_funding_u(const RateModel& rates, const ContractSpec& contract,
                                     const SamplePath& path, double step = 1e-3);

/// V^L_t(x) = x^+ B^l_t - x^- B^b_t.
double endowment_leg(const RateModel& rates, Endowment x, double t);

}  // namespace dualrate
