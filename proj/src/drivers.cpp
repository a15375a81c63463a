#include "dualrate/drivers.hpp"

#include <algorithm>
#include <stdexcept>

namespace dualrate {

namespace {

double positive_part(double v) { return v > 0.0 ? v : 0.0; }
double negative_part(double v) { return v < 0.0 ? -v : 0.0; }

double discounted_driver(double r_acct, double b_acct, double rl, double rb, const DriverInput& in) {
    const double cash = in.y * b_acct - in.z * in.s;
    return r_acct * in.z * in.s / b_acct +
           (rl * positive_part(cash) - rb * negative_part(cash)) / b_acct - r_acct * in.y;
}

}  // namespace

const char* to_string(Party party) {
    return party == Party::hedger ? "hedger" : "counterparty";
}

double g_lending(const RateModel& rates, const DriverInput& in) {
    const double rl = rates.rate(Account::lend, in.t);
    const double rb = rates.rate(Account::borrow, in.t);
    return discounted_driver(rl, account_value(rates, Account::lend, in.t), rl, rb, in);
}

double g_borrowing(const RateModel& rates, const DriverInput& in) {
    const double rl = rates.rate(Account::lend, in.t);
    const double rb = rates.rate(Account::borrow, in.t);
    return discounted_driver(rb, account_value(rates, Account::borrow, in.t), rl, rb, in);
}

double g_core(const RateModel& rates, double t, double y, double z, double s) {
    const double cash = y - z * s;
    return rates.rate(Account::lend, t) * positive_part(cash) -
           rates.rate(Account::borrow, t) * negative_part(cash);
}

// x = 0 takes the lending branch; both branches vanish there.
double endowment_offset(const RateModel& rates, double t, double x) {
    if (x >= 0.0) return x * account_value(rates, Account::lend, t);
    return x * account_value(rates, Account::borrow, t);
}

double endowment_accrual(const RateModel& rates, double t, double x) {
    if (x >= 0.0) return x * rates.rate(Account::lend, t) * account_value(rates, Account::lend, t);
    return x * rates.rate(Account::borrow, t) * account_value(rates, Account::borrow, t);
}

double g_hedger(const RateModel& rates, const AssetModel& asset, const DriverInput& in) {
    const double funding = in.z * asset.beta(in.t, in.s) * in.s;
    return funding - endowment_accrual(rates, in.t, in.x) +
           g_core(rates, in.t, in.y + endowment_offset(rates, in.t, in.x), in.z, in.s);
}

double g_counterparty(const RateModel& rates, const AssetModel& asset, const DriverInput& in) {
    const double funding = in.z * asset.beta(in.t, in.s) * in.s;
    return funding + endowment_accrual(rates, in.t, in.x) -
           g_core(rates, in.t, -in.y + endowment_offset(rates, in.t, in.x), -in.z, in.s);
}

double delta_same_sign(const RateModel& rates, double t, double x1, double x2, double s, double y,
                       double z) {
    if (x1 < 0.0 || x2 < 0.0) throw std::invalid_argument("delta_same_sign requires x1, x2 >= 0");
    return g_lending(rates, {t, 0.0, s, y + x1, z}) + g_lending(rates, {t, 0.0, s, -y + x2, -z});
}

double delta_same_sign_borrowing(const RateModel& rates, double t, double x1, double x2, double s,
                                 double y, double z) {
    if (x1 > 0.0 || x2 > 0.0)
        throw std::invalid_argument("delta_same_sign_borrowing requires x1, x2 <= 0");
    return g_borrowing(rates, {t, 0.0, s, y + x1, z}) +
           g_borrowing(rates, {t, 0.0, s, -y + x2, -z});
}

MixedSignDelta delta_mixed_sign(const RateModel& rates, double t, double x1, double x2, double s,
                                double y, double z) {
    if (x1 < 0.0 || x2 > 0.0) throw std::invalid_argument("delta_mixed_sign requires x1 >= 0 >= x2");
    const double rl = rates.rate(Account::lend, t);
    const double rb = rates.rate(Account::borrow, t);
    const double bl = account_value(rates, Account::lend, t);
    const double bb = account_value(rates, Account::borrow, t);
    const double delta = g_core(rates, t, y + x1 * bl, z, s) + g_core(rates, t, -y + x2 * bb, -z, s) -
                         x1 * rl * bl - x2 * rb * bb;
    const double bound = std::min((rl - rb) * x2 * bb, (rb - rl) * x1 * bl);
    return {delta, bound};
}

}  // namespace dualrate
