#include "dualrate/rng.hpp"

#include <cmath>
#include <numbers>

namespace dualrate {

namespace {

constexpr std::uint32_t mul0 = 0xD2511F53u;
constexpr std::uint32_t mul1 = 0xCD9E8D57u;
constexpr std::uint32_t weyl0 = 0x9E3779B9u;
constexpr std::uint32_t weyl1 = 0xBB67AE85u;

void mulhilo(std::uint32_t a, std::uint32_t b, std::uint32_t& hi, std::uint32_t& lo) {
    const std::uint64_t prod = static_cast<std::uint64_t>(a) * b;
    hi = static_cast<std::uint32_t>(prod >> 32);
    lo = static_cast<std::uint32_t>(prod);
}

}  // namespace

PhiloxCounter philox4x32_10(PhiloxCounter ctr, PhiloxKey key) {
    for (int round = 0; round < 10; ++round) {
        std::uint32_t hi0, lo0, hi1, lo1;
        mulhilo(mul0, ctr[0], hi0, lo0);
        mulhilo(mul1, ctr[2], hi1, lo1);
        ctr = {hi1 ^ ctr[1] ^ key[0], lo1, hi0 ^ ctr[3] ^ key[1], lo0};
        key[0] += weyl0;
        key[1] += weyl1;
    }
    return ctr;
}

NormalStream::NormalStream(std::uint64_t seed, std::uint64_t stream)
    : key_{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32)}, stream_(stream) {}

void NormalStream::refill() {
    const PhiloxCounter ctr{static_cast<std::uint32_t>(block_), static_cast<std::uint32_t>(block_ >> 32),
                            static_cast<std::uint32_t>(stream_),
                            static_cast<std::uint32_t>(stream_ >> 32)};
    ++block_;
    const auto out = philox4x32_10(ctr, key_);
    for (int k = 0; k < 4; k += 2) {
        const double radius = std::sqrt(-2.0 * std::log(to_open_unit(out[k])));
        const double angle = 2.0 * std::numbers::pi * to_open_unit(out[k + 1]);
        buffer_[k] = radius * std::cos(angle);
        buffer_[k + 1] = radius * std::sin(angle);
    }
    used_ = 0;
}

double NormalStream::next() {
    if (used_ == 4) refill();
    return buffer_[used_++];
}

}  // namespace dualrate
