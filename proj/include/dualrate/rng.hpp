#pragma once

// Philox4x32-10 counter-based generator (Salmon et al., SC'11). A stream is
// keyed by (seed, stream id), so path k draws the same numbers whatever
// order or thread produces it.

#include <array>
#include <cstdint>

namespace dualrate {

using PhiloxCounter = std::array<std::uint32_t, 4>;
using PhiloxKey = std::array<std::uint32_t, 2>;

/// Ten rounds of the Philox 4x32 bijection.
PhiloxCounter philox4x32_10(PhiloxCounter counter, PhiloxKey key);

/// Standard normal draws for one stream via Box-Muller on Philox blocks.
class NormalStream {
public:
    NormalStream(std::uint64_t seed, std::uint64_t stream);

    double next();

private:
    void refill();

    PhiloxKey key_;
    std::uint64_t stream_;
    std::uint64_t block_ = 0;
    std::array<double, 4> buffer_{};
    int used_ = 4;
};

/// Maps a 32-bit word to (0, 1), never returning 0.
inline double to_open_unit(std::uint32_t word) {
    return (static_cast<double>(word) + 0.5) * (1.0 / 4294967296.0);
}

}  // namespace dualrate
