#pragma once

#include <cmath>
#include <cstdint>

#include "sigmacount/errors.hpp"

namespace sigmacount {

// Counter-based uniform generator built on the splitmix64 finalizer.
// Every draw is a pure function of (seed, position), so sequences can be
// replayed, split into independent streams, and sampled out of order from
// worker threads without losing determinism.
namespace rng {

constexpr std::uint64_t kGolden = 0x9E3779B97F4A7C15ull;

inline std::uint64_t mix64(std::uint64_t z) {
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
    return z ^ (z >> 31);
}

inline std::uint64_t draw(std::uint64_t seed, std::uint64_t position) {
    return mix64(seed + (position + 1) * kGolden);
}

// Uniform on the open interval (0, 1); never returns an endpoint.
inline double uniform01(std::uint64_t seed, std::uint64_t position) {
    return (static_cast<double>(draw(seed, position) >> 11) + 0.5) * 0x1.0p-53;
}

}  // namespace rng

// Laplace stream with an explicit position counter. Identical (seed,
// position) always yields the identical sample, on every platform that
// rounds IEEE doubles the same way.
class LaplaceSampler {
  public:
    explicit LaplaceSampler(std::uint64_t seed) : seed_(seed) {}

    // Inverse-CDF draw: u uniform on (-1/2, 1/2),
    // value = -scale * sign(u) * log(1 - 2|u|).
    double sample_at(std::uint64_t position, double scale) const {
        if (!(scale > 0.0)) throw ValidationError("laplace: scale must be positive");
        const double u = rng::uniform01(seed_, position) - 0.5;
        const double sign = (u > 0.0) ? 1.0 : (u < 0.0 ? -1.0 : 0.0);
        // log1p keeps precision when |u| is tiny.
        return -scale * sign * std::log1p(-2.0 * std::fabs(u));
    }

    // Sequential draw; advances the counter by one.
    double sample(double scale) { return sample_at(pos_++, scale); }

    // Reserve a contiguous block of positions for out-of-order sampling.
    // Returns the first reserved position.
    std::uint64_t reserve(std::uint64_t count) {
        const std::uint64_t first = pos_;
        pos_ += count;
        return first;
    }

    // Derive an independent child stream. Children of distinct ids never
    // collide with each other or with the parent.
    LaplaceSampler fork(std::uint64_t stream_id) const {
        return LaplaceSampler(rng::mix64(seed_ ^ rng::draw(0xA5A5A5A5DEADBEEFull, stream_id)));
    }

    std::uint64_t seed() const { return seed_; }
    std::uint64_t position() const { return pos_; }
    void seek(std::uint64_t position) { pos_ = position; }

  private:
    std::uint64_t seed_;
    std::uint64_t pos_ = 0;
};

}  // namespace sigmacount
