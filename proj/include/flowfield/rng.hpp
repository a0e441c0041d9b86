#pragma once

// Counter-based splittable pseudo-random stream.
//
// Every draw is a pure function of (seed, stream_id, counter): the i-th 64-bit
// output is finalize(key + i*GOLDEN) with key derived from (seed, stream_id),
// i.e. the splitmix64 sequence started at the derived key. Streams with
// distinct ids are statistically independent; splitting is O(1) and never
// touches shared state, so results are reproducible across platforms and
// independent of evaluation order.

#include <cmath>
#include <cstdint>
#include <limits>

namespace flowfield {

class RngStream {
  public:
    explicit RngStream(std::uint64_t seed, std::uint64_t stream_id = 0)
        : seed_(seed), stream_(stream_id),
          key_(mix(mix(seed + GOLDEN) ^ mix(stream_id + FLEA))) {}

    // Derive an independent stream from the same seed. Substream ids are
    // combined so split(a).split(b) differs from split(b).split(a).
    RngStream split(std::uint64_t substream) const {
        return RngStream(seed_, mix(stream_ + GOLDEN) ^ substream);
    }

    std::uint64_t seed() const { return seed_; }
    std::uint64_t stream_id() const { return stream_; }
    std::uint64_t counter() const { return counter_; }

    std::uint64_t next_u64() {
        ++counter_;
        return mix(key_ + counter_ * GOLDEN);
    }

    // Uniform on the open interval (0,1); never returns an exact endpoint.
    double uniform() {
        return (static_cast<double>(next_u64() >> 11) + 0.5) * 0x1.0p-53;
    }

    // Standard normal via the trigonometric Box-Muller transform. Always
    // consumes exactly two uniforms (the sine branch is discarded) so every
    // draw is a pure function of the counter position, with no state carried
    // between calls.
    double normal() {
        const double u1 = uniform();
        const double u2 = uniform();
        return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * PI * u2);
    }

    // Unbiased integer in [0, n); rejection keeps the modulus exact.
    std::uint64_t below(std::uint64_t n) {
        const std::uint64_t max = std::numeric_limits<std::uint64_t>::max();
        const std::uint64_t rem = (max % n + 1) % n; // 2^64 mod n
        std::uint64_t r;
        do {
            r = next_u64();
        } while (r > max - rem);
        return r % n;
    }

  private:
    static constexpr std::uint64_t GOLDEN = 0x9E3779B97F4A7C15ull;
    static constexpr std::uint64_t FLEA = 0xA0761D6478BD642Full;
    static constexpr double PI = 3.14159265358979323846;

    // splitmix64 finalizer (Vigna 2015).
    static constexpr std::uint64_t mix(std::uint64_t z) {
        z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
        z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
        return z ^ (z >> 31);
    }

    std::uint64_t seed_;
    std::uint64_t stream_;
    std::uint64_t key_;
    std::uint64_t counter_ = 0;
};

} // namespace flowfield
