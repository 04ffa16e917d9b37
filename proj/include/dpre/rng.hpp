#pragma once

#include <cstdint>
#include <cmath>

namespace dpre {

// Counter-based pseudo-random stream: every output is a pure function of
// (key, counter), so substreams can be handed to parallel workers and the
// result of any computation is independent of scheduling order.
namespace rng_detail {

inline constexpr std::uint64_t kGolden = 0x9E3779B97F4A7C15ull;

// splitmix64 finalizer (Steele/Lea/Flood), full-avalanche 64-bit mixer.
inline constexpr std::uint64_t mix64(std::uint64_t z) {
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
    return z ^ (z >> 31);
}

inline constexpr std::uint64_t hash2(std::uint64_t key, std::uint64_t ctr) {
    return mix64(mix64(key + kGolden * ctr) ^ 0xD1B54A32D192ED03ull);
}

} // namespace rng_detail

// Derives an independent stream key; chains freely: derive(derive(k,a),b).
inline constexpr std::uint64_t derive_stream(std::uint64_t key, std::uint64_t tag) {
    return rng_detail::mix64(key ^ rng_detail::mix64(tag + 0x2545F4914F6CDD1Dull));
}

class CounterRng {
  public:
    explicit CounterRng(std::uint64_t key, std::uint64_t start_counter = 0)
        : key_(key), ctr_(start_counter) {}

    std::uint64_t key() const { return key_; }
    std::uint64_t counter() const { return ctr_; }

    std::uint64_t next_u64() { return rng_detail::hash2(key_, ctr_++); }

    // Uniform in [0,1) with 53 random bits.
    double next_double() {
        return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
    }

    // Uniform in (0,1], safe as a log() argument.
    double next_double_open() {
        return (static_cast<double>(next_u64() >> 11) + 1.0) * 0x1.0p-53;
    }

    // Standard normal via Box-Muller; consumes exactly two uniforms per pair,
    // caches the second value so streams stay counter-addressable.
    double next_gaussian() {
        if (have_cached_) {
            have_cached_ = false;
            return cached_;
        }
        const double u1 = next_double_open();
        const double u2 = next_double();
        const double r = std::sqrt(-2.0 * std::log(u1));
        const double a = 6.283185307179586476925286766559 * u2;
        cached_ = r * std::sin(a);
        have_cached_ = true;
        return r * std::cos(a);
    }

  private:
    std::uint64_t key_;
    std::uint64_t ctr_;
    double cached_ = 0.0;
    bool have_cached_ = false;
};

} // namespace dpre
