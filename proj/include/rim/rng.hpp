#pragma once

#include <cmath>
#include <cstdint>

namespace rim {

namespace detail {

// SplitMix64 finalizer (Vigna / Steele-Lea-Flood). Bijective, passes
// BigCrush as a sequential generator when driven by the Weyl increment.
inline constexpr std::uint64_t kGolden = 0x9E3779B97F4A7C15ull;

inline constexpr std::uint64_t mix64(std::uint64_t z) {
    z += kGolden;
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
    return z ^ (z >> 31);
}

} // namespace detail

/// Splittable counter-style random stream. A stream is identified by
/// (seed, stream id); equal identifiers reproduce bit-identical draw
/// sequences on every platform. Independent substreams are derived by
/// hash-chaining child indices into the stream id, so parallel workers
/// can be handed disjoint streams up front and the results do not
/// depend on scheduling or thread count.
class RngStream {
public:
    explicit RngStream(std::uint64_t seed, std::uint64_t stream = 0)
        : seed_(seed), stream_(stream),
          state_(detail::mix64(detail::mix64(seed) ^ detail::mix64(stream))) {}

    std::uint64_t seed() const { return seed_; }
    std::uint64_t stream() const { return stream_; }

    /// Independent stream for child task `id`. Chaining is associative
    /// only in the trivial sense: child(a).child(b) != child(b).child(a).
    RngStream child(std::uint64_t id) const {
        return RngStream(seed_, detail::mix64(stream_ ^ detail::mix64(id)));
    }

    std::uint64_t next_u64() {
        state_ += detail::kGolden;
        std::uint64_t z = state_;
        z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
        z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
        return z ^ (z >> 31);
    }

    /// Uniform double in [0, 1), 53 random bits.
    double next_double() {
        return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
    }

    /// Uniform double in (0, 1]; safe as a log() argument.
    double next_open_double() {
        return static_cast<double>((next_u64() >> 11) + 1) * 0x1.0p-53;
    }

    /// N(0, sigma^2) via Box-Muller. Consumes exactly two uniforms per
    /// call so the draw sequence is independent of call grouping.
    double next_gaussian(double sigma = 1.0) {
        const double u1 = next_open_double();
        const double u2 = next_double();
        const double r = std::sqrt(-2.0 * std::log(u1));
        return sigma * r * std::cos(6.283185307179586476925286766559 * u2);
    }

    /// Uniform integer in [0, n).
    std::uint64_t next_below(std::uint64_t n) {
        // 64-bit multiply-shift; bias is O(n / 2^64), irrelevant here.
        return static_cast<std::uint64_t>(
            (static_cast<unsigned __int128>(next_u64()) * n) >> 64);
    }

private:
    std::uint64_t seed_;
    std::uint64_t stream_;
    std::uint64_t state_;
};

} // namespace rim
