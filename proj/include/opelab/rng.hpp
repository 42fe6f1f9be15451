#pragma once

#include <cstdint>
#include <cstring>
#include <initializer_list>
#include <span>

namespace opelab {

namespace detail {

/// splitmix64 output function (Steele, Lea, Flood 2014). Bijective on u64.
inline std::uint64_t splitmix64_finalize(std::uint64_t z) {
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
    return z ^ (z >> 31);
}

} // namespace detail

/// Combine seed components into a new stream key. Order-sensitive.
inline std::uint64_t mix_seed(std::uint64_t h, std::uint64_t x) {
    h ^= x + 0x9E3779B97F4A7C15ull + (h << 6) + (h >> 2);
    return detail::splitmix64_finalize(h);
}

inline std::uint64_t mix_seed(std::initializer_list<std::uint64_t> parts) {
    std::uint64_t h = 0x8BADF00D5EEDull;
    for (auto x : parts) h = mix_seed(h, x);
    return h;
}

/// Reinterpret a double as its IEEE-754 bit pattern, for seed mixing.
inline std::uint64_t double_bits(double x) {
    std::uint64_t u;
    static_assert(sizeof(u) == sizeof(x));
    std::memcpy(&u, &x, sizeof(u));
    return u;
}

/// Counter-based pseudo-random stream: the splitmix64 sequence seeded by a
/// stream key. Streams with distinct keys are independent for our purposes,
/// which lets samplers hand one stream to each (trial, stage) pair and stay
/// reproducible under any execution order.
class RngStream {
public:
    explicit RngStream(std::uint64_t key) : state_(key) {}

    std::uint64_t next_u64() {
        state_ += 0x9E3779B97F4A7C15ull;
        return detail::splitmix64_finalize(state_);
    }

    /// Uniform in [0, 1) with 53 random bits.
    double next_double() {
        return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
    }

    /// Uniform in [lo, hi).
    double uniform(double lo, double hi) {
        return lo + (hi - lo) * next_double();
    }

    /// Draw an index from a probability vector by CDF walk. Entries are
    /// assumed nonnegative and summing to ~1; the last positive entry
    /// absorbs any floating-point shortfall.
    int categorical(std::span<const double> probs) {
        const double u = next_double();
        double cum = 0.0;
        int last_positive = 0;
        for (int i = 0; i < static_cast<int>(probs.size()); ++i) {
            if (probs[i] > 0.0) last_positive = i;
            cum += probs[i];
            if (u < cum) return i;
        }
        return last_positive;
    }

private:
    std::uint64_t state_;
};

} // namespace opelab
