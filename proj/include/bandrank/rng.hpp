#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <utility>

namespace bandrank {

/// SplitMix64 step. Used to expand a single 64-bit seed into generator state
/// and to derive independent child seeds.
///
///   z = (state += 0x9e3779b97f4a7c15)
///   z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9
///   z = (z ^ (z >> 27)) * 0x94d049bb133111eb
///   return z ^ (z >> 31)
constexpr std::uint64_t splitmix64(std::uint64_t& state) noexcept {
    std::uint64_t z = (state += 0x9e3779b97f4a7c15ULL);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

/// Deterministic child seed for a (master, a, b) triple, e.g. (run seed,
/// band index, algorithm index). Order of the arguments matters.
constexpr std::uint64_t derive_seed(std::uint64_t master, std::uint64_t a, std::uint64_t b = 0) noexcept {
    std::uint64_t s = master;
    std::uint64_t out = splitmix64(s);
    s = out ^ (a * 0xd1b54a32d192ed03ULL);
    out = splitmix64(s);
    s = out ^ (b * 0x8cb92ba72f3d8dd7ULL);
    return splitmix64(s);
}

/// xoshiro256** (Blackman & Vigna). Platform-independent: all randomness in
/// the library flows through this generator so identical seeds reproduce
/// identical datasets, models and masks everywhere.
///
/// State s[0..3] is filled by four successive splitmix64 outputs of the seed.
/// Each step:
///   result = rotl(s[1] * 5, 7) * 9
///   t = s[1] << 17
///   s[2] ^= s[0]; s[3] ^= s[1]; s[1] ^= s[2]; s[0] ^= s[3]
///   s[2] ^= t;    s[3] = rotl(s[3], 45)
///
/// uniform01() takes the top 53 bits: (next() >> 11) * 2^-53.
/// bounded(n) uses rejection on next() % n with threshold (2^64 - n) % n.
class Xoshiro256 {
public:
    using result_type = std::uint64_t;

    explicit Xoshiro256(std::uint64_t seed) noexcept {
        std::uint64_t sm = seed;
        for (auto& word : state_) word = splitmix64(sm);
    }

    static constexpr result_type min() noexcept { return 0; }
    static constexpr result_type max() noexcept { return ~result_type{0}; }

    result_type operator()() noexcept { return next(); }

    std::uint64_t next() noexcept {
        const std::uint64_t result = rotl(state_[1] * 5, 7) * 9;
        const std::uint64_t t = state_[1] << 17;
        state_[2] ^= state_[0];
        state_[3] ^= state_[1];
        state_[1] ^= state_[2];
        state_[0] ^= state_[3];
        state_[2] ^= t;
        state_[3] = rotl(state_[3], 45);
        return result;
    }

    /// Uniform in [0, 1).
    double uniform01() noexcept { return static_cast<double>(next() >> 11) * 0x1.0p-53; }

    /// Uniform in [lo, hi).
    double uniform(double lo, double hi) noexcept { return lo + (hi - lo) * uniform01(); }

    /// Uniform integer in [0, n). n must be > 0.
    std::uint64_t bounded(std::uint64_t n) noexcept {
        const std::uint64_t threshold = (0 - n) % n;
        for (;;) {
            const std::uint64_t r = next();
            if (r >= threshold) return r % n;
        }
    }

    /// Standard normal via Box-Muller (one value per call, the sine branch is discarded).
    double normal() noexcept;

    /// Fisher-Yates, iterating from the back.
    template <typename T>
    void shuffle(std::span<T> items) noexcept {
        for (std::size_t i = items.size(); i > 1; --i) {
            const auto j = static_cast<std::size_t>(bounded(i));
            using std::swap;
            swap(items[i - 1], items[j]);
        }
    }

private:
    static constexpr std::uint64_t rotl(std::uint64_t x, int k) noexcept {
        return (x << k) | (x >> (64 - k));
    }

    std::uint64_t state_[4]{};
};

}  // namespace bandrank
