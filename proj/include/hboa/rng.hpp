#pragma once

#include <array>
#include <cstdint>
#include <span>
#include <utility>

namespace hboa {

/// One step of SplitMix64 (Steele, Lea, Flood). Advances `state` and returns
/// the mixed output.
constexpr std::uint64_t splitmix64(std::uint64_t& state) noexcept {
    state += 0x9e3779b97f4a7c15ULL;
    std::uint64_t z = state;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

/// Combines a base seed with further integers into a new seed. Used to derive
/// independent streams, e.g. per (population size, run index).
constexpr std::uint64_t mix_seed(std::uint64_t base, std::uint64_t a) noexcept {
    std::uint64_t s = base ^ (a + 0x632be59bd9b4e019ULL);
    splitmix64(s);
    return splitmix64(s);
}

constexpr std::uint64_t mix_seed(std::uint64_t base, std::uint64_t a, std::uint64_t b) noexcept {
    return mix_seed(mix_seed(base, a), b);
}

/// xoshiro256** 1.0 (Blackman & Vigna) seeded through SplitMix64.
///
/// Every derived quantity (doubles, bounded integers, shuffles) is defined
/// here in terms of the raw 64-bit stream so that instances and runs are
/// reproducible bit-for-bit by any implementation of the same algorithms.
///  - uniform():  (next >> 11) * 2^-53, in [0, 1)
///  - below(b):   Lemire's multiply-shift with rejection
///  - shuffle:    Fisher-Yates from the back, j = below(i + 1)
class Rng {
public:
    using result_type = std::uint64_t;

    explicit Rng(std::uint64_t seed) noexcept {
        std::uint64_t sm = seed;
        for (auto& word : state_) word = splitmix64(sm);
    }

    static constexpr result_type min() noexcept { return 0; }
    static constexpr result_type max() noexcept { return ~result_type{0}; }

    result_type operator()() noexcept {
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

    double uniform() noexcept { return static_cast<double>((*this)() >> 11) * 0x1.0p-53; }

    /// Uniform integer in [0, bound). bound must be > 0.
    std::uint64_t below(std::uint64_t bound) noexcept {
        __uint128_t m = static_cast<__uint128_t>((*this)()) * bound;
        auto low = static_cast<std::uint64_t>(m);
        if (low < bound) {
            const std::uint64_t threshold = (0 - bound) % bound;
            while (low < threshold) {
                m = static_cast<__uint128_t>((*this)()) * bound;
                low = static_cast<std::uint64_t>(m);
            }
        }
        return static_cast<std::uint64_t>(m >> 64);
    }

    bool coin() noexcept { return ((*this)() >> 63) != 0; }

    template <typename T>
    void shuffle(std::span<T> items) noexcept {
        for (std::size_t i = items.size(); i > 1; --i) {
            const auto j = static_cast<std::size_t>(below(i));
            using std::swap;
            swap(items[i - 1], items[j]);
        }
    }

private:
    static constexpr std::uint64_t rotl(std::uint64_t x, int k) noexcept {
        return (x << k) | (x >> (64 - k));
    }

    std::array<std::uint64_t, 4> state_{};
};

}  // namespace hboa
