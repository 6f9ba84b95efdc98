#pragma once

#include <cstdint>
#include <span>
#include <vector>

namespace tpfl {

// One splitmix64 step. Used for seed expansion and stream derivation only;
// the bulk generator below is xoshiro256**.
inline std::uint64_t splitmix64(std::uint64_t& state) noexcept {
    std::uint64_t z = (state += 0x9e3779b97f4a7c15ull);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
    return z ^ (z >> 31);
}

// Independent sub-seed streams derived from one root seed. A client's stream
// depends only on (root, Stream::Client, client_id), so growing the federation
// never perturbs existing clients.
enum class Stream : std::uint64_t {
    Partition = 1,
    Client = 2,
    Model = 3,
};

inline std::uint64_t derive_seed(std::uint64_t root, Stream stream,
                                 std::uint64_t index = 0) noexcept {
    std::uint64_t s = root;
    std::uint64_t a = splitmix64(s);
    s = a ^ (static_cast<std::uint64_t>(stream) * 0xbf58476d1ce4e5b9ull);
    std::uint64_t b = splitmix64(s);
    s = b ^ (index * 0x94d049bb133111ebull);
    return splitmix64(s);
}

// xoshiro256**: fast enough for the per-literal feedback draws in the TM
// training inner loop, where std::mt19937_64 shows up in profiles.
class Rng {
public:
    using result_type = std::uint64_t;

    explicit Rng(std::uint64_t seed) noexcept {
        std::uint64_t sm = seed;
        for (auto& word : state_) word = splitmix64(sm);
    }

    static constexpr result_type min() noexcept { return 0; }
    static constexpr result_type max() noexcept { return ~0ull; }

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

    // Uniform double in [0, 1).
    double next_double() noexcept {
        return static_cast<double>(next() >> 11) * 0x1.0p-53;
    }

    bool bernoulli(double p) noexcept { return next_double() < p; }

    // Uniform integer in [0, bound) via the multiply-shift trick.
    std::uint64_t next_below(std::uint64_t bound) noexcept {
        return static_cast<std::uint64_t>(
            (static_cast<unsigned __int128>(next()) * bound) >> 64);
    }

    template <typename T>
    void shuffle(std::span<T> values) noexcept {
        for (std::size_t i = values.size(); i > 1; --i) {
            std::size_t j = next_below(i);
            std::swap(values[i - 1], values[j]);
        }
    }

private:
    static constexpr std::uint64_t rotl(std::uint64_t x, int k) noexcept {
        return (x << k) | (x >> (64 - k));
    }

    std::uint64_t state_[4];
};

}  // namespace tpfl
