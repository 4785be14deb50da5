#pragma once

#include <cstdint>
#include <initializer_list>
#include <limits>

namespace nrps {

/// Named purposes for random substreams. Each purpose gets its own key space,
/// so adding a consumer never shifts the draws another consumer sees.
enum class StreamTag : std::uint64_t {
    Shock = 0x5348,
    InitialEstimate = 0x494e,
    RandomGuess = 0x5247,
    ScenarioAlpha = 0x5341,
    ScenarioBeta = 0x5342,
    ScenarioTravelTime = 0x5354,
};

inline constexpr std::uint64_t splitmix64_mix(std::uint64_t z) {
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

/// SplitMix64 generator; satisfies UniformRandomBitGenerator.
class SplitMix64 {
public:
    using result_type = std::uint64_t;

    explicit constexpr SplitMix64(std::uint64_t state) : state_(state) {}

    static constexpr result_type min() { return 0; }
    static constexpr result_type max() { return std::numeric_limits<result_type>::max(); }

    constexpr result_type operator()() {
        state_ += 0x9e3779b97f4a7c15ULL;
        return splitmix64_mix(state_);
    }

    /// Uniform double in [0, 1) with 53 random bits.
    double uniform01() { return static_cast<double>((*this)() >> 11) * 0x1.0p-53; }

private:
    std::uint64_t state_;
};

/// Deterministic substream for a (seed, tag, counters...) tuple, e.g.
/// (base_seed, Shock, replication, day, link).
inline SplitMix64 substream(std::uint64_t seed, StreamTag tag, std::initializer_list<std::uint64_t> counters) {
    std::uint64_t key = splitmix64_mix(seed ^ 0x6a09e667f3bcc909ULL);
    key = splitmix64_mix(key ^ static_cast<std::uint64_t>(tag));
    for (std::uint64_t c : counters) key = splitmix64_mix(key + 0x9e3779b97f4a7c15ULL * (c + 1));
    return SplitMix64(key);
}

}  // namespace nrps
