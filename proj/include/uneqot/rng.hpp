#pragma once

#include <cstdint>

namespace uneqot {

// Counter-based generator: value i of stream `seed` is a pure function of
// (seed, i), so parallel evaluation and replay give identical streams on any
// platform.  Mixing is the splitmix64 finalizer applied to the keyed counter.
class CounterRng {
public:
    explicit CounterRng(std::uint64_t seed, std::uint64_t stream = 0)
        : key_(mix(seed ^ (0x9e3779b97f4a7c15ULL * (stream + 1)))) {}

    static std::uint64_t mix(std::uint64_t z) {
        z += 0x9e3779b97f4a7c15ULL;
        z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
        z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
        return z ^ (z >> 31);
    }

    // i-th raw 64-bit word of the stream.
    std::uint64_t word(std::uint64_t i) const { return mix(key_ ^ (i * 0xd1342543de82ef95ULL)); }

    // i-th uniform double in [0,1).
    double uniform(std::uint64_t i) const {
        return static_cast<double>(word(i) >> 11) * 0x1.0p-53;
    }

    // Sequential interface for consumers that draw a variable number of values.
    double next() { return uniform(counter_++); }
    std::uint64_t next_word() { return word(counter_++); }

private:
    std::uint64_t key_;
    std::uint64_t counter_ = 0;
};

} // namespace uneqot
