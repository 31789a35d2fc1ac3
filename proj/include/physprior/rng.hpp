#pragma once

#include <cstdint>
#include <random>

namespace physprior {

/// 64-bit engine plus hand-written uniform draws, so sequences are identical
/// across standard library implementations.
class Rng {
public:
    explicit Rng(std::uint64_t seed) : engine_(seed) {}
    std::uint64_t next() { return engine_(); }
    double uniform();                    // [0, 1)
    double uniform(double lo, double hi);
    int below(int n);                    // [0, n)
    /// Independent stream derived from this seed and an index.
    static std::uint64_t split(std::uint64_t seed, std::uint64_t index);

private:
    std::mt19937_64 engine_;
};

}  // namespace physprior
