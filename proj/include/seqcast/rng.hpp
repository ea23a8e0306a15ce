#pragma once

#include <cstdint>
#include <random>
#include <string_view>

namespace seqcast {

/// Seeded random source used by every stochastic operation.
///
/// The engine is std::mt19937_64, whose output sequence is fixed by the C++
/// standard. Conversions to doubles and bounded integers are done here rather
/// than through <random> distributions, whose algorithms are
/// implementation-defined, so draws replay identically on every platform.
class Rng {
public:
    explicit Rng(std::uint64_t seed = 0) : seed_(seed), engine_(seed) {}

    std::uint64_t seed() const noexcept { return seed_; }

    std::uint64_t next_u64() { return engine_(); }
    /// Uniform on [0, 1) with 53 random bits.
    double uniform();
    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }
    /// Uniform integer in [0, n); n must be positive.
    std::uint64_t uniform_index(std::uint64_t n);
    /// Standard normal via Box-Muller.
    double normal();
    bool bernoulli(double p) { return uniform() < p; }

    /// Independent child stream derived from this stream's seed and a label.
    /// Does not advance this stream.
    Rng fork(std::string_view label) const;

private:
    std::uint64_t seed_;
    std::mt19937_64 engine_;
    bool has_spare_ = false;
    double spare_ = 0.0;
};

std::uint64_t splitmix64(std::uint64_t x) noexcept;

}  // namespace seqcast
