#pragma once

#include <cstdint>
#include <random>
#include <string>

namespace refcolor {

// Deterministic random source. All distributions are implemented here rather
// than via std:: distributions so that streams are reproducible independent of
// the standard library in use.
class Rng {
  public:
    explicit Rng(std::uint64_t seed);

    std::uint64_t next_u64();

    // Uniform in [0, 1) with 53 bits of entropy.
    double uniform();
    double uniform(double lo, double hi);

    // Standard normal via Box-Muller; one spare value is cached.
    double normal();

    // Uniform integer in [lo, hi] inclusive.
    std::int64_t uniform_int(std::int64_t lo, std::int64_t hi);

    // Derives an independent stream from the original seed and a stream id.
    Rng fork(std::uint64_t stream) const;

    std::uint64_t seed() const { return seed_; }

    std::string serialize() const;
    static Rng deserialize(const std::string& blob);

  private:
    Rng() = default;

    std::uint64_t seed_ = 0;
    std::mt19937_64 engine_;
    bool has_spare_ = false;
    double spare_ = 0.0;
};

// SplitMix64 step, used for seed derivation.
std::uint64_t splitmix64(std::uint64_t x);

} // namespace refcolor
