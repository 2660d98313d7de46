#pragma once

#include <cstdint>
#include <random>
#include <string>
#include <string_view>

namespace mixpt {

// Thin wrapper over mt19937_64 with distribution code written out by hand,
// so draws are identical across standard library implementations.
class Rng {
public:
    explicit Rng(std::uint64_t seed = 0) : engine_(seed) {}

    std::uint64_t next() { return engine_(); }

    // Uniform in [0, 1) with 53 bits of resolution.
    double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

    // Uniform in [0, n). n must be > 0.
    std::size_t index(std::size_t n);

    bool bernoulli(double p) { return uniform() < p; }

    // Geometric on {1, 2, ...} with the given mean (>= 1).
    std::size_t geometric(double mean);

    double normal();

    std::string state() const;
    void restore(const std::string& state);

    bool operator==(const Rng& other) const { return engine_ == other.engine_; }

private:
    std::mt19937_64 engine_;
};

// Order-independent key derivation: FNV-1a over the parts, finished with a
// splitmix64 round. Used to seed per-example generators.
class KeyHasher {
public:
    KeyHasher& add(std::string_view part);
    KeyHasher& add(std::uint64_t value);
    std::uint64_t finish() const;

private:
    std::uint64_t state_ = 0xcbf29ce484222325ULL;
};

std::uint64_t splitmix64(std::uint64_t x);

}  // namespace mixpt
