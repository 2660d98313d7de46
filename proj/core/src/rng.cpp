#include "mixpt/rng.hpp"

#include <cmath>
#include <limits>
#include <numbers>
#include <sstream>

namespace mixpt {

std::size_t Rng::index(std::size_t n) {
    // Lemire's nearly-divisionless method would be faster; rejection keeps it exact.
    const std::uint64_t bound = static_cast<std::uint64_t>(n);
    const std::uint64_t limit = std::numeric_limits<std::uint64_t>::max() -
                                std::numeric_limits<std::uint64_t>::max() % bound;
    std::uint64_t x;
    do {
        x = engine_();
    } while (x >= limit);
    return static_cast<std::size_t>(x % bound);
}

std::size_t Rng::geometric(double mean) {
    if (mean <= 1.0) return 1;
    const double p = 1.0 / mean;
    // Inverse CDF of the geometric distribution on {1, 2, ...}.
    const double u = 1.0 - uniform();  // (0, 1]
    const double k = std::ceil(std::log(u) / std::log1p(-p));
    return k < 1.0 ? 1 : static_cast<std::size_t>(k);
}

double Rng::normal() {
    const double u1 = 1.0 - uniform();
    const double u2 = uniform();
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
}

std::string Rng::state() const {
    std::ostringstream out;
    out << engine_;
    return out.str();
}

void Rng::restore(const std::string& state) {
    std::istringstream in(state);
    in >> engine_;
}

std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

KeyHasher& KeyHasher::add(std::string_view part) {
    for (unsigned char c : part) {
        state_ ^= c;
        state_ *= 0x100000001b3ULL;
    }
    // Separator so ("ab","c") and ("a","bc") differ.
    state_ ^= 0xff;
    state_ *= 0x100000001b3ULL;
    return *this;
}

KeyHasher& KeyHasher::add(std::uint64_t value) {
    for (int i = 0; i < 8; ++i) {
        state_ ^= (value >> (8 * i)) & 0xff;
        state_ *= 0x100000001b3ULL;
    }
    return *this;
}

std::uint64_t KeyHasher::finish() const { return splitmix64(state_); }

}  // namespace mixpt
