#pragma once

#include <cmath>
#include <cstdint>
#include <initializer_list>
#include <numbers>

namespace poscm::rng {

// Counter-based keyed uniforms. Every random number in the toolkit is a pure
// function of an integer key path, so replay is exact and independent of
// evaluation order or thread scheduling.

constexpr std::uint64_t splitmix(std::uint64_t x) noexcept {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

constexpr std::uint64_t combine(std::uint64_t h, std::uint64_t v) noexcept {
    return splitmix(h ^ splitmix(v + 0x632be59bd9b4e019ULL));
}

inline std::uint64_t hashKey(std::initializer_list<std::uint64_t> key) noexcept {
    std::uint64_t h = 0x243f6a8885a308d3ULL;
    for (auto k : key) h = combine(h, k);
    return h;
}

// Maps 64 random bits to the open interval (0, 1).
constexpr double toUnit(std::uint64_t bits) noexcept {
    return (static_cast<double>(bits >> 11) + 0.5) * 0x1.0p-53;
}

inline double uniform(std::initializer_list<std::uint64_t> key) noexcept { return toUnit(hashKey(key)); }

// Standard normal from two keyed uniforms (Box-Muller, cosine branch).
inline double normalFromUniforms(double u1, double u2) noexcept {
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
}

// Sequential stream over a fixed key; the n-th draw is uniform({key, n}).
class KeyedStream {
public:
    explicit KeyedStream(std::uint64_t key) noexcept : key_(key) {}
    double uniform() noexcept { return toUnit(combine(key_, counter_++)); }
    double normal() noexcept {
        double u1 = uniform();
        double u2 = uniform();
        return normalFromUniforms(u1, u2);
    }
    std::uint64_t below(std::uint64_t bound) noexcept {
        return static_cast<std::uint64_t>(uniform() * static_cast<double>(bound)) % bound;
    }

private:
    std::uint64_t key_;
    std::uint64_t counter_ = 0;
};

}  // namespace poscm::rng
