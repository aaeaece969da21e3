#pragma once

#include <cstdint>
#include <random>
#include <string_view>
#include <vector>

namespace mixpro {

std::uint64_t fnv1a64(std::string_view s);

// Deterministic RNG with explicitly implemented distributions. The standard
// library's distribution objects are implementation-defined, so everything
// downstream of the raw mt19937_64 bits is spelled out here; a given
// (seed, stream) replays the same sequence on any conforming platform.
class Rng {
public:
    explicit Rng(std::uint64_t seed);
    // Independent substream: derives a distinct engine seed from (seed, stream).
    Rng(std::uint64_t seed, std::string_view stream);

    std::uint64_t next_u64();
    double uniform01();     // [0, 1)
    double uniform_open();  // (0, 1)
    std::size_t uniform_index(std::size_t n);  // uniform over [0, n)
    double normal();
    // Gamma(alpha, 1). Marsaglia-Tsang squeeze for alpha >= 1, boosted by
    // U^(1/alpha) for alpha < 1 so small shapes stay exact.
    double gamma(double alpha);

    template <typename T>
    void shuffle(std::vector<T>& v) {
        for (std::size_t i = v.size(); i > 1; --i) {
            std::size_t j = uniform_index(i);
            std::swap(v[i - 1], v[j]);
        }
    }

private:
    std::mt19937_64 engine_;
};

}  // namespace mixpro
