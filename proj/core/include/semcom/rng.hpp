#pragma once

#include <cmath>
#include <cstdint>
#include <random>
#include <vector>

namespace semcom {

// Deterministic random source. All draws are derived from the raw engine
// bits by formulas owned by this class, so streams are reproducible
// bit-for-bit independent of the standard library's distribution
// implementations.
class Rng {
   public:
    explicit Rng(std::uint64_t seed) : engine_(seed) {}

    // Uniform in [2^-53, 1): never exactly zero, safe under log().
    double uniform01() {
        const std::uint64_t bits = engine_() >> 11;  // top 53 bits
        double u = static_cast<double>(bits) * 0x1.0p-53;
        return u > 0.0 ? u : 0x1.0p-53;
    }

    // Standard normal via Box-Muller; the spare is cached.
    double normal() {
        if (has_spare_) {
            has_spare_ = false;
            return spare_;
        }
        const double u1 = uniform01();
        const double u2 = uniform01();
        const double r = std::sqrt(-2.0 * std::log(u1));
        const double a = 2.0 * M_PI * u2;
        spare_ = r * std::sin(a);
        has_spare_ = true;
        return r * std::cos(a);
    }

    // Standard Gumbel: -log(-log(U)).
    double gumbel() { return -std::log(-std::log(uniform01())); }

    // Uniform integer in [0, n).
    std::uint64_t below(std::uint64_t n) {
        // Rejection-free modulo is biased for huge n; all our alphabets are
        // tiny relative to 2^64, so the bias is far below double precision.
        return engine_() % n;
    }

    // Substream derivation: mixes the tag into a fresh seed (splitmix64
    // finalizer) so substreams are decorrelated and order-independent.
    Rng derive(std::uint64_t tag) const {
        std::uint64_t z = seed_mix_ + tag * 0x9E3779B97F4A7C15ull;
        z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
        z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
        return Rng(z ^ (z >> 31));
    }

   private:
    explicit Rng(std::uint64_t seed, int) : engine_(seed) {}

    std::mt19937_64 engine_;
    std::uint64_t seed_mix_ = engine_();  // one draw reserved for derive()
    double spare_ = 0.0;
    bool has_spare_ = false;
};

// Fisher-Yates shuffle driven by the deterministic engine above.
template <typename T>
void shuffle(std::vector<T>& v, Rng& rng) {
    for (std::size_t i = v.size(); i > 1; --i) {
        const std::size_t j = static_cast<std::size_t>(rng.below(i));
        std::swap(v[i - 1], v[j]);
    }
}

}  // namespace semcom
