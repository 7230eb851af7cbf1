// rng.hpp — seeded xoshiro256++ generator. Every stochastic step in the
// pipeline (init, shuffling, latent sampling, cohort synthesis) draws from an
// explicitly seeded instance so runs are reproducible bit for bit.
#pragma once

#include <cstdint>
#include <vector>

namespace atlas {

class Rng {
public:
    explicit Rng(uint64_t seed);

    uint64_t next();

    // Uniform in [0, 1).
    double uniform();
    double uniform(double lo, double hi);

    // Standard normal via Box-Muller; one spare value is cached.
    double normal();

    // Unbiased-enough integer in [0, n) via 128-bit multiply; n > 0.
    uint64_t below(uint64_t n);

    template <typename T>
    void shuffle(std::vector<T>& v) {
        for (size_t i = v.size(); i > 1; --i) {
            size_t j = static_cast<size_t>(below(i));
            std::swap(v[i - 1], v[j]);
        }
    }

private:
    uint64_t s_[4];
    bool has_spare_ = false;
    double spare_ = 0.0;
};

// Deterministically derives an independent stream seed from a base seed.
uint64_t derive_seed(uint64_t base, uint64_t stream0, uint64_t stream1 = 0);

}  // namespace atlas
