#pragma once

#include <cstdint>
#include <random>
#include <string_view>

#include "ksrl/common.hpp"

namespace ksrl {

inline uint64_t splitmix64(uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

// Named sub-stream seeds: all randomness in a run flows from one master seed
// through these, so components can be reseeded independently of each other.
inline uint64_t derive_seed(uint64_t master, std::string_view stream) {
    uint64_t h = 0xcbf29ce484222325ULL;  // FNV-1a
    for (char c : stream) {
        h ^= static_cast<unsigned char>(c);
        h *= 0x100000001b3ULL;
    }
    return splitmix64(master ^ h);
}

inline uint64_t derive_seed(uint64_t master, std::string_view stream, uint64_t index) {
    return splitmix64(derive_seed(master, stream) ^ splitmix64(index + 0x51ed270b0a5fULL));
}

// mt19937_64 with hand-rolled value mappings; std::uniform_* distributions are
// not pinned down by the standard and would break bit-reproducibility.
class Rng {
public:
    Rng() : Rng(0) {}
    explicit Rng(uint64_t seed) : gen_(splitmix64(seed ^ 0xdeadbeefcafef00dULL)) {}

    uint64_t next_u64() { return gen_(); }

    // [0, 1)
    double uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

    // [0, n), unbiased via rejection
    int uniform_int(int n) {
        const uint64_t bound = static_cast<uint64_t>(n);
        const uint64_t limit = UINT64_MAX - UINT64_MAX % bound;
        uint64_t x;
        do {
            x = next_u64();
        } while (x >= limit);
        return static_cast<int>(x % bound);
    }

    bool bernoulli(double p) { return uniform() < p; }

    // Index sampled proportionally to probs (assumed normalised).
    int categorical(const Vec& probs) {
        double u = uniform();
        double acc = 0.0;
        for (size_t i = 0; i + 1 < probs.size(); ++i) {
            acc += probs[i];
            if (u < acc) return static_cast<int>(i);
        }
        return static_cast<int>(probs.size()) - 1;
    }

private:
    std::mt19937_64 gen_;
};

}  // namespace ksrl
