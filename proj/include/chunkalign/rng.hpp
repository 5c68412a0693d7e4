#pragma once

#include <cmath>
#include <cstdint>
#include <string_view>

namespace chunkalign {

// Self-contained RNG so that seeded artifacts are byte-identical across
// platforms and standard libraries (std::normal_distribution is
// implementation-defined).

inline uint64_t splitmix64(uint64_t& state) {
    state += 0x9e3779b97f4a7c15ULL;
    uint64_t z = state;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

inline uint64_t fnv1a64(std::string_view s) {
    uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char c : s) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    return h;
}

// Every stream of randomness in the project is derived from one global seed
// plus a purpose tag plus an index (typically a document ordinal or id hash).
inline uint64_t derive_seed(uint64_t global_seed, std::string_view purpose, uint64_t index = 0) {
    uint64_t state = global_seed ^ (fnv1a64(purpose) + 0x9e3779b97f4a7c15ULL);
    splitmix64(state);
    state ^= index * 0xd1342543de82ef95ULL + 0x2545f4914f6cdd1dULL;
    splitmix64(state);
    uint64_t s = state;
    return splitmix64(s);
}

// xoshiro256++ seeded through splitmix64.
class Rng {
public:
    explicit Rng(uint64_t seed) {
        uint64_t sm = seed;
        for (auto& w : s_) w = splitmix64(sm);
    }

    uint64_t next_u64() {
        const uint64_t result = rotl(s_[0] + s_[3], 23) + s_[0];
        const uint64_t t = s_[1] << 17;
        s_[2] ^= s_[0];
        s_[3] ^= s_[1];
        s_[1] ^= s_[2];
        s_[0] ^= s_[3];
        s_[2] ^= t;
        s_[3] = rotl(s_[3], 45);
        return result;
    }

    // [0, 1) with 53 significant bits.
    double uniform() { return double(next_u64() >> 11) * 0x1.0p-53; }

    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

    // Inclusive range, rejection-free modulo bias is irrelevant at our sizes
    // but Lemire-style bounded draw keeps it exact.
    int uniform_int(int lo, int hi) {
        uint64_t span = uint64_t(hi - lo) + 1;
        return lo + int(bounded(span));
    }

    bool bernoulli(double p) { return uniform() < p; }

    double normal() {
        if (has_spare_) {
            has_spare_ = false;
            return spare_;
        }
        double u1 = 0.0;
        do {
            u1 = uniform();
        } while (u1 <= 0.0);
        const double u2 = uniform();
        const double r = std::sqrt(-2.0 * std::log(u1));
        const double two_pi = 6.283185307179586476925286766559;
        spare_ = r * std::sin(two_pi * u2);
        has_spare_ = true;
        return r * std::cos(two_pi * u2);
    }

private:
    static uint64_t rotl(uint64_t x, int k) { return (x << k) | (x >> (64 - k)); }

    uint64_t bounded(uint64_t n) {
        // Lemire's nearly-divisionless bounded generation.
        uint64_t x = next_u64();
        __uint128_t m = __uint128_t(x) * __uint128_t(n);
        uint64_t l = uint64_t(m);
        if (l < n) {
            uint64_t t = -n % n;
            while (l < t) {
                x = next_u64();
                m = __uint128_t(x) * __uint128_t(n);
                l = uint64_t(m);
            }
        }
        return uint64_t(m >> 64);
    }

    uint64_t s_[4]{};
    double spare_ = 0.0;
    bool has_spare_ = false;
};

}  // namespace chunkalign
