#pragma once

#include <cstdint>
#include <cmath>
#include <vector>

namespace gp3::rng {

// SplitMix64 step. Deterministic on every platform; the C++ standard pins
// mt19937 but not the distributions, so all sampling goes through here.
inline uint64_t splitmix64(uint64_t& state) {
    state += 0x9e3779b97f4a7c15ull;
    uint64_t z = state;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
    return z ^ (z >> 31);
}

// Mixes a seed with up to three stream indices into an independent stream
// seed. Used so per-epoch / per-sample randomness does not depend on the
// order in which other streams were consumed.
inline uint64_t substream(uint64_t seed, uint64_t a, uint64_t b = 0, uint64_t c = 0) {
    uint64_t s = seed;
    s ^= splitmix64(a += 0x632be59bd9b4e019ull);
    uint64_t t = s + 0x9e3779b97f4a7c15ull * (b + 1);
    s ^= splitmix64(t);
    uint64_t u = s + 0x94d049bb133111ebull * (c + 1);
    s ^= splitmix64(u);
    return s;
}

class Stream {
public:
    explicit Stream(uint64_t seed) : state_(seed ^ 0x7c3de1f0a5b2c9d4ull) {
        // warm up so nearby seeds decorrelate
        splitmix64(state_);
        splitmix64(state_);
    }

    uint64_t next_u64() { return splitmix64(state_); }

    // uniform in [0,1)
    double uniform() {
        return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
    }

    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

    // inclusive bounds
    int uniform_int(int lo, int hi) {
        uint64_t span = static_cast<uint64_t>(hi - lo) + 1;
        return lo + static_cast<int>(next_u64() % span);
    }

    // standard normal via Box-Muller (one value per pair of uniforms)
    double normal() {
        double u1 = 0.0;
        do { u1 = uniform(); } while (u1 <= 0.0);
        double u2 = uniform();
        return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * M_PI * u2);
    }

    double normal(double mean, double stddev) { return mean + stddev * normal(); }

    template <typename T>
    void shuffle(std::vector<T>& v) {
        for (size_t i = v.size(); i > 1; --i) {
            size_t j = next_u64() % i;
            std::swap(v[i - 1], v[j]);
        }
    }

private:
    uint64_t state_;
};

}  // namespace gp3::rng
