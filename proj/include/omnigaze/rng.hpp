#pragma once

#include <cmath>
#include <cstdint>
#include <string_view>
#include <vector>

namespace omnigaze {

// xoshiro256** seeded via splitmix64. Self-contained so that streams are
// bit-identical across platforms and standard libraries; std:: distributions
// are implementation-defined and would break run-to-run reproducibility of
// checkpoints between toolchains.
class Rng {
public:
    explicit Rng(uint64_t seed) {
        uint64_t x = seed;
        for (auto& si : s_) si = splitmix64(x);
    }

    uint64_t next_u64() {
        const uint64_t result = rotl(s_[1] * 5, 7) * 9;
        const uint64_t t = s_[1] << 17;
        s_[2] ^= s_[0];
        s_[3] ^= s_[1];
        s_[1] ^= s_[2];
        s_[0] ^= s_[3];
        s_[2] ^= t;
        s_[3] = rotl(s_[3], 45);
        return result;
    }

    // Uniform in [0, 1) with 53 random bits, rounded through double so the
    // float value is identical everywhere.
    double uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

    float uniform_f(float lo, float hi) {
        return static_cast<float>(lo + (static_cast<double>(hi) - lo) * uniform());
    }

    // Box-Muller without caching the spare; one value per call keeps
    // substream consumption easy to reason about.
    float normal_f() {
        double u1 = uniform();
        double u2 = uniform();
        if (u1 <= 0.0) u1 = 0x1.0p-53;
        return static_cast<float>(std::sqrt(-2.0 * std::log(u1)) *
                                  std::cos(2.0 * 3.14159265358979323846 * u2));
    }

    // Unbiased integer in [0, n) by rejection.
    uint64_t below(uint64_t n) {
        if (n == 0) return 0;
        const uint64_t limit = UINT64_MAX - UINT64_MAX % n;
        uint64_t v = next_u64();
        while (v >= limit) v = next_u64();
        return v % n;
    }

    template <typename T>
    void shuffle(std::vector<T>& v) {
        for (size_t i = v.size(); i > 1; --i) {
            size_t j = static_cast<size_t>(below(i));
            std::swap(v[i - 1], v[j]);
        }
    }

    // Derives an independent substream. Tags keep the call sites readable and
    // make accidental stream collisions unlikely.
    Rng fork(std::string_view tag, uint64_t index = 0) const {
        uint64_t h = 0x9e3779b97f4a7c15ull;
        for (char c : tag) h = (h ^ static_cast<uint64_t>(static_cast<unsigned char>(c))) * 0x100000001b3ull;
        h ^= index + 0x632be59bd9b4e019ull + (h << 6) + (h >> 2);
        uint64_t mix = s_[0] ^ rotl(s_[2], 13) ^ h;
        return Rng(mix);
    }

    static uint64_t mix_seed(uint64_t seed, std::string_view tag, uint64_t index = 0) {
        uint64_t h = seed;
        for (char c : tag) h = (h ^ static_cast<uint64_t>(static_cast<unsigned char>(c))) * 0x100000001b3ull;
        h ^= index * 0x9e3779b97f4a7c15ull + 0x2545f4914f6cdd1dull;
        return splitmix64(h);
    }

private:
    static uint64_t rotl(uint64_t x, int k) { return (x << k) | (x >> (64 - k)); }

    static uint64_t splitmix64(uint64_t& x) {
        uint64_t z = (x += 0x9e3779b97f4a7c15ull);
        z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
        z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
        return z ^ (z >> 31);
    }

    uint64_t s_[4];
};

}  // namespace omnigaze
