#pragma once

#include <cstdint>
#include <random>
#include <stdexcept>

namespace faultforge {

inline std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ull;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ull;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebull;
    return x ^ (x >> 31);
}

inline std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t a, std::uint64_t b = 0) {
    return splitmix64(splitmix64(seed ^ splitmix64(a)) ^ splitmix64(b + 0x632be59bd9b4e019ull));
}

// mt19937_64 output is fixed by the standard; the helpers below avoid the
// implementation-defined std distributions so streams match across platforms.
class Rng {
  public:
    explicit Rng(std::uint64_t seed) : eng_(seed) {}

    std::uint64_t next() { return eng_(); }
    std::uint32_t word() { return static_cast<std::uint32_t>(eng_() >> 32); }

    std::uint64_t below(std::uint64_t n) {
        if (n == 0)
            throw std::invalid_argument("Rng::below(0)");
        const std::uint64_t limit = UINT64_MAX - UINT64_MAX % n;
        std::uint64_t v;
        do {
            v = eng_();
        } while (v >= limit);
        return v % n;
    }

    double uniform() { return static_cast<double>(eng_() >> 11) * 0x1.0p-53; }
    bool chance(double p) { return uniform() < p; }

  private:
    std::mt19937_64 eng_;
};

}  // namespace faultforge
