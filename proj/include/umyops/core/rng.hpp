#ifndef UMYOPS_CORE_RNG_HPP
#define UMYOPS_CORE_RNG_HPP

#include <cmath>
#include <cstdint>

namespace umyops {

// splitmix64: tiny, fast, and reproducible across platforms, which std::
// distributions are not. All artifact randomness funnels through this.
class Rng {
public:
    explicit Rng(uint64_t seed) : state_(seed) {}

    uint64_t next_u64() {
        uint64_t z = (state_ += 0x9e3779b97f4a7c15ULL);
        z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
        z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
        return z ^ (z >> 31);
    }

    // Uniform in [0, 1).
    double uniform() {
        return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
    }

    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

    uint32_t uniform_int(uint32_t n) {  // in [0, n)
        return static_cast<uint32_t>(next_u64() % n);
    }

    // Box-Muller; the spare is cached so consecutive draws stay cheap.
    double gaussian() {
        if (has_spare_) {
            has_spare_ = false;
            return spare_;
        }
        double u1 = 0.0;
        while (u1 <= 0.0) u1 = uniform();
        const double u2 = uniform();
        const double r = std::sqrt(-2.0 * std::log(u1));
        const double a = 6.283185307179586476925286766559 * u2;
        spare_ = r * std::sin(a);
        has_spare_ = true;
        return r * std::cos(a);
    }

    // Derive an independent stream; used for per-sample generators.
    Rng fork(uint64_t salt) {
        Rng r(next_u64() ^ (salt * 0x9e3779b97f4a7c15ULL + 0x7f4a7c15ULL));
        return r;
    }

private:
    uint64_t state_;
    double spare_ = 0.0;
    bool has_spare_ = false;
};

} // namespace umyops

#endif
