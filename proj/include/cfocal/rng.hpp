#pragma once

#include <complex>
#include <cstdint>
#include <random>

namespace cfocal {

/// Derives an independent stream seed from a master seed and a stream index
/// (splitmix64 finalizer). Used to parallelize dataset generation and Monte
/// Carlo trials without correlated streams.
inline uint64_t derive_seed(uint64_t master, uint64_t stream) {
    uint64_t z = master + 0x9e3779b97f4a7c15ull * (stream + 1);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
    return z ^ (z >> 31);
}

/// Deterministic random source. Gaussian draws use Box-Muller on explicit
/// uniforms so sequences are reproducible independent of the standard
/// library's distribution implementations.
class Rng {
public:
    explicit Rng(uint64_t seed) : gen_(seed) {}

    uint64_t next_u64() { return gen_(); }

    /// Uniform in [0, 1).
    double uniform() { return static_cast<double>(gen_() >> 11) * 0x1.0p-53; }

    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

    /// Uniform integer in [lo, hi] inclusive.
    int uniform_int(int lo, int hi) {
        const uint64_t span = static_cast<uint64_t>(hi - lo) + 1;
        return lo + static_cast<int>(gen_() % span);
    }

    /// Standard normal.
    double gaussian() {
        if (have_spare_) {
            have_spare_ = false;
            return spare_;
        }
        double u1 = uniform();
        double u2 = uniform();
        // 1-u1 keeps the log argument in (0,1].
        double r = std::sqrt(-2.0 * std::log(1.0 - u1));
        double a = 2.0 * M_PI * u2;
        spare_ = r * std::sin(a);
        have_spare_ = true;
        return r * std::cos(a);
    }

    /// Circularly symmetric complex normal with unit total variance.
    std::complex<double> cgaussian() {
        const double s = M_SQRT1_2;
        double re = gaussian();
        double im = gaussian();
        return {s * re, s * im};
    }

private:
    std::mt19937_64 gen_;
    double spare_ = 0.0;
    bool have_spare_ = false;
};

}  // namespace cfocal
