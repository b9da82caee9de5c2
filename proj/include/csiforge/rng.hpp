// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cmath>
#include <complex>
#include <cstdint>
#include <random>

namespace csiforge {

inline std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

// Counter-based seed derivation: mixing the master seed with a stream tag and
// up to four indices gives independent, order-free substreams, so realizations
// can be generated in parallel and still match the serial run.
inline std::uint64_t derive_seed(std::uint64_t master, std::uint64_t tag,
                                 std::uint64_t a = 0, std::uint64_t b = 0,
                                 std::uint64_t c = 0, std::uint64_t d = 0) {
    std::uint64_t s = splitmix64(master ^ (tag * 0x9e3779b97f4a7c15ULL));
    s = splitmix64(s ^ (a + 0xd1b54a32d192ed03ULL));
    s = splitmix64(s ^ (b + 0x8cb92ba72f3d8dd7ULL));
    s = splitmix64(s ^ (c + 0xaef17502108ef2d9ULL));
    s = splitmix64(s ^ (d + 0x94d049bb133111ebULL));
    return s;
}

// Stream tags for the seed hierarchy.
namespace stream {
inline constexpr std::uint64_t tap_gains = 1;
inline constexpr std::uint64_t pilot_symbols = 2;
inline constexpr std::uint64_t observation_noise = 3;
inline constexpr std::uint64_t shadowing = 4;
inline constexpr std::uint64_t init = 5;
inline constexpr std::uint64_t shuffle = 6;
inline constexpr std::uint64_t link = 7;
inline constexpr std::uint64_t probe = 8;
inline constexpr std::uint64_t split = 9;
inline constexpr std::uint64_t realization = 10;
} // namespace stream

// Deterministic random stream. Distributions are synthesized from raw 64-bit
// draws rather than <random> adaptors so byte streams are identical across
// standard library implementations.
class Rng {
public:
    explicit Rng(std::uint64_t seed) : engine_(seed) {}

    std::uint64_t next_u64() { return engine_(); }

    // Uniform in [0, 1), 53-bit resolution.
    double uniform() { return double(engine_() >> 11) * 0x1.0p-53; }

    // Uniform in (0, 1]; safe as a log argument.
    double uniform_pos() { return double((engine_() >> 11) + 1) * 0x1.0p-53; }

    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

    // Standard normal via Box-Muller, one spare cached.
    double gaussian() {
        if (have_spare_) {
            have_spare_ = false;
            return spare_;
        }
        const double u1 = uniform_pos();
        const double u2 = uniform();
        const double r = std::sqrt(-2.0 * std::log(u1));
        const double th = 2.0 * M_PI * u2;
        spare_ = r * std::sin(th);
        have_spare_ = true;
        return r * std::cos(th);
    }

    // CN(0, sigma2): independent real/imag parts of variance sigma2/2.
    std::complex<double> cgaussian(double sigma2 = 1.0) {
        const double s = std::sqrt(sigma2 / 2.0);
        const double re = gaussian();
        const double im = gaussian();
        return {s * re, s * im};
    }

    // Unit-modulus QPSK symbol (+-1 +-j)/sqrt(2).
    std::complex<double> qpsk() {
        const std::uint64_t bits = engine_();
        const double a = (bits & 1) ? -M_SQRT1_2 : M_SQRT1_2;
        const double b = (bits & 2) ? -M_SQRT1_2 : M_SQRT1_2;
        return {a, b};
    }

    double sign() { return (engine_() & 1) ? -1.0 : 1.0; }

    // Uniform integer in [0, n).
    std::uint64_t below(std::uint64_t n) {
        // Rejection-free modulo is fine here; n is tiny relative to 2^64.
        return engine_() % n;
    }

private:
    std::mt19937_64 engine_;
    double spare_ = 0.0;
    bool have_spare_ = false;
};

} // namespace csiforge
