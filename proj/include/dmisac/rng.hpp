#pragma once

#include <cmath>
#include <complex>
#include <cstdint>
#include <random>

#include "dmisac/constants.hpp"

namespace dmisac {

/// Purpose tags for derived random streams. Each (root seed, trial, tag, a, b)
/// tuple yields an independent stream, so results do not depend on scheduling
/// order or worker count.
enum class StreamTag : std::uint64_t {
    Deployment = 1,
    UePhase = 2,
    TargetPhase = 3,
    CommFading = 4,
    CommSymbols = 5,
    SensingWaveform = 6,
    EchoNoise = 7,
    CoverageSampling = 8,
    Oracle = 9,
};

namespace detail {
/// splitmix64 finalizer; good avalanche, used only for seed derivation.
inline std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

inline std::uint64_t mix(std::uint64_t h, std::uint64_t v) {
    return splitmix64(h ^ (v + 0x9e3779b97f4a7c15ULL + (h << 6) + (h >> 2)));
}
}  // namespace detail

/// Deterministic random stream keyed by (root, trial, tag, a, b).
/// Gaussian variates use an explicit Box-Muller transform so the byte-level
/// output depends only on the engine, not on library internals.
class RngStream {
public:
    RngStream(std::uint64_t root, std::uint64_t trial, StreamTag tag,
              std::uint64_t a = 0, std::uint64_t b = 0) {
        std::uint64_t s = detail::mix(root, trial);
        s = detail::mix(s, static_cast<std::uint64_t>(tag));
        s = detail::mix(s, a);
        s = detail::mix(s, b);
        engine_.seed(s);
    }

    /// Uniform double in [0, 1).
    double uniform() {
        // 53 random bits -> uniform double.
        return (engine_() >> 11) * 0x1.0p-53;
    }

    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

    /// Standard normal via Box-Muller.
    double gaussian() {
        if (have_spare_) {
            have_spare_ = false;
            return spare_;
        }
        double u1 = 0.0;
        do {
            u1 = uniform();
        } while (u1 <= 0.0);
        const double u2 = uniform();
        const double r = std::sqrt(-2.0 * std::log(u1));
        spare_ = r * std::sin(kTwoPi * u2);
        have_spare_ = true;
        return r * std::cos(kTwoPi * u2);
    }

    /// Circularly-symmetric complex Gaussian with E|z|^2 = variance.
    std::complex<double> complex_gaussian(double variance = 1.0) {
        const double s = std::sqrt(0.5 * variance);
        return {s * gaussian(), s * gaussian()};
    }

    /// Unit-modulus symbol with uniform random phase.
    std::complex<double> unit_phase() {
        const double phi = uniform(0.0, kTwoPi);
        return {std::cos(phi), std::sin(phi)};
    }

    std::uint64_t raw() { return engine_(); }

private:
    std::mt19937_64 engine_;
    bool have_spare_ = false;
    double spare_ = 0.0;
};

}  // namespace dmisac
