#pragma once

#include <cmath>
#include <cstdint>
#include <vector>

namespace sim {

inline std::uint64_t splitmix64(std::uint64_t& state) {
    state += 0x9E3779B97F4A7C15ull;
    std::uint64_t z = state;
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
    return z ^ (z >> 31);
}

/// xoshiro256++ with splitmix64 seeding. Hand-rolled (together with the
/// ziggurat below) because the learner draws ~1e9 normals per acceptance run
/// on a single core, and because pinning the generator keeps seeded runs
/// reproducible independent of the standard library.
class Rng {
  public:
    explicit Rng(std::uint64_t seed) {
        std::uint64_t sm = seed;
        for (auto& w : s_) w = splitmix64(sm);
    }

    /// Derives an independent stream from a (seed, tag, k, j, t) tuple.
    static Rng stream(std::uint64_t seed, std::uint64_t tag, std::uint64_t k,
                      std::uint64_t j, std::uint64_t t);

    std::uint64_t next_u64() {
        const std::uint64_t result = rotl(s_[0] + s_[3], 23) + s_[0];
        const std::uint64_t t = s_[1] << 17;
        s_[2] ^= s_[0];
        s_[3] ^= s_[1];
        s_[1] ^= s_[2];
        s_[0] ^= s_[3];
        s_[2] ^= t;
        s_[3] = rotl(s_[3], 45);
        return result;
    }

    /// Uniform on [0, 1).
    double uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

    /// Uniform on the open interval (0, 1); safe under log().
    double uniform_open() {
        return (static_cast<double>(next_u64() >> 11) + 0.5) * 0x1.0p-53;
    }

    double normal();

    /// Standard Laplace (unit scale, variance 2).
    double laplace() {
        double u = uniform_open();
        return u < 0.5 ? std::log(2.0 * u) : -std::log(2.0 * (1.0 - u));
    }

    /// Standard logistic (unit scale, variance pi^2/3).
    double logistic() {
        double u = uniform_open();
        return std::log(u / (1.0 - u));
    }

  private:
    static std::uint64_t rotl(std::uint64_t x, int k) {
        return (x << k) | (x >> (64 - k));
    }

    double normal_slow(std::int32_t hz, std::uint32_t iz);

    std::uint64_t s_[4];
};

/// Collapses a (seed, tag, k, j, t) tuple into one stream id by chained
/// splitmix64 hashing; used wherever an interface carries a single id.
inline std::uint64_t fold_stream(std::uint64_t seed, std::uint64_t tag,
                                 std::uint64_t k, std::uint64_t j,
                                 std::uint64_t t) {
    std::uint64_t sm = seed;
    std::uint64_t h = splitmix64(sm);
    sm ^= tag * 0x9E3779B97F4A7C15ull;
    h ^= splitmix64(sm);
    sm ^= k + 0xD1B54A32D192ED03ull;
    h ^= splitmix64(sm);
    sm ^= j + 0x8CB92BA72F3D8DD7ull;
    h ^= splitmix64(sm);
    sm ^= t + 0xEB44ACCAB455D165ull;
    h ^= splitmix64(sm);
    return h;
}

inline Rng Rng::stream(std::uint64_t seed, std::uint64_t tag, std::uint64_t k,
                       std::uint64_t j, std::uint64_t t) {
    return Rng(fold_stream(seed, tag, k, j, t));
}

namespace detail {

// Marsaglia-Tsang 128-layer ziggurat tables for exp(-x^2/2).
struct ZigguratTables {
    double wn[128];
    double fn[128];
    std::int64_t kn[128];

    ZigguratTables() {
        const double m1 = 2147483648.0;
        double dn = 3.442619855899;
        double tn = dn;
        const double vn = 9.91256303526217e-3;
        const double q = vn / std::exp(-0.5 * dn * dn);
        kn[0] = static_cast<std::int64_t>((dn / q) * m1);
        kn[1] = 0;
        wn[0] = q / m1;
        wn[127] = dn / m1;
        fn[0] = 1.0;
        fn[127] = std::exp(-0.5 * dn * dn);
        for (int i = 126; i >= 1; --i) {
            dn = std::sqrt(-2.0 * std::log(vn / dn + std::exp(-0.5 * dn * dn)));
            kn[i + 1] = static_cast<std::int64_t>((dn / tn) * m1);
            tn = dn;
            fn[i] = std::exp(-0.5 * dn * dn);
            wn[i] = dn / m1;
        }
    }
};

inline const ZigguratTables& ziggurat() {
    static const ZigguratTables tables;
    return tables;
}

}  // namespace detail

inline double Rng::normal() {
    const auto& zt = detail::ziggurat();
    const auto hz = static_cast<std::int32_t>(next_u64() >> 32);
    const std::uint32_t iz = static_cast<std::uint32_t>(hz) & 127u;
    if (std::abs(static_cast<std::int64_t>(hz)) < zt.kn[iz]) return hz * zt.wn[iz];
    return normal_slow(hz, iz);
}

inline double Rng::normal_slow(std::int32_t hz, std::uint32_t iz) {
    const auto& zt = detail::ziggurat();
    const double r = 3.442619855899;
    for (;;) {
        double x = hz * zt.wn[iz];
        if (iz == 0) {
            double e1, e2;
            do {
                e1 = -std::log(uniform_open()) / r;
                e2 = -std::log(uniform_open());
            } while (e2 + e2 < e1 * e1);
            return hz > 0 ? r + e1 : -r - e1;
        }
        if (zt.fn[iz] + uniform() * (zt.fn[iz - 1] - zt.fn[iz]) <
            std::exp(-0.5 * x * x))
            return x;
        hz = static_cast<std::int32_t>(next_u64() >> 32);
        iz = static_cast<std::uint32_t>(hz) & 127u;
        if (std::abs(static_cast<std::int64_t>(hz)) < zt.kn[iz]) return hz * zt.wn[iz];
    }
}

}  // namespace sim
