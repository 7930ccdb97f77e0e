#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <bit>
#include <limits>

#include "brm/common.hpp"

namespace brm {

// Philox4x32-10 counter-based generator (Salmon et al., "Parallel random
// numbers: as easy as 1, 2, 3"). A stream is identified by (seed, stream),
// so replication r of a job is reproducible independently of how work is
// scheduled across threads.
class Philox {
public:
    Philox(std::uint64_t seed, std::uint64_t stream)
        : key_{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32)},
          ctr_{0, 0, static_cast<std::uint32_t>(stream), static_cast<std::uint32_t>(stream >> 32)} {}

    // One keyed 128-bit block; exposed for known-answer checks.
    static std::array<std::uint32_t, 4> block(std::array<std::uint32_t, 4> c,
                                              std::array<std::uint32_t, 2> key) {
        std::uint32_t k0 = key[0], k1 = key[1];
        for (int round = 0; round < 10; ++round) {
            c = single_round(c, k0, k1);
            k0 += 0x9E3779B9u;
            k1 += 0xBB67AE85u;
        }
        return c;
    }

    std::array<std::uint32_t, 4> next_block() {
        std::array<std::uint32_t, 4> out = block(ctr_, key_);
        if (++ctr_[0] == 0) ++ctr_[1];  // 2^64 blocks per stream
        return out;
    }

    std::uint64_t next_u64() {
        if (have_half_) {
            have_half_ = false;
            return spare_;
        }
        auto b = next_block();
        spare_ = (static_cast<std::uint64_t>(b[3]) << 32) | b[2];
        have_half_ = true;
        return (static_cast<std::uint64_t>(b[1]) << 32) | b[0];
    }

    // Uniform on (0,1); never returns 0.
    double next_u01() {
        return (static_cast<double>(next_u64() >> 11) + 0.5) * 0x1.0p-53;
    }

private:
    static std::array<std::uint32_t, 4> single_round(std::array<std::uint32_t, 4> c,
                                                     std::uint32_t k0, std::uint32_t k1) {
        std::uint64_t p0 = static_cast<std::uint64_t>(0xD2511F53u) * c[0];
        std::uint64_t p1 = static_cast<std::uint64_t>(0xCD9E8D57u) * c[2];
        std::uint32_t hi0 = static_cast<std::uint32_t>(p0 >> 32);
        std::uint32_t lo0 = static_cast<std::uint32_t>(p0);
        std::uint32_t hi1 = static_cast<std::uint32_t>(p1 >> 32);
        std::uint32_t lo1 = static_cast<std::uint32_t>(p1);
        return {hi1 ^ c[1] ^ k0, lo1, hi0 ^ c[3] ^ k1, lo0};
    }

    std::array<std::uint32_t, 2> key_;
    std::array<std::uint32_t, 4> ctr_;
    std::uint64_t spare_ = 0;
    bool have_half_ = false;
};

namespace detail {

// Ziggurat tables (Marsaglia & Tsang layout, 256 layers), built once.
// kn/ke are 53-bit integer acceptance thresholds so the fast path is one
// compare and one multiply; wn/we scale the mantissa straight to the sample.
struct ZigguratTables {
    std::array<double, 257> xn{};  // normal layer edges
    std::array<double, 256> fn{};
    std::array<std::uint64_t, 256> kn{};
    std::array<double, 256> wn{};
    std::array<double, 257> xe{};  // exponential layer edges
    std::array<double, 256> fe{};
    std::array<std::uint64_t, 256> ke{};
    std::array<double, 256> we{};

    static const ZigguratTables& instance() {
        static const ZigguratTables t;
        return t;
    }

private:
    ZigguratTables() {
        auto fN = [](double x) { return std::exp(-0.5 * x * x); };
        const double rn = 3.6541528853610088;
        // area of the base strip: rectangle plus the tail mass
        const double vn = rn * fN(rn) + 1.2533141373155003 * std::erfc(rn * 0.70710678118654752440);
        xn[256] = vn / fN(rn);
        xn[255] = rn;
        for (int i = 255; i >= 1; --i) {
            double arg = fN(xn[i]) + vn / xn[i];
            xn[i - 1] = arg < 1.0 ? std::sqrt(-2.0 * std::log(arg)) : 0.0;
        }
        xn[0] = 0.0;
        for (int i = 0; i < 256; ++i) fn[i] = fN(xn[i]);
        for (int i = 0; i < 256; ++i) {
            wn[i] = xn[i + 1] * 0x1.0p-53;
            kn[i] = static_cast<std::uint64_t>((xn[i] / xn[i + 1]) * 0x1.0p53);
        }

        auto fE = [](double x) { return std::exp(-x); };
        const double re = 7.69711747013104972;
        const double ve = (1.0 + re) * fE(re);
        xe[256] = ve / fE(re);
        xe[255] = re;
        for (int i = 255; i >= 1; --i) {
            double arg = fE(xe[i]) + ve / xe[i];
            xe[i - 1] = arg < 1.0 ? -std::log(arg) : 0.0;
        }
        xe[0] = 0.0;
        for (int i = 0; i < 256; ++i) fe[i] = fE(xe[i]);
        for (int i = 0; i < 256; ++i) {
            we[i] = xe[i + 1] * 0x1.0p-53;
            ke[i] = static_cast<std::uint64_t>((xe[i] / xe[i + 1]) * 0x1.0p53);
        }
    }
};

}  // namespace detail

// Random stream with standard normal / Exp(1) sampling on top of Philox.
// Draw counts are variable (rejection steps), which is fine because every
// replication owns its stream.
class RandomStream {
public:
    RandomStream(std::uint64_t seed, std::uint64_t stream)
        : gen_(seed, stream), tab_(&detail::ZigguratTables::instance()) {}

    std::uint64_t u64() { return gen_.next_u64(); }
    double u01() { return gen_.next_u01(); }

    double normal() {
        for (;;) {
            std::uint64_t bits = gen_.next_u64();
            int idx = static_cast<int>(bits & 0xFF);
            std::uint64_t mant = bits >> 11;
            if (mant < tab_->kn[idx]) {
                double x = static_cast<double>(mant) * tab_->wn[idx];
                // branchless sign from bit 8
                std::uint64_t sign = (bits & 0x100) << 55;
                return std::bit_cast<double>(std::bit_cast<std::uint64_t>(x) ^ sign);
            }
            double v = normal_slow(bits, idx);
            if (v == v) return v;  // NaN signals rejection
        }
    }

    double exponential() {
        for (;;) {
            std::uint64_t bits = gen_.next_u64();
            int idx = static_cast<int>(bits & 0xFF);
            std::uint64_t mant = bits >> 11;
            if (mant < tab_->ke[idx]) return static_cast<double>(mant) * tab_->we[idx];
            double v = exp_slow(bits, idx);
            if (v == v) return v;
        }
    }

private:
    double normal_slow(std::uint64_t bits, int idx) {
        const auto& t = *tab_;
        bool neg = bits & 0x100;
        if (idx == 255) {
            // tail beyond r
            double r = t.xn[255];
            double xx, yy;
            do {
                xx = -std::log(gen_.next_u01()) / r;
                yy = -std::log(gen_.next_u01());
            } while (yy + yy < xx * xx);
            double v = r + xx;
            return neg ? -v : v;
        }
        double x = static_cast<double>(bits >> 11) * 0x1.0p-53 * t.xn[idx + 1];
        double f0 = t.fn[idx + 1], f1 = t.fn[idx];
        if (f0 + gen_.next_u01() * (f1 - f0) < std::exp(-0.5 * x * x))
            return neg ? -x : x;
        return std::numeric_limits<double>::quiet_NaN();
    }

    double exp_slow(std::uint64_t bits, int idx) {
        const auto& t = *tab_;
        if (idx == 255) return t.xe[255] + exponential();
        double x = static_cast<double>(bits >> 11) * 0x1.0p-53 * t.xe[idx + 1];
        double f0 = t.fe[idx + 1], f1 = t.fe[idx];
        if (f0 + gen_.next_u01() * (f1 - f0) < std::exp(-x)) return x;
        return std::numeric_limits<double>::quiet_NaN();
    }

    Philox gen_;
    const detail::ZigguratTables* tab_;
};

}  // namespace brm
