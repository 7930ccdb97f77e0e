#pragma once

#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <string>

namespace brm {

// Error taxonomy. Validation errors are bad inputs (CLI exit code 2),
// numerical errors are failures discovered during computation (exit code 3).
class Error : public std::runtime_error {
public:
    Error(std::string kind, const std::string& msg)
        : std::runtime_error(msg), kind_(std::move(kind)) {}
    const std::string& kind() const noexcept { return kind_; }

private:
    std::string kind_;
};

class ValidationError : public Error {
public:
    using Error::Error;
    explicit ValidationError(const std::string& msg) : Error("ValidationError", msg) {}
};

class NumericalError : public Error {
public:
    using Error::Error;
    explicit NumericalError(const std::string& msg) : Error("NumericalError", msg) {}
};

struct SingularModelError : ValidationError {
    explicit SingularModelError(const std::string& msg) : ValidationError("SingularModel", msg) {}
};
struct AllNonpositiveError : ValidationError {
    explicit AllNonpositiveError(const std::string& msg) : ValidationError("AllNonpositive", msg) {}
};
struct DegenerateError : NumericalError {
    explicit DegenerateError(const std::string& msg) : NumericalError("Degenerate", msg) {}
};
struct IllConditionedKError : NumericalError {
    explicit IllConditionedKError(const std::string& msg) : NumericalError("IllConditionedK", msg) {}
};
struct TruncationNotConvergedError : NumericalError {
    explicit TruncationNotConvergedError(const std::string& msg)
        : NumericalError("TruncationNotConverged", msg) {}
};
struct NoMinimizerError : NumericalError {
    explicit NoMinimizerError(const std::string& msg) : NumericalError("NoMinimizer", msg) {}
};
struct InsufficientHitsError : NumericalError {
    explicit InsufficientHitsError(const std::string& msg)
        : NumericalError("InsufficientHits", msg) {}
};

inline void require(bool cond, const std::string& msg) {
    if (!cond) throw ValidationError(msg);
}

// Standard normal tail, density, cdf.
inline double norm_pdf(double x) {
    static const double inv_sqrt_2pi = 0.3989422804014326779;
    return inv_sqrt_2pi * std::exp(-0.5 * x * x);
}
inline double norm_cdf(double x) { return 0.5 * std::erfc(-x * 0.70710678118654752440); }
inline double norm_sf(double x) { return 0.5 * std::erfc(x * 0.70710678118654752440); }

// Compensated accumulator. Summation order is fixed by the caller, which is
// what makes multi-threaded aggregation reproducible.
class KahanSum {
public:
    void add(double x) {
        double y = x - c_;
        double t = s_ + y;
        c_ = (t - s_) - y;
        s_ = t;
    }
    double value() const { return s_; }

private:
    double s_ = 0.0;
    double c_ = 0.0;
};

// SplitMix64, used to derive independent sub-stream seeds.
inline std::uint64_t mix64(std::uint64_t z) {
    z += 0x9e3779b97f4a7c15ULL;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

inline std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t tag) {
    return mix64(seed ^ mix64(tag));
}
inline std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t tag1, std::uint64_t tag2) {
    return mix64(derive_seed(seed, tag1) ^ mix64(tag2 + 0x51ed2701ab0cf3a9ULL));
}

}  // namespace brm
