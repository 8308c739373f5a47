#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <complex>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

namespace masim {

using cxd = std::complex<double>;
using Cvec = Eigen::VectorXcd;
using Cmat = Eigen::MatrixXcd;

// Bad user-supplied configuration (dimensions, variances, grouping, ...).
struct ConfigError : std::invalid_argument {
    explicit ConfigError(const std::string& msg) : std::invalid_argument(msg) {}
};

// API misuse (e.g. asking for a link outside a stream's decode set).
struct UsageError : std::logic_error {
    explicit UsageError(const std::string& msg) : std::logic_error(msg) {}
};

// A model invariant that should be unreachable was violated.
struct InvariantError : std::logic_error {
    explicit InvariantError(const std::string& msg) : std::logic_error(msg) {}
};

// Numerical solver failure, carries diagnostics in the message.
struct SolverError : std::runtime_error {
    explicit SolverError(const std::string& msg) : std::runtime_error(msg) {}
};

inline double db_to_linear(double db) { return std::pow(10.0, db / 10.0); }
inline double log2_of_linear(double p) { return std::log2(p); }

// splitmix64-style mixer for deriving per-cell seeds from a master seed.
inline std::uint64_t mix_seed(std::uint64_t a, std::uint64_t b) {
    std::uint64_t z = a + 0x9e3779b97f4a7c15ULL * (b + 0x632be59bd9b4e019ULL);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

inline std::uint64_t mix_seed(std::uint64_t a, std::uint64_t b, std::uint64_t c) {
    return mix_seed(mix_seed(a, b), c);
}

// PCG32 (oneseq variant, O'Neill). Chosen over std distributions so that
// streams are bit-reproducible across platforms and standard libraries.
class Pcg32 {
public:
    explicit Pcg32(std::uint64_t seed, std::uint64_t stream = 0xda3e39cb94b95bdbULL)
        : state_(0), inc_((stream << 1u) | 1u) {
        next_u32();
        state_ += seed;
        next_u32();
    }

    std::uint32_t next_u32() {
        const std::uint64_t old = state_;
        state_ = old * 6364136223846793005ULL + inc_;
        const std::uint32_t xorshifted =
            static_cast<std::uint32_t>(((old >> 18u) ^ old) >> 27u);
        const std::uint32_t rot = static_cast<std::uint32_t>(old >> 59u);
        return (xorshifted >> rot) | (xorshifted << ((32u - rot) & 31u));
    }

    // Uniform in [0,1) with 53 significant bits.
    double uniform() {
        const std::uint64_t hi = next_u32();
        const std::uint64_t lo = next_u32();
        return static_cast<double>(((hi << 32) | lo) >> 11) * 0x1.0p-53;
    }

    // Standard normal pair via Box-Muller.
    void normal_pair(double& z0, double& z1) {
        const double u1 = 1.0 - uniform();  // (0,1], keeps log finite
        const double u2 = uniform();
        const double r = std::sqrt(-2.0 * std::log(u1));
        const double th = 2.0 * M_PI * u2;
        z0 = r * std::cos(th);
        z1 = r * std::sin(th);
    }

    // CN(0, sigma2): independent real/imag normals with variance sigma2/2.
    cxd complex_normal(double sigma2) {
        double z0 = 0.0, z1 = 0.0;
        normal_pair(z0, z1);
        const double s = std::sqrt(sigma2 / 2.0);
        return {z0 * s, z1 * s};
    }

    Cvec complex_normal_vector(int n, double sigma2) {
        Cvec v(n);
        for (int i = 0; i < n; ++i) v(i) = complex_normal(sigma2);
        return v;
    }

private:
    std::uint64_t state_;
    std::uint64_t inc_;
};

}  // namespace masim
