#pragma once

#include <iosfwd>
#include <string>
#include <vector>

#include "masim/common.hpp"
#include "masim/strategy.hpp"

namespace masim {

/// Exact rational, normalized with positive denominator. Magnitudes here
/// stay tiny (antennas, users, small alpha denominators), so long long
/// arithmetic never overflows.
struct Rational {
    long long num = 0;
    long long den = 1;

    Rational() = default;
    Rational(long long n) : num(n), den(1) {}
    Rational(long long n, long long d);

    static Rational parse(const std::string& s);  // "1/3", "0.25", "1"

    Rational operator+(const Rational& o) const;
    Rational operator-(const Rational& o) const;
    Rational operator*(const Rational& o) const;
    bool operator==(const Rational& o) const { return num == o.num && den == o.den; }
    bool operator<(const Rational& o) const;
    bool operator<=(const Rational& o) const { return *this < o || *this == o; }
    bool operator>(const Rational& o) const { return o < *this; }
    bool operator>=(const Rational& o) const { return o <= *this; }

    double value() const { return static_cast<double>(num) / static_cast<double>(den); }
    std::string str() const;
};

Rational min_rational(const Rational& a, const Rational& b);
Rational max_rational(const Rational& a, const Rational& b);

enum class Metric { sum, mmf };

/// Closed-form sum/MMF multiplexing gain for a strategy, with CSIT quality
/// exponent alpha in [0,1] (alpha = 1 is the perfect-CSIT column).
Rational closed_form_dof(StrategyKind kind, int M, int K, int G,
                         const Rational& alpha, Metric metric);

/// sign(d_A - d_B) in {-1, 0, +1}; G applies to whichever side is NOMA.
int compare_dof(StrategyKind a, StrategyKind b, int M, int K, int G,
                const Rational& alpha, Metric metric);

struct SlopeFit {
    double slope = 0.0;      // rate per log2(P)
    double stderr_ = 0.0;    // OLS standard error of the slope
    double intercept = 0.0;
};

/// Ordinary least squares of rate against log2(P) over an SNR(dB) grid.
SlopeFit fit_slope(const std::vector<double>& snr_db,
                   const std::vector<double>& rates);

/// Golden tables (sum and MMF gains vs. M at alpha = 1) as CSV.
void emit_golden_tables(std::ostream& os, int K);
/// Full table for arbitrary alpha (sum + MMF, all strategies).
void emit_dof_table(std::ostream& os, int K, const Rational& alpha);

}  // namespace masim
