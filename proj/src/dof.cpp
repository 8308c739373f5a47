#include "masim/dof.hpp"

#include <cmath>
#include <numeric>
#include <ostream>

namespace masim {

Rational::Rational(long long n, long long d) : num(n), den(d) {
    if (den == 0) throw ConfigError("rational: zero denominator");
    if (den < 0) {
        num = -num;
        den = -den;
    }
    const long long g = std::gcd(num < 0 ? -num : num, den);
    if (g > 1) {
        num /= g;
        den /= g;
    }
}

Rational Rational::parse(const std::string& s) {
    const auto slash = s.find('/');
    if (slash != std::string::npos)
        return Rational(std::stoll(s.substr(0, slash)), std::stoll(s.substr(slash + 1)));
    const auto dot = s.find('.');
    if (dot != std::string::npos) {
        const std::string frac = s.substr(dot + 1);
        if (frac.size() > 9) throw ConfigError("rational: too many decimals: " + s);
        long long den = 1;
        for (std::size_t i = 0; i < frac.size(); ++i) den *= 10;
        const long long whole = dot == 0 ? 0 : std::stoll(s.substr(0, dot));
        const long long neg = (!s.empty() && s[0] == '-') ? -1 : 1;
        const long long f = frac.empty() ? 0 : std::stoll(frac);
        return Rational(whole * den + neg * f, den);
    }
    return Rational(std::stoll(s));
}

Rational Rational::operator+(const Rational& o) const {
    return Rational(num * o.den + o.num * den, den * o.den);
}
Rational Rational::operator-(const Rational& o) const {
    return Rational(num * o.den - o.num * den, den * o.den);
}
Rational Rational::operator*(const Rational& o) const {
    return Rational(num * o.num, den * o.den);
}
bool Rational::operator<(const Rational& o) const {
    return num * o.den < o.num * den;
}

std::string Rational::str() const {
    if (den == 1) return std::to_string(num);
    return std::to_string(num) + "/" + std::to_string(den);
}

Rational min_rational(const Rational& a, const Rational& b) { return a < b ? a : b; }
Rational max_rational(const Rational& a, const Rational& b) { return a < b ? b : a; }

Rational closed_form_dof(StrategyKind kind, int M, int K, int G,
                         const Rational& alpha, Metric metric) {
    if (M < 1 || K < 1) throw ConfigError("dof: M >= 1 and K >= 1 required");
    if (alpha < Rational(0) || Rational(1) < alpha)
        throw ConfigError("dof: alpha must be in [0, 1]");
    const Rational one(1);
    const long long minMK = std::min(M, K);

    switch (kind) {
        case StrategyKind::noma: {
            StrategyConfig cfg{StrategyKind::noma, G};
            cfg.validate(K);
            const int g = K / G;
            if (metric == Metric::sum)
                return max_rational(one, Rational(std::min(M, G)) * alpha);
            if (G == 1) return Rational(1, K);
            if (M >= K - g + 1) return alpha * Rational(1, g);
            return Rational(0);
        }
        case StrategyKind::mulp: {
            if (metric == Metric::sum)
                return max_rational(one, Rational(minMK) * alpha);
            if (M >= K) return alpha;
            return Rational(0);
        }
        case StrategyKind::rs1: {
            if (metric == Metric::sum) return one + Rational(minMK - 1) * alpha;
            if (M >= K) return (one + Rational(K - 1) * alpha) * Rational(1, K);
            const Rational threshold(1, 1 + K - M);
            if (alpha <= threshold)
                return (one + Rational(M - 1) * alpha) * Rational(1, K);
            return threshold;
        }
        case StrategyKind::oma: {
            if (metric == Metric::sum) return one;
            return K >= 2 ? Rational(0) : one;
        }
    }
    throw ConfigError("dof: unknown strategy");
}

int compare_dof(StrategyKind a, StrategyKind b, int M, int K, int G,
                const Rational& alpha, Metric metric) {
    const Rational da = closed_form_dof(a, M, K, G, alpha, metric);
    const Rational db = closed_form_dof(b, M, K, G, alpha, metric);
    if (da < db) return -1;
    if (db < da) return 1;
    return 0;
}

SlopeFit fit_slope(const std::vector<double>& snr_db,
                   const std::vector<double>& rates) {
    const int n = static_cast<int>(snr_db.size());
    if (n < 3 || rates.size() != snr_db.size())
        throw ConfigError("fit_slope: need >= 3 (snr, rate) points");
    for (int i = 1; i < n; ++i)
        if (!(snr_db[i] > snr_db[i - 1]))
            throw ConfigError("fit_slope: SNR grid must be strictly increasing");

    // x = log2(P) = dB * log2(10) / 10
    const double scale = std::log2(10.0) / 10.0;
    double sx = 0.0, sy = 0.0;
    for (int i = 0; i < n; ++i) {
        sx += snr_db[i] * scale;
        sy += rates[i];
    }
    const double mx = sx / n, my = sy / n;
    double sxx = 0.0, sxy = 0.0;
    for (int i = 0; i < n; ++i) {
        const double dx = snr_db[i] * scale - mx;
        sxx += dx * dx;
        sxy += dx * (rates[i] - my);
    }
    if (sxx <= 0.0) throw ConfigError("fit_slope: degenerate grid");
    SlopeFit fit;
    fit.slope = sxy / sxx;
    fit.intercept = my - fit.slope * mx;
    double sse = 0.0;
    for (int i = 0; i < n; ++i) {
        const double e = rates[i] - (fit.intercept + fit.slope * snr_db[i] * scale);
        sse += e * e;
    }
    fit.stderr_ = n > 2 ? std::sqrt(sse / (n - 2) / sxx) : 0.0;
    return fit;
}

namespace {

std::vector<int> noma_group_choices(int K) {
    std::vector<int> gs;
    for (int G = 1; G < K; ++G)
        if (K % G == 0) gs.push_back(G);
    return gs;
}

}  // namespace

void emit_dof_table(std::ostream& os, int K, const Rational& alpha) {
    const auto gs = noma_group_choices(K);
    os << "metric,M";
    for (int G : gs) os << ",noma-g" << G;
    os << ",mulp,rs1,oma\n";
    for (Metric metric : {Metric::sum, Metric::mmf}) {
        for (int M = 1; M <= K; ++M) {
            os << (metric == Metric::sum ? "sum" : "mmf") << ',' << M;
            for (int G : gs)
                os << ',' << closed_form_dof(StrategyKind::noma, M, K, G, alpha, metric).str();
            os << ',' << closed_form_dof(StrategyKind::mulp, M, K, 1, alpha, metric).str();
            os << ',' << closed_form_dof(StrategyKind::rs1, M, K, 1, alpha, metric).str();
            os << ',' << closed_form_dof(StrategyKind::oma, M, K, 1, alpha, metric).str();
            os << '\n';
        }
    }
}

void emit_golden_tables(std::ostream& os, int K) {
    emit_dof_table(os, K, Rational(1));
}

}  // namespace masim
