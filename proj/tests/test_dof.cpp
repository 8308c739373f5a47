#include <doctest.h>

#include <cmath>
#include <sstream>

#include "masim/dof.hpp"

using namespace masim;

namespace {
const Rational kAlphas[] = {Rational(0), Rational(1, 4), Rational(1, 2),
                            Rational(3, 4), Rational(1)};
}

TEST_CASE("rational arithmetic and parsing") {
    CHECK(Rational(2, 6) == Rational(1, 3));
    CHECK((Rational(1, 2) + Rational(1, 3)) == Rational(5, 6));
    CHECK((Rational(1, 2) * Rational(2, 3)) == Rational(1, 3));
    CHECK(Rational(1, 3).str() == "1/3");
    CHECK(Rational(4).str() == "4");
    CHECK(Rational::parse("0.25") == Rational(1, 4));
    CHECK(Rational::parse("1") == Rational(1));
    CHECK(Rational::parse("2/3") == Rational(2, 3));
    CHECK(Rational::parse("0.5").value() == 0.5);
    CHECK(Rational(1, 3) < Rational(1, 2));
    CHECK_THROWS_AS(Rational(1, 0), ConfigError);
}

TEST_CASE("golden table entries, K = 6, alpha = 1") {
    const Rational one(1);
    for (int M = 1; M <= 6; ++M) {
        CHECK(closed_form_dof(StrategyKind::noma, M, 6, 1, one, Metric::sum) ==
              Rational(1));
        CHECK(closed_form_dof(StrategyKind::noma, M, 6, 3, one, Metric::sum) ==
              Rational(std::min(M, 3)));
        CHECK(closed_form_dof(StrategyKind::mulp, M, 6, 1, one, Metric::sum) ==
              Rational(std::min(M, 6)));
        CHECK(closed_form_dof(StrategyKind::rs1, M, 6, 1, one, Metric::sum) ==
              Rational(std::min(M, 6)));
        CHECK(closed_form_dof(StrategyKind::oma, M, 6, 1, one, Metric::sum) ==
              Rational(1));
    }
    // MMF table (Table IV layout).
    const Rational noma_g3_mmf[] = {Rational(0), Rational(0), Rational(0),
                                    Rational(0), Rational(1, 2), Rational(1, 2)};
    const Rational rs_mmf[] = {Rational(1, 6), Rational(1, 5), Rational(1, 4),
                               Rational(1, 3), Rational(1, 2), Rational(1)};
    for (int M = 1; M <= 6; ++M) {
        CHECK(closed_form_dof(StrategyKind::noma, M, 6, 1, one, Metric::mmf) ==
              Rational(1, 6));
        CHECK(closed_form_dof(StrategyKind::noma, M, 6, 3, one, Metric::mmf) ==
              noma_g3_mmf[M - 1]);
        CHECK(closed_form_dof(StrategyKind::mulp, M, 6, 1, one, Metric::mmf) ==
              (M >= 6 ? Rational(1) : Rational(0)));
        CHECK(closed_form_dof(StrategyKind::rs1, M, 6, 1, one, Metric::mmf) ==
              rs_mmf[M - 1]);
        CHECK(closed_form_dof(StrategyKind::oma, M, 6, 1, one, Metric::mmf) ==
              Rational(0));
    }
}

TEST_CASE("imperfect-CSIT closed forms (Table II spot checks)") {
    const Rational half(1, 2);
    // MU-LP K=6, M=6, alpha=1/2, mmf -> 1/2; RS same setting -> 7/12.
    CHECK(closed_form_dof(StrategyKind::mulp, 6, 6, 1, half, Metric::mmf) ==
          Rational(1, 2));
    CHECK(closed_form_dof(StrategyKind::rs1, 6, 6, 1, half, Metric::mmf) ==
          Rational(7, 12));
    // Sum gains at alpha = 1/2, K = 6 (the Fig. 11 discussion values).
    CHECK(closed_form_dof(StrategyKind::rs1, 3, 6, 1, half, Metric::sum) ==
          Rational(2));
    CHECK(closed_form_dof(StrategyKind::rs1, 6, 6, 1, half, Metric::sum) ==
          Rational(7, 2));
    CHECK(closed_form_dof(StrategyKind::mulp, 3, 6, 1, half, Metric::sum) ==
          Rational(3, 2));
    CHECK(closed_form_dof(StrategyKind::mulp, 6, 6, 1, half, Metric::sum) ==
          Rational(3));
    CHECK(closed_form_dof(StrategyKind::noma, 3, 6, 3, half, Metric::sum) ==
          Rational(3, 2));
    CHECK(closed_form_dof(StrategyKind::noma, 6, 6, 3, half, Metric::sum) ==
          Rational(3, 2));
    CHECK(closed_form_dof(StrategyKind::noma, 6, 6, 1, half, Metric::sum) ==
          Rational(1));
    // NOMA MMF at alpha = 1/2: alpha/g when M >= K-g+1 and G > 1.
    CHECK(closed_form_dof(StrategyKind::noma, 5, 6, 3, half, Metric::mmf) ==
          Rational(1, 4));
    CHECK(closed_form_dof(StrategyKind::noma, 4, 6, 3, half, Metric::mmf) ==
          Rational(0));
    CHECK(closed_form_dof(StrategyKind::noma, 4, 6, 1, half, Metric::mmf) ==
          Rational(1, 6));
    // RS MMF threshold case: M=5, K=6: alpha = 1/2 = 1/(1+K-M) boundary.
    CHECK(closed_form_dof(StrategyKind::rs1, 5, 6, 1, half, Metric::mmf) ==
          Rational(1, 2));
}

TEST_CASE("invalid regimes are rejected") {
    CHECK_THROWS_AS(
        closed_form_dof(StrategyKind::noma, 3, 6, 6, Rational(1), Metric::sum),
        ConfigError);  // G = K
    CHECK_THROWS_AS(
        closed_form_dof(StrategyKind::noma, 3, 6, 4, Rational(1), Metric::sum),
        ConfigError);  // G does not divide K
    CHECK_THROWS_AS(
        closed_form_dof(StrategyKind::mulp, 3, 6, 1, Rational(3, 2), Metric::sum),
        ConfigError);  // alpha > 1
    CHECK_THROWS_AS(
        closed_form_dof(StrategyKind::mulp, 0, 6, 1, Rational(1), Metric::sum),
        ConfigError);
}

TEST_CASE("corollary case tables agree with compare_dof on a dense grid") {
    const Rational one(1);
    for (int K = 2; K <= 8; ++K) {
        for (int M = 1; M <= 8; ++M) {
            for (const Rational& a : kAlphas) {
                for (int G = 1; G < K; ++G) {
                    if (K % G != 0) continue;
                    const int g = K / G;
                    const Rational minMG(std::min(M, G)), minMK(std::min(M, K));

                    // Corollary 1 (sum, NOMA vs MU-LP).
                    {
                        const int sign = compare_dof(StrategyKind::noma,
                                                     StrategyKind::mulp, M, K, G,
                                                     a, Metric::sum);
                        CHECK(sign <= 0);  // NOMA never beats MU-LP in sum gain
                        const bool lt = (minMG * a < one && one < minMK * a) ||
                                        (M > G && one <= minMG * a);
                        const bool eq = (minMK * a <= one) ||
                                        (one <= minMG * a && M <= G);
                        CHECK(sign == (lt ? -1 : 0));
                        CHECK(lt != eq);
                    }
                    // Corollaries 2 and 3 (mmf, NOMA vs MU-LP).
                    {
                        const int sign = compare_dof(StrategyKind::noma,
                                                     StrategyKind::mulp, M, K, G,
                                                     a, Metric::mmf);
                        if (G == 1) {
                            if (M >= K && Rational(1, K) < a) CHECK(sign == -1);
                            if (M >= K && a == Rational(1, K)) CHECK(sign == 0);
                            if (M < K || (M >= K && a < Rational(1, K)))
                                CHECK(sign == 1);
                        } else if (Rational(0) < a) {
                            // alpha = 0 collapses both sides to 0.
                            if (M >= K) CHECK(sign == -1);
                            if (M < K - g + 1) CHECK(sign == 0);
                            if (K > M && M >= K - g + 1) CHECK(sign == 1);
                        }
                    }
                    // Corollary 4 (sum, NOMA vs RS): never a gain; printed
                    // strict/equal split holds away from the M = 1 edge.
                    {
                        const int sign = compare_dof(StrategyKind::noma,
                                                     StrategyKind::rs1, M, K, G, a,
                                                     Metric::sum);
                        CHECK(sign <= 0);
                        if (M >= 2) {
                            const bool eq = (a == Rational(0)) ||
                                            (a == one && M <= G);
                            CHECK(sign == (eq ? 0 : -1));
                        }
                    }
                    // Corollaries 5 and 6 (mmf, NOMA vs RS).
                    {
                        const int sign = compare_dof(StrategyKind::noma,
                                                     StrategyKind::rs1, M, K, G, a,
                                                     Metric::mmf);
                        CHECK(sign <= 0);
                        if (G == 1) {
                            const bool eq = (a == Rational(0)) || (M == 1);
                            CHECK(sign == (eq ? 0 : -1));
                        } else {
                            // Evident intent of Corollary 6: equality only at
                            // M = K-g+1 with alpha = 1.
                            const bool eq = (M == K - g + 1 && a == one);
                            CHECK(sign == (eq ? 0 : -1));
                        }
                    }
                    // RS dominance in both metrics (Props. 9-12 comparisons).
                    CHECK(compare_dof(StrategyKind::mulp, StrategyKind::rs1, M, K,
                                      G, a, Metric::sum) <= 0);
                    CHECK(compare_dof(StrategyKind::mulp, StrategyKind::rs1, M, K,
                                      G, a, Metric::mmf) <= 0);
                }
            }
        }
    }
}

TEST_CASE("fit_slope on exact and noiseless inputs") {
    SUBCASE("exact line R = 3 log2 P + 2") {
        std::vector<double> snr = {10, 20, 30, 40}, rates;
        for (double s : snr) rates.push_back(3.0 * std::log2(db_to_linear(s)) + 2.0);
        const SlopeFit fit = fit_slope(snr, rates);
        CHECK(fit.slope == doctest::Approx(3.0).epsilon(1e-12));
        CHECK(fit.intercept == doctest::Approx(2.0).epsilon(1e-9));
        CHECK(fit.stderr_ == doctest::Approx(0.0));
    }
    SUBCASE("constant rates") {
        const SlopeFit fit = fit_slope({10, 20, 30}, {1.5, 1.5, 1.5});
        CHECK(fit.slope == doctest::Approx(0.0));
    }
    SUBCASE("oma closed form at 30/35/40 dB") {
        const double h2 = 2.3;
        std::vector<double> snr = {30, 35, 40}, rates;
        for (double s : snr) rates.push_back(std::log2(1.0 + h2 * db_to_linear(s)));
        const SlopeFit fit = fit_slope(snr, rates);
        CHECK(std::abs(fit.slope - 1.0) < 0.05);
    }
    SUBCASE("degenerate grids are rejected") {
        CHECK_THROWS_AS(fit_slope({10, 20}, {1, 2}), ConfigError);
        CHECK_THROWS_AS(fit_slope({10, 10, 20}, {1, 2, 3}), ConfigError);
    }
}

TEST_CASE("golden table CSV emission") {
    std::ostringstream os;
    emit_golden_tables(os, 6);
    const std::string csv = os.str();
    CHECK(csv.find("metric,M,noma-g1,noma-g2,noma-g3,mulp,rs1,oma") == 0);
    CHECK(csv.find("sum,4,1,2,3,4,4,1") != std::string::npos);
    CHECK(csv.find("mmf,4,1/6,1/3,0,0,1/3,0") != std::string::npos);
    CHECK(csv.find("mmf,6,1/6,1/3,1/2,1,1,0") != std::string::npos);
}
