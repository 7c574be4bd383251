#include "ratstep/rational.hpp"

#include <Eigen/Dense>
#include <gtest/gtest.h>

#include <cmath>
#include <sstream>

using namespace ratstep;

namespace {

double factorial(int n) { return n <= 1 ? 1.0 : n * factorial(n - 1); }

// (k,k) Pade numerator of e^z from the closed-form coefficient formula.
RealPolynomial pade_numerator(int k) {
    std::vector<double> c(std::size_t(k + 1));
    for (int j = 0; j <= k; ++j)
        c[std::size_t(j)] = factorial(2 * k - j) * factorial(k) / (factorial(2 * k) * factorial(j) * factorial(k - j));
    return RealPolynomial(c);
}

RealPolynomial reflect(const RealPolynomial& p) {
    auto c = p.coefficients();
    for (std::size_t j = 1; j < c.size(); j += 2) c[j] = -c[j];
    return RealPolynomial(c);
}

// 1 + z b^T (I - zA)^{-1} e by a dense solve.
cplx dense_stability(const ButcherTableau& T, cplx z) {
    Eigen::MatrixXcd M = Eigen::MatrixXcd::Identity(T.s, T.s);
    for (int i = 0; i < T.s; ++i)
        for (int j = 0; j < T.s; ++j) M(i, j) -= z * T.a(i, j);
    const Eigen::VectorXcd x = M.partialPivLu().solve(Eigen::VectorXcd::Ones(T.s));
    cplx s = 0.0;
    for (int i = 0; i < T.s; ++i) s += T.b[std::size_t(i)] * x(i);
    return 1.0 + z * s;
}

} // namespace

TEST(RationalEval, ConsistencyAtZero) {
    for (const char* id : {"sdirk3", "gauss3"}) {
        const auto R = method_approximant(id);
        EXPECT_NEAR(std::abs(R(0.0) - 1.0), 0.0, 1e-12) << id;
    }
}

TEST(RationalEval, PoleHitIsDomainError) {
    const auto R = method_approximant("sdirk3");
    EXPECT_THROW(R(1.0 / R.poles[0].w), DomainError);
}

TEST(RationalEval, SdirkLimitAtMinusInfinityIsQuotientLimit) {
    const auto R = method_approximant("sdirk3");
    const auto sf = stability_function_from_butcher(sdirk3_tableau());
    const double limit = sf.numerator.coefficient(3) / sf.denominator.coefficient(3);
    EXPECT_NEAR(R(-1e8).real(), limit, 1e-7);
    EXPECT_NEAR(R.r_infinity.real(), limit, 1e-12);
    EXPECT_NEAR(limit, -0.6304149, 1e-6);
}

TEST(RationalEval, GaussUnitModulusOnImaginaryAxis) {
    const auto R = method_approximant("gauss3");
    const auto P = pade_numerator(3);
    const cplx z(0.0, 1e6);
    const cplx q = P(z) / reflect(P)(z);
    EXPECT_NEAR(std::abs(q), 1.0, 1e-12);
    EXPECT_NEAR(std::abs(R(z)), 1.0, 1e-6);
}

TEST(Taylor, ResolventSeries) {
    const double d = 0.4358665215;
    const auto t = resolvent_taylor(d, 1, 4);
    ASSERT_EQ(t.size(), 4u);
    for (int k = 0; k < 4; ++k) EXPECT_NEAR(std::abs(t[std::size_t(k)] - std::pow(d, k)), 0.0, 1e-15);
}

TEST(Taylor, ShiftedResolventCubed) {
    const double d = 0.7;
    const auto t = shifted_resolvent_taylor(d, 3, 4);
    const std::vector<double> expect{0.0, 1.0, 3 * d, 6 * d * d};
    for (int k = 0; k < 4; ++k) EXPECT_NEAR(std::abs(t[std::size_t(k)] - expect[std::size_t(k)]), 0.0, 1e-15);
}

TEST(Taylor, ConstantQuotient) {
    const auto t = taylor_coefficients(ComplexPolynomial{1.0}, ComplexPolynomial{1.0}, 3);
    EXPECT_EQ(t, (std::vector<cplx>{1.0, 0.0, 0.0}));
}

TEST(Taylor, PoleAtOriginRejected) {
    EXPECT_THROW(taylor_coefficients(ComplexPolynomial{1.0}, ComplexPolynomial{0.0, 1.0}, 3), DomainError);
}

TEST(Taylor, PoleFormMatchesExponentialToOrder) {
    for (const char* id : {"sdirk3", "gauss3"}) {
        const auto R = method_approximant(id);
        const auto t = taylor_coefficients(R, std::size_t(R.classical_order + 1));
        for (int j = 0; j <= R.classical_order; ++j)
            EXPECT_NEAR(std::abs(t[std::size_t(j)] - 1.0 / factorial(j)), 0.0, 1e-12) << id << " j=" << j;
    }
}

TEST(Taylor, EvalCoherenceNearOrigin) {
    for (const char* id : {"sdirk3", "gauss3"}) {
        const auto R = method_approximant(id);
        for (int q = 1; q <= R.classical_order + 1; ++q) {
            const auto t = taylor_coefficients(R, std::size_t(q + 1));
            for (int k = 0; k < 20; ++k) {
                const cplx z = std::polar(0.01 * (k + 1) / 20.0, 0.7 * k);
                cplx s = 0.0;
                for (int j = 0; j < q; ++j) s += t[std::size_t(j)] * std::pow(z, j);
                EXPECT_LE(std::abs(R(z) - s), 2.0 * std::abs(t[std::size_t(q)]) * std::pow(std::abs(z), q) + 1e-14);
            }
        }
    }
}

TEST(PartialFractions, SimpleFraction) {
    const double d = 0.3;
    const auto R = partial_fractions(RealPolynomial{1.0}, RealPolynomial{1.0, -d});
    EXPECT_EQ(R.r_infinity, cplx(0.0));
    ASSERT_EQ(R.poles.size(), 1u);
    EXPECT_NEAR(std::abs(R.poles[0].w - d), 0.0, 1e-14);
    EXPECT_EQ(R.poles[0].multiplicity, 1);
    EXPECT_NEAR(std::abs(R.poles[0].residues[0] - 1.0), 0.0, 1e-14);
}

TEST(PartialFractions, SdirkTriplePole) {
    const auto T = sdirk3_tableau();
    const auto sf = stability_function_from_butcher(T);
    const auto R = partial_fractions(sf.numerator, sf.denominator);
    ASSERT_EQ(R.poles.size(), 1u);
    EXPECT_EQ(R.poles[0].multiplicity, 3);
    EXPECT_NEAR(std::abs(R.poles[0].w - T.a(0, 0)), 0.0, 1e-12);
    EXPECT_EQ(R.pole_count(), 3);
    cplx sum = R.r_infinity;
    for (const auto& r : R.poles[0].residues) sum += r;
    EXPECT_NEAR(std::abs(sum - 1.0), 0.0, 1e-12);
}

TEST(PartialFractions, GaussThreeSimplePolesRoundTrip) {
    const auto P = pade_numerator(3);
    const auto Q = reflect(P);
    const auto R = partial_fractions(P, Q);
    ASSERT_EQ(R.poles.size(), 3u);
    for (const auto& p : R.poles) {
        EXPECT_EQ(p.multiplicity, 1);
        EXPECT_GT(p.w.real(), 0.0);
    }
    EXPECT_TRUE(R.is_conjugate_symmetric());
    for (cplx z : {cplx(0.5), cplx(-0.5), cplx(0, 0.5), cplx(0, -0.5)}) {
        const cplx q = P(z) / Q(z);
        EXPECT_LE(std::abs(R(z) - q), 1e-10 * std::abs(q)) << z;
    }
    // verification grid used by the round-trip property
    for (int k = 0; k < 100; ++k) {
        const cplx z = std::polar(std::sqrt((k + 0.5) / 100.0), 2.39996 * k);
        const cplx q = P(z) / Q(z);
        EXPECT_LE(std::abs(R(z) - q), 1e-10 * (1.0 + std::abs(q)));
    }
}

TEST(PartialFractions, Rejections) {
    // 1/(1+z): w = -1
    EXPECT_THROW(partial_fractions(RealPolynomial{1.0}, RealPolynomial{1.0, 1.0}), DomainError);
    EXPECT_THROW(partial_fractions(RealPolynomial{1.0, 0.0, 1.0}, RealPolynomial{1.0, -0.5}), DomainError);
}

TEST(PartialFractions, RealOutputsForRealInputs) {
    for (const char* id : {"sdirk3", "gauss3"}) {
        const auto R = method_approximant(id);
        for (int k = 0; k < 50; ++k) {
            const double x = -10.0 * k / 49.0;
            const cplx v = R(x);
            EXPECT_LE(std::abs(v.imag()), 1e-13 * (1.0 + std::abs(v))) << id << " x=" << x;
        }
    }
}

TEST(StabilityFunction, ExplicitEuler) {
    ButcherTableau T{1, {0.0}, {1.0}, {0.0}};
    const auto sf = stability_function_from_butcher(T);
    EXPECT_EQ(sf.numerator.coefficients(), (std::vector<double>{1.0, 1.0}));
    EXPECT_EQ(sf.denominator.coefficients(), (std::vector<double>{1.0}));
    const auto rep = verify_order_and_acceptability(sf.numerator, sf.denominator);
    EXPECT_EQ(rep.order, 1);
    EXPECT_FALSE(rep.a_acceptable);
}

TEST(StabilityFunction, SdirkDenominatorIsCubeOfDiagonalFactor) {
    const auto T = sdirk3_tableau();
    const auto sf = stability_function_from_butcher(T);
    const double d = T.a(0, 0);
    // (1 - d z)^3 expanded by hand
    const std::vector<double> cube{1.0, -3 * d, 3 * d * d, -d * d * d};
    ASSERT_EQ(sf.denominator.degree(), 3u);
    for (std::size_t k = 0; k < 4; ++k) EXPECT_NEAR(sf.denominator.coefficient(k), cube[k], 1e-14);
    for (cplx z : {cplx(-1.0), cplx(0.3, 2.0), cplx(-7.0, -1.0)})
        EXPECT_NEAR(std::abs(sf.numerator(z) / sf.denominator(z) - dense_stability(T, z)), 0.0, 1e-12);
}

TEST(StabilityFunction, GaussIsPade33) {
    const auto sf = stability_function_from_butcher(gauss3_tableau());
    const auto P = pade_numerator(3);
    const auto Q = reflect(P);
    const double scale = sf.denominator.coefficient(0);
    for (std::size_t k = 0; k <= 3; ++k) {
        EXPECT_NEAR(sf.numerator.coefficient(k) / scale, P.coefficient(k), 1e-12);
        EXPECT_NEAR(sf.denominator.coefficient(k) / scale, Q.coefficient(k), 1e-12);
    }
}

TEST(OrderAndAcceptability, Methods) {
    const auto s = verify_order_and_acceptability(method_approximant("sdirk3"));
    EXPECT_EQ(s.order, 4);
    EXPECT_TRUE(s.a_acceptable);
    const auto g = verify_order_and_acceptability(method_approximant("gauss3"));
    EXPECT_EQ(g.order, 6);
    EXPECT_TRUE(g.a_acceptable);
}

TEST(Tableau, RowSumsAndValidation) {
    for (const char* id : {"sdirk3", "gauss3"}) EXPECT_NO_THROW(method_tableau(id).validate());
    ButcherTableau bad{1, {0.5}, {1.0}, {0.0}};
    EXPECT_THROW(bad.validate(), ConfigError);
    EXPECT_THROW(method_tableau("rk4"), ConfigError);
}

TEST(Tableau, TextFormatRoundTrip) {
    const auto T = parse_tableau("# implicit midpoint\n1\n0.5\n1\n0.5\n");
    EXPECT_EQ(T.s, 1);
    EXPECT_DOUBLE_EQ(T.a(0, 0), 0.5);
    const auto R = approximant_from_tableau(T, "midpoint");
    EXPECT_EQ(verify_order_and_acceptability(R).order, 2);
    EXPECT_THROW(parse_tableau("1\n0.5\n1\n0.5\n7\n"), ConfigError);
    EXPECT_THROW(parse_tableau("2\n0.5\n"), ConfigError);
}

TEST(Roots, CubicWithTripleRoot) {
    // (1 - 2z)^3
    const auto r = polynomial_roots(ComplexPolynomial{1.0, -6.0, 12.0, -8.0});
    ASSERT_EQ(r.size(), 3u);
    for (const auto& z : r) EXPECT_NEAR(std::abs(z - 0.5), 0.0, 1e-6);
}
