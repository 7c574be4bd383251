#include "ratstep/nodes.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <set>
#include <sstream>

using namespace ratstep;

namespace {

double factorial(int n) { return n <= 1 ? 1.0 : n * factorial(n - 1); }

// x_k = sum_j m_j [x^j] L_k(x), L_k the Lagrange basis polynomial of node k.
std::vector<cplx> lagrange_solve(const std::vector<double>& c, const std::vector<cplx>& m) {
    const std::size_t q = c.size();
    std::vector<cplx> x(q, 0.0);
    for (std::size_t k = 0; k < q; ++k) {
        std::vector<long double> L{1.0L};
        long double denom = 1.0L;
        for (std::size_t i = 0; i < q; ++i) {
            if (i == k) continue;
            std::vector<long double> next(L.size() + 1, 0.0L);
            for (std::size_t a = 0; a < L.size(); ++a) {
                next[a + 1] += L[a];
                next[a] -= c[i] * L[a];
            }
            L = next;
            denom *= (c[k] - c[i]);
        }
        for (std::size_t j = 0; j < q; ++j) x[k] += m[j] * double(L[j] / denom);
    }
    return x;
}

std::vector<double> iota(int lo, int hi) {
    std::vector<double> v;
    for (int k = lo; k <= hi; ++k) v.push_back(k);
    return v;
}

std::vector<double> centered(int q) {
    std::vector<double> v;
    for (int k = 0; k < q; ++k) v.push_back(k - (q - 1) / 2.0);
    return v;
}

} // namespace

TEST(Presets, ExplicitStartup) {
    const auto w = preset_nodes(NodeKind::Explicit, 4, 0);
    EXPECT_EQ(w.c, iota(0, 3));
    EXPECT_EQ(w.d, iota(0, 4));
    EXPECT_EQ(preset_nodes(NodeKind::Explicit, 4, 1).c, iota(-1, 2));
    EXPECT_EQ(preset_nodes(NodeKind::Explicit, 4, 2).c, iota(-2, 1));
    EXPECT_EQ(preset_nodes(NodeKind::Explicit, 4, 3).c, iota(-3, 0));
    EXPECT_EQ(preset_nodes(NodeKind::Explicit, 4, 3).d, iota(-3, 1));
}

TEST(Presets, ImplicitSteady) {
    const auto w = preset_nodes(NodeKind::Implicit, 4, 10);
    EXPECT_EQ(w.c, iota(-2, 1));
    EXPECT_EQ(w.d, iota(-3, 1));
}

TEST(Presets, SixthOrderWindows) {
    EXPECT_EQ(preset_nodes(NodeKind::Explicit, 6, 5).c, iota(-5, 0));
    EXPECT_EQ(preset_nodes(NodeKind::Implicit, 6, 9).c, iota(-4, 1));
    const auto cw = preset_nodes(NodeKind::Centered, 6, 3);
    EXPECT_EQ(cw.c, (std::vector<double>{-2.5, -1.5, -0.5, 0.5, 1.5, 2.5}));
    EXPECT_EQ(cw.d, iota(-3, 3));
}

TEST(Presets, ChebyshevCentered) {
    const auto w = preset_nodes(NodeKind::ChebyshevCentered, 6, 5);
    const double h = std::sqrt(3.0) / 2.0;
    const std::vector<double> expect{0.5 * (-h - 1), -0.5, 0.5 * (h - 1), 0.5 * (1 - h), 0.5, 0.5 * (h + 1)};
    ASSERT_EQ(w.c.size(), 6u);
    for (std::size_t k = 0; k < 6; ++k) EXPECT_NEAR(w.c[k], expect[k], 1e-15);
    EXPECT_EQ(w.d, iota(-3, 3));
}

TEST(Presets, NodesNeverPrecedeTimeZero) {
    for (auto [kind, p] : {std::pair{NodeKind::Explicit, 4}, {NodeKind::Implicit, 4}, {NodeKind::Explicit, 6},
                           {NodeKind::Implicit, 6}, {NodeKind::Centered, 6}, {NodeKind::ChebyshevCentered, 6}}) {
        const NodeScheme s(kind, p);
        for (int n = 0; n < 12; ++n) {
            const auto w = s.window(n);
            EXPECT_EQ(w.c.size(), std::size_t(p));
            EXPECT_EQ(w.d.size(), std::size_t(p + 1));
            for (double c : w.c) EXPECT_GE(n + c, -1e-12);
            for (double d : w.d) EXPECT_GE(n + d, -1e-12);
        }
    }
}

TEST(Presets, UnsupportedPairs) {
    EXPECT_THROW(NodeScheme(NodeKind::Centered, 4), ConfigError);
    EXPECT_THROW(NodeScheme(NodeKind::Explicit, 5), ConfigError);
    EXPECT_THROW(make_node_scheme("backward", 4), ConfigError);
}

TEST(Presets, OneNewSamplePerSteadyStep) {
    for (auto [kind, p] : {std::pair{NodeKind::Explicit, 4}, {NodeKind::Implicit, 4}, {NodeKind::Explicit, 6},
                           {NodeKind::Implicit, 6}, {NodeKind::Centered, 6}}) {
        const NodeScheme s(kind, p);
        std::set<double> fs, gs;
        for (int n = 0; n < 20; ++n) {
            const auto w = s.window(n);
            std::size_t nf = 0, ng = 0;
            for (double c : w.c) nf += fs.insert(n + c).second;
            for (double d : w.d) ng += gs.insert(n + d).second;
            if (n > s.startup_depth()) {
                EXPECT_LE(nf, 1u) << to_string(kind) << " n=" << n;
                EXPECT_LE(ng, 1u) << to_string(kind) << " n=" << n;
            }
        }
    }
}

TEST(CustomTable, ParseAndValidate) {
    std::istringstream in("# startup\n0 1 | 0 1 2\n-1 0 | -1 0 1\n");
    const auto s = parse_node_table(in);
    EXPECT_EQ(s.order(), 2);
    EXPECT_EQ(s.window(0).c, (std::vector<double>{0, 1}));
    EXPECT_EQ(s.window(7).d, (std::vector<double>{-1, 0, 1}));
    std::istringstream bad("0 0 | 0 1 2\n");
    EXPECT_THROW(parse_node_table(bad), SingularError);
    std::istringstream nobar("0 1 0 1 2\n");
    EXPECT_THROW(parse_node_table(nobar), ConfigError);
    std::istringstream early("-1 0 | -1 0 1\n");
    EXPECT_THROW(parse_node_table(early).window(0), ConfigError);
}

TEST(Vandermonde, OneByOne) {
    const auto g = vandermonde_coefficients({0.0}, {cplx(2.5, 1.0)});
    EXPECT_EQ(g, (std::vector<cplx>{cplx(2.5, 1.0)}));
}

TEST(Vandermonde, HandSolvedTwoByTwo) {
    const double d = 0.43;
    const auto g = vandermonde_coefficients({-1.0, 0.0}, resolvent_taylor(d, 1, 2));
    EXPECT_NEAR(std::abs(g[0] + d), 0.0, 1e-15);
    EXPECT_NEAR(std::abs(g[1] - (1 + d)), 0.0, 1e-15);
    const auto e = vandermonde_coefficients({-1.0, 0.0}, shifted_resolvent_taylor(d, 1, 2));
    EXPECT_NEAR(std::abs(e[0] + 1.0), 0.0, 1e-15);
    EXPECT_NEAR(std::abs(e[1] - 1.0), 0.0, 1e-15);
}

TEST(Vandermonde, ZeroPoleSelectsCurrentSample) {
    const auto g = vandermonde_coefficients({-1.0, 0.0}, {1.0, 0.0});
    EXPECT_NEAR(std::abs(g[0]), 0.0, 1e-15);
    EXPECT_NEAR(std::abs(g[1] - 1.0), 0.0, 1e-15);
}

TEST(Vandermonde, RepeatedNodesAreSingular) {
    EXPECT_THROW(vandermonde_coefficients({0.0, 1.0, 1.0}, {1.0, 0.0, 0.0}), SingularError);
}

TEST(Vandermonde, AgreesWithLagrangeOracle) {
    const auto R = method_approximant("sdirk3");
    const cplx w = R.poles[0].w;
    const std::vector<double> c = iota(-2, 1);
    for (int i = 1; i <= 3; ++i) {
        const auto t = resolvent_taylor(w, i, 4);
        std::vector<cplx> m(4);
        for (int j = 0; j < 4; ++j) m[std::size_t(j)] = factorial(j) * t[std::size_t(j)];
        const auto g = vandermonde_coefficients(c, t);
        const auto o = lagrange_solve(c, m);
        for (std::size_t k = 0; k < 4; ++k) EXPECT_NEAR(std::abs(g[k] - o[k]), 0.0, 1e-13) << "i=" << i;
    }
}

TEST(Vandermonde, MomentResidualForAllSchemes) {
    for (const char* id : {"sdirk3", "gauss3"}) {
        const auto R = method_approximant(id);
        const int p = R.classical_order;
        std::vector<NodeKind> kinds{NodeKind::Explicit, NodeKind::Implicit};
        if (p == 6) {
            kinds.push_back(NodeKind::Centered);
            kinds.push_back(NodeKind::ChebyshevCentered);
        }
        for (auto kind : kinds) {
            const NodeScheme s(kind, p);
            for (int n = 0; n <= s.startup_depth(); ++n) {
                const auto win = s.window(n);
                const auto sc = step_coefficients(R, win);
                ASSERT_EQ(sc.gamma.size(), R.poles.size());
                for (std::size_t l = 0; l < R.poles.size(); ++l)
                    for (int i = 1; i <= R.poles[l].multiplicity; ++i) {
                        const auto& g = sc.gamma[l][std::size_t(i - 1)];
                        const auto& e = sc.eta[l][std::size_t(i - 1)];
                        EXPECT_LE(moment_residual(win.c, g, resolvent_taylor(R.poles[l].w, i, std::size_t(p))), 1e-11);
                        EXPECT_LE(moment_residual(win.d, e, shifted_resolvent_taylor(R.poles[l].w, i, std::size_t(p + 1))),
                                  1e-11);
                        // j = 0 moments: sum gamma = 1, sum eta = 0
                        cplx sg = 0.0, se = 0.0;
                        for (auto v : g) sg += v;
                        for (auto v : e) se += v;
                        EXPECT_NEAR(std::abs(sg - 1.0), 0.0, 1e-11);
                        EXPECT_NEAR(std::abs(se), 0.0, 1e-11);
                    }
            }
        }
    }
}

TEST(Vandermonde, ResolventApproximationOrder) {
    // h(t) = exp(i t): [(I - tau w d/dt)^{-1} h](0) = 1 / (1 - i tau w)
    const auto R = method_approximant("sdirk3");
    const cplx w = R.poles[0].w;
    const std::vector<double> c = iota(-2, 1);
    const auto g = vandermonde_coefficients(c, resolvent_taylor(w, 1, 4));
    std::vector<double> taus{0.1, 0.05, 0.025, 0.0125}, errs;
    for (double tau : taus) {
        cplx approx = 0.0;
        for (std::size_t k = 0; k < c.size(); ++k) approx += g[k] * std::exp(cplx(0, tau * c[k]));
        errs.push_back(std::abs(1.0 / (1.0 - cplx(0, 1) * tau * w) - approx));
    }
    double sx = 0, sy = 0, sxx = 0, sxy = 0;
    for (std::size_t i = 0; i < taus.size(); ++i) {
        const double x = std::log(taus[i]), y = std::log(errs[i]);
        sx += x; sy += y; sxx += x * x; sxy += x * y;
    }
    const double slope = (4 * sxy - sx * sy) / (4 * sxx - sx * sx);
    EXPECT_NEAR(slope, 4.0, 0.3);
}

TEST(Conditioning, TrailingAndCenteredLists) {
    const std::vector<double> trailing{3, 6.5, 13.25, 32.25, 76.94, 199.04, 511.31};
    const std::vector<double> cent{2, 2.94, 3.75, 5.78, 8.03, 13.15, 20.27};
    for (int q = 3; q <= 9; ++q) {
        const double rt = conditioning_report(iota(-(q - 1), 0)).rho;
        const double rc = conditioning_report(centered(q)).rho;
        EXPECT_NEAR(rt / trailing[std::size_t(q - 3)], 1.0, 0.01) << "q=" << q;
        EXPECT_NEAR(rc / cent[std::size_t(q - 3)], 1.0, 0.01) << "q=" << q;
        if (q <= 7) {
            EXPECT_LE(rc, rt);
        }
    }
}

TEST(Conditioning, SmallExamples) {
    EXPECT_NEAR(conditioning_report({-2.0, -1.0, 0.0}).rho, 3.0, 1e-12);
    EXPECT_NEAR(conditioning_report({-1.0, 0.0, 1.0}).rho, 2.0, 1e-12);
    EXPECT_NEAR(conditioning_report({-3.0, -2.0, -1.0, 0.0}).rho, 6.5, 1e-12);
    EXPECT_NEAR(conditioning_report({-3.0, -2.0, -1.0, 0.0}).node_factor, 81.0, 1e-12);
    EXPECT_THROW(conditioning_report({1.0, 1.0}), SingularError);
}
