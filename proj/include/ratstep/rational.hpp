#pragma once

#include "ratstep/errors.hpp"
#include "ratstep/polynomial.hpp"

#include <algorithm>
#include <cmath>
#include <complex>
#include <istream>
#include <numbers>
#include <sstream>
#include <string>
#include <vector>

namespace ratstep {

/// Butcher tableau of an s-stage Runge-Kutta method, A stored row-major.
struct ButcherTableau {
    int s = 0;
    std::vector<double> A;
    std::vector<double> b;
    std::vector<double> c;

    double a(int i, int j) const { return A[static_cast<std::size_t>(i * s + j)]; }

    bool is_lower_triangular() const {
        for (int i = 0; i < s; ++i)
            for (int j = i + 1; j < s; ++j)
                if (a(i, j) != 0.0) return false;
        return true;
    }

    void validate(double tol = 1e-12) const {
        if (s < 1) throw ConfigError("tableau: stage count must be positive");
        if (A.size() != static_cast<std::size_t>(s * s) || b.size() != static_cast<std::size_t>(s) ||
            c.size() != static_cast<std::size_t>(s))
            throw ConfigError("tableau: inconsistent array sizes for s=" + std::to_string(s));
        for (int i = 0; i < s; ++i) {
            double row = 0.0;
            for (int j = 0; j < s; ++j) row += a(i, j);
            if (std::abs(row - c[static_cast<std::size_t>(i)]) > tol)
                throw ConfigError("tableau: row " + std::to_string(i) + " of A does not sum to c");
        }
    }
};

/// Pole of a partial-fraction expansion: the factor (1 - w z)^{-j} for j = 1..multiplicity.
struct Pole {
    cplx w;
    int multiplicity = 1;
    std::vector<cplx> residues; // residues[j-1] multiplies (1 - w z)^{-j}
};

/// r(z) = r_inf + sum_l sum_j r_{lj} (1 - w_l z)^{-j}.
struct RationalApproximant {
    cplx r_infinity{0.0, 0.0};
    std::vector<Pole> poles;
    int classical_order = 0;
    std::string name;

    int pole_count() const {
        int s = 0;
        for (const auto& p : poles) s += p.multiplicity;
        return s;
    }

    cplx operator()(cplx z) const {
        cplx acc = r_infinity;
        for (std::size_t l = 0; l < poles.size(); ++l) {
            const cplx d = 1.0 - poles[l].w * z;
            if (d == cplx(0.0))
                throw DomainError("rational eval: z hits the reciprocal of pole " + std::to_string(l));
            const cplx inv = 1.0 / d;
            cplx p = inv;
            for (int j = 0; j < poles[l].multiplicity; ++j) {
                acc += poles[l].residues[static_cast<std::size_t>(j)] * p;
                p *= inv;
            }
        }
        return acc;
    }

    /// True when every pole is real or has its conjugate partner with conjugate residues.
    bool is_conjugate_symmetric(double tol = 1e-12) const {
        if (std::abs(r_infinity.imag()) > tol * (1.0 + std::abs(r_infinity))) return false;
        for (const auto& p : poles) {
            bool found = false;
            for (const auto& q : poles) {
                if (q.multiplicity != p.multiplicity) continue;
                if (std::abs(q.w - std::conj(p.w)) > tol * std::abs(p.w)) continue;
                bool same = true;
                for (int j = 0; j < p.multiplicity; ++j) {
                    const auto rj = p.residues[static_cast<std::size_t>(j)];
                    if (std::abs(q.residues[static_cast<std::size_t>(j)] - std::conj(rj)) > tol * (1.0 + std::abs(rj)))
                        same = false;
                }
                if (same) { found = true; break; }
            }
            if (!found) return false;
        }
        return true;
    }
};

inline cplx eval(const RationalApproximant& r, cplx z) { return r(z); }

/// Maclaurin coefficients of (1 - w z)^{-i}: C(i+k-1, k) w^k.
inline std::vector<cplx> resolvent_taylor(cplx w, int i, std::size_t q) {
    std::vector<cplx> out(q);
    cplx wk = 1.0;
    double binom = 1.0;
    for (std::size_t k = 0; k < q; ++k) {
        out[k] = binom * wk;
        wk *= w;
        binom = binom * double(i + static_cast<int>(k)) / double(k + 1);
    }
    return out;
}

/// Maclaurin coefficients of z (1 - w z)^{-i}.
inline std::vector<cplx> shifted_resolvent_taylor(cplx w, int i, std::size_t q) {
    std::vector<cplx> out(q, cplx(0.0));
    if (q <= 1) return out;
    const auto base = resolvent_taylor(w, i, q - 1);
    std::copy(base.begin(), base.end(), out.begin() + 1);
    return out;
}

/// Maclaurin coefficients of a pole-form approximant.
inline std::vector<cplx> taylor_coefficients(const RationalApproximant& r, std::size_t q) {
    if (q == 0) throw DomainError("taylor_coefficients: q must be positive");
    std::vector<cplx> out(q, cplx(0.0));
    out[0] = r.r_infinity;
    for (const auto& p : r.poles) {
        for (int j = 1; j <= p.multiplicity; ++j) {
            const auto t = resolvent_taylor(p.w, j, q);
            for (std::size_t k = 0; k < q; ++k) out[k] += p.residues[static_cast<std::size_t>(j - 1)] * t[k];
        }
    }
    return out;
}

/// Maclaurin coefficients of num/den in quotient form.
inline std::vector<cplx> taylor_coefficients(const ComplexPolynomial& num, const ComplexPolynomial& den, std::size_t q) {
    if (q == 0) throw DomainError("taylor_coefficients: q must be positive");
    return series_divide(num, den, q);
}

/// Root clustering distance (relative) used to merge numerically split repeated poles.
inline constexpr double kPoleClusterTol = 1e-7;

namespace detail {

inline bool is_real_poly(const ComplexPolynomial& p) {
    for (const auto& c : p.coefficients())
        if (c.imag() != 0.0) return false;
    return true;
}

struct RootCluster {
    cplx z;
    int multiplicity;
};

inline std::vector<RootCluster> cluster_roots(const std::vector<cplx>& roots, double tol) {
    std::vector<RootCluster> out;
    std::vector<bool> used(roots.size(), false);
    for (std::size_t a = 0; a < roots.size(); ++a) {
        if (used[a]) continue;
        cplx sum = roots[a];
        int m = 1;
        used[a] = true;
        for (std::size_t b = a + 1; b < roots.size(); ++b) {
            if (used[b]) continue;
            const double scale = std::max(std::abs(roots[a]), std::abs(roots[b]));
            if (std::abs(roots[a] - roots[b]) <= tol * scale) {
                sum += roots[b];
                ++m;
                used[b] = true;
            }
        }
        out.push_back({sum / double(m), m});
    }
    return out;
}

inline void symmetrize(RationalApproximant& r) {
    r.r_infinity = {r.r_infinity.real(), 0.0};
    std::vector<bool> done(r.poles.size(), false);
    for (std::size_t l = 0; l < r.poles.size(); ++l) {
        if (done[l]) continue;
        auto& p = r.poles[l];
        if (std::abs(p.w.imag()) <= 1e-13 * std::abs(p.w)) {
            p.w = {p.w.real(), 0.0};
            for (auto& res : p.residues) res = {res.real(), 0.0};
            done[l] = true;
            continue;
        }
        std::size_t best = l;
        double dist = INFINITY;
        for (std::size_t k = 0; k < r.poles.size(); ++k) {
            if (k == l || done[k] || r.poles[k].multiplicity != p.multiplicity) continue;
            const double d = std::abs(r.poles[k].w - std::conj(p.w));
            if (d < dist) { dist = d; best = k; }
        }
        if (best == l || dist > 1e-8 * std::abs(p.w)) continue;
        if (p.w.imag() < 0.0) std::swap(r.poles[l], r.poles[best]);
        auto& up = r.poles[l];
        auto& lo = r.poles[best];
        lo.w = std::conj(up.w);
        for (std::size_t j = 0; j < up.residues.size(); ++j) lo.residues[j] = std::conj(up.residues[j]);
        done[l] = done[best] = true;
    }
}

} // namespace detail

/// Partial-fraction form of num(z)/den(z). Repeated roots of den closer than
/// cluster_tol (relative) are merged into a single pole of higher multiplicity.
inline RationalApproximant partial_fractions(const ComplexPolynomial& num, const ComplexPolynomial& den,
                                             double cluster_tol = kPoleClusterTol) {
    if (den.is_zero()) throw DomainError("partial_fractions: zero denominator");
    if (num.degree() > den.degree() && !num.is_zero())
        throw DomainError("partial_fractions: numerator degree exceeds denominator degree");
    const cplx d0 = den.coefficient(0);
    if (d0 == cplx(0.0)) throw DomainError("partial_fractions: pole at the origin");

    const auto clusters = detail::cluster_roots(polynomial_roots(den), cluster_tol);

    RationalApproximant r;
    r.r_infinity = (num.degree() == den.degree() && den.degree() > 0) ? num.leading() / den.leading() : cplx(0.0);
    if (den.degree() == 0) r.r_infinity = num.coefficient(0) / d0;

    for (std::size_t l = 0; l < clusters.size(); ++l) {
        const cplx w = 1.0 / clusters[l].z;
        if (!(w.real() > 0.0))
            throw DomainError("partial_fractions: pole reciprocal w=" + std::to_string(w.real()) + "+" +
                              std::to_string(w.imag()) + "i has nonpositive real part");
        const int m = clusters[l].multiplicity;
        // rest(z) = d0 * prod_{k != l} (1 - w_k z)^{m_k}
        ComplexPolynomial rest = ComplexPolynomial::constant(d0);
        for (std::size_t k = 0; k < clusters.size(); ++k) {
            if (k == l) continue;
            const cplx wk = 1.0 / clusters[k].z;
            for (int e = 0; e < clusters[k].multiplicity; ++e) rest = rest * ComplexPolynomial{1.0, -wk};
        }
        // expand around u = 1 - w z, i.e. z = (1 - u)/w
        const auto nu = num.compose_affine(1.0 / w, -1.0 / w);
        const auto ru = rest.compose_affine(1.0 / w, -1.0 / w);
        const auto a = series_divide(nu, ru, static_cast<std::size_t>(m));
        Pole p;
        p.w = w;
        p.multiplicity = m;
        p.residues.resize(static_cast<std::size_t>(m));
        for (int j = 1; j <= m; ++j) p.residues[static_cast<std::size_t>(j - 1)] = a[static_cast<std::size_t>(m - j)];
        r.poles.push_back(std::move(p));
    }
    if (detail::is_real_poly(num) && detail::is_real_poly(den)) detail::symmetrize(r);

    // verification on a deterministic grid in the unit disk
    const double golden = std::numbers::pi * (3.0 - std::sqrt(5.0));
    for (int k = 0; k < 100; ++k) {
        const cplx z = std::polar(std::sqrt((k + 0.5) / 100.0), golden * k);
        bool near_pole = false;
        for (const auto& p : r.poles)
            if (std::abs(1.0 - p.w * z) < 1e-3) near_pole = true;
        if (near_pole) continue;
        const cplx exact = num(z) / den(z);
        if (std::abs(r(z) - exact) > 1e-10 * (1.0 + std::abs(exact)))
            throw DomainError("partial_fractions: verification failed at sample " + std::to_string(k));
    }
    return r;
}

inline RationalApproximant partial_fractions(const RealPolynomial& num, const RealPolynomial& den,
                                             double cluster_tol = kPoleClusterTol) {
    return partial_fractions(to_complex(num), to_complex(den), cluster_tol);
}

/// Numerator and denominator of a stability function.
struct StabilityFunction {
    RealPolynomial numerator;
    RealPolynomial denominator;
};

namespace detail {

using PolyMatrix = std::vector<std::vector<RealPolynomial>>;

inline PolyMatrix minor_of(const PolyMatrix& m, std::size_t row, std::size_t col) {
    PolyMatrix out;
    for (std::size_t i = 0; i < m.size(); ++i) {
        if (i == row) continue;
        std::vector<RealPolynomial> r;
        for (std::size_t j = 0; j < m.size(); ++j)
            if (j != col) r.push_back(m[i][j]);
        out.push_back(std::move(r));
    }
    return out;
}

inline RealPolynomial poly_det(const PolyMatrix& m) {
    if (m.empty()) return RealPolynomial::constant(1.0);
    if (m.size() == 1) return m[0][0];
    RealPolynomial acc;
    for (std::size_t j = 0; j < m.size(); ++j) {
        const auto term = m[0][j] * poly_det(minor_of(m, 0, j));
        if (j % 2 == 0) acc += term;
        else acc -= term;
    }
    return acc;
}

} // namespace detail

/// r(z) = 1 + z b^T (I - zA)^{-1} e as det(I - zA) and det(I - zA) + z b^T adj(I - zA) e.
inline StabilityFunction stability_function_from_butcher(const ButcherTableau& T) {
    T.validate();
    if (T.s > 4) throw ConfigError("stability_function_from_butcher: supports s <= 4");
    const auto s = static_cast<std::size_t>(T.s);
    detail::PolyMatrix M(s, std::vector<RealPolynomial>(s));
    for (std::size_t i = 0; i < s; ++i)
        for (std::size_t j = 0; j < s; ++j)
            M[i][j] = RealPolynomial{i == j ? 1.0 : 0.0, -T.a(int(i), int(j))};
    const auto den = detail::poly_det(M);
    // b^T adj(M) e = sum_{i,j} b_i adj_ij, adj_ij = (-1)^{i+j} det(minor(j,i))
    RealPolynomial quad;
    for (std::size_t i = 0; i < s; ++i)
        for (std::size_t j = 0; j < s; ++j) {
            auto cof = detail::poly_det(detail::minor_of(M, j, i)) * T.b[i];
            if ((i + j) % 2 == 0) quad += cof;
            else quad -= cof;
        }
    return {den + RealPolynomial{0.0, 1.0} * quad, den};
}

/// Result of the order and A-acceptability check.
struct OrderReport {
    int order = 0;
    bool a_acceptable = false;
    double max_modulus_imag_axis = 0.0;
};

/// Largest p with R_j = 1/j! for j <= p, and |r(iy)| <= 1 + 1e-12 on 2001 samples
/// (0 and +-1000 log-spaced points in [1e-4, 1e4]) together with Re(w_l) > 0.
inline OrderReport verify_order_and_acceptability(const RationalApproximant& r) {
    constexpr std::size_t kMaxOrder = 16;
    const auto t = taylor_coefficients(r, kMaxOrder + 1);
    OrderReport rep;
    double fact = 1.0;
    for (std::size_t j = 0; j <= kMaxOrder; ++j) {
        if (j > 0) fact *= double(j);
        if (std::abs(fact * t[j] - 1.0) > 1e-8) break;
        rep.order = static_cast<int>(j);
    }
    bool ok = true;
    for (const auto& p : r.poles)
        if (!(p.w.real() > 0.0)) ok = false;
    double mx = std::abs(r(cplx(0.0)));
    for (int k = 0; k < 1000; ++k) {
        const double y = std::pow(10.0, -4.0 + 8.0 * k / 999.0);
        mx = std::max({mx, std::abs(r(cplx(0.0, y))), std::abs(r(cplx(0.0, -y)))});
    }
    rep.max_modulus_imag_axis = mx;
    rep.a_acceptable = ok && mx <= 1.0 + 1e-12;
    return rep;
}

/// Quotient-form variant of the same check; roots of den must have reciprocals
/// with positive real part for acceptability.
inline OrderReport verify_order_and_acceptability(const RealPolynomial& num, const RealPolynomial& den) {
    constexpr std::size_t kMaxOrder = 16;
    const auto cn = to_complex(num), cd = to_complex(den);
    const auto t = series_divide(cn, cd, kMaxOrder + 1);
    OrderReport rep;
    double fact = 1.0;
    for (std::size_t j = 0; j <= kMaxOrder; ++j) {
        if (j > 0) fact *= double(j);
        if (std::abs(fact * t[j] - 1.0) > 1e-8) break;
        rep.order = static_cast<int>(j);
    }
    bool ok = true;
    if (den.degree() > 3) throw ConfigError("verify_order_and_acceptability: denominator degree > 3");
    for (const auto& z : polynomial_roots(cd))
        if (!((1.0 / z).real() > 0.0)) ok = false;
    auto val = [&](cplx z) { return std::abs(cn(z) / cd(z)); };
    double mx = val(cplx(0.0));
    for (int k = 0; k < 1000; ++k) {
        const double y = std::pow(10.0, -4.0 + 8.0 * k / 999.0);
        mx = std::max({mx, val(cplx(0.0, y)), val(cplx(0.0, -y))});
    }
    rep.max_modulus_imag_axis = mx;
    rep.a_acceptable = ok && mx <= 1.0 + 1e-12;
    return rep;
}

/// Three-stage order-four SDIRK with diagonal 1/2 + cos(pi/18)/sqrt(3).
inline ButcherTableau sdirk3_tableau() {
    const double g = std::cos(std::numbers::pi / 18.0) / std::sqrt(3.0) + 0.5;
    const double mu = 1.0 / (6.0 * (2.0 * g - 1.0) * (2.0 * g - 1.0));
    ButcherTableau T;
    T.s = 3;
    T.A = {g, 0.0, 0.0, 0.5 - g, g, 0.0, 2.0 * g, 1.0 - 4.0 * g, g};
    T.b = {mu, 1.0 - 2.0 * mu, mu};
    T.c = {g, 0.5, 1.0 - g};
    return T;
}

/// Three-stage Gauss-Legendre collocation, order six.
inline ButcherTableau gauss3_tableau() {
    const double r = std::sqrt(15.0);
    ButcherTableau T;
    T.s = 3;
    T.A = {5.0 / 36.0,           2.0 / 9.0 - r / 15.0, 5.0 / 36.0 - r / 30.0,
           5.0 / 36.0 + r / 24.0, 2.0 / 9.0,           5.0 / 36.0 - r / 24.0,
           5.0 / 36.0 + r / 30.0, 2.0 / 9.0 + r / 15.0, 5.0 / 36.0};
    T.b = {5.0 / 18.0, 4.0 / 9.0, 5.0 / 18.0};
    T.c = {0.5 - r / 10.0, 0.5, 0.5 + r / 10.0};
    return T;
}

/// Pole form of a tableau's stability function, with its classical order filled in.
inline RationalApproximant approximant_from_tableau(const ButcherTableau& T, std::string name = {}) {
    const auto sf = stability_function_from_butcher(T);
    auto r = partial_fractions(sf.numerator, sf.denominator);
    r.classical_order = verify_order_and_acceptability(r).order;
    r.name = std::move(name);
    return r;
}

/// Registered tableaux: "sdirk3", "gauss3".
inline ButcherTableau method_tableau(const std::string& id) {
    if (id == "sdirk3") return sdirk3_tableau();
    if (id == "gauss3") return gauss3_tableau();
    throw ConfigError("unknown method id '" + id + "' (expected sdirk3 or gauss3)");
}

inline RationalApproximant method_approximant(const std::string& id) {
    return approximant_from_tableau(method_tableau(id), id);
}

/// Text tableau: whitespace-separated decimals, '#' starts a comment. Order is
/// s, then the s*s entries of A row by row, then b, then c.
inline ButcherTableau parse_tableau(std::istream& in) {
    std::string line, body;
    while (std::getline(in, line)) {
        const auto hash = line.find('#');
        if (hash != std::string::npos) line.erase(hash);
        body += line;
        body += ' ';
    }
    std::istringstream ss(body);
    ButcherTableau T;
    if (!(ss >> T.s) || T.s < 1) throw ConfigError("tableau file: missing or invalid stage count");
    auto read = [&](std::vector<double>& v, std::size_t n, const char* what) {
        v.resize(n);
        for (auto& x : v)
            if (!(ss >> x)) throw ConfigError(std::string("tableau file: too few entries in ") + what);
    };
    const auto s = static_cast<std::size_t>(T.s);
    read(T.A, s * s, "A");
    read(T.b, s, "b");
    read(T.c, s, "c");
    std::string extra;
    if (ss >> extra) throw ConfigError("tableau file: trailing content '" + extra + "'");
    T.validate();
    return T;
}

inline ButcherTableau parse_tableau(const std::string& text) {
    std::istringstream in(text);
    return parse_tableau(in);
}

} // namespace ratstep
