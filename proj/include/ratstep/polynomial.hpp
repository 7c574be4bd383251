#pragma once

#include "ratstep/errors.hpp"

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstddef>
#include <numbers>
#include <span>
#include <vector>

namespace ratstep {

using cplx = std::complex<double>;

/// Dense univariate polynomial with coefficients in ascending order,
/// p(z) = c[0] + c[1] z + ... + c[n] z^n.
template <typename T>
class Polynomial {
public:
    Polynomial() : coeffs_{T(0)} {}
    Polynomial(std::initializer_list<T> c) : coeffs_(c) { normalize(); }
    explicit Polynomial(std::vector<T> c) : coeffs_(std::move(c)) { normalize(); }

    static Polynomial constant(T v) { return Polynomial(std::vector<T>{v}); }
    static Polynomial monomial(std::size_t degree, T v = T(1)) {
        std::vector<T> c(degree + 1, T(0));
        c[degree] = v;
        return Polynomial(std::move(c));
    }

    std::size_t degree() const noexcept { return coeffs_.size() - 1; }
    const std::vector<T>& coefficients() const noexcept { return coeffs_; }
    T coefficient(std::size_t k) const noexcept { return k < coeffs_.size() ? coeffs_[k] : T(0); }
    T leading() const noexcept { return coeffs_.back(); }
    bool is_zero() const noexcept { return coeffs_.size() == 1 && coeffs_[0] == T(0); }

    template <typename Z>
    auto operator()(Z z) const {
        using R = decltype(T{} * z);
        R acc = R(coeffs_.back());
        for (std::size_t k = coeffs_.size() - 1; k-- > 0;) acc = acc * z + R(coeffs_[k]);
        return acc;
    }

    Polynomial derivative() const {
        if (coeffs_.size() == 1) return Polynomial();
        std::vector<T> c(coeffs_.size() - 1);
        for (std::size_t k = 1; k < coeffs_.size(); ++k) c[k - 1] = T(double(k)) * coeffs_[k];
        return Polynomial(std::move(c));
    }

    Polynomial& operator+=(const Polynomial& o) {
        if (o.coeffs_.size() > coeffs_.size()) coeffs_.resize(o.coeffs_.size(), T(0));
        for (std::size_t k = 0; k < o.coeffs_.size(); ++k) coeffs_[k] += o.coeffs_[k];
        normalize();
        return *this;
    }
    Polynomial& operator-=(const Polynomial& o) {
        if (o.coeffs_.size() > coeffs_.size()) coeffs_.resize(o.coeffs_.size(), T(0));
        for (std::size_t k = 0; k < o.coeffs_.size(); ++k) coeffs_[k] -= o.coeffs_[k];
        normalize();
        return *this;
    }
    Polynomial& operator*=(T s) {
        for (auto& c : coeffs_) c *= s;
        normalize();
        return *this;
    }

    friend Polynomial operator+(Polynomial a, const Polynomial& b) { return a += b; }
    friend Polynomial operator-(Polynomial a, const Polynomial& b) { return a -= b; }
    friend Polynomial operator*(Polynomial a, T s) { return a *= s; }
    friend Polynomial operator*(T s, Polynomial a) { return a *= s; }
    friend Polynomial operator*(const Polynomial& a, const Polynomial& b) {
        std::vector<T> c(a.coeffs_.size() + b.coeffs_.size() - 1, T(0));
        for (std::size_t i = 0; i < a.coeffs_.size(); ++i)
            for (std::size_t j = 0; j < b.coeffs_.size(); ++j) c[i + j] += a.coeffs_[i] * b.coeffs_[j];
        return Polynomial(std::move(c));
    }

    /// Coefficients re-expressed in the variable u where z = a + b u.
    Polynomial compose_affine(T a, T b) const {
        Polynomial out;
        Polynomial lin{a, b};
        for (std::size_t k = coeffs_.size(); k-- > 0;) {
            out = out * lin;
            out += Polynomial::constant(coeffs_[k]);
        }
        return out;
    }

private:
    void normalize() {
        if (coeffs_.empty()) coeffs_.push_back(T(0));
        while (coeffs_.size() > 1 && coeffs_.back() == T(0)) coeffs_.pop_back();
    }

    std::vector<T> coeffs_;
};

using RealPolynomial = Polynomial<double>;
using ComplexPolynomial = Polynomial<cplx>;

inline ComplexPolynomial to_complex(const RealPolynomial& p) {
    std::vector<cplx> c(p.coefficients().begin(), p.coefficients().end());
    return ComplexPolynomial(std::move(c));
}

/// First `order` Maclaurin coefficients of num(z)/den(z); requires den(0) != 0.
template <typename T>
std::vector<T> series_divide(const Polynomial<T>& num, const Polynomial<T>& den, std::size_t order) {
    const T d0 = den.coefficient(0);
    if (d0 == T(0)) throw DomainError("series_divide: denominator vanishes at the origin");
    std::vector<T> q(order, T(0));
    for (std::size_t k = 0; k < order; ++k) {
        T acc = num.coefficient(k);
        for (std::size_t j = 1; j <= std::min(k, den.degree()); ++j) acc -= den.coefficient(j) * q[k - j];
        q[k] = acc / d0;
    }
    return q;
}

namespace detail {

inline cplx principal_cbrt(cplx z) {
    if (z == cplx(0)) return cplx(0);
    return std::polar(std::cbrt(std::abs(z)), std::arg(z) / 3.0);
}

inline cplx newton_polish(const ComplexPolynomial& p, cplx z, int steps) {
    const ComplexPolynomial dp = p.derivative();
    for (int i = 0; i < steps; ++i) {
        const cplx d = dp(z);
        if (std::abs(d) == 0.0) break;
        const cplx step = p(z) / d;
        if (!std::isfinite(step.real()) || !std::isfinite(step.imag())) break;
        z -= step;
    }
    return z;
}

} // namespace detail

/// Degeneracy threshold below which the closed-form cubic treats a discriminant
/// or depressed coefficient as exactly zero.
inline constexpr double kRootDegeneracyTol = 1e-10;

/// Roots of a polynomial of degree at most 3 by closed-form formulas, repeated
/// according to multiplicity. Exactly coalesced roots are reported as equal values.
inline std::vector<cplx> polynomial_roots(const ComplexPolynomial& p) {
    const std::size_t n = p.degree();
    if (n == 0) return {};
    if (n > 3) throw ConfigError("polynomial_roots: closed-form root finding supports degree <= 3");
    const cplx a = p.leading();
    if (n == 1) return {-p.coefficient(0) / a};
    if (n == 2) {
        const cplx b = p.coefficient(1) / a, c = p.coefficient(0) / a;
        const cplx disc = b * b - 4.0 * c;
        if (std::abs(disc) <= kRootDegeneracyTol * std::max(std::abs(b * b), std::abs(c))) {
            return {-b / 2.0, -b / 2.0};
        }
        cplx sq = std::sqrt(disc);
        // choose the sign avoiding cancellation
        if (std::real(std::conj(b) * sq) < 0.0) sq = -sq;
        const cplx q = -0.5 * (b + sq);
        if (q == cplx(0)) return {cplx(0), cplx(0)};
        return {q, c / q};
    }

    const cplx B = p.coefficient(2) / a, C = p.coefficient(1) / a, D = p.coefficient(0) / a;
    const cplx shift = -B / 3.0;
    const cplx pp = C - B * B / 3.0;
    const cplx qq = 2.0 * B * B * B / 27.0 - B * C / 3.0 + D;
    const double scale = std::max({std::abs(B), std::sqrt(std::abs(C)), std::cbrt(std::abs(D))});
    if (scale == 0.0) return {cplx(0), cplx(0), cplx(0)};
    const double s2 = scale * scale, s3 = s2 * scale;

    if (std::abs(pp) <= kRootDegeneracyTol * s2 && std::abs(qq) <= kRootDegeneracyTol * s3) {
        return {shift, shift, shift};
    }
    const cplx half_q = qq / 2.0;
    const cplx third_p = pp / 3.0;
    const cplx disc = half_q * half_q + third_p * third_p * third_p;
    const double disc_scale = std::max(std::norm(half_q), std::abs(third_p * third_p * third_p));
    if (std::abs(disc) <= kRootDegeneracyTol * disc_scale && std::abs(pp) > 0.0) {
        // one simple and one double root
        const cplx simple = 3.0 * qq / pp;
        const cplx dbl = -1.5 * qq / pp;
        return {simple + shift, dbl + shift, dbl + shift};
    }
    cplx sq = std::sqrt(disc);
    cplx u3 = -half_q + sq;
    if (std::abs(-half_q - sq) > std::abs(u3)) u3 = -half_q - sq;
    const cplx u = detail::principal_cbrt(u3);
    const cplx omega = std::polar(1.0, 2.0 * std::numbers::pi / 3.0);
    std::vector<cplx> roots;
    for (int k = 0; k < 3; ++k) {
        const cplx uk = u * std::pow(omega, k);
        const cplx vk = -third_p / uk;
        roots.push_back(detail::newton_polish(p, uk + vk + shift, 2));
    }
    return roots;
}

} // namespace ratstep
