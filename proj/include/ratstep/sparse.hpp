#pragma once

#include "ratstep/errors.hpp"

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstddef>
#include <limits>
#include <string>
#include <type_traits>
#include <vector>

namespace ratstep {

using cplx = std::complex<double>;
using RealVector = std::vector<double>;
using ComplexVector = std::vector<cplx>;

template <typename T> struct is_complex : std::false_type {};
template <typename T> struct is_complex<std::complex<T>> : std::true_type {};
template <typename T> inline constexpr bool is_complex_v = is_complex<T>::value;

struct Triplet {
    std::size_t row;
    std::size_t col;
    double value;
};

/// Real matrix in compressed sparse row storage.
class SparseMatrix {
public:
    SparseMatrix() = default;

    /// Duplicate entries are summed; explicit zeros are kept out.
    static SparseMatrix from_triplets(std::size_t rows, std::size_t cols, std::vector<Triplet> t) {
        std::sort(t.begin(), t.end(), [](const Triplet& a, const Triplet& b) {
            return a.row != b.row ? a.row < b.row : a.col < b.col;
        });
        SparseMatrix m;
        m.rows_ = rows;
        m.cols_ = cols;
        m.row_ptr_.assign(rows + 1, 0);
        for (std::size_t k = 0; k < t.size();) {
            const auto r = t[k].row, c = t[k].col;
            if (r >= rows || c >= cols) throw ContractViolation("from_triplets: index out of range");
            double v = 0.0;
            while (k < t.size() && t[k].row == r && t[k].col == c) v += t[k++].value;
            if (v == 0.0) continue;
            m.col_idx_.push_back(c);
            m.values_.push_back(v);
            ++m.row_ptr_[r + 1];
        }
        for (std::size_t r = 0; r < rows; ++r) m.row_ptr_[r + 1] += m.row_ptr_[r];
        return m;
    }

    static SparseMatrix identity(std::size_t n) {
        std::vector<Triplet> t;
        for (std::size_t i = 0; i < n; ++i) t.push_back({i, i, 1.0});
        return from_triplets(n, n, std::move(t));
    }

    std::size_t rows() const noexcept { return rows_; }
    std::size_t cols() const noexcept { return cols_; }
    std::size_t nonzeros() const noexcept { return values_.size(); }
    const std::vector<std::size_t>& row_ptr() const noexcept { return row_ptr_; }
    const std::vector<std::size_t>& col_idx() const noexcept { return col_idx_; }
    const std::vector<double>& values() const noexcept { return values_; }

    double coeff(std::size_t r, std::size_t c) const {
        for (auto k = row_ptr_[r]; k < row_ptr_[r + 1]; ++k)
            if (col_idx_[k] == c) return values_[k];
        return 0.0;
    }

    template <typename T>
    void apply(const T* x, T* y) const {
        for (std::size_t r = 0; r < rows_; ++r) {
            T acc = T(0);
            for (auto k = row_ptr_[r]; k < row_ptr_[r + 1]; ++k) acc += values_[k] * x[col_idx_[k]];
            y[r] = acc;
        }
    }

    template <typename T>
    std::vector<T> apply(const std::vector<T>& x) const {
        if (x.size() != cols_)
            throw ContractViolation("sparse apply: dimension mismatch (" + std::to_string(x.size()) + " vs " +
                                    std::to_string(cols_) + ")");
        std::vector<T> y(rows_);
        apply(x.data(), y.data());
        return y;
    }

    std::vector<double> diagonal() const {
        std::vector<double> d(std::min(rows_, cols_), 0.0);
        for (std::size_t r = 0; r < d.size(); ++r) d[r] = coeff(r, r);
        return d;
    }

    std::vector<double> row_sums() const {
        std::vector<double> s(rows_, 0.0);
        for (std::size_t r = 0; r < rows_; ++r)
            for (auto k = row_ptr_[r]; k < row_ptr_[r + 1]; ++k) s[r] += values_[k];
        return s;
    }

    double norm_inf() const {
        double m = 0.0;
        for (std::size_t r = 0; r < rows_; ++r) {
            double s = 0.0;
            for (auto k = row_ptr_[r]; k < row_ptr_[r + 1]; ++k) s += std::abs(values_[k]);
            m = std::max(m, s);
        }
        return m;
    }

    bool is_symmetric(double tol = 0.0) const {
        if (rows_ != cols_) return false;
        for (std::size_t r = 0; r < rows_; ++r)
            for (auto k = row_ptr_[r]; k < row_ptr_[r + 1]; ++k)
                if (std::abs(values_[k] - coeff(col_idx_[k], r)) > tol) return false;
        return true;
    }

private:
    std::size_t rows_ = 0, cols_ = 0;
    std::vector<std::size_t> row_ptr_{0};
    std::vector<std::size_t> col_idx_;
    std::vector<double> values_;
};

template <typename T>
std::vector<T> sparse_apply(const SparseMatrix& M, const std::vector<T>& x) {
    return M.apply(x);
}

enum class KrylovMethod { CG, COCG, BiCGStab };

inline const char* to_string(KrylovMethod m) {
    switch (m) {
    case KrylovMethod::CG: return "cg";
    case KrylovMethod::COCG: return "cocg";
    case KrylovMethod::BiCGStab: return "bicgstab";
    }
    return "?";
}

struct SolverOptions {
    double tol = 1e-14;
    int max_iter = 20000;
    bool diagonal_preconditioner = false;
    int max_restarts = 3;
};

/// Statistics of one solve (or accumulated over many).
struct SolveStats {
    long iterations = 0;
    long solves = 0;
    int restarts = 0;
    double residual = 0.0;        // certified relative residual of the last solve
    double accepted_bound = 0.0;  // bound it was certified against
    KrylovMethod method = KrylovMethod::CG;

    SolveStats& operator+=(const SolveStats& o) {
        iterations += o.iterations;
        solves += o.solves;
        restarts += o.restarts;
        if (o.solves) method = o.method;
        residual = std::max(residual, o.residual);
        accepted_bound = std::max(accepted_bound, o.accepted_bound);
        return *this;
    }
};

namespace detail {

template <typename T>
double norm2(const std::vector<T>& v) {
    double s = 0.0;
    for (const auto& x : v) s += std::norm(x);
    return std::sqrt(s);
}

template <typename T>
T dot(const std::vector<T>& a, const std::vector<T>& b, bool conjugate) {
    T s = T(0);
    if constexpr (is_complex_v<T>) {
        if (conjugate) {
            for (std::size_t i = 0; i < a.size(); ++i) s += std::conj(a[i]) * b[i];
            return s;
        }
    }
    for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
    return s;
}

template <typename T>
bool all_finite(const std::vector<T>& v) {
    for (const auto& x : v) {
        if constexpr (is_complex_v<T>) {
            if (!std::isfinite(x.real()) || !std::isfinite(x.imag())) return false;
        } else if (!std::isfinite(x)) {
            return false;
        }
    }
    return true;
}

/// y = alpha x - beta M x.
template <typename T>
struct ShiftedOperator {
    const SparseMatrix& M;
    T alpha;
    T beta;

    void apply(const std::vector<T>& x, std::vector<T>& y) const {
        M.apply(x.data(), y.data());
        for (std::size_t i = 0; i < x.size(); ++i) y[i] = alpha * x[i] - beta * y[i];
    }

    std::vector<T> diagonal() const {
        const auto d = M.diagonal();
        std::vector<T> out(d.size());
        for (std::size_t i = 0; i < d.size(); ++i) out[i] = alpha - beta * d[i];
        return out;
    }

    double norm_inf() const { return std::abs(alpha) + std::abs(beta) * M.norm_inf(); }
};

inline constexpr double kBreakdown = 1e-30;

struct BreakdownSignal {};

// Preconditioned CG (conjugate = true, Hermitian dot) or COCG (conjugate = false,
// bilinear dot) continuing from x. Returns iterations used, -1 when max_iter is hit.
// Pivots are compared relative to the vectors they are formed from.
template <typename T>
int conjugate_gradient(const ShiftedOperator<T>& op, const std::vector<T>& b, std::vector<T>& x,
                       const std::vector<T>* dinv, bool conjugate, double tol, int max_iter, double bnorm) {
    const std::size_t n = b.size();
    const double opnorm = op.norm_inf();
    std::vector<T> r(n), z(n), p(n), q(n);
    op.apply(x, q);
    for (std::size_t i = 0; i < n; ++i) r[i] = b[i] - q[i];
    auto precond = [&](const std::vector<T>& in, std::vector<T>& out) {
        if (dinv) for (std::size_t i = 0; i < n; ++i) out[i] = (*dinv)[i] * in[i];
        else out = in;
    };
    precond(r, z);
    p = z;
    T rho = dot(r, z, conjugate);
    int it = 0;
    double rn = norm2(r);
    while (rn > tol * bnorm) {
        if (it >= max_iter) return -1;
        if (std::abs(rho) < kBreakdown * rn * norm2(z)) throw BreakdownSignal{};
        op.apply(p, q);
        const T pq = dot(p, q, conjugate);
        const double pn = norm2(p);
        if (std::abs(pq) < kBreakdown * pn * pn * opnorm) throw BreakdownSignal{};
        const T alpha = rho / pq;
        for (std::size_t i = 0; i < n; ++i) {
            x[i] += alpha * p[i];
            r[i] -= alpha * q[i];
        }
        precond(r, z);
        const T rho_new = dot(r, z, conjugate);
        const T beta = rho_new / rho;
        rho = rho_new;
        for (std::size_t i = 0; i < n; ++i) p[i] = z[i] + beta * p[i];
        rn = norm2(r);
        ++it;
        if (!std::isfinite(rn)) throw BreakdownError("Krylov iteration produced a non-finite residual");
    }
    return it;
}

template <typename T>
int bicgstab(const ShiftedOperator<T>& op, const std::vector<T>& b, std::vector<T>& x, double tol, int max_iter,
             double bnorm) {
    const std::size_t n = b.size();
    std::vector<T> r(n), rhat, p(n, T(0)), v(n, T(0)), s(n), t(n);
    op.apply(x, t);
    for (std::size_t i = 0; i < n; ++i) r[i] = b[i] - t[i];
    rhat = r;
    T rho = 1.0, alpha = 1.0, omega = 1.0;
    int it = 0;
    while (norm2(r) > tol * bnorm) {
        if (it >= max_iter) return -1;
        const T rho_new = dot(rhat, r, true);
        if (std::abs(rho_new) < kBreakdown || std::abs(omega) < kBreakdown)
            throw BreakdownError("BiCGStab breakdown (rho or omega vanished)");
        const T beta = (rho_new / rho) * (alpha / omega);
        rho = rho_new;
        for (std::size_t i = 0; i < n; ++i) p[i] = r[i] + beta * (p[i] - omega * v[i]);
        op.apply(p, v);
        const T rv = dot(rhat, v, true);
        if (std::abs(rv) < kBreakdown) throw BreakdownError("BiCGStab breakdown (rhat.v vanished)");
        alpha = rho / rv;
        for (std::size_t i = 0; i < n; ++i) s[i] = r[i] - alpha * v[i];
        if (norm2(s) <= tol * bnorm) {
            for (std::size_t i = 0; i < n; ++i) x[i] += alpha * p[i];
            ++it;
            break;
        }
        op.apply(s, t);
        const double tt = std::real(dot(t, t, true));
        if (tt < kBreakdown) throw BreakdownError("BiCGStab breakdown (t vanished)");
        omega = dot(t, s, true) / tt;
        for (std::size_t i = 0; i < n; ++i) {
            x[i] += alpha * p[i] + omega * s[i];
            r[i] = s[i] - omega * t[i];
        }
        ++it;
        if (!std::isfinite(norm2(r))) throw BreakdownError("BiCGStab produced a non-finite residual");
    }
    return it;
}

/// Solves (alpha I - beta M) x = b to a certified relative residual.
/// The iteration stops on its recursive residual; the true residual is then
/// recomputed and accepted against max(tol, rounding floor), where the floor is
/// 16 eps (||op|| ||x|| + ||b||) / ||b||. Otherwise the solve restarts from x.
template <typename T>
std::vector<T> krylov_solve(const ShiftedOperator<T>& op, const std::vector<T>& b, bool hermitian,
                            const SolverOptions& opts, SolveStats* stats) {
    if (op.M.rows() != op.M.cols() || b.size() != op.M.rows())
        throw ContractViolation("krylov_solve: dimension mismatch");
    if (!(opts.tol > 0.0)) throw ConfigError("solver tolerance must be positive");
    if (!all_finite(b)) throw BreakdownError("right-hand side contains NaN or Inf");
    SolveStats st;
    st.solves = 1;
    st.method = hermitian ? KrylovMethod::CG : KrylovMethod::COCG;
    const std::size_t n = b.size();
    std::vector<T> x(n, T(0));
    const double bnorm = norm2(b);
    if (bnorm == 0.0) {
        if (stats) *stats += st;
        return x;
    }
    std::vector<T> dinv;
    if (opts.diagonal_preconditioner) {
        dinv = op.diagonal();
        for (auto& d : dinv) {
            if (std::abs(d) == 0.0) throw SingularError("diagonal preconditioner: zero diagonal entry");
            d = T(1) / d;
        }
    }
    const double eps = std::numeric_limits<double>::epsilon();
    std::vector<T> r(n);
    int remaining = opts.max_iter;
    for (int attempt = 0;; ++attempt) {
        int it = -1;
        bool fallback = st.method == KrylovMethod::BiCGStab;
        if (!fallback) {
            try {
                it = conjugate_gradient(op, b, x, dinv.empty() ? nullptr : &dinv, hermitian, opts.tol, remaining, bnorm);
            } catch (const BreakdownSignal&) {
                fallback = true;
                st.method = KrylovMethod::BiCGStab;
            }
        }
        if (fallback) it = bicgstab(op, b, x, opts.tol, remaining, bnorm);
        if (it < 0) {
            op.apply(x, r);
            for (std::size_t i = 0; i < n; ++i) r[i] = b[i] - r[i];
            throw ConvergenceError("Krylov solve did not converge within max_iter", norm2(r) / bnorm, opts.max_iter);
        }
        st.iterations += it;
        remaining -= it;
        op.apply(x, r);
        for (std::size_t i = 0; i < n; ++i) r[i] = b[i] - r[i];
        const double res = norm2(r) / bnorm;
        const double floor = 16.0 * eps * (op.norm_inf() * norm2(x) + bnorm) / bnorm;
        const double bound = std::max(opts.tol, floor);
        st.residual = res;
        st.accepted_bound = bound;
        if (!std::isfinite(res)) throw BreakdownError("Krylov solve produced a non-finite solution");
        if (res <= bound) break;
        if (attempt >= opts.max_restarts || remaining <= 0)
            throw ConvergenceError("Krylov solve could not certify its residual", res, static_cast<int>(st.iterations));
        ++st.restarts;
    }
    if (stats) *stats += st;
    return x;
}

} // namespace detail

/// x with (I - sigma M) x = b. Real sigma uses conjugate gradients, complex sigma
/// conjugate-orthogonal CG with a BiCGStab fallback on breakdown.
inline RealVector solve_shifted(const SparseMatrix& M, double sigma, const RealVector& b,
                                const SolverOptions& opts = {}, SolveStats* stats = nullptr) {
    detail::ShiftedOperator<double> op{M, 1.0, sigma};
    return detail::krylov_solve(op, b, true, opts, stats);
}

inline ComplexVector solve_shifted(const SparseMatrix& M, cplx sigma, const ComplexVector& b,
                                   const SolverOptions& opts = {}, SolveStats* stats = nullptr) {
    if (sigma.imag() == 0.0 && std::all_of(b.begin(), b.end(), [](cplx v) { return v.imag() == 0.0; })) {
        RealVector br(b.size());
        for (std::size_t i = 0; i < b.size(); ++i) br[i] = b[i].real();
        const auto x = solve_shifted(M, sigma.real(), br, opts, stats);
        return ComplexVector(x.begin(), x.end());
    }
    detail::ShiftedOperator<cplx> op{M, cplx(1.0), sigma};
    return detail::krylov_solve(op, b, sigma.imag() == 0.0, opts, stats);
}

/// Conjugate-orthogonal CG for any sigma (used to cross-check the real-shift path).
inline ComplexVector solve_shifted_cocg(const SparseMatrix& M, cplx sigma, const ComplexVector& b,
                                        const SolverOptions& opts = {}, SolveStats* stats = nullptr) {
    detail::ShiftedOperator<cplx> op{M, cplx(1.0), sigma};
    return detail::krylov_solve(op, b, false, opts, stats);
}

/// x with -M x = b for symmetric negative definite M.
template <typename T>
std::vector<T> solve_negated(const SparseMatrix& M, const std::vector<T>& b, const SolverOptions& opts = {},
                             SolveStats* stats = nullptr) {
    detail::ShiftedOperator<T> op{M, T(0), T(1)};
    return detail::krylov_solve(op, b, true, opts, stats);
}

} // namespace ratstep
