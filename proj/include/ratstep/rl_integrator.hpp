#pragma once

#include "ratstep/errors.hpp"
#include "ratstep/nodes.hpp"
#include "ratstep/problem.hpp"
#include "ratstep/rational.hpp"
#include "ratstep/sparse.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <map>
#include <optional>
#include <string>
#include <vector>

namespace ratstep {

/// Sample times are keyed by s = t/tau in fixed point with this many fraction bits,
/// so integer, half-integer and irrational node offsets that coincide map to one key.
/// Keys only identify samples; data is evaluated at the unrounded time.
inline constexpr int kTimeKeyBits = 20;

inline std::int64_t time_key(double steps) { return std::llround(std::ldexp(steps, kTimeKeyBits)); }
inline double key_time(std::int64_t key, double tau) { return tau * std::ldexp(double(key), -kTimeKeyBits); }

/// Cache of data samples keyed by time_key.
template <typename V>
class SampleHistory {
public:
    template <typename Eval>
    const V& fetch(std::int64_t key, Eval&& eval) {
        auto it = data_.find(key);
        if (it != data_.end()) {
            ++hits_;
            return it->second;
        }
        ++evaluations_;
        return data_.emplace(key, eval()).first->second;
    }

    const V& at(std::int64_t key) const {
        auto it = data_.find(key);
        if (it == data_.end())
            throw ContractViolation("sample history has no entry for time index " + std::to_string(key) + "/2^" +
                                    std::to_string(kTimeKeyBits));
        return it->second;
    }

    bool contains(std::int64_t key) const { return data_.count(key) != 0; }

    void evict_before(std::int64_t key) { data_.erase(data_.begin(), data_.lower_bound(key)); }

    std::size_t size() const { return data_.size(); }
    long evaluations() const { return evaluations_; }
    long hits() const { return hits_; }

private:
    std::map<std::int64_t, V> data_;
    long evaluations_ = 0;
    long hits_ = 0;
};

struct RLOptions {
    double imag_tol = 1e-11; // relative size of the dropped imaginary part
};

/// State of an RL integration at step n.
struct RLState {
    int n = 0;
    double tau = 0.0;
    RealVector u; // interior part with the lifting removed
    SampleHistory<RealVector> f_history;
    SampleHistory<RealVector> g_history;
    std::optional<std::pair<std::int64_t, RealVector>> extension; // K g at a cached time key
    long steps = 0;
    long resolvent_solves = 0;
    long extension_solves = 0;
    double max_imag_ratio = 0.0;

    double t() const { return n * tau; }
};

/// Per-pole right-hand sides: interior[e-1] enters at resolvent depth e,
/// boundary[e-1] is the boundary combination routed through K at that depth.
struct PoleTerms {
    std::vector<ComplexVector> interior;
    std::vector<ComplexVector> boundary;
};

/// Source and boundary combinations of one step, for v_{l,e} with e = j - i + 1.
inline std::vector<PoleTerms> assemble_source_terms(const RationalApproximant& R, const StepCoefficients& coeffs,
                                                    const std::vector<const RealVector*>& f_samples,
                                                    const std::vector<const RealVector*>& g_samples, double tau,
                                                    std::size_t dim, std::size_t bdim) {
    std::vector<PoleTerms> out(R.poles.size());
    for (std::size_t l = 0; l < R.poles.size(); ++l) {
        const auto& pole = R.poles[l];
        const auto m = static_cast<std::size_t>(pole.multiplicity);
        auto& pt = out[l];
        pt.interior.assign(m, ComplexVector(dim, cplx(0.0)));
        pt.boundary.assign(m, ComplexVector(bdim, cplx(0.0)));
        for (std::size_t j = 1; j <= m; ++j) {
            const cplx rw = pole.residues[j - 1] * pole.w;
            for (std::size_t i = 1; i <= j; ++i) {
                const std::size_t e = j - i + 1;
                const auto& gam = coeffs.gamma[l][i - 1];
                const auto& eta = coeffs.eta[l][i - 1];
                auto& vi = pt.interior[e - 1];
                for (std::size_t k = 0; k < gam.size(); ++k) {
                    const cplx w = rw * tau * gam[k];
                    if (w == cplx(0.0)) continue;
                    const auto& f = *f_samples[k];
                    for (std::size_t q = 0; q < dim; ++q) vi[q] += w * f[q];
                }
                auto& vb = pt.boundary[e - 1];
                for (std::size_t k = 0; k < eta.size(); ++k) {
                    const cplx w = rw * eta[k];
                    if (w == cplx(0.0)) continue;
                    const auto& g = *g_samples[k];
                    for (std::size_t q = 0; q < bdim; ++q) vb[q] += w * g[q];
                }
            }
        }
    }
    return out;
}

namespace detail {

inline RealVector take_real(const ComplexVector& z, double imag_tol, double* ratio) {
    RealVector out(z.size());
    double re = 0.0, im = 0.0;
    for (std::size_t i = 0; i < z.size(); ++i) {
        out[i] = z[i].real();
        re += z[i].real() * z[i].real();
        im += z[i].imag() * z[i].imag();
    }
    const double r = re > 0.0 ? std::sqrt(im / re) : (im > 0.0 ? INFINITY : 0.0);
    if (ratio) *ratio = r;
    if (r > imag_tol)
        throw DomainError("step result has imaginary part " + std::to_string(r) +
                          " relative to its real part; pole set is not conjugate symmetric");
    return out;
}

template <typename T>
void axpy(std::vector<T>& y, cplx a, const std::vector<T>& x) {
    for (std::size_t i = 0; i < y.size(); ++i) y[i] += a * x[i];
}

} // namespace detail

/// Observer callback: (n, t_n, interior state, problem counters).
using RLObserver = std::function<void(int, double, const RealVector&, const ProblemCounters&)>;

/// The RL recurrence u_{n+1} = r(tau A0) u_n + tau E_n f - F_n g over a spatial problem.
template <SpatialProblem P>
class RLIntegrator {
public:
    RLIntegrator(const P& problem, RationalApproximant R, NodeScheme scheme, double tau, RLOptions opts = {})
        : problem_(problem), R_(std::move(R)), scheme_(std::move(scheme)), tau_(tau), opts_(opts) {
        if (!(tau > 0.0)) throw ConfigError("step size must be positive");
        if (scheme_.order() != R_.classical_order)
            throw ConfigError("node scheme order " + std::to_string(scheme_.order()) + " does not match method order " +
                              std::to_string(R_.classical_order));
        for (int n = 0; n <= scheme_.startup_depth(); ++n) coeffs_.push_back(step_coefficients(R_, scheme_.window(n)));
    }

    const RationalApproximant& approximant() const { return R_; }
    const NodeScheme& scheme() const { return scheme_; }
    double tau() const { return tau_; }

    const StepCoefficients& coefficients(int n) const {
        return coeffs_[static_cast<std::size_t>(std::min(n, scheme_.startup_depth()))];
    }

    /// u_0 = w_0 - K g(0).
    RLState initialize() const { return state_from(0, problem_.exact_state(0.0), true); }

    /// State at step n from an interior solution (lifting included when from_solution is set).
    RLState state_from(int n, RealVector w_or_u, bool from_solution = true) const {
        RLState s;
        s.n = n;
        s.tau = tau_;
        if (from_solution) {
            const auto key = time_key(n);
            const auto& g = s.g_history.fetch(key, [&] { return problem_.boundary_samples(tau_ * s.n); });
            auto kg = problem_.extend_boundary(g);
            for (std::size_t i = 0; i < w_or_u.size(); ++i) w_or_u[i] -= kg[i];
            s.extension = std::make_pair(key, std::move(kg));
        }
        s.u = std::move(w_or_u);
        return s;
    }

    /// Ensures every sample the window at step n needs is in the history.
    void ensure_samples(RLState& s) const {
        const auto win = scheme_.window(s.n);
        for (double c : win.c)
            s.f_history.fetch(time_key(s.n + c), [&] { return problem_.source_projection(tau_ * (s.n + c)); });
        for (double d : win.d)
            s.g_history.fetch(time_key(s.n + d), [&] { return problem_.boundary_samples(tau_ * (s.n + d)); });
    }

    std::vector<PoleTerms> source_terms(const RLState& s) const {
        const auto win = scheme_.window(s.n);
        std::vector<const RealVector*> F, G;
        for (double c : win.c) F.push_back(&s.f_history.at(time_key(s.n + c)));
        for (double d : win.d) G.push_back(&s.g_history.at(time_key(s.n + d)));
        return assemble_source_terms(R_, coefficients(s.n), F, G, tau_, problem_.dimension(),
                                     problem_.boundary_dimension());
    }

    /// One step; performs sum_l m_l resolvent solves and one extension solve.
    void step(RLState& s) const {
        ensure_samples(s);
        const auto terms = source_terms(s);
        const std::size_t dim = problem_.dimension(), bdim = problem_.boundary_dimension();
        const ComplexVector u(s.u.begin(), s.u.end());
        ComplexVector out(dim);
        for (std::size_t i = 0; i < dim; ++i) out[i] = R_.r_infinity * u[i];
        ComplexVector bsum(bdim, cplx(0.0));
        for (std::size_t l = 0; l < R_.poles.size(); ++l) {
            const auto& pole = R_.poles[l];
            const int m = pole.multiplicity;
            const cplx sigma = tau_ * pole.w;
            auto v = terms[l].interior;
            for (int e = 1; e <= m; ++e) detail::axpy(v[std::size_t(e - 1)], pole.residues[std::size_t(e - 1)], u);
            ComplexVector tail(bdim, cplx(0.0));
            for (int e = m; e >= 1; --e) {
                detail::axpy(tail, 1.0, terms[l].boundary[std::size_t(e - 1)]);
                detail::axpy(v[std::size_t(e - 1)], sigma, problem_.boundary_coupling(tail));
            }
            ComplexVector x = chain_solve(s, sigma, v[std::size_t(m - 1)], l, m);
            for (int e = m - 1; e >= 1; --e) {
                detail::axpy(x, 1.0, v[std::size_t(e - 1)]);
                x = chain_solve(s, sigma, x, l, e);
            }
            detail::axpy(out, 1.0, x);
            detail::axpy(bsum, 1.0, tail);
        }
        const auto kb = problem_.extend_boundary(bsum);
        ++s.extension_solves;
        detail::axpy(out, -1.0, kb);
        double ratio = 0.0;
        s.u = detail::take_real(out, opts_.imag_tol, &ratio);
        s.max_imag_ratio = std::max(s.max_imag_ratio, ratio);
        ++s.n;
        ++s.steps;
        const auto next = scheme_.window(s.n);
        double lo = 0.0;
        for (double c : next.c) lo = std::min(lo, c);
        for (double d : next.d) lo = std::min(lo, d);
        const auto cut = time_key(s.n + lo - 2.0);
        s.f_history.evict_before(cut);
        s.g_history.evict_before(cut);
    }

    /// w_n = K g(t_n) + u_n on the interior.
    RealVector reconstruct(RLState& s) const {
        const auto key = time_key(s.n);
        if (!s.extension || s.extension->first != key) {
            const auto& g = s.g_history.fetch(key, [&] { return problem_.boundary_samples(tau_ * s.n); });
            s.extension = std::make_pair(key, problem_.extend_boundary(g));
        }
        RealVector w = s.u;
        for (std::size_t i = 0; i < w.size(); ++i) w[i] += s.extension->second[i];
        return w;
    }

private:
    ComplexVector chain_solve(RLState& s, cplx sigma, const ComplexVector& b, std::size_t pole, int depth) const {
        ++s.resolvent_solves;
        try {
            return problem_.solve_resolvent(sigma, b);
        } catch (const ConvergenceError& e) {
            throw ConvergenceError(std::string(e.what()) + " (pole " + std::to_string(pole) + ", depth " +
                                       std::to_string(depth) + ")",
                                   e.residual(), e.iterations());
        }
    }

    const P& problem_;
    RationalApproximant R_;
    NodeScheme scheme_;
    double tau_;
    RLOptions opts_;
    std::vector<StepCoefficients> coeffs_;
};

/// r(tau A0) u by the partial-fraction chain with no sources.
template <SpatialProblem P>
RealVector apply_rational_operator(const RationalApproximant& R, double tau, const P& problem, const RealVector& u,
                                   double imag_tol = 1e-11) {
    const ComplexVector uc(u.begin(), u.end());
    ComplexVector out(u.size());
    for (std::size_t i = 0; i < u.size(); ++i) out[i] = R.r_infinity * uc[i];
    for (const auto& pole : R.poles) {
        const cplx sigma = tau * pole.w;
        const int m = pole.multiplicity;
        ComplexVector x(u.size(), cplx(0.0));
        for (int e = m; e >= 1; --e) {
            detail::axpy(x, pole.residues[std::size_t(e - 1)], uc);
            x = problem.solve_resolvent(sigma, x);
        }
        detail::axpy(out, 1.0, x);
    }
    return detail::take_real(out, imag_tol, nullptr);
}

/// Outcome of a whole run.
struct RLResult {
    RLState state;
    RealVector w; // reconstructed interior solution at T
};

inline int step_count(double tau, double T) {
    if (!(tau > 0.0) || T < 0.0) throw ConfigError("need tau > 0 and T >= 0");
    const double r = T / tau;
    const long n = std::lround(r);
    if (std::abs(r - double(n)) > 1e-9 * std::max(1.0, r))
        throw ConfigError("T = " + std::to_string(T) + " is not an integer multiple of tau = " + std::to_string(tau));
    return static_cast<int>(n);
}

/// Runs initialize and T/tau steps; the observer sees every state including the first.
template <SpatialProblem P>
RLResult integrate(const P& problem, const RationalApproximant& R, const NodeScheme& scheme, double tau, double T,
                   const RLObserver& observer = {}, RLOptions opts = {}) {
    const int steps = step_count(tau, T);
    RLIntegrator<P> integ(problem, R, scheme, tau, opts);
    RLResult res{integ.initialize(), {}};
    if (observer) observer(res.state.n, res.state.t(), res.state.u, problem.counters());
    for (int k = 0; k < steps; ++k) {
        integ.step(res.state);
        if (observer) observer(res.state.n, res.state.t(), res.state.u, problem.counters());
    }
    res.w = integ.reconstruct(res.state);
    return res;
}

} // namespace ratstep
