#pragma once

#include "ratstep/errors.hpp"
#include "ratstep/sparse.hpp"

#include <cmath>
#include <concepts>
#include <cstddef>
#include <functional>

namespace ratstep {

/// Work counters kept by a spatial problem. Not synchronized; one run per problem object.
struct ProblemCounters {
    long resolvent_solves = 0;
    long extension_solves = 0;
    long source_evaluations = 0;
    long boundary_evaluations = 0;
    long boundary_derivative_evaluations = 0;
    SolveStats solver;
};

/// Capabilities the integrators need from a semidiscrete problem
/// u' = A0 u + B g + f on the interior, with lifting K (A0 K g + B g = 0).
template <typename P>
concept SpatialProblem = requires(const P& p, const RealVector& rv, const ComplexVector& cv, cplx s, double t) {
    { p.dimension() } -> std::convertible_to<std::size_t>;
    { p.boundary_dimension() } -> std::convertible_to<std::size_t>;
    { p.apply_A0(rv) } -> std::same_as<RealVector>;
    { p.apply_A0(cv) } -> std::same_as<ComplexVector>;
    { p.solve_resolvent(s, cv) } -> std::same_as<ComplexVector>;
    { p.extend_boundary(rv) } -> std::same_as<RealVector>;
    { p.extend_boundary(cv) } -> std::same_as<ComplexVector>;
    { p.boundary_coupling(rv) } -> std::same_as<RealVector>;
    { p.boundary_coupling(cv) } -> std::same_as<ComplexVector>;
    { p.source_projection(t) } -> std::same_as<RealVector>;
    { p.boundary_samples(t) } -> std::same_as<RealVector>;
    { p.boundary_derivative_samples(t) } -> std::same_as<RealVector>;
    { p.exact_state(t) } -> std::same_as<RealVector>;
    { p.norm(rv) } -> std::convertible_to<double>;
    { p.counters() } -> std::convertible_to<const ProblemCounters&>;
};

/// One-dimensional testbed: w' = a (w - g(t)) + f(t), i.e. A0 = [a], K = 1, B = -a.
class ScalarProblem {
public:
    using Fn = std::function<double(double)>;

    ScalarProblem(double a, Fn f, Fn g, Fn g_t, Fn w_exact)
        : a_(a), f_(std::move(f)), g_(std::move(g)), g_t_(std::move(g_t)), w_(std::move(w_exact)) {
        if (!(a < 0.0)) throw DomainError("ScalarProblem: a must be negative");
    }

    std::size_t dimension() const { return 1; }
    std::size_t boundary_dimension() const { return 1; }
    double coefficient() const { return a_; }

    RealVector apply_A0(const RealVector& v) const { return {a_ * v.at(0)}; }
    ComplexVector apply_A0(const ComplexVector& v) const { return {a_ * v.at(0)}; }

    ComplexVector solve_resolvent(cplx sigma, const ComplexVector& b) const {
        ++c_.resolvent_solves;
        ++c_.solver.solves;
        return {b.at(0) / (1.0 - sigma * a_)};
    }
    RealVector extend_boundary(const RealVector& g) const { ++c_.extension_solves; return g; }
    ComplexVector extend_boundary(const ComplexVector& g) const { ++c_.extension_solves; return g; }
    RealVector boundary_coupling(const RealVector& g) const { return {-a_ * g.at(0)}; }
    ComplexVector boundary_coupling(const ComplexVector& g) const { return {-a_ * g.at(0)}; }

    RealVector source_projection(double t) const { ++c_.source_evaluations; return {f_(t)}; }
    RealVector boundary_samples(double t) const { ++c_.boundary_evaluations; return {g_(t)}; }
    RealVector boundary_derivative_samples(double t) const { ++c_.boundary_derivative_evaluations; return {g_t_(t)}; }
    RealVector exact_state(double t) const { return {w_(t)}; }
    double norm(const RealVector& v) const { return std::abs(v.at(0)); }

    const ProblemCounters& counters() const { return c_; }
    void reset_counters() const { c_ = {}; }

private:
    double a_;
    Fn f_, g_, g_t_, w_;
    mutable ProblemCounters c_;
};

static_assert(SpatialProblem<ScalarProblem>);

} // namespace ratstep
