#pragma once

#include "ratstep/errors.hpp"
#include "ratstep/problem.hpp"
#include "ratstep/rational.hpp"
#include "ratstep/rl_integrator.hpp"

#include <Eigen/Dense>

#include <cmath>
#include <complex>
#include <functional>
#include <string>
#include <vector>

namespace ratstep {

/// direct: W' = A0 W + B g + P f on the full interior solution.
/// lifted: u' = A0 u + P f - K g' for u = W - K g.
enum class RKForm { Direct, Lifted };

inline RKForm parse_rk_form(const std::string& s) {
    if (s == "direct") return RKForm::Direct;
    if (s == "lifted") return RKForm::Lifted;
    throw ConfigError("unknown RK form '" + s + "' (direct or lifted)");
}

inline const char* to_string(RKForm f) { return f == RKForm::Direct ? "direct" : "lifted"; }

struct BaselineConfig {
    ButcherTableau tableau;
    RKForm form = RKForm::Direct;
    std::string name;
};

inline BaselineConfig make_baseline(const std::string& method, RKForm form = RKForm::Direct) {
    return {method_tableau(method), form, "rk-" + method};
}

/// Method-of-lines Runge-Kutta stepping over a spatial problem.
template <SpatialProblem P>
class RKIntegrator {
public:
    RKIntegrator(const P& problem, BaselineConfig cfg, double tau)
        : problem_(problem), cfg_(std::move(cfg)), tau_(tau), s_(cfg_.tableau.s) {
        cfg_.tableau.validate();
        if (!(tau > 0.0)) throw ConfigError("step size must be positive");
        dirk_ = cfg_.tableau.is_lower_triangular();
        if (!dirk_) {
            Eigen::MatrixXd A(s_, s_);
            for (int i = 0; i < s_; ++i)
                for (int j = 0; j < s_; ++j) A(i, j) = cfg_.tableau.a(i, j);
            Eigen::ComplexEigenSolver<Eigen::MatrixXd> es(A);
            if (es.info() != Eigen::Success) throw SingularError("tableau eigen-decomposition failed");
            T_ = es.eigenvectors();
            lambda_ = es.eigenvalues();
            const Eigen::JacobiSVD<Eigen::MatrixXcd> svd(T_);
            const double cond = svd.singularValues()(0) / svd.singularValues()(s_ - 1);
            if (!(cond < 1e8)) throw SingularError("tableau matrix is not safely diagonalizable (cond " + std::to_string(cond) + ")");
            Ti_ = T_.inverse();
            Tie_ = Ti_ * Eigen::VectorXcd::Ones(s_);
        }
    }

    RKForm form() const { return cfg_.form; }
    double tau() const { return tau_; }

    /// Internal state from the interior solution at step n (lifted form removes K g).
    RealVector to_state(const RealVector& w, int n) const {
        if (cfg_.form == RKForm::Direct) return w;
        const auto kg = problem_.extend_boundary(problem_.boundary_samples(n * tau_));
        RealVector u = w;
        for (std::size_t i = 0; i < u.size(); ++i) u[i] -= kg[i];
        return u;
    }

    RealVector to_solution(const RealVector& state, int n) const {
        if (cfg_.form == RKForm::Direct) return state;
        const auto kg = problem_.extend_boundary(problem_.boundary_samples(n * tau_));
        RealVector w = state;
        for (std::size_t i = 0; i < w.size(); ++i) w[i] += kg[i];
        return w;
    }

    /// Advances the state from t_n to t_{n+1}.
    void step(RealVector& x, int n) const {
        const double t = n * tau_;
        const auto& T = cfg_.tableau;
        const std::size_t dim = problem_.dimension();
        std::vector<RealVector> F(static_cast<std::size_t>(s_));
        RealVector gsum_b;
        for (int j = 0; j < s_; ++j) {
            const double tj = t + T.c[std::size_t(j)] * tau_;
            F[std::size_t(j)] = problem_.source_projection(tj);
            if (cfg_.form == RKForm::Direct) {
                const auto bg = problem_.boundary_coupling(problem_.boundary_samples(tj));
                for (std::size_t q = 0; q < dim; ++q) F[std::size_t(j)][q] += bg[q];
            }
        }
        if (cfg_.form == RKForm::Lifted) {
            std::vector<RealVector> gp(static_cast<std::size_t>(s_));
            for (int j = 0; j < s_; ++j) gp[std::size_t(j)] = problem_.boundary_derivative_samples(t + T.c[std::size_t(j)] * tau_);
            const std::size_t bdim = problem_.boundary_dimension();
            for (int i = 0; i < s_; ++i) {
                RealVector G(bdim, 0.0);
                for (int j = 0; j < s_; ++j)
                    for (std::size_t q = 0; q < bdim; ++q) G[q] += T.a(i, j) * gp[std::size_t(j)][q];
                const auto bG = problem_.boundary_coupling(G);
                for (std::size_t q = 0; q < dim; ++q) F[std::size_t(i)][q] += tau_ * bG[q];
            }
            gsum_b.assign(bdim, 0.0);
            for (int j = 0; j < s_; ++j)
                for (std::size_t q = 0; q < bdim; ++q) gsum_b[q] += T.b[std::size_t(j)] * gp[std::size_t(j)][q];
        }

        // stage derivatives k_j = A0 V_j + F_j
        std::vector<RealVector> K(static_cast<std::size_t>(s_));
        if (dirk_) {
            for (int i = 0; i < s_; ++i) {
                RealVector rhs = x;
                for (int j = 0; j < i; ++j)
                    for (std::size_t q = 0; q < dim; ++q) rhs[q] += tau_ * T.a(i, j) * K[std::size_t(j)][q];
                const double aii = T.a(i, i);
                for (std::size_t q = 0; q < dim; ++q) rhs[q] += tau_ * aii * F[std::size_t(i)][q];
                RealVector V = aii == 0.0 ? rhs : real_solve(tau_ * aii, rhs);
                auto AV = problem_.apply_A0(V);
                for (std::size_t q = 0; q < dim; ++q) AV[q] += F[std::size_t(i)][q];
                K[std::size_t(i)] = std::move(AV);
            }
        } else {
            std::vector<ComplexVector> Y(static_cast<std::size_t>(s_));
            for (int i = 0; i < s_; ++i) {
                ComplexVector rhs(dim);
                const cplx li = lambda_(i);
                for (std::size_t q = 0; q < dim; ++q) {
                    cplx tf = 0.0;
                    for (int j = 0; j < s_; ++j) tf += Ti_(i, j) * F[std::size_t(j)][q];
                    rhs[q] = Tie_(i) * x[q] + tau_ * li * tf;
                }
                Y[std::size_t(i)] = problem_.solve_resolvent(tau_ * li, rhs);
            }
            for (int j = 0; j < s_; ++j) {
                RealVector V(dim);
                for (std::size_t q = 0; q < dim; ++q) {
                    cplx v = 0.0;
                    for (int i = 0; i < s_; ++i) v += T_(j, i) * Y[std::size_t(i)][q];
                    V[q] = v.real();
                }
                auto AV = problem_.apply_A0(V);
                for (std::size_t q = 0; q < dim; ++q) AV[q] += F[std::size_t(j)][q];
                K[std::size_t(j)] = std::move(AV);
            }
        }
        for (int j = 0; j < s_; ++j)
            for (std::size_t q = 0; q < dim; ++q) x[q] += tau_ * T.b[std::size_t(j)] * K[std::size_t(j)][q];
        if (cfg_.form == RKForm::Lifted) {
            const auto kg = problem_.extend_boundary(gsum_b);
            for (std::size_t q = 0; q < dim; ++q) x[q] -= tau_ * kg[q];
        }
    }

private:
    RealVector real_solve(double sigma, const RealVector& b) const {
        const ComplexVector bc(b.begin(), b.end());
        const auto x = problem_.solve_resolvent(cplx(sigma, 0.0), bc);
        RealVector out(x.size());
        for (std::size_t i = 0; i < x.size(); ++i) out[i] = x[i].real();
        return out;
    }

    const P& problem_;
    BaselineConfig cfg_;
    double tau_;
    int s_;
    bool dirk_ = false;
    Eigen::MatrixXcd T_, Ti_;
    Eigen::VectorXcd lambda_, Tie_;
};

struct RKResult {
    RealVector w; // interior solution at T
    long steps = 0;
};

template <SpatialProblem P>
RKResult integrate_rk(const P& problem, const BaselineConfig& cfg, double tau, double T, const RLObserver& observer = {}) {
    const int steps = step_count(tau, T);
    RKIntegrator<P> integ(problem, cfg, tau);
    RealVector x = integ.to_state(problem.exact_state(0.0), 0);
    if (observer) observer(0, 0.0, x, problem.counters());
    for (int n = 0; n < steps; ++n) {
        integ.step(x, n);
        if (observer) observer(n + 1, (n + 1) * tau, x, problem.counters());
    }
    return {integ.to_solution(x, steps), steps};
}

} // namespace ratstep
