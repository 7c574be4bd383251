#pragma once

#include "ratstep/errors.hpp"
#include "ratstep/problem.hpp"
#include "ratstep/sparse.hpp"

#include <cmath>
#include <cstdint>
#include <functional>
#include <istream>
#include <limits>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

namespace ratstep {

/// Uniform grid on the unit square with N subdivisions per side.
/// Interior nodes are lexicographic in (i, j); the 4N boundary nodes run
/// counterclockwise from the origin.
struct Grid2D {
    int N = 0;
    double h = 0.0;

    explicit Grid2D(int n) : N(n), h(1.0 / n) {
        if (n < 3) throw ConfigError("grid needs N >= 3, got " + std::to_string(n));
    }

    std::size_t interior_size() const { return std::size_t(N - 1) * std::size_t(N - 1); }
    std::size_t boundary_size() const { return 4 * std::size_t(N); }

    bool is_boundary(int i, int j) const { return i == 0 || j == 0 || i == N || j == N; }

    std::size_t interior_index(int i, int j) const { return std::size_t(j - 1) * std::size_t(N - 1) + std::size_t(i - 1); }

    std::size_t boundary_index(int i, int j) const {
        if (j == 0 && i < N) return std::size_t(i);
        if (i == N && j < N) return std::size_t(N + j);
        if (j == N && i > 0) return std::size_t(2 * N + (N - i));
        if (i == 0 && j > 0) return std::size_t(3 * N + (N - j));
        throw ContractViolation("boundary_index: (" + std::to_string(i) + "," + std::to_string(j) + ") is interior");
    }

    /// Grid coordinates (i, j) of boundary node k.
    std::pair<int, int> boundary_node(std::size_t k) const {
        const int kk = static_cast<int>(k);
        if (kk < N) return {kk, 0};
        if (kk < 2 * N) return {N, kk - N};
        if (kk < 3 * N) return {N - (kk - 2 * N), N};
        return {0, N - (kk - 3 * N)};
    }

    std::pair<int, int> interior_node(std::size_t k) const {
        return {int(k % std::size_t(N - 1)) + 1, int(k / std::size_t(N - 1)) + 1};
    }
};

/// Space-time functions of the model problem w_t = Laplace(w) + f, w = g on the boundary.
struct ProblemFunctions {
    using Fn = std::function<double(double t, double x, double y)>;
    Fn f;
    Fn g;
    Fn g_t;
    Fn w;   // exact solution (optional)
    Fn w_t; // its time derivative (optional)
};

/// w = cos(x+y+t), f = -sin(x+y+t) + 2 cos(x+y+t).
inline ProblemFunctions problem2_functions() {
    ProblemFunctions p;
    p.f = [](double t, double x, double y) { return -std::sin(x + y + t) + 2.0 * std::cos(x + y + t); };
    p.g = [](double t, double x, double y) { return std::cos(x + y + t); };
    p.g_t = [](double t, double x, double y) { return -std::sin(x + y + t); };
    p.w = p.g;
    p.w_t = p.g_t;
    return p;
}

/// How the interior source vector is formed from f.
enum class SourceProjection {
    Nodal,       // f at interior nodes
    Mehrstellen, // f + (h^2/12) five-point Laplacian of f, using boundary samples of f
    Consistent   // interior w_t minus the nine-point stencil applied to w: the semidiscrete solution is exact
};

inline SourceProjection parse_source_projection(const std::string& s) {
    if (s == "nodal") return SourceProjection::Nodal;
    if (s == "mehrstellen") return SourceProjection::Mehrstellen;
    if (s == "consistent") return SourceProjection::Consistent;
    throw ConfigError("unknown source projection '" + s + "' (nodal, mehrstellen, consistent)");
}

inline const char* to_string(SourceProjection s) {
    switch (s) {
    case SourceProjection::Nodal: return "nodal";
    case SourceProjection::Mehrstellen: return "mehrstellen";
    case SourceProjection::Consistent: return "consistent";
    }
    return "?";
}

/// Grid function split into interior and boundary parts.
struct GridFunction {
    int N = 0;
    double t = 0.0;
    RealVector interior;
    RealVector boundary;

    /// Values on the (N+1)^2 nodes, index j*(N+1)+i.
    RealVector full() const {
        const Grid2D g(N);
        RealVector out(std::size_t(N + 1) * std::size_t(N + 1));
        for (int j = 0; j <= N; ++j)
            for (int i = 0; i <= N; ++i)
                out[std::size_t(j) * std::size_t(N + 1) + std::size_t(i)] =
                    g.is_boundary(i, j) ? boundary[g.boundary_index(i, j)] : interior[g.interior_index(i, j)];
        return out;
    }
};

inline void write_csv(std::ostream& os, const GridFunction& gf) {
    os.precision(17);
    os << "N,t\n" << gf.N << ',' << gf.t << "\ninterior\n";
    for (double v : gf.interior) os << v << '\n';
    os << "boundary\n";
    for (double v : gf.boundary) os << v << '\n';
}

inline GridFunction read_csv(std::istream& is) {
    GridFunction gf;
    std::string line;
    if (!std::getline(is, line) || line != "N,t") throw ConfigError("grid CSV: missing header");
    char comma = 0;
    if (!(is >> gf.N >> comma >> gf.t) || comma != ',') throw ConfigError("grid CSV: malformed N,t row");
    std::getline(is, line);
    const Grid2D g(gf.N);
    auto section = [&](const char* name, RealVector& v, std::size_t n) {
        if (!std::getline(is, line) || line != name) throw ConfigError(std::string("grid CSV: missing section ") + name);
        v.resize(n);
        for (auto& x : v) {
            if (!std::getline(is, line)) throw ConfigError("grid CSV: truncated data");
            x = std::stod(line);
        }
    };
    section("interior", gf.interior, g.interior_size());
    section("boundary", gf.boundary, g.boundary_size());
    return gf;
}

inline void write_binary(std::ostream& os, const GridFunction& gf) {
    const std::int64_t n = gf.N;
    os.write(reinterpret_cast<const char*>(&n), sizeof n);
    os.write(reinterpret_cast<const char*>(&gf.t), sizeof gf.t);
    os.write(reinterpret_cast<const char*>(gf.interior.data()), std::streamsize(gf.interior.size() * sizeof(double)));
    os.write(reinterpret_cast<const char*>(gf.boundary.data()), std::streamsize(gf.boundary.size() * sizeof(double)));
}

inline GridFunction read_binary(std::istream& is) {
    std::int64_t n = 0;
    GridFunction gf;
    is.read(reinterpret_cast<char*>(&n), sizeof n);
    is.read(reinterpret_cast<char*>(&gf.t), sizeof gf.t);
    if (!is || n < 3 || n > (1 << 20)) throw ConfigError("grid binary: bad header");
    gf.N = static_cast<int>(n);
    const Grid2D g(gf.N);
    gf.interior.resize(g.interior_size());
    gf.boundary.resize(g.boundary_size());
    is.read(reinterpret_cast<char*>(gf.interior.data()), std::streamsize(gf.interior.size() * sizeof(double)));
    is.read(reinterpret_cast<char*>(gf.boundary.data()), std::streamsize(gf.boundary.size() * sizeof(double)));
    if (!is) throw ConfigError("grid binary: truncated data");
    return gf;
}

/// Nine-point operator split into interior part A_h0 and boundary coupling B_h.
struct DiscreteProblem {
    Grid2D grid;
    SparseMatrix A0;
    SparseMatrix B;
    ProblemFunctions data;
};

/// Stencil (1/(6h^2)) [4 (N,S,E,W) + (NE,NW,SE,SW) - 20 center].
inline DiscreteProblem build_discretization(int N, ProblemFunctions data = problem2_functions()) {
    Grid2D g(N);
    const double s = 1.0 / (6.0 * g.h * g.h);
    std::vector<Triplet> ta, tb;
    for (int j = 1; j < N; ++j)
        for (int i = 1; i < N; ++i) {
            const auto row = g.interior_index(i, j);
            for (int dj = -1; dj <= 1; ++dj)
                for (int di = -1; di <= 1; ++di) {
                    const double w = (di == 0 && dj == 0) ? -20.0 : ((di == 0 || dj == 0) ? 4.0 : 1.0);
                    const int ii = i + di, jj = j + dj;
                    if (g.is_boundary(ii, jj)) tb.push_back({row, g.boundary_index(ii, jj), w * s});
                    else ta.push_back({row, g.interior_index(ii, jj), w * s});
                }
        }
    return {g, SparseMatrix::from_triplets(g.interior_size(), g.interior_size(), std::move(ta)),
            SparseMatrix::from_triplets(g.interior_size(), g.boundary_size(), std::move(tb)), std::move(data)};
}

/// Samples of fn(t, x, y) on interior and boundary nodes.
inline GridFunction sample(const Grid2D& g, const ProblemFunctions::Fn& fn, double t) {
    if (!fn) throw ConfigError("sample: callback not provided");
    GridFunction gf;
    gf.N = g.N;
    gf.t = t;
    gf.interior.resize(g.interior_size());
    gf.boundary.resize(g.boundary_size());
    for (std::size_t k = 0; k < gf.interior.size(); ++k) {
        const auto [i, j] = g.interior_node(k);
        gf.interior[k] = fn(t, i * g.h, j * g.h);
    }
    for (std::size_t k = 0; k < gf.boundary.size(); ++k) {
        const auto [i, j] = g.boundary_node(k);
        gf.boundary[k] = fn(t, i * g.h, j * g.h);
    }
    return gf;
}

/// Nine-point stencil of a full grid function at the interior nodes.
inline RealVector apply_stencil(const DiscreteProblem& P, const GridFunction& v) {
    auto y = P.A0.apply(v.interior);
    const auto yb = P.B.apply(v.boundary);
    for (std::size_t k = 0; k < y.size(); ++k) y[k] += yb[k];
    return y;
}

/// Interior values of the discrete harmonic extension of g_b together with the assembled grid function.
struct HarmonicExtension {
    RealVector interior;
    GridFunction grid;
};

/// Solves A_h0 u = -B_h g_b.
template <typename T>
std::vector<T> extend_interior(const DiscreteProblem& P, const std::vector<T>& g_b, const SolverOptions& opts = {},
                               SolveStats* stats = nullptr) {
    if (g_b.size() != P.grid.boundary_size()) throw ContractViolation("harmonic extension: boundary size mismatch");
    return solve_negated(P.A0, P.B.apply(g_b), opts, stats);
}

inline HarmonicExtension harmonic_extension(const DiscreteProblem& P, const RealVector& g_b,
                                            const SolverOptions& opts = {}, SolveStats* stats = nullptr) {
    HarmonicExtension out;
    out.interior = extend_interior(P, g_b, opts, stats);
    out.grid.N = P.grid.N;
    out.grid.interior = out.interior;
    out.grid.boundary = g_b;
    return out;
}

/// Interior source vector at time t.
inline RealVector project_source(const DiscreteProblem& P, double t, SourceProjection mode = SourceProjection::Mehrstellen) {
    const auto& g = P.grid;
    if (mode == SourceProjection::Consistent) {
        if (!P.data.w || !P.data.w_t) throw ConfigError("consistent source projection needs w and w_t");
        auto out = sample(g, P.data.w_t, t).interior;
        const auto lw = apply_stencil(P, sample(g, P.data.w, t));
        for (std::size_t k = 0; k < out.size(); ++k) out[k] -= lw[k];
        return out;
    }
    const auto fs = sample(g, P.data.f, t);
    if (mode == SourceProjection::Nodal) return fs.interior;
    auto at = [&](int i, int j) {
        return g.is_boundary(i, j) ? fs.boundary[g.boundary_index(i, j)] : fs.interior[g.interior_index(i, j)];
    };
    RealVector out(fs.interior.size());
    const double c = 1.0 / 12.0; // (h^2/12) * (1/h^2)
    for (std::size_t k = 0; k < out.size(); ++k) {
        const auto [i, j] = g.interior_node(k);
        const double lap = at(i + 1, j) + at(i - 1, j) + at(i, j + 1) + at(i, j - 1) - 4.0 * at(i, j);
        out[k] = fs.interior[k] + c * lap;
    }
    return out;
}

/// Samples of the model data at time t.
struct ProblemSamples {
    RealVector f_interior;
    RealVector f_boundary;
    RealVector g;
    RealVector g_t;
    GridFunction w;
};

inline ProblemSamples problem_data(const DiscreteProblem& P, double t) {
    ProblemSamples s;
    const auto f = sample(P.grid, P.data.f, t);
    s.f_interior = f.interior;
    s.f_boundary = f.boundary;
    s.g = sample(P.grid, P.data.g, t).boundary;
    s.g_t = sample(P.grid, P.data.g_t, t).boundary;
    if (P.data.w) s.w = sample(P.grid, P.data.w, t);
    return s;
}

/// Discrete L2 norm h * sqrt(sum v_i^2).
inline double discrete_l2(double h, const RealVector& v) { return h * detail::norm2(v); }

/// The heat problem seen through the integrators' problem contract.
class HeatProblem {
public:
    HeatProblem(int N, SourceProjection mode = SourceProjection::Consistent, SolverOptions opts = {},
                ProblemFunctions data = problem2_functions())
        : P_(build_discretization(N, std::move(data))), mode_(mode), opts_(opts) {}

    const DiscreteProblem& discrete() const { return P_; }
    const Grid2D& grid() const { return P_.grid; }
    SourceProjection source_mode() const { return mode_; }
    const SolverOptions& solver_options() const { return opts_; }

    std::size_t dimension() const { return P_.grid.interior_size(); }
    std::size_t boundary_dimension() const { return P_.grid.boundary_size(); }

    RealVector apply_A0(const RealVector& v) const { return P_.A0.apply(v); }
    ComplexVector apply_A0(const ComplexVector& v) const { return P_.A0.apply(v); }

    ComplexVector solve_resolvent(cplx sigma, const ComplexVector& b) const {
        ++c_.resolvent_solves;
        return solve_shifted(P_.A0, sigma, b, opts_, &c_.solver);
    }
    RealVector solve_resolvent(double sigma, const RealVector& b) const {
        ++c_.resolvent_solves;
        return solve_shifted(P_.A0, sigma, b, opts_, &c_.solver);
    }

    RealVector extend_boundary(const RealVector& g) const {
        ++c_.extension_solves;
        return extend_interior(P_, g, opts_, &c_.solver);
    }
    ComplexVector extend_boundary(const ComplexVector& g) const {
        ++c_.extension_solves;
        return extend_interior(P_, g, opts_, &c_.solver);
    }

    RealVector boundary_coupling(const RealVector& g) const { return P_.B.apply(g); }
    ComplexVector boundary_coupling(const ComplexVector& g) const { return P_.B.apply(g); }

    RealVector source_projection(double t) const {
        ++c_.source_evaluations;
        return project_source(P_, t, mode_);
    }
    RealVector boundary_samples(double t) const {
        ++c_.boundary_evaluations;
        return sample(P_.grid, P_.data.g, t).boundary;
    }
    RealVector boundary_derivative_samples(double t) const {
        ++c_.boundary_derivative_evaluations;
        return sample(P_.grid, P_.data.g_t, t).boundary;
    }
    RealVector exact_state(double t) const { return sample(P_.grid, P_.data.w, t).interior; }
    double norm(const RealVector& v) const { return discrete_l2(P_.grid.h, v); }

    const ProblemCounters& counters() const { return c_; }
    void reset_counters() const { c_ = {}; }

private:
    DiscreteProblem P_;
    SourceProjection mode_;
    SolverOptions opts_;
    mutable ProblemCounters c_;
};

static_assert(SpatialProblem<HeatProblem>);

} // namespace ratstep
