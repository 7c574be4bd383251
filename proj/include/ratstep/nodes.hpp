#pragma once

#include "ratstep/errors.hpp"
#include "ratstep/rational.hpp"

#include <algorithm>
#include <cmath>
#include <complex>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

namespace ratstep {

enum class NodeKind { Explicit, Implicit, Centered, ChebyshevCentered, Custom };

inline std::string to_string(NodeKind k) {
    switch (k) {
    case NodeKind::Explicit: return "explicit";
    case NodeKind::Implicit: return "implicit";
    case NodeKind::Centered: return "centered";
    case NodeKind::ChebyshevCentered: return "cheb-centered";
    case NodeKind::Custom: return "custom";
    }
    return "?";
}

/// Sample offsets (in units of tau) used at one step: c for f, d for g.
struct NodeWindow {
    std::vector<double> c;
    std::vector<double> d;
};

namespace detail {

inline std::vector<double> iota_nodes(int lo, int hi) {
    std::vector<double> v;
    for (int k = lo; k <= hi; ++k) v.push_back(double(k));
    return v;
}

inline int startup_shift(const std::vector<double>& steady, int n) {
    const double lo = *std::min_element(steady.begin(), steady.end());
    const int need = static_cast<int>(std::ceil(-lo - 1e-12));
    return std::max(0, need - n);
}

inline std::vector<double> shifted(std::vector<double> v, int by) {
    for (auto& x : v) x += by;
    return v;
}

inline void check_distinct(const std::vector<double>& v, const char* what) {
    for (std::size_t a = 0; a < v.size(); ++a)
        for (std::size_t b = a + 1; b < v.size(); ++b)
            if (v[a] == v[b]) throw SingularError(std::string("repeated node in ") + what);
}

} // namespace detail

/// Node sequence c_n (length p) and d_n (length p+1) for every step n.
class NodeScheme {
public:
    NodeScheme(NodeKind kind, int p) : kind_(kind), p_(p) {
        if (kind == NodeKind::Custom) throw ConfigError("custom node schemes are built from tables");
        steady_ = steady_window(kind, p);
    }

    /// Custom scheme; rows[n] is used at step n, the last row for all later steps.
    static NodeScheme custom(std::vector<NodeWindow> rows) {
        if (rows.empty()) throw ConfigError("custom node table is empty");
        const std::size_t q = rows.front().c.size();
        for (const auto& r : rows) {
            if (r.c.size() != q || r.d.size() != q + 1)
                throw ConfigError("custom node table: every row needs p c-nodes and p+1 d-nodes");
            detail::check_distinct(r.c, "custom c-row");
            detail::check_distinct(r.d, "custom d-row");
        }
        NodeScheme s;
        s.kind_ = NodeKind::Custom;
        s.p_ = static_cast<int>(q);
        s.steady_ = rows.back();
        s.rows_ = std::move(rows);
        return s;
    }

    NodeKind kind() const noexcept { return kind_; }
    int order() const noexcept { return p_; }

    /// First n from which the window no longer changes.
    int startup_depth() const {
        if (kind_ == NodeKind::Custom) return static_cast<int>(rows_.size()) - 1;
        return std::max(detail::startup_shift(steady_.c, 0), detail::startup_shift(steady_.d, 0));
    }

    NodeWindow window(int n) const {
        if (n < 0) throw DomainError("node window requested for negative step index");
        if (kind_ == NodeKind::Custom) {
            const auto& row = rows_[std::min<std::size_t>(static_cast<std::size_t>(n), rows_.size() - 1)];
            for (double x : row.c)
                if (n + x < -1e-12) throw ConfigError("custom node table samples before t=0 at step " + std::to_string(n));
            for (double x : row.d)
                if (n + x < -1e-12) throw ConfigError("custom node table samples before t=0 at step " + std::to_string(n));
            return row;
        }
        return {detail::shifted(steady_.c, detail::startup_shift(steady_.c, n)),
                detail::shifted(steady_.d, detail::startup_shift(steady_.d, n))};
    }

    std::string name() const { return to_string(kind_); }

private:
    NodeScheme() = default;

    static NodeWindow steady_window(NodeKind kind, int p) {
        if (p == 4) {
            if (kind == NodeKind::Explicit) return {detail::iota_nodes(-3, 0), detail::iota_nodes(-3, 1)};
            if (kind == NodeKind::Implicit) return {detail::iota_nodes(-2, 1), detail::iota_nodes(-3, 1)};
        } else if (p == 6) {
            if (kind == NodeKind::Explicit) return {detail::iota_nodes(-5, 0), detail::iota_nodes(-5, 1)};
            if (kind == NodeKind::Implicit) return {detail::iota_nodes(-4, 1), detail::iota_nodes(-5, 1)};
            if (kind == NodeKind::Centered)
                return {{-2.5, -1.5, -0.5, 0.5, 1.5, 2.5}, detail::iota_nodes(-3, 3)};
            if (kind == NodeKind::ChebyshevCentered) {
                const double h = std::sqrt(3.0) / 2.0;
                return {{0.5 * (-h - 1.0), -0.5, 0.5 * (h - 1.0), 0.5 * (1.0 - h), 0.5, 0.5 * (h + 1.0)},
                        detail::iota_nodes(-3, 3)};
            }
        }
        throw ConfigError("no node preset for kind '" + to_string(kind) + "' with p=" + std::to_string(p));
    }

    NodeKind kind_ = NodeKind::Explicit;
    int p_ = 0;
    NodeWindow steady_;
    std::vector<NodeWindow> rows_;
};

inline NodeWindow preset_nodes(NodeKind kind, int p, int n) { return NodeScheme(kind, p).window(n); }

/// Custom table text: each non-comment line is "c-values | d-values" for one
/// step, in step order; the final line is reused for all later steps.
inline NodeScheme parse_node_table(std::istream& in) {
    std::vector<NodeWindow> rows;
    std::string line;
    while (std::getline(in, line)) {
        const auto hash = line.find('#');
        if (hash != std::string::npos) line.erase(hash);
        if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
        const auto bar = line.find('|');
        if (bar == std::string::npos) throw ConfigError("node table: missing '|' in line '" + line + "'");
        NodeWindow w;
        std::istringstream cs(line.substr(0, bar)), ds(line.substr(bar + 1));
        for (double x; cs >> x;) w.c.push_back(x);
        for (double x; ds >> x;) w.d.push_back(x);
        if (!cs.eof() || !ds.eof()) throw ConfigError("node table: malformed number in line '" + line + "'");
        rows.push_back(std::move(w));
    }
    return NodeScheme::custom(std::move(rows));
}

/// Scheme from an identifier: explicit, implicit, centered, cheb-centered, custom:<file>.
inline NodeScheme make_node_scheme(const std::string& id, int p) {
    if (id == "explicit") return NodeScheme(NodeKind::Explicit, p);
    if (id == "implicit") return NodeScheme(NodeKind::Implicit, p);
    if (id == "centered") return NodeScheme(NodeKind::Centered, p);
    if (id == "cheb-centered" || id == "chebyshev-centered") return NodeScheme(NodeKind::ChebyshevCentered, p);
    if (id.rfind("custom:", 0) == 0) {
        std::ifstream f(id.substr(7));
        if (!f) throw ConfigError("cannot open node table '" + id.substr(7) + "'");
        auto s = parse_node_table(f);
        if (s.order() != p) throw ConfigError("node table order does not match the method order");
        return s;
    }
    throw ConfigError("unknown node scheme '" + id + "'");
}

/// Solves sum_k c_k^j x_k = b_j (0 <= j < q) by the Bjorck-Pereyra recursion.
template <typename T>
std::vector<T> solve_vandermonde(const std::vector<double>& c, std::vector<T> b) {
    const std::size_t q = c.size();
    if (b.size() != q) throw ContractViolation("solve_vandermonde: size mismatch");
    if (q == 0) return b;
    detail::check_distinct(c, "Vandermonde nodes");
    const std::size_t n = q - 1;
    for (std::size_t k = 0; k < n; ++k)
        for (std::size_t i = n; i > k; --i) b[i] -= c[k] * b[i - 1];
    for (std::size_t k = n; k-- > 0;) {
        for (std::size_t i = k + 1; i <= n; ++i) b[i] /= (c[i] - c[i - k - 1]);
        for (std::size_t i = k; i < n; ++i) b[i] -= b[i + 1];
    }
    return b;
}

/// Weights gamma with sum_k c_k^j gamma_k = j! R_j for j < q.
inline std::vector<cplx> vandermonde_coefficients(const std::vector<double>& c, const std::vector<cplx>& taylor) {
    if (taylor.size() != c.size()) throw ContractViolation("vandermonde_coefficients: need one Taylor coefficient per node");
    std::vector<cplx> rhs(taylor.size());
    double fact = 1.0;
    for (std::size_t j = 0; j < taylor.size(); ++j) {
        if (j > 0) fact *= double(j);
        rhs[j] = fact * taylor[j];
    }
    return solve_vandermonde(c, std::move(rhs));
}

/// max_j |sum_k c_k^j x_k - j! R_j| / max_j(1, |j! R_j|).
inline double moment_residual(const std::vector<double>& c, const std::vector<cplx>& x, const std::vector<cplx>& taylor) {
    double worst = 0.0, scale = 1.0, fact = 1.0;
    for (std::size_t j = 0; j < c.size(); ++j) {
        if (j > 0) fact *= double(j);
        cplx s = 0.0;
        for (std::size_t k = 0; k < c.size(); ++k) s += std::pow(c[k], double(j)) * x[k];
        worst = std::max(worst, std::abs(s - fact * taylor[j]));
        scale = std::max(scale, std::abs(fact * taylor[j]));
    }
    return worst / scale;
}

/// gamma[l][i-1] for (1 - w_l z)^{-i} on c, eta[l][i-1] for z (1 - w_l z)^{-i} on d.
struct StepCoefficients {
    std::vector<std::vector<std::vector<cplx>>> gamma;
    std::vector<std::vector<std::vector<cplx>>> eta;
};

inline StepCoefficients step_coefficients(const RationalApproximant& R, const NodeWindow& win) {
    const std::size_t p = win.c.size();
    if (win.d.size() != p + 1) throw ContractViolation("step_coefficients: d must have one more node than c");
    StepCoefficients out;
    for (const auto& pole : R.poles) {
        std::vector<std::vector<cplx>> g, e;
        for (int i = 1; i <= pole.multiplicity; ++i) {
            g.push_back(vandermonde_coefficients(win.c, resolvent_taylor(pole.w, i, p)));
            e.push_back(vandermonde_coefficients(win.d, shifted_resolvent_taylor(pole.w, i, p + 1)));
        }
        out.gamma.push_back(std::move(g));
        out.eta.push_back(std::move(e));
    }
    return out;
}

struct ConditioningReport {
    double rho = 0.0;
    double node_factor = 0.0; // max_k |c_k|^q
};

/// rho = || V^{-1} diag(1, 0!, 1!, ..., (q-2)!) ||_inf with V_{jk} = c_k^j.
inline ConditioningReport conditioning_report(const std::vector<double>& c) {
    const std::size_t q = c.size();
    detail::check_distinct(c, "conditioning nodes");
    std::vector<double> rowsum(q, 0.0);
    double fact = 1.0;
    for (std::size_t j = 0; j < q; ++j) {
        if (j >= 2) fact *= double(j - 1);
        std::vector<double> e(q, 0.0);
        e[j] = (j == 0) ? 1.0 : fact;
        const auto col = solve_vandermonde(c, e);
        for (std::size_t k = 0; k < q; ++k) rowsum[k] += std::abs(col[k]);
    }
    ConditioningReport r;
    r.rho = *std::max_element(rowsum.begin(), rowsum.end());
    for (double x : c) r.node_factor = std::max(r.node_factor, std::pow(std::abs(x), double(q)));
    return r;
}

} // namespace ratstep
