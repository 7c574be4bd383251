#pragma once

#include "ratstep/errors.hpp"
#include "ratstep/heat2d.hpp"
#include "ratstep/nodes.hpp"
#include "ratstep/rational.hpp"
#include "ratstep/rk_baseline.hpp"
#include "ratstep/rl_integrator.hpp"

#include "json.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <map>
#include <optional>
#include <random>
#include <sstream>
#include <string>
#include <vector>

namespace ratstep {

enum class ErrorMetric { VsExact, VsReference };

inline ErrorMetric parse_metric(const std::string& s) {
    if (s == "vs_exact" || s == "exact") return ErrorMetric::VsExact;
    if (s == "vs_reference" || s == "reference") return ErrorMetric::VsReference;
    throw ConfigError("unknown metric '" + s + "' (vs_exact or vs_reference)");
}

inline const char* to_string(ErrorMetric m) { return m == ErrorMetric::VsExact ? "vs_exact" : "vs_reference"; }

/// One experiment. method is "sdirk3"/"gauss3" for the RL method and
/// "rk-sdirk3"/"rk-gauss3" for the Runge-Kutta baseline.
struct ExperimentConfig {
    std::string method = "sdirk3";
    std::string nodes = "implicit";
    int N = 100;
    std::vector<double> taus = {0.1, 0.05, 0.025, 0.0125};
    double T = 0.5;
    double t_start = 1.0; // local-error experiments
    SolverOptions solver;
    ErrorMetric metric = ErrorMetric::VsReference;
    int reference_factor = 8;
    std::string reference_nodes; // empty: implicit for p=4, centered for p=6
    RKForm form = RKForm::Direct;
    SourceProjection source = SourceProjection::Consistent;
    std::string output;
    std::uint64_t seed = 12345;
    int repeats = 3;

    bool is_baseline() const { return method.rfind("rk-", 0) == 0; }
    std::string base_method() const { return is_baseline() ? method.substr(3) : method; }

    void validate() const {
        method_tableau(base_method());
        if (N < 3) throw ConfigError("N must be at least 3");
        if (taus.empty()) throw ConfigError("empty step-size list");
        for (double tau : taus) step_count(tau, T);
        if (reference_factor < 4) throw ConfigError("reference refinement factor must be at least 4");
        if (repeats < 1) throw ConfigError("repeats must be positive");
    }
};

/// Parses a step-size entry such as "0.05" or "1/15".
inline double parse_tau(const std::string& s) {
    const auto slash = s.find('/');
    try {
        if (slash == std::string::npos) return std::stod(s);
        return std::stod(s.substr(0, slash)) / std::stod(s.substr(slash + 1));
    } catch (const std::exception&) {
        throw ConfigError("malformed step size '" + s + "'");
    }
}

inline std::vector<double> parse_tau_list(const std::string& s) {
    std::vector<double> out;
    std::stringstream ss(s);
    for (std::string item; std::getline(ss, item, ',');)
        if (!item.empty()) out.push_back(parse_tau(item));
    return out;
}

/// Applies one key=value setting (keys mirror the CLI flags).
inline void apply_setting(ExperimentConfig& c, const std::string& key, const std::string& value) {
    try {
        if (key == "method") c.method = value;
        else if (key == "nodes") c.nodes = value;
        else if (key == "N") c.N = std::stoi(value);
        else if (key == "tau") c.taus = parse_tau_list(value);
        else if (key == "T") c.T = parse_tau(value);
        else if (key == "t_start") c.t_start = parse_tau(value);
        else if (key == "tol") c.solver.tol = std::stod(value);
        else if (key == "max_iter") c.solver.max_iter = std::stoi(value);
        else if (key == "precondition") c.solver.diagonal_preconditioner = (value == "1" || value == "true" || value == "diagonal");
        else if (key == "metric") c.metric = parse_metric(value);
        else if (key == "reference_factor") c.reference_factor = std::stoi(value);
        else if (key == "reference_nodes") c.reference_nodes = value;
        else if (key == "form") c.form = parse_rk_form(value);
        else if (key == "source") c.source = parse_source_projection(value);
        else if (key == "out") c.output = value;
        else if (key == "seed") c.seed = std::stoull(value);
        else if (key == "repeats") c.repeats = std::stoi(value);
        else if (key == "profile") {
            if (value == "desk") c.N = 100;
            else if (value == "paper") c.N = 200;
            else throw ConfigError("unknown profile '" + value + "' (desk or paper)");
        } else throw ConfigError("unknown configuration key '" + key + "'");
    } catch (const std::invalid_argument&) {
        throw ConfigError("bad value '" + value + "' for key '" + key + "'");
    } catch (const std::out_of_range&) {
        throw ConfigError("value out of range for key '" + key + "'");
    }
}

/// Reads "key = value" lines; '#' starts a comment.
inline void load_config(ExperimentConfig& c, std::istream& in) {
    std::string line;
    while (std::getline(in, line)) {
        const auto hash = line.find('#');
        if (hash != std::string::npos) line.erase(hash);
        const auto eq = line.find('=');
        auto trim = [](std::string s) {
            const auto a = s.find_first_not_of(" \t\r");
            const auto b = s.find_last_not_of(" \t\r");
            return a == std::string::npos ? std::string() : s.substr(a, b - a + 1);
        };
        if (trim(line).empty()) continue;
        if (eq == std::string::npos) throw ConfigError("config line without '=': " + line);
        apply_setting(c, trim(line.substr(0, eq)), trim(line.substr(eq + 1)));
    }
}

struct ConvergenceRow {
    double tau = 0.0;
    double error = 0.0;
    double order = std::numeric_limits<double>::quiet_NaN();
    double seconds = 0.0;
    long resolvent_solves = 0;
    long extension_solves = 0;
    long krylov_iterations = 0;
    long f_evaluations = 0;
    long g_evaluations = 0;
};

struct ConvergenceReport {
    std::string kind; // global, local, timing
    std::string method;
    std::string nodes;
    int N = 0;
    std::string metric;
    std::vector<ConvergenceRow> rows;
};

/// order_i = ln(e_{i-1}/e_i) / ln(tau_{i-1}/tau_i).
inline void fill_orders(std::vector<ConvergenceRow>& rows) {
    for (std::size_t i = 0; i < rows.size(); ++i) {
        rows[i].order = std::numeric_limits<double>::quiet_NaN();
        if (i == 0) continue;
        const double a = rows[i - 1].error, b = rows[i].error;
        if (a > 0.0 && b > 0.0) rows[i].order = std::log(a / b) / std::log(rows[i - 1].tau / rows[i].tau);
    }
}

/// Least-squares slope of ln(error) against ln(tau).
inline double fitted_order(const std::vector<double>& taus, const std::vector<double>& errors) {
    if (taus.size() != errors.size() || taus.size() < 2) throw ConfigError("fitted_order: need two or more points");
    double sx = 0, sy = 0, sxx = 0, sxy = 0;
    const double n = double(taus.size());
    for (std::size_t i = 0; i < taus.size(); ++i) {
        const double x = std::log(taus[i]), y = std::log(errors[i]);
        sx += x; sy += y; sxx += x * x; sxy += x * y;
    }
    return (n * sxy - sx * sy) / (n * sxx - sx * sx);
}

inline double fitted_order(const ConvergenceReport& r) {
    std::vector<double> t, e;
    for (const auto& row : r.rows) { t.push_back(row.tau); e.push_back(row.error); }
    return fitted_order(t, e);
}

inline std::string to_csv(const ConvergenceReport& r) {
    std::ostringstream os;
    os << "kind,method,nodes,N,metric,tau,error,order,seconds,resolvent_solves,extension_solves,krylov_iterations,"
          "f_evaluations,g_evaluations\n";
    char buf[64];
    auto e = [&](double v) {
        if (std::isnan(v)) return std::string();
        std::snprintf(buf, sizeof buf, "%.6e", v);
        return std::string(buf);
    };
    for (const auto& row : r.rows)
        os << r.kind << ',' << r.method << ',' << r.nodes << ',' << r.N << ',' << r.metric << ',' << e(row.tau) << ','
           << e(row.error) << ',' << e(row.order) << ',' << e(row.seconds) << ',' << row.resolvent_solves << ','
           << row.extension_solves << ',' << row.krylov_iterations << ',' << row.f_evaluations << ','
           << row.g_evaluations << '\n';
    return os.str();
}

inline nlohmann::json to_json(const ConvergenceReport& r) {
    nlohmann::json j;
    j["schema"] = "ratstep-report/1";
    j["kind"] = r.kind;
    j["method"] = r.method;
    j["nodes"] = r.nodes;
    j["N"] = r.N;
    j["metric"] = r.metric;
    j["rows"] = nlohmann::json::array();
    for (const auto& row : r.rows) {
        nlohmann::json x;
        x["tau"] = row.tau;
        x["error"] = row.error;
        x["order"] = std::isnan(row.order) ? nlohmann::json(nullptr) : nlohmann::json(row.order);
        x["seconds"] = row.seconds;
        x["resolvent_solves"] = row.resolvent_solves;
        x["extension_solves"] = row.extension_solves;
        x["krylov_iterations"] = row.krylov_iterations;
        x["f_evaluations"] = row.f_evaluations;
        x["g_evaluations"] = row.g_evaluations;
        j["rows"].push_back(x);
    }
    if (r.rows.size() >= 2) j["fitted_order"] = fitted_order(r);
    return j;
}

/// Writes <out>.csv and <out>.json when out is non-empty.
inline void write_report(const ConvergenceReport& r, const std::string& out) {
    if (out.empty()) return;
    std::ofstream(out + ".csv") << to_csv(r);
    std::ofstream(out + ".json") << to_json(r).dump(2) << '\n';
}

namespace detail {

inline double diff_norm(const HeatProblem& P, const RealVector& a, const RealVector& b) {
    RealVector d(a.size());
    for (std::size_t i = 0; i < a.size(); ++i) d[i] = a[i] - b[i];
    return P.norm(d);
}

inline std::string default_reference_nodes(const RationalApproximant& R) {
    return R.classical_order == 6 ? "centered" : "implicit";
}

struct RunOutcome {
    RealVector w;
    ConvergenceRow row;
};

inline RunOutcome run_once(const ExperimentConfig& c, const HeatProblem& P, double tau) {
    P.reset_counters();
    RunOutcome out;
    const auto t0 = std::chrono::steady_clock::now();
    if (c.is_baseline()) {
        out.w = integrate_rk(P, make_baseline(c.base_method(), c.form), tau, c.T).w;
    } else {
        const auto R = method_approximant(c.method);
        out.w = integrate(P, R, make_node_scheme(c.nodes, R.classical_order), tau, c.T).w;
    }
    out.row.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    const auto& k = P.counters();
    out.row.tau = tau;
    out.row.resolvent_solves = k.resolvent_solves;
    out.row.extension_solves = k.extension_solves;
    out.row.krylov_iterations = k.solver.iterations;
    out.row.f_evaluations = k.source_evaluations;
    out.row.g_evaluations = k.boundary_evaluations + k.boundary_derivative_evaluations;
    return out;
}

inline ConvergenceReport make_report(const ExperimentConfig& c, const char* kind) {
    ConvergenceReport r;
    r.kind = kind;
    r.method = c.method;
    r.nodes = c.is_baseline() ? std::string("rk-") + to_string(c.form) : c.nodes;
    r.N = c.N;
    r.metric = to_string(c.metric);
    return r;
}

} // namespace detail

/// Fine-step RL solution at T with tau_ref = min(tau) / reference_factor.
inline RealVector reference_solution(const ExperimentConfig& c, const HeatProblem& P) {
    const auto R = method_approximant(c.base_method());
    const auto nodes = c.reference_nodes.empty() ? detail::default_reference_nodes(R) : c.reference_nodes;
    const double tau_ref = *std::min_element(c.taus.begin(), c.taus.end()) / c.reference_factor;
    return integrate(P, R, make_node_scheme(nodes, R.classical_order), tau_ref, c.T).w;
}

/// Global errors at T for every step size. A precomputed reference may be passed
/// to share one fine run between several methods.
inline ConvergenceReport run_convergence(const ExperimentConfig& c, const RealVector* reference = nullptr) {
    c.validate();
    HeatProblem P(c.N, c.source, c.solver);
    auto report = detail::make_report(c, "global");
    try {
        std::optional<RealVector> ref;
        if (c.metric == ErrorMetric::VsReference) ref = reference ? *reference : reference_solution(c, P);
        const auto exact = P.exact_state(c.T);
        for (double tau : c.taus) {
            auto run = detail::run_once(c, P, tau);
            run.row.error = detail::diff_norm(P, run.w, ref ? *ref : exact);
            report.rows.push_back(run.row);
        }
    } catch (...) {
        fill_orders(report.rows);
        if (!c.output.empty()) write_report(report, c.output + ".partial");
        throw;
    }
    fill_orders(report.rows);
    write_report(report, c.output);
    return report;
}

/// Finest step dividing every tau and t_start, refined from min(tau)/factor.
inline double common_reference_step(const ExperimentConfig& c) {
    const double base = *std::min_element(c.taus.begin(), c.taus.end()) / c.reference_factor;
    auto divides = [](double big, double small) {
        const double r = big / small;
        return std::abs(r - std::round(r)) <= 1e-9 * std::max(1.0, r);
    };
    for (int k = 1; k <= 1000; ++k) {
        const double h = base / k;
        bool ok = divides(c.t_start, h);
        for (double tau : c.taus) ok = ok && divides(tau, h);
        if (ok) return h;
    }
    throw ConfigError("no common reference step divides all step sizes and t_start");
}

/// Interior solutions at t_start and t_start + tau, keyed by llround(t * 1e9).
using LocalStates = std::map<std::int64_t, RealVector>;

inline std::int64_t local_state_key(double t) { return std::llround(t * 1e9); }

/// Reference states for run_local_error from one fine RL run.
inline LocalStates local_reference_states(const ExperimentConfig& c, const HeatProblem& P) {
    const auto R = method_approximant(c.base_method());
    const double h = common_reference_step(c);
    const auto nodes = c.reference_nodes.empty() ? detail::default_reference_nodes(R) : c.reference_nodes;
    std::map<long, double> need;
    need[std::lround(c.t_start / h)] = c.t_start;
    for (double tau : c.taus) need[std::lround((c.t_start + tau) / h)] = c.t_start + tau;
    LocalStates ref;
    RLIntegrator<HeatProblem> integ(P, R, make_node_scheme(nodes, R.classical_order), h);
    auto st = integ.initialize();
    const long last = need.rbegin()->first;
    while (st.n < last) {
        integ.step(st);
        if (need.count(st.n)) ref[local_state_key(need[st.n])] = integ.reconstruct(st);
    }
    return ref;
}

/// One-step errors from reference states at t_start.
inline ConvergenceReport run_local_error(const ExperimentConfig& c, const LocalStates* reference = nullptr) {
    c.validate();
    HeatProblem P(c.N, c.source, c.solver);
    auto report = detail::make_report(c, "local");
    const auto R = method_approximant(c.base_method());
    for (double tau : c.taus)
        if (std::abs(c.t_start / tau - std::round(c.t_start / tau)) > 1e-9 * std::max(1.0, c.t_start / tau))
            throw ConfigError("t_start must be a multiple of every tau");

    LocalStates own;
    if (c.metric == ErrorMetric::VsReference && !reference) {
        own = local_reference_states(c, P);
        reference = &own;
    }
    auto solution_at = [&](double t) {
        if (c.metric == ErrorMetric::VsExact) return P.exact_state(t);
        const auto it = reference->find(local_state_key(t));
        if (it == reference->end()) throw ConfigError("reference states do not cover t = " + std::to_string(t));
        return it->second;
    };

    for (double tau : c.taus) {
        const int n0 = static_cast<int>(std::lround(c.t_start / tau));
        const auto w0 = solution_at(c.t_start);
        const auto w1 = solution_at(c.t_start + tau);
        P.reset_counters();
        ConvergenceRow row;
        row.tau = tau;
        const auto t0 = std::chrono::steady_clock::now();
        RealVector w;
        if (c.is_baseline()) {
            RKIntegrator<HeatProblem> rk(P, make_baseline(c.base_method(), c.form), tau);
            auto x = rk.to_state(w0, n0);
            rk.step(x, n0);
            w = rk.to_solution(x, n0 + 1);
        } else {
            RLIntegrator<HeatProblem> integ(P, R, make_node_scheme(c.nodes, R.classical_order), tau);
            auto st = integ.state_from(n0, w0, true);
            integ.step(st);
            w = integ.reconstruct(st);
        }
        row.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        row.error = detail::diff_norm(P, w, w1);
        const auto& k = P.counters();
        row.resolvent_solves = k.resolvent_solves;
        row.extension_solves = k.extension_solves;
        row.krylov_iterations = k.solver.iterations;
        row.f_evaluations = k.source_evaluations;
        row.g_evaluations = k.boundary_evaluations + k.boundary_derivative_evaluations;
        report.rows.push_back(row);
    }
    fill_orders(report.rows);
    write_report(report, c.output);
    return report;
}

/// Error and median wall-clock of `repeats` runs per step size (sequential).
inline ConvergenceReport run_timing(const ExperimentConfig& c) {
    c.validate();
    HeatProblem P(c.N, c.source, c.solver);
    auto report = detail::make_report(c, "timing");
    std::optional<RealVector> ref;
    if (c.metric == ErrorMetric::VsReference) ref = reference_solution(c, P);
    const auto exact = P.exact_state(c.T);
    for (double tau : c.taus) {
        std::vector<double> times;
        detail::RunOutcome run;
        for (int k = 0; k < c.repeats; ++k) {
            run = detail::run_once(c, P, tau);
            times.push_back(run.row.seconds);
        }
        std::sort(times.begin(), times.end());
        run.row.seconds = times[times.size() / 2];
        run.row.error = detail::diff_norm(P, run.w, ref ? *ref : exact);
        report.rows.push_back(run.row);
    }
    fill_orders(report.rows);
    write_report(report, c.output);
    return report;
}

/// Node windows of steps 0..n with their conditioning.
inline nlohmann::json diagnose_nodes(const std::string& kind, int p, int n) {
    const auto scheme = make_node_scheme(kind, p);
    nlohmann::json j;
    j["kind"] = kind;
    j["p"] = p;
    j["startup_depth"] = scheme.startup_depth();
    j["windows"] = nlohmann::json::array();
    for (int k = 0; k <= n; ++k) {
        const auto w = scheme.window(k);
        nlohmann::json x;
        x["n"] = k;
        x["c"] = w.c;
        x["d"] = w.d;
        const auto rc = conditioning_report(w.c);
        x["rho_c"] = rc.rho;
        x["node_factor_c"] = rc.node_factor;
        x["rho_d"] = conditioning_report(w.d).rho;
        j["windows"].push_back(x);
    }
    return j;
}

inline nlohmann::json diagnose_method(const std::string& id) {
    const auto R = method_approximant(id);
    const auto rep = verify_order_and_acceptability(R);
    nlohmann::json j;
    j["method"] = id;
    j["order"] = rep.order;
    j["a_acceptable"] = rep.a_acceptable;
    j["max_modulus_imag_axis"] = rep.max_modulus_imag_axis;
    j["r_infinity"] = {R.r_infinity.real(), R.r_infinity.imag()};
    j["poles"] = nlohmann::json::array();
    for (const auto& p : R.poles) {
        nlohmann::json x;
        x["w"] = {p.w.real(), p.w.imag()};
        x["multiplicity"] = p.multiplicity;
        x["residues"] = nlohmann::json::array();
        for (const auto& r : p.residues) x["residues"].push_back({r.real(), r.imag()});
        j["poles"].push_back(x);
    }
    return j;
}

/// max over n <= steps of ||r(tau A0)^n u|| / ||u|| for a seeded random u.
inline double stability_growth(const std::string& method, int N, double tau, int steps, std::uint64_t seed,
                               const SolverOptions& opts = {}) {
    HeatProblem P(N, SourceProjection::Nodal, opts);
    const auto R = method_approximant(method);
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> nd;
    RealVector u(P.dimension());
    for (auto& x : u) x = nd(rng);
    const double u0 = P.norm(u);
    double worst = 1.0;
    for (int k = 0; k < steps; ++k) {
        u = apply_rational_operator(R, tau, P, u);
        worst = std::max(worst, P.norm(u) / u0);
    }
    return worst;
}

} // namespace ratstep
