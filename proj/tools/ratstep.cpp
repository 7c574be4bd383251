// ratstep command-line driver: convergence, local error, timing and diagnostics.
#include "ratstep/harness.hpp"

#include "CLI11.hpp"

#include <cstdio>
#include <fstream>
#include <iostream>

using namespace ratstep;

namespace {

struct Flags {
    std::string config_file;
    std::vector<std::string> sets;
    std::string method, nodes, tau, T, t_start, metric, out, form, source, profile, reference_nodes;
    int N = 0;
    double tol = 0.0;
    long long seed = -1;
    int repeats = 0;
    bool precondition = false;
};

void add_common(CLI::App* app, Flags& f) {
    app->add_option("--config", f.config_file, "key = value configuration file");
    app->add_option("--set", f.sets, "key=value override (repeatable)");
    app->add_option("--method", f.method, "sdirk3, gauss3, rk-sdirk3, rk-gauss3");
    app->add_option("--nodes", f.nodes, "explicit, implicit, centered, cheb-centered, custom:<file>");
    app->add_option("--N", f.N, "grid intervals per side");
    app->add_option("--tau", f.tau, "comma-separated step sizes (fractions allowed, e.g. 1/15)");
    app->add_option("--T", f.T, "final time");
    app->add_option("--t-start", f.t_start, "start time for local errors");
    app->add_option("--tol", f.tol, "Krylov relative tolerance");
    app->add_option("--metric", f.metric, "vs_exact or vs_reference");
    app->add_option("--reference-nodes", f.reference_nodes, "node scheme of the reference run");
    app->add_option("--form", f.form, "RK baseline form: direct or lifted");
    app->add_option("--source", f.source, "source projection: consistent, mehrstellen, nodal");
    app->add_option("--profile", f.profile, "desk (N=100) or paper (N=200)");
    app->add_option("--seed", f.seed, "random seed");
    app->add_option("--repeats", f.repeats, "timing repeats");
    app->add_flag("--precondition", f.precondition, "diagonal preconditioning");
    app->add_option("--out", f.out, "output prefix; writes <out>.csv and <out>.json");
}

ExperimentConfig build_config(const Flags& f) {
    ExperimentConfig c;
    if (!f.config_file.empty()) {
        std::ifstream in(f.config_file);
        if (!in) throw ConfigError("cannot open config file " + f.config_file);
        load_config(c, in);
    }
    auto set = [&](const char* k, const std::string& v) {
        if (!v.empty()) apply_setting(c, k, v);
    };
    set("profile", f.profile);
    set("method", f.method);
    // per-method defaults unless given explicitly
    if (f.tau.empty() && f.T.empty() && c.base_method() == "gauss3") {
        c.taus = {0.1, 1.0 / 15, 0.05, 0.04};
        c.T = 1.0;
        if (f.nodes.empty()) c.nodes = "centered";
    }
    set("nodes", f.nodes);
    set("tau", f.tau);
    set("T", f.T);
    set("t_start", f.t_start);
    set("metric", f.metric);
    set("reference_nodes", f.reference_nodes);
    set("form", f.form);
    set("source", f.source);
    set("out", f.out);
    if (f.N > 0) c.N = f.N;
    if (f.tol > 0.0) c.solver.tol = f.tol;
    if (f.seed >= 0) c.seed = static_cast<std::uint64_t>(f.seed);
    if (f.repeats > 0) c.repeats = f.repeats;
    if (f.precondition) c.solver.diagonal_preconditioner = true;
    for (const auto& kv : f.sets) {
        const auto eq = kv.find('=');
        if (eq == std::string::npos) throw ConfigError("--set expects key=value, got '" + kv + "'");
        apply_setting(c, kv.substr(0, eq), kv.substr(eq + 1));
    }
    return c;
}

void print_report(const ConvergenceReport& r) {
    std::printf("%s %s nodes=%s N=%d metric=%s\n", r.kind.c_str(), r.method.c_str(), r.nodes.c_str(), r.N,
                r.metric.c_str());
    std::printf("%12s %12s %8s %10s %10s %10s\n", "tau", "error", "order", "seconds", "resolvent", "krylov");
    for (const auto& row : r.rows)
        std::printf("%12.6g %12.4e %8.3f %10.3f %10ld %10ld\n", row.tau, row.error, row.order, row.seconds,
                    row.resolvent_solves, row.krylov_iterations);
    if (r.rows.size() >= 2) std::printf("fitted order %.3f\n", fitted_order(r));
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"Rational time stepping for the 2-D heat equation"};
    app.require_subcommand(1);
    Flags f;

    auto* converge = app.add_subcommand("converge", "global errors at T over a step-size sequence");
    auto* local = app.add_subcommand("local", "one-step errors from t_start");
    auto* timing = app.add_subcommand("timing", "median wall-clock per step size");
    add_common(converge, f);
    add_common(local, f);
    add_common(timing, f);

    auto* diag = app.add_subcommand("diag", "diagnostics");
    diag->require_subcommand(1);
    std::string d_kind = "implicit", d_method = "sdirk3";
    int d_p = 4, d_n = 6, d_N = 16, d_steps = 1000;
    double d_tau = 0.1;
    long long d_seed = 12345;
    auto* dn = diag->add_subcommand("nodes", "node windows and Vandermonde conditioning");
    dn->add_option("--kind,--nodes", d_kind);
    dn->add_option("--p", d_p);
    dn->add_option("--n,--steps", d_n, "windows for n = 0..n");
    auto* dm = diag->add_subcommand("method", "poles, residues, order and A-acceptability");
    dm->add_option("method,--method", d_method);
    auto* ds = diag->add_subcommand("stability", "growth of ||r(tau A0)^n u||");
    ds->add_option("method,--method", d_method);
    ds->add_option("--N", d_N);
    ds->add_option("--tau", d_tau);
    ds->add_option("--steps", d_steps);
    ds->add_option("--seed", d_seed);

    CLI11_PARSE(app, argc, argv);

    try {
        if (converge->parsed() || local->parsed() || timing->parsed()) {
            const auto cfg = build_config(f);
            const auto report =
                converge->parsed() ? run_convergence(cfg) : local->parsed() ? run_local_error(cfg) : run_timing(cfg);
            print_report(report);
        } else if (dn->parsed()) {
            std::cout << diagnose_nodes(d_kind, d_p, d_n).dump(2) << '\n';
        } else if (dm->parsed()) {
            std::cout << diagnose_method(d_method).dump(2) << '\n';
        } else if (ds->parsed()) {
            const double g = stability_growth(d_method, d_N, d_tau, d_steps, static_cast<std::uint64_t>(d_seed));
            std::printf("max growth over %d steps: %.15g\n", d_steps, g);
        }
    } catch (const ConfigError& e) {
        std::fprintf(stderr, "configuration error: %s\n", e.what());
        return 2;
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 1;
    }
    return 0;
}
