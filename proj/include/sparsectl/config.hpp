#pragma once

// Run configuration for the command-line driver: problem preset, solver settings and output
// options, convertible to and from the flat key-value format.

#include <cstdint>
#include <set>
#include <sstream>
#include <string>

#include "io.hpp"
#include "problems.hpp"

namespace sparsectl {

struct RunConfig {
    ProblemSpec problem = ProblemSpec::preset(ProblemKind::poisson_neumann);
    Method method = Method::nirls;
    double eps = 1e-7;
    /// Geometric decay factor for eps; 1 keeps eps fixed.
    double eps_factor = 1.0;
    double eps_min = 1e-7;
    double theta = 1.5;
    int cg_iters = 3;
    double tol = 1e-6;
    int max_iters = 1000;
    int warmup = 15;
    std::uint64_t seed = 0;
    std::string out_dir = "out";
    /// Online draws.
    int count = 20;
    /// Support threshold; negative selects 1e-3 of the largest control magnitude.
    double tau = -1.0;
    int tail = 500;

    [[nodiscard]] SolverConfig solver() const
    {
        SolverConfig c;
        c.alpha = problem.alpha;
        c.beta = problem.beta;
        c.eps = eps_factor == 1.0 ? EpsSchedule::fixed(eps) : EpsSchedule::geometric(eps, eps_factor, eps_min);
        c.theta = method == Method::irls ? 1.0 : theta;
        c.n_cg = cg_iters;
        c.tol_grad = tol;
        c.max_iter = max_iters;
        c.warmup_irls = warmup;
        return c;
    }

    [[nodiscard]] SetupOptions setup_options() const
    {
        SetupOptions o;
        o.eig.seed = seed;
        o.forcing.seed = seed + 1;
        o.tail = tail;
        return o;
    }

    [[nodiscard]] io::KeyValues to_kv() const
    {
        using io::format_double;
        io::KeyValues kv;
        kv["problem"] = to_string(problem.kind);
        kv["n"] = std::to_string(problem.n);
        kv["alpha"] = format_double(problem.alpha);
        kv["beta"] = format_double(problem.beta);
        kv["kappa"] = format_double(problem.kappa);
        kv["gamma"] = format_double(problem.gamma);
        kv["m0"] = format_double(problem.m0);
        kv["r"] = std::to_string(problem.r);
        kv["rtilde"] = std::to_string(problem.rtilde);
        kv["method"] = to_string(method);
        kv["eps"] = format_double(eps);
        kv["eps_factor"] = format_double(eps_factor);
        kv["eps_min"] = format_double(eps_min);
        kv["theta"] = format_double(theta);
        kv["cg_iters"] = std::to_string(cg_iters);
        kv["tol"] = format_double(tol);
        kv["max_iters"] = std::to_string(max_iters);
        kv["warmup"] = std::to_string(warmup);
        kv["seed"] = std::to_string(seed);
        kv["out_dir"] = out_dir;
        kv["count"] = std::to_string(count);
        kv["tau"] = format_double(tau);
        kv["tail"] = std::to_string(tail);
        return kv;
    }

    /// Starts from the preset named by `problem` (and `n`), then applies every other key.
    [[nodiscard]] static RunConfig from_kv(const io::KeyValues& kv)
    {
        RunConfig c;
        const auto has = [&](const char* k) { return kv.count(k) > 0; };
        const auto get = [&](const char* k) -> const std::string& { return kv.at(k); };
        ProblemKind kind = ProblemKind::poisson_neumann;
        if (has("problem")) {
            const auto p = parse_problem(get("problem"));
            if (!p) throw DomainError("unknown problem '" + get("problem") + "'");
            kind = *p;
        }
        int n = 64;
        if (has("n")) n = parse_int(get("n"), "n");
        c.problem = ProblemSpec::preset(kind, n);

        static const std::set<std::string> known{"problem", "n", "alpha", "beta", "kappa", "gamma", "m0", "r",
                                                 "rtilde", "method", "eps", "eps_factor", "eps_min", "theta",
                                                 "cg_iters", "tol", "max_iters", "warmup", "seed", "out_dir",
                                                 "count", "tau", "tail"};
        for (const auto& [k, v] : kv) {
            if (!known.count(k)) throw DomainError("unknown configuration key '" + k + "'");
        }
        if (has("alpha")) c.problem.alpha = parse_double(get("alpha"), "alpha");
        if (has("beta")) c.problem.beta = parse_double(get("beta"), "beta");
        if (has("kappa")) c.problem.kappa = parse_double(get("kappa"), "kappa");
        if (has("gamma")) c.problem.gamma = parse_double(get("gamma"), "gamma");
        if (has("m0")) c.problem.m0 = parse_double(get("m0"), "m0");
        if (has("r")) c.problem.r = parse_int(get("r"), "r");
        if (has("rtilde")) c.problem.rtilde = parse_int(get("rtilde"), "rtilde");
        if (has("method")) {
            const auto m = parse_method(get("method"));
            if (!m) throw DomainError("unknown method '" + get("method") + "'");
            c.method = *m;
        }
        if (has("eps")) c.eps = parse_double(get("eps"), "eps");
        c.eps_min = c.eps;
        if (has("eps_factor")) c.eps_factor = parse_double(get("eps_factor"), "eps_factor");
        if (has("eps_min")) c.eps_min = parse_double(get("eps_min"), "eps_min");
        if (has("theta")) c.theta = parse_double(get("theta"), "theta");
        if (has("cg_iters")) c.cg_iters = parse_int(get("cg_iters"), "cg_iters");
        if (has("tol")) c.tol = parse_double(get("tol"), "tol");
        if (has("max_iters")) c.max_iters = parse_int(get("max_iters"), "max_iters");
        if (has("warmup")) c.warmup = parse_int(get("warmup"), "warmup");
        if (has("seed")) c.seed = static_cast<std::uint64_t>(std::stoull(get("seed")));
        if (has("out_dir")) c.out_dir = get("out_dir");
        if (has("count")) c.count = parse_int(get("count"), "count");
        if (has("tau")) c.tau = parse_double(get("tau"), "tau");
        if (has("tail")) c.tail = parse_int(get("tail"), "tail");
        c.problem.validate();
        c.solver().validate();
        return c;
    }

    friend bool operator==(const RunConfig& a, const RunConfig& b) { return a.to_kv() == b.to_kv(); }

private:
    static double parse_double(const std::string& s, const char* key)
    {
        std::size_t used = 0;
        double v = 0.0;
        try {
            v = std::stod(s, &used);
        } catch (const std::exception&) {
            used = 0;
        }
        if (used == 0 || used != s.size()) throw DomainError(std::string("invalid number for ") + key + ": '" + s + "'");
        return v;
    }

    static int parse_int(const std::string& s, const char* key)
    {
        std::size_t used = 0;
        int v = 0;
        try {
            v = std::stoi(s, &used);
        } catch (const std::exception&) {
            used = 0;
        }
        if (used == 0 || used != s.size()) throw DomainError(std::string("invalid integer for ") + key + ": '" + s + "'");
        return v;
    }
};

} // namespace sparsectl
