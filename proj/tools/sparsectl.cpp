// Command-line driver: offline setup, offline optimization, online evaluation, reports.

#include <CLI11.hpp>

#include <sparsectl/config.hpp>

#include <filesystem>
#include <iomanip>
#include <iostream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

namespace fs = std::filesystem;
using namespace sparsectl;

namespace {

constexpr int exit_ok = 0;
constexpr int exit_usage = 1;
constexpr int exit_not_converged = 2;

struct Flags {
    std::string config_file;
    std::map<std::string, std::string> overrides;
    std::string eps_schedule;
    std::string samples_file;
};

std::string path_in(const RunConfig& c, const std::string& name) { return (fs::path(c.out_dir) / name).string(); }

/// Keys that change the offline factors; a cached setup is reused only if all of them match.
const std::vector<std::string> setup_keys{"problem", "n", "kappa", "gamma", "m0", "r", "rtilde", "seed"};

bool setup_matches(const RunConfig& c)
{
    const std::string cfg = path_in(c, "setup.cfg");
    if (!fs::exists(cfg) || !fs::exists(path_in(c, "lowrank.bin")) || !fs::exists(path_in(c, "basis.bin"))) {
        return false;
    }
    const auto saved = io::read_config(cfg);
    const auto now = c.to_kv();
    for (const auto& k : setup_keys) {
        auto it = saved.find(k);
        if (it == saved.end() || it->second != now.at(k)) return false;
    }
    return true;
}

void write_setup(const RunConfig& c, const AssembledProblem& prob, const OfflineSetup& setup)
{
    fs::create_directories(c.out_dir);
    io::write_spectrum_csv(path_in(c, "spectrum.csv"), setup.lowrank->lambda);
    io::write_lowrank(path_in(c, "lowrank.bin"), *setup.lowrank);
    io::write_basis(path_in(c, "basis.bin"), *setup.basis);
    {
        auto os = io::open_out(path_in(c, "truncation.txt"));
        os << "truncation_bound = " << setup.truncation << '\n';
        os << "alpha = " << prob.spec.alpha << '\n';
        os << "r_requested = " << c.problem.r << '\n';
        os << "r = " << setup.lowrank->rank() << '\n';
        os << "tail = " << setup.spectrum.size() - std::min<long>(setup.spectrum.size(), setup.lowrank->rank()) << '\n';
        os << "reduced_rank = " << ((setup.lowrank->rank_deficient || c.problem.r > prob.grid.N) ? 1 : 0) << '\n';
        os << "eig_residual = " << setup.lowrank->residual << '\n';
        os << "operator_products = " << setup.lowrank->products << '\n';
        os << "rtilde = " << setup.basis->rank() << '\n';
        os << "basis_truncated = " << (setup.basis->truncated ? 1 : 0) << '\n';
    }
    auto os = io::open_out(path_in(c, "setup.cfg"));
    io::write_config(os, c.to_kv());
}

OfflineSetup load_setup(const RunConfig& c, const AssembledProblem& prob)
{
    OfflineSetup s;
    s.lowrank = std::make_shared<const LowRankSym>(io::read_lowrank(path_in(c, "lowrank.bin")));
    s.basis = std::make_shared<const ForcingBasis>(io::read_basis(path_in(c, "basis.bin")));
    if (s.lowrank->dim() != prob.grid.N || s.basis->dim() != prob.grid.N) {
        throw io::IoError("setup artifacts do not match the grid");
    }
    s.spectrum = gram_spectrum(prob.A, s.lowrank->rank() + c.tail);
    s.truncation = truncation_bound(s.spectrum, prob.spec.alpha, s.lowrank->rank());
    return s;
}

OfflineSetup ensure_setup(const RunConfig& c, const AssembledProblem& prob)
{
    if (setup_matches(c)) return load_setup(c, prob);
    OfflineSetup s = offline_setup(prob, c.problem.r, c.problem.rtilde, c.setup_options());
    write_setup(c, prob, s);
    return s;
}

int cmd_setup(const RunConfig& c)
{
    const AssembledProblem prob = build_problem(c.problem);
    const OfflineSetup s = offline_setup(prob, c.problem.r, c.problem.rtilde, c.setup_options());
    write_setup(c, prob, s);
    std::cout << "rank " << s.lowrank->rank() << ", truncation bound " << s.truncation << ", eigen residual "
              << s.lowrank->residual << '\n';
    return exit_ok;
}

int cmd_solve(const RunConfig& c)
{
    const AssembledProblem prob = build_problem(c.problem);
    const OfflineSetup s = ensure_setup(c, prob);
    const ReducedModel model = reduced_model(prob, s);
    const SolveResult res = solve(model, c.method, c.solver());

    io::write_convergence_csv(path_in(c, "convergence.csv"), res.record);
    io::write_field_csv(path_in(c, "nu.csv"), prob.grid, res.nu.nu);
    io::write_field_csv(path_in(c, "umean.csv"), prob.grid, res.u_mean);
    io::write_field_csv(path_in(c, "stddev.csv"), prob.grid, res.second_moment.cwiseSqrt());
    io::write_result(path_in(c, "result.bin"), res);

    const auto cost = res.record.cost_to(c.tol);
    auto os = io::open_out(path_in(c, "summary.txt"));
    os << "method = " << to_string(c.method) << '\n';
    os << "problem = " << to_string(c.problem.kind) << '\n';
    os << "n = " << c.problem.n << '\n';
    os << "r = " << s.lowrank->rank() << '\n';
    os << "rtilde = " << s.basis->rank() << '\n';
    os << "cg_iters = " << c.cg_iters << '\n';
    os << "iterations = " << res.record.rows.size() << '\n';
    os << "cost_units = " << (res.record.rows.empty() ? 0.0 : res.record.rows.back().cost_units) << '\n';
    os << "cost_to_tol = " << (cost ? io::format_double(*cost) : std::string("nan")) << '\n';
    os << "final_grad_norm = " << res.grad_norm << '\n';
    os << "truncation_bound = " << s.truncation << '\n';
    os << "converged = " << (res.converged ? 1 : 0) << '\n';
    if (c.problem.kind == ProblemKind::poisson_rhs) os << "note = beta for poisson-rhs is not given by the source problem\n";

    std::cout << to_string(c.method) << ": " << res.record.rows.size() << " iterations, grad norm " << res.grad_norm
              << (res.converged ? ", converged\n" : ", not converged\n");
    return res.converged ? exit_ok : exit_not_converged;
}

int cmd_online(const RunConfig& c, const std::string& samples_file)
{
    for (const char* f : {"result.bin", "basis.bin", "lowrank.bin"}) {
        if (!fs::exists(path_in(c, f))) {
            std::cerr << "missing artifact " << path_in(c, f) << '\n';
            return exit_usage;
        }
    }
    const AssembledProblem prob = build_problem(c.problem);
    const OfflineSetup s = load_setup(c, prob);
    const SolveResult res = io::read_result(path_in(c, "result.bin"));
    detail::require_size(res.nu.nu.size(), prob.grid.N, "result.bin");
    const SnuOperator snu(s.lowrank, res.nu.nu, prob.spec.alpha, prob.spec.beta);

    std::vector<Vector> draws;
    if (!samples_file.empty()) {
        for (const Vector& m : io::read_rows_csv(samples_file, prob.prior.dimension())) {
            draws.emplace_back(m - prob.prior.mean());
        }
    } else {
        for (int k = 0; k < c.count; ++k) draws.emplace_back(prob.prior.sample(c.seed + k) - prob.prior.mean());
    }

    std::vector<Vector> controls;
    for (std::size_t k = 0; k < draws.size(); ++k) {
        controls.push_back(online_control(snu, *s.basis, prob.B, draws[k]));
        io::write_field_csv(path_in(c, "control_" + std::to_string(k) + ".csv"), prob.grid, controls.back());
    }
    const double tau = c.tau >= 0.0 ? c.tau : default_support_threshold(controls);
    const SupportReport rep = shared_support(res.second_moment, controls, tau);
    auto os = io::open_out(path_in(c, "support_report.txt"));
    os << "samples = " << rep.samples << '\n';
    os << "tau = " << rep.tau << '\n';
    os << "support_cells = " << rep.support_size() << '\n';
    os << "cells = " << prob.grid.N << '\n';
    os << "violations = " << rep.violations << '\n';
    std::cout << rep.samples << " controls, support " << rep.support_size() << " of " << prob.grid.N << " cells, "
              << rep.violations << " violations\n";
    return exit_ok;
}

int cmd_deterministic(const RunConfig& c)
{
    const AssembledProblem prob = build_problem(c.problem);
    std::optional<ForcingBasis> basis;
    if (fs::exists(path_in(c, "basis.bin"))) basis = io::read_basis(path_in(c, "basis.bin"));
    if (basis && basis->dim() != prob.grid.N) basis.reset();
    const DeterministicReduction red = deterministic_reduce(prob, basis ? &*basis : nullptr);
    fs::create_directories(c.out_dir);
    io::write_field_csv(path_in(c, "tilde_yd.csv"), prob.grid, red.tilde_y_d);
    std::cout << "||tilde y_d|| = " << norm_l2(prob.grid, red.tilde_y_d);
    if (red.trace_const) std::cout << ", trace term " << io::format_double(*red.trace_const);
    std::cout << '\n';
    return exit_ok;
}

int cmd_report(const std::string& out_dir)
{
    std::vector<fs::path> summaries;
    if (fs::is_directory(out_dir)) {
        if (fs::exists(fs::path(out_dir) / "summary.txt")) summaries.push_back(fs::path(out_dir) / "summary.txt");
        std::vector<fs::path> subs;
        for (const auto& e : fs::directory_iterator(out_dir)) {
            if (e.is_directory() && fs::exists(e.path() / "summary.txt")) subs.push_back(e.path() / "summary.txt");
        }
        std::sort(subs.begin(), subs.end());
        summaries.insert(summaries.end(), subs.begin(), subs.end());
    }
    if (summaries.empty()) {
        std::cout << "no runs found\n";
        return exit_usage;
    }
    std::cout << std::left << std::setw(24) << "run" << std::setw(10) << "method" << std::setw(8) << "n_cg"
              << std::setw(12) << "iterations" << std::setw(14) << "cost_to_tol" << std::setw(16) << "final_grad"
              << "truncation\n";
    for (const auto& p : summaries) {
        const auto kv = io::read_config(p.string());
        const auto get = [&](const char* k) -> std::string {
            if (!kv.count(k)) return "-";
            const std::string& v = kv.at(k);
            std::size_t used = 0;
            double d = 0.0;
            try {
                d = std::stod(v, &used);
            } catch (const std::exception&) {
                return v;
            }
            if (used != v.size()) return v;
            std::ostringstream os;
            os << std::setprecision(6) << d;
            return os.str() + " ";
        };
        std::cout << std::left << std::setw(24) << p.parent_path().filename().string() << std::setw(10)
                  << get("method") << std::setw(8) << get("cg_iters") << std::setw(12) << get("iterations")
                  << std::setw(14) << get("cost_to_tol") << std::setw(16) << get("final_grad_norm")
                  << get("truncation_bound") << '\n';
    }
    return exit_ok;
}

} // namespace

int main(int argc, char** argv)
{
    CLI::App app{"Sparse optimal control of linear PDEs under Gaussian uncertainty"};
    app.require_subcommand(1);
    app.fallthrough();

    Flags flags;
    const auto opt = [&](const std::string& name, const std::string& key, const std::string& help) {
        app.add_option_function<std::string>(
            name, [&flags, key](const std::string& v) { flags.overrides[key] = v; }, help);
    };
    opt("--problem", "problem", "poisson-neumann | poisson-rhs | helmholtz");
    opt("--n", "n", "cells per side");
    opt("--r", "r", "rank of the solution-operator approximation");
    opt("--rtilde", "rtilde", "rank of the forcing basis");
    opt("--alpha", "alpha", "L2 control cost");
    opt("--beta", "beta", "sparsity weight");
    opt("--kappa", "kappa", "Helmholtz wave number");
    opt("--gamma", "gamma", "prior scale");
    opt("--eps", "eps", "smoothing parameter (initial value for a schedule)");
    opt("--method", "method", "irls | or-irls | nirls");
    opt("--theta", "theta", "over-relaxation for or-irls");
    opt("--cg-iters", "cg_iters", "CG iterations per Newton step");
    opt("--tol", "tol", "gradient-norm tolerance");
    opt("--max-iters", "max_iters", "iteration limit");
    opt("--warmup", "warmup", "over-relaxed IRLS steps before Newton");
    opt("--seed", "seed", "random seed");
    opt("--out-dir", "out_dir", "artifact directory");
    opt("--count", "count", "number of online draws");
    opt("--tau", "tau", "support threshold (default 1e-3 of the largest control)");
    opt("--tail", "tail", "extra eigenvalues for the truncation bound");
    app.add_option("--eps-schedule", flags.eps_schedule, "geometric eps schedule 'rho,eps_min'");
    app.add_option("--config", flags.config_file, "key = value file; flags take precedence");

    auto* setup = app.add_subcommand("setup", "compute low-rank factors, forcing basis and truncation bound");
    auto* solve_cmd = app.add_subcommand("solve", "optimize the reweighting function");
    auto* online = app.add_subcommand("online", "evaluate controls for parameter draws");
    online->add_option("--samples", flags.samples_file, "CSV with one parameter vector per row");
    auto* deterministic = app.add_subcommand("deterministic", "mean-parameter reduction");
    auto* report = app.add_subcommand("report", "summarize runs in an output directory");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? exit_ok : exit_usage;
    }

    try {
        io::KeyValues kv;
        if (!flags.config_file.empty()) kv = io::read_config(flags.config_file);
        for (const auto& [k, v] : flags.overrides) kv[k] = v;
        if (!flags.eps_schedule.empty()) {
            const auto parts = io::split(flags.eps_schedule, ',');
            if (parts.size() != 2) throw DomainError("--eps-schedule expects 'rho,eps_min'");
            kv["eps_factor"] = io::trim(parts[0]);
            kv["eps_min"] = io::trim(parts[1]);
        }
        const RunConfig cfg = RunConfig::from_kv(kv);

        if (*report) return cmd_report(cfg.out_dir);
        if (*setup) return cmd_setup(cfg);
        if (*solve_cmd) return cmd_solve(cfg);
        if (*online) return cmd_online(cfg, flags.samples_file);
        if (*deterministic) return cmd_deterministic(cfg);
    } catch (const io::IoError& e) {
        std::cerr << "error: " << e.what() << '\n';
        return exit_usage;
    } catch (const DomainError& e) {
        std::cerr << "error: " << e.what() << '\n';
        return exit_usage;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return exit_usage;
    }
    return exit_usage;
}
