// Helmholtz problem end to end: offline setup, the three solvers, a few online controls.
//
//   helmholtz_demo [n] [out_dir]

#include <sparsectl/io.hpp>
#include <sparsectl/problems.hpp>

#include <chrono>
#include <filesystem>
#include <iostream>
#include <string>

using namespace sparsectl;

int main(int argc, char** argv)
{
    const int n = argc > 1 ? std::stoi(argv[1]) : 64;
    const std::string out = argc > 2 ? argv[2] : "helmholtz_demo_out";
    std::filesystem::create_directories(out);

    const auto spec = ProblemSpec::preset(ProblemKind::helmholtz, n);
    const auto prob = build_problem(spec);
    auto t0 = std::chrono::steady_clock::now();
    const auto setup = offline_setup(prob, spec.r, spec.rtilde);
    const double setup_s = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    std::cout << "n = " << n << ", r = " << setup.lowrank->rank() << ", rtilde = " << setup.basis->rank()
              << ", truncation bound " << setup.truncation << " (" << setup_s << " s)\n";

    const auto model = reduced_model(prob, setup);
    SolverConfig cfg;
    cfg.alpha = spec.alpha;
    cfg.beta = spec.beta;
    cfg.max_iter = 5000;
    cfg.record_objective = false;

    SolveResult best;
    for (Method m : {Method::irls, Method::or_irls, Method::nirls}) {
        t0 = std::chrono::steady_clock::now();
        SolveResult res = solve(model, m, cfg);
        const double s = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        const auto cost = res.record.cost_to(cfg.tol_grad);
        std::cout << to_string(m) << ": " << res.record.rows.size() << " iterations, cost "
                  << (cost ? *cost : res.record.rows.back().cost_units) << ", " << s << " s\n";
        io::write_convergence_csv(out + "/convergence_" + to_string(m) + ".csv", res.record);
        if (m == Method::nirls) best = std::move(res);
    }

    io::write_field_csv(out + "/nu.csv", prob.grid, best.nu.nu);
    io::write_field_csv(out + "/umean.csv", prob.grid, best.u_mean);
    io::write_field_csv(out + "/stddev.csv", prob.grid, best.second_moment.cwiseSqrt());

    const SnuOperator S = model.snu(best.nu.nu);
    std::vector<Vector> controls;
    for (std::uint64_t k = 0; k < 4; ++k) {
        controls.push_back(online_control(S, *setup.basis, prob.B, Vector(prob.prior.sample(k) - prob.prior.mean())));
        io::write_field_csv(out + "/control_" + std::to_string(k) + ".csv", prob.grid, controls.back());
    }
    const auto rep = shared_support(best.second_moment, controls, default_support_threshold(controls));
    std::cout << "support " << rep.support_size() << " of " << prob.grid.N << " cells, " << rep.violations
              << " violations over " << rep.samples << " draws; fields written to " << out << '\n';
    return 0;
}
