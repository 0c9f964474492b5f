// Command-line front end: simulate, verify-index, check-indexability.

#include <cstdio>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "wimec/config.hpp"
#include "wimec/index_policy.hpp"
#include "wimec/sim.hpp"
#include "wimec/verification.hpp"

namespace {

int run_simulate(const std::string& config, const std::string& preset_name, int seeds, const std::string& out,
                 const std::string& policies, bool bound, unsigned threads) {
    wimec::ExperimentGrid grid;
    if (!preset_name.empty()) grid = wimec::preset(preset_name);
    if (!config.empty()) wimec::apply_config_file(grid, config);
    if (!policies.empty()) wimec::apply_setting(grid, "policy", policies);
    if (bound) grid.base.compute_bound = true;
    const int reps = seeds > 0 ? seeds : grid.base.replications;

    // Validate every cell before running anything.
    std::vector<std::string> problems;
    for (const auto& c : grid.cells())
        for (const auto& e : c.validation_errors()) problems.push_back(wimec::describe_cell(c) + ": " + e);
    if (!problems.empty()) {
        for (const auto& p : problems) std::cerr << "config error: " << p << "\n";
        return 2;
    }

    const wimec::ExperimentResult res = wimec::run_experiment(grid, reps, threads);
    for (const auto& f : res.failures)
        std::cerr << "cell failed: " << f.cell << " seed=" << f.seed << ": " << f.message << "\n";
    if (!res.records.empty()) {
        wimec::emit_csv(res.records, out);
        wimec::emit_summary_csv(res.summaries, out + ".summary.csv");
        std::ofstream meta(out + ".meta.json");
        meta << wimec::metadata(grid, res, reps).dump(2) << "\n";
    }
    for (const auto& s : res.summaries)
        std::printf("%-8s N=%-4d M=%-4d alpha=%-8g reward=%12.4f +-%-9.4f completion=%.4f +-%.4f energy=%.6g\n",
                    s.policy.c_str(), s.N, s.M, s.alpha, s.reward_mean, s.reward_ci, s.completion_mean,
                    s.completion_ci, s.energy_mean);
    return res.failures.empty() && !res.records.empty() ? 0 : 1;
}

int run_verify_index(int tau_max, int b_max, const std::string& out, const std::vector<double>& alphas) {
    wimec::IndexGridSpec spec;
    spec.tau_max = tau_max;
    spec.b_max = b_max;
    spec.penalties = wimec::penalty_family(alphas);
    const auto rows = wimec::verify_index_grid(spec);
    std::ofstream f(out);
    if (!f) {
        std::cerr << "cannot open '" << out << "'\n";
        return 2;
    }
    f << "penalty,alpha,k,beta,e_saving,tau,b,closed_form,oracle,difference\n";
    int mismatches = 0, errors = 0;
    for (const auto& r : rows) {
        f << r.family << ',' << wimec::format_double(r.alpha) << ',' << r.capacity << ','
          << wimec::format_double(r.discount) << ',' << wimec::format_double(r.e_saving) << ',' << r.tau << ','
          << r.backlog << ',' << wimec::format_double(r.closed_form) << ',' << wimec::format_double(r.oracle) << ','
          << wimec::format_double(r.closed_form - r.oracle) << "\n";
        if (!r.error.empty()) ++errors;
        else if (r.diff() > 1e-6) ++mismatches;
    }
    std::printf("%zu states checked, %d mismatches above 1e-6, %d oracle errors\n", rows.size(), mismatches, errors);
    return mismatches == 0 && errors == 0 ? 0 : 1;
}

int run_check_indexability(int configs, int points, std::uint64_t seed) {
    wimec::Rng rng(seed);
    int failures = 0;
    for (int c = 0; c < configs; ++c) {
        const wimec::SubsidizedArmMDP m = wimec::random_arm(rng);
        const auto r = wimec::indexability_check(m, wimec::subsidy_grid(m, points));
        std::printf("arm %2d k=%-2d beta=%-4g E=%-9.4f F=(%g + %g x^2): %s%s\n", c, m.capacity, m.discount,
                    m.e_saving, m.penalty.base, m.penalty.quad_coeff, r.indexable ? "indexable" : "NOT indexable: ",
                    r.violation.c_str());
        if (!r.indexable) ++failures;
    }
    const auto bad = wimec::indexability_check(wimec::non_indexable_example(), 0.9, wimec::linspace(-100, 1000, 221));
    std::printf("counterexample: %s%s\n", bad.indexable ? "passed (checker broken)" : "rejected: ",
                bad.violation.c_str());
    return failures == 0 && !bad.indexable ? 0 : 1;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Whittle-index task offloading simulator"};
    app.require_subcommand(1);

    auto* sim = app.add_subcommand("simulate", "run an experiment grid and write per-run CSV");
    std::string config, preset_name, out = "results.csv", policies;
    int seeds = 0;
    bool bound = false;
    unsigned threads = 0;
    sim->add_option("--config", config, "flat key = value configuration file");
    sim->add_option("--preset", preset_name, "fig3a|fig3b|fig4|fig5|fig6|fig7|fig8");
    sim->add_option("--seeds", seeds, "replications per cell");
    sim->add_option("--out", out, "output CSV path");
    sim->add_option("--policy", policies, "comma-separated policy list");
    sim->add_flag("--bound", bound, "compute the relaxed upper bound per cell and seed");
    sim->add_option("--threads", threads, "worker threads (0 = hardware)");

    auto* vi = app.add_subcommand("verify-index", "compare the closed-form index with the subsidy oracle");
    int tau_max = 10, b_max = 30;
    std::string grid_out = "grid.csv";
    std::vector<double> alphas{0.5, 5};
    vi->add_option("--tau-max", tau_max);
    vi->add_option("--b-max", b_max);
    vi->add_option("--out", grid_out);
    vi->add_option("--alpha", alphas, "penalty parameters (both families)");

    auto* ci = app.add_subcommand("check-indexability", "passive-set monotonicity on random arms");
    int configs = 50, points = 200;
    std::uint64_t seed = 2024;
    ci->add_option("--configs", configs);
    ci->add_option("--points", points);
    ci->add_option("--seed", seed);

    CLI11_PARSE(app, argc, argv);
    try {
        if (*sim) return run_simulate(config, preset_name, seeds, out, policies, bound, threads);
        if (*vi) return run_verify_index(tau_max, b_max, grid_out, alphas);
        if (*ci) return run_check_indexability(configs, points, seed);
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    }
    return 0;
}
