// Acceptance suite. Each criterion prints its evidence followed by a single
// "[PASS]" or "[FAIL]" line; the exit status is 0 only on PASS.
//
//   acceptance --criterion N     (N = 1..9)
//   acceptance --all

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <map>
#include <numbers>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "wimec/bayes.hpp"
#include "wimec/config.hpp"
#include "wimec/index_policy.hpp"
#include "wimec/sim.hpp"
#include "wimec/stats.hpp"
#include "wimec/verification.hpp"

namespace {

using namespace wimec;

bool report(int id, bool pass, const std::string& what) {
    std::printf("[%s] criterion %d: %s\n", pass ? "PASS" : "FAIL", id, what.c_str());
    std::fflush(stdout);
    return pass;
}

// Per-seed values of one metric for one policy label, ordered by seed.
std::vector<double> series(const std::vector<RunRecord>& recs, const std::string& label, int M,
                           double RunRecord::*field, double alpha = -1) {
    std::vector<std::pair<std::uint64_t, double>> v;
    for (const auto& r : recs)
        if (r.policy == label && r.M == M && (alpha < 0 || r.alpha == alpha)) v.push_back({r.seed, r.*field});
    std::sort(v.begin(), v.end());
    std::vector<double> out;
    for (const auto& p : v) out.push_back(p.second);
    return out;
}

// ---------------------------------------------------------------- 1
bool closed_form_vs_oracle() {
    const IndexGridSpec spec;  // tau 0..10, b 0..30, k {1,2,4,10}, beta {0.9,0.99}, E {-1,0,1,2.5}, alpha {0.5,5}
    const auto rows = verify_index_grid(spec);
    int bad = 0, errors = 0;
    std::map<std::string, int> by_region;
    double worst = 0;
    for (const auto& r : rows) {
        if (!r.error.empty()) {
            ++errors;
            continue;
        }
        if (r.diff() <= 1e-6) continue;
        ++bad;
        worst = std::max(worst, r.diff());
        const bool nonconvex = r.family == "experiment" && !PenaltyFn::experiment(r.alpha).integer_convex();
        std::string region = r.e_saving < 0 ? "negative saving" : nonconvex ? "non-convex penalty" : "other";
        ++by_region[r.family + " alpha=" + format_double(r.alpha) + ", " + region];
    }
    std::printf("  %zu states, %d above 1e-6 (max |diff| %.6g), %d oracle errors\n", rows.size(), bad, worst, errors);
    for (const auto& [k, n] : by_region) std::printf("    %-45s %d\n", k.c_str(), n);
    return report(1, bad == 0 && errors == 0, "closed-form index equals subsidy oracle to 1e-6 on the full grid");
}

// ---------------------------------------------------------------- 2
bool indexability() {
    Rng rng(2024);
    int ok = 0;
    for (int c = 0; c < 50; ++c) {
        const SubsidizedArmMDP m = random_arm(rng);
        const IndexabilityResult r = indexability_check(m, subsidy_grid(m, 200));
        if (r.indexable) ++ok;
        else std::printf("  arm %d: %s\n", c, r.violation.c_str());
    }
    const IndexabilityResult bad = indexability_check(non_indexable_example(), 0.9, linspace(-100, 1000, 200));
    std::printf("  %d/50 random arms indexable; counterexample %s%s\n", ok, bad.indexable ? "accepted" : "rejected: ",
                bad.violation.c_str());
    return report(2, ok == 50 && !bad.indexable,
                  "50 random arms indexable on 200-point grids and the counterexample is rejected");
}

// ---------------------------------------------------------------- 3
bool bound_and_ordering() {
    ExperimentGrid g = preset("fig3a");
    g.n_values = {60, 80, 100};
    g.base.compute_bound = true;
    g.policies = {parse_policy("wi"), parse_policy("edf"), parse_policy("lst"), parse_policy("greedy")};
    const ExperimentResult res = run_experiment(g, 20);
    bool pass = res.failures.empty();
    for (const auto& f : res.failures) std::printf("  failure %s: %s\n", f.cell.c_str(), f.message.c_str());
    for (int N : g.n_values) {
        const int M = static_cast<int>(std::llround(0.3 * N));
        std::vector<RunRecord> cell;
        for (const auto& r : res.records)
            if (r.N == N) cell.push_back(r);
        const auto wi = series(cell, "wi", M, &RunRecord::discounted_reward);
        const auto bound = series(cell, "wi", M, &RunRecord::relaxed_bound);
        int above = 0;
        for (std::size_t i = 0; i < wi.size(); ++i) above += wi[i] <= bound[i] ? 1 : 0;
        std::printf("  N=%d: WI %.2f, bound %.2f, bound holds on %d/%zu seeds\n", N, stats::mean(wi),
                    stats::mean(bound), above, wi.size());
        pass = pass && above == static_cast<int>(wi.size()) && wi.size() == 20;
        for (const char* other : {"edf", "lst", "greedy"}) {
            const auto iv = stats::t_interval(stats::differences(wi, series(cell, other, M, &RunRecord::discounted_reward)));
            std::printf("    WI - %-6s mean %10.3f  95%% CI [%.3f, %.3f]\n", other, iv.mean, iv.lo, iv.hi);
            pass = pass && iv.lo > 0;
        }
    }
    return report(3, pass, "WI reward below the relaxed bound on every seed and above EDF/LST/Greedy (paired 95% CI)");
}

// ---------------------------------------------------------------- 4
bool completion_ordering() {
    ExperimentGrid g = preset("fig6");
    g.m_ratios = {0.45};
    const ExperimentResult res = run_experiment(g, 20);
    const int M = 45;
    const std::vector<std::pair<std::string, double>> targets{
        {"stlw-wi", 0.82}, {"wi", 0.80}, {"lst", 0.72}, {"edf", 0.70}, {"greedy", 0.66}};
    bool pass = res.failures.empty();
    std::map<std::string, std::vector<double>> cr;
    for (const auto& [p, target] : targets) {
        cr[p] = series(res.records, p, M, &RunRecord::completion_ratio);
        const double m = stats::mean(cr[p]);
        const bool in_band = std::abs(m - target) <= 0.06;
        std::printf("  %-8s completion %.4f (target %.2f +- 0.06) %s\n", p.c_str(), m, target, in_band ? "ok" : "out");
        pass = pass && in_band;
    }
    // ">=" : mean paired difference >= 0; ">" : lower 95% t bound > 0.
    auto diff = [&](const char* a, const char* b) { return stats::t_interval(stats::differences(cr[a], cr[b])); };
    const auto d0 = diff("stlw-wi", "wi");
    const auto d1 = diff("wi", "lst");
    const auto d2 = diff("lst", "edf");
    const auto d3 = diff("edf", "greedy");
    std::printf("  STLW-WI - WI  %+.4f [%+.4f, %+.4f]  need mean >= 0\n", d0.mean, d0.lo, d0.hi);
    std::printf("  WI - LST      %+.4f [%+.4f, %+.4f]  need lower > 0\n", d1.mean, d1.lo, d1.hi);
    std::printf("  LST - EDF     %+.4f [%+.4f, %+.4f]  need lower > 0\n", d2.mean, d2.lo, d2.hi);
    std::printf("  EDF - Greedy  %+.4f [%+.4f, %+.4f]  need lower > 0\n", d3.mean, d3.lo, d3.hi);
    pass = pass && d0.mean >= 0 && d1.lo > 0 && d2.lo > 0 && d3.lo > 0;
    return report(4, pass, "completion ratios STLW-WI >= WI > LST > EDF > Greedy within +-6 points of the targets");
}

// ---------------------------------------------------------------- 5
bool alpha_tradeoff() {
    ExperimentGrid g = preset("fig4");
    const ExperimentResult res = run_experiment(g, 20);
    const std::vector<double>& alphas = g.alphas;
    const int M = 30;
    std::vector<std::vector<double>> cr, en;
    for (double a : alphas) {
        cr.push_back(series(res.records, "wi", M, &RunRecord::completion_ratio, a));
        en.push_back(series(res.records, "wi", M, &RunRecord::energy_saving, a));
        std::printf("  alpha=%-7g completion %.4f  energy %.6g\n", a, stats::mean(cr.back()), stats::mean(en.back()));
    }
    int cpos = 0, cneg = 0, epos = 0, eneg = 0;
    const std::size_t seeds = cr.front().size();
    for (std::size_t s = 0; s < seeds; ++s) {
        std::vector<double> c, e;
        for (std::size_t i = 0; i < alphas.size(); ++i) {
            c.push_back(cr[i][s]);
            e.push_back(en[i][s]);
        }
        const double rc = stats::spearman(alphas, c), re = stats::spearman(alphas, e);
        cpos += rc > 0;
        cneg += rc < 0;
        epos += re > 0;
        eneg += re < 0;
    }
    const double pc = stats::sign_test_greater(cpos, cneg);
    const double pe = stats::sign_test_greater(eneg, epos);
    std::printf("  completion rho > 0 on %d seeds, < 0 on %d (sign test p=%.3g)\n", cpos, cneg, pc);
    std::printf("  energy     rho < 0 on %d seeds, > 0 on %d (sign test p=%.3g)\n", eneg, epos, pe);
    return report(5, res.failures.empty() && pc < 0.05 && pe < 0.05,
                  "completion rises and energy saving falls with alpha (per-seed Spearman sign tests, p < 0.05)");
}

// ---------------------------------------------------------------- 6
// Brute-force posterior on a (mean, variance) grid: prior density times the
// Gaussian likelihood, both normalized by the same grid quadrature.
double posterior_grid_error(const NIGParams& prior, const std::vector<double>& xs, NigVariant variant) {
    ObservationLog log;
    for (double x : xs) log.append(x);
    const NIGParams post = nig_update(prior, log, variant);
    const double s_scale = std::sqrt(post.phi / (post.lam * post.nu));
    const double v_mode = post.phi / (post.nu + 1);
    const int n = 100;
    std::vector<double> ms(n), vs(n);
    for (int i = 0; i < n; ++i) {
        ms[i] = post.mu - 6 * s_scale + 12 * s_scale * i / (n - 1);
        vs[i] = v_mode * (0.05 + 20.0 * i / (n - 1));
    }
    std::vector<double> brute, closed;
    for (double m : ms)
        for (double v : vs) {
            // Prior: v ~ IG(nu, phi), m | v ~ N(mu, v/lam).
            double lb = prior.nu * std::log(prior.phi) - std::lgamma(prior.nu) - (prior.nu + 1) * std::log(v) -
                        prior.phi / v - 0.5 * std::log(2 * std::numbers::pi * v / prior.lam) -
                        prior.lam * (m - prior.mu) * (m - prior.mu) / (2 * v);
            for (double x : xs) lb += -0.5 * std::log(2 * std::numbers::pi * v) - (x - m) * (x - m) / (2 * v);
            brute.push_back(lb);
            closed.push_back(nig_logpdf(m, v, post));
        }
    auto normalize = [](std::vector<double>& l) {
        const double top = *std::max_element(l.begin(), l.end());
        double z = 0;
        for (double x : l) z += std::exp(x - top);
        for (double& x : l) x = x - top - std::log(z);
    };
    normalize(brute);
    normalize(closed);
    double worst = 0;
    for (std::size_t i = 0; i < brute.size(); ++i) worst = std::max(worst, std::abs(std::expm1(closed[i] - brute[i])));
    return worst;
}

bool nig_oracle() {
    Rng rng(606);
    std::uniform_real_distribution<double> pos(0.2, 3.0), loc(-2.0, 2.0);
    double worst_text = 0, worst_full = 0;
    for (int c = 0; c < 50; ++c) {
        const NIGParams prior{pos(rng), loc(rng), pos(rng), pos(rng)};
        const int g = 1 + c % 5;
        std::vector<double> xs;
        std::normal_distribution<double> obs(loc(rng), pos(rng));
        for (int i = 0; i < g; ++i) xs.push_back(obs(rng));
        worst_text = std::max(worst_text, posterior_grid_error(prior, xs, NigVariant::textbook));
        worst_full = std::max(worst_full, posterior_grid_error(prior, xs, NigVariant::full));
    }
    std::printf("  max relative density error: textbook %.3g, full %.3g\n", worst_text, worst_full);
    return report(6, worst_text <= 1e-6, "NIG update (textbook variant) matches the grid posterior to 1e-6 on 50 logs");
}

// ---------------------------------------------------------------- 7
bool learning_orderings() {
    bool pass = true;
    std::map<std::string, std::map<int, std::vector<double>>> gaps;  // name -> M -> per-seed gap
    for (const char* name : {"fig7", "fig8"}) {
        ExperimentGrid g = preset(name);
        const ExperimentResult res = run_experiment(g, 20);
        pass = pass && res.failures.empty();
        for (int M : {30, 50}) {
            auto rw = [&](const char* p) { return series(res.records, p, M, &RunRecord::discounted_reward); };
            const auto wi = rw("wi"), bl = rw("bl-wi"), mle = rw("mle-wi");
            const double wb = stats::mean(stats::differences(wi, bl));
            const double bm = stats::mean(stats::differences(bl, mle));
            std::printf("  %s M/N=%.1f: WI %.2f  BL-WI %.2f  MLE-WI %.2f", name, M / 100.0, stats::mean(wi),
                        stats::mean(bl), stats::mean(mle));
            if (std::string(name) == "fig7") {
                std::printf("  (WI-BL %+.2f, BL-MLE %+.2f)\n", wb, bm);
                pass = pass && wb >= 0 && bm >= 0;
                gaps["WI-BL"][M] = stats::differences(wi, bl);
                gaps["WI-MLE"][M] = stats::differences(wi, mle);
            } else {
                const auto ps = rw("psbl-wi");
                const double pb = stats::mean(stats::differences(ps, bl));
                std::printf("  PSBL-WI %.2f  (PSBL-BL %+.2f)\n", stats::mean(ps), pb);
                pass = pass && pb >= 0;
            }
        }
    }
    for (auto& [gname, byM] : gaps) {
        const auto shrink = stats::differences(byM[30], byM[50]);
        const double p = stats::t_test_greater(shrink);
        std::printf("  gap %-6s at 0.3 minus at 0.5: mean %+.2f, one-sided p=%.3g\n", gname.c_str(),
                    stats::mean(shrink), p);
        pass = pass && p < 0.05;
    }
    return report(7, pass,
                  "WI >= BL-WI >= MLE-WI (Gaussian), PSBL-WI >= BL-WI (Laplace), gaps shrink from M/N 0.3 to 0.5");
}

// ---------------------------------------------------------------- 8
bool mh_correctness() {
    // Toy target: prior-swapped posterior with a Laplace true prior.
    const NIGParams prior{1, 1, 1, 1};
    ObservationLog log;
    for (double x : {0.4, 1.9, 0.8, 1.2}) log.append(x);
    const NIGParams post = nig_update(prior, log);
    PriorSpec truth;
    truth.kind = PriorSpec::Kind::laplace;
    truth.location = 1;
    truth.spread = 0.2;
    auto target = [&](const Theta& th) { return prior_swap_logdensity(th, post, prior, truth); };

    // Quadrature in (saving, log variance) with the Jacobian v.
    const int n = 1500;
    double z = 0, zs = 0;
    for (int i = 0; i < n; ++i) {
        const double s = -4 + 10.0 * (i + 0.5) / n;
        for (int j = 0; j < n; ++j) {
            const double lv = -9 + 13.0 * (j + 0.5) / n;
            const double w = std::exp(target({s, std::exp(lv)}) + lv);
            z += w;
            zs += w * s;
        }
    }
    const double exact = zs / z;

    Rng rng(808);
    const int batches = 100, per_batch = 4000;
    const ProposalScale scale = proposal_from_posterior(post, 1.0);
    Theta th{1.0, post.phi / (post.nu + 1)};
    mh_estimate(th, 1, scale, target, rng, 2000);
    std::vector<double> means;
    for (int b = 0; b < batches; ++b) {
        const MhResult r = mh_estimate(th, per_batch, scale, target, rng);
        th = r.last;
        means.push_back(r.mean_saving);
    }
    const double est = stats::mean(means);
    const double se = stats::stddev(means) / std::sqrt(double(batches));
    const bool accurate = std::abs(est - exact) <= 3 * se;
    std::printf("  chain mean %.5f, quadrature mean %.5f, batch-means SE %.5f (|diff| = %.2f SE)\n", est, exact, se,
                std::abs(est - exact) / se);

    // Per-decision cost with 10 versus 10^4 observations in the log.
    auto time_decisions = [](int gamma) {
        EstimatorConfig cfg;
        cfg.true_prior.kind = PriorSpec::Kind::laplace;
        cfg.true_prior.location = 1;
        cfg.true_prior.spread = 0.2;
        Estimator est(EstimatorKind::psbl, cfg);
        Rng r(9);
        for (int i = 0; i < gamma; ++i) est.observe(draw_observation({1.0, 0.5}, r), r);
        double best = INFINITY;
        volatile double sink = 0;
        for (int rep = 0; rep < 7; ++rep) {
            const auto t0 = std::chrono::steady_clock::now();
            for (int i = 0; i < 20000; ++i) sink = sink + est.decide(r);
            const std::chrono::duration<double> dt = std::chrono::steady_clock::now() - t0;
            best = std::min(best, dt.count());
        }
        return best / 20000;
    };
    const double t_small = time_decisions(10), t_large = time_decisions(10000);
    const double ratio = std::max(t_small, t_large) / std::min(t_small, t_large);
    std::printf("  per-decision time: gamma=10 %.3g s, gamma=1e4 %.3g s, ratio %.3f\n", t_small, t_large, ratio);
    return report(8, accurate && ratio < 2.0,
                  "MH mean within 3 standard errors of quadrature and decision cost independent of log size (< 2x)");
}

// ---------------------------------------------------------------- 9
bool determinism() {
    bool pass = true;
    for (const char* name : {"fig6", "fig8"}) {
        const ExperimentGrid g = preset(name);
        const std::string a = csv_text(run_experiment(g, 2, 1).records);
        const std::string b = csv_text(run_experiment(g, 2, 0).records);
        const bool same = a == b;
        std::printf("  %s: %zu bytes, rerun %s\n", name, a.size(), same ? "identical" : "DIFFERS");
        pass = pass && same && !a.empty();
    }
    return report(9, pass, "preset reruns with the same master seed give byte-identical CSV");
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"acceptance criteria"};
    int criterion = 0;
    bool all = false;
    app.add_option("--criterion", criterion, "criterion number 1..9")->check(CLI::Range(1, 9));
    app.add_flag("--all", all, "run every criterion");
    CLI11_PARSE(app, argc, argv);

    const std::vector<std::function<bool()>> checks{closed_form_vs_oracle, indexability, bound_and_ordering,
                                                    completion_ordering,   alpha_tradeoff, nig_oracle,
                                                    learning_orderings,    mh_correctness, determinism};
    if (!all && criterion == 0) {
        std::fprintf(stderr, "specify --criterion N or --all\n");
        return 2;
    }
    bool ok = true;
    try {
        for (int c = 1; c <= 9; ++c)
            if (all || c == criterion) ok = checks[c - 1]() && ok;
    } catch (const std::exception& e) {
        std::printf("[FAIL] criterion %d: error: %s\n", criterion, e.what());
        return 1;
    }
    return ok ? 0 : 1;
}
