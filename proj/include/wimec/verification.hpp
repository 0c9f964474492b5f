#pragma once

#include <cmath>
#include <cstdint>
#include <random>
#include <string>
#include <vector>

#include "wimec/dynamics.hpp"
#include "wimec/index_policy.hpp"
#include "wimec/rng.hpp"

namespace wimec {

struct NamedPenalty {
    std::string family;  // "theory" or "experiment"
    double alpha = 0;
    PenaltyFn fn;
};

inline std::vector<NamedPenalty> penalty_family(const std::vector<double>& alphas) {
    std::vector<NamedPenalty> out;
    for (double a : alphas) out.push_back({"theory", a, PenaltyFn::theory(a)});
    for (double a : alphas) out.push_back({"experiment", a, PenaltyFn::experiment(a)});
    return out;
}

struct IndexGridSpec {
    int tau_max = 10;
    int b_max = 30;
    std::vector<int> capacities{1, 2, 4, 10};
    std::vector<double> discounts{0.9, 0.99};
    std::vector<double> savings{-1, 0, 1, 2.5};
    std::vector<NamedPenalty> penalties = penalty_family({0.5, 5});
};

struct IndexGridRow {
    std::string family;
    double alpha = 0;
    int capacity = 1;
    double discount = 0;
    double e_saving = 0;
    int tau = 0;
    int backlog = 0;
    double closed_form = 0;
    double oracle = 0;
    std::string error;  // nonempty when the oracle search failed

    double diff() const { return std::abs(closed_form - oracle); }
};

// Closed form against the bisection oracle on every valid state of the grid.
inline std::vector<IndexGridRow> verify_index_grid(const IndexGridSpec& spec) {
    std::vector<IndexGridRow> rows;
    for (const auto& pen : spec.penalties)
        for (int k : spec.capacities)
            for (double beta : spec.discounts)
                for (double e : spec.savings) {
                    SubsidizedArmMDP m;
                    m.tau_max = spec.tau_max;
                    m.b_max = spec.b_max;
                    m.capacity = k;
                    m.discount = beta;
                    m.penalty = pen.fn;
                    m.e_saving = e;
                    for (int tau = 0; tau <= spec.tau_max; ++tau)
                        for (int b = 0; b <= (tau == 0 ? 0 : spec.b_max); ++b) {
                            IndexGridRow r{pen.family, pen.alpha, k, beta, e, tau, b, 0, 0, {}};
                            r.closed_form = whittle_index({{tau, b}, e, k, beta, pen.fn});
                            try {
                                r.oracle = subsidy_threshold(m, {tau, b});
                            } catch (const std::exception& ex) {
                                r.oracle = std::nan("");
                                r.error = ex.what();
                            }
                            rows.push_back(r);
                        }
                }
    return rows;
}

// Random MEC arm for indexability sweeps: capacity from the CPU-frequency
// ladder, saving in [-1, 2.5], either penalty family with alpha in [0.001, 5].
inline SubsidizedArmMDP random_arm(Rng& rng) {
    const int ks[] = {2, 2, 3, 5, 10};
    SubsidizedArmMDP m;
    m.tau_max = 10;
    m.b_max = 30;
    m.capacity = ks[std::uniform_int_distribution<int>(0, 4)(rng)];
    m.discount = std::bernoulli_distribution(0.5)(rng) ? 0.9 : 0.99;
    m.e_saving = std::uniform_real_distribution<double>(-1.0, 2.5)(rng);
    const double alpha = std::exp(std::uniform_real_distribution<double>(std::log(0.001), std::log(5.0))(rng));
    m.penalty = std::bernoulli_distribution(0.5)(rng) ? PenaltyFn::theory(alpha) : PenaltyFn::experiment(alpha);
    return m;
}

inline std::vector<double> subsidy_grid(const SubsidizedArmMDP& m, int points) {
    const double h = subsidy_bracket(m);
    return linspace(-h, h, points);
}

}  // namespace wimec
