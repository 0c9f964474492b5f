#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "wimec/dynamics.hpp"
#include "wimec/error.hpp"

namespace wimec {

struct IndexInput {
    TaskState state;
    double e_saving = 0;
    int capacity = 1;
    double discount = 0.99;
    PenaltyFn penalty;
};

// Closed-form index of an arm in state (tau, b).
inline double whittle_index(const IndexInput& in) {
    const int tau = in.state.tau;
    const int b = in.state.backlog;
    const int k = in.capacity;
    if (b == 0) return 0.0;
    if (tau <= 0) throw ModelError("whittle_index: backlog without a deadline");
    const double E = in.e_saving;
    const auto& F = in.penalty;
    if (b <= (tau - 1) * k + 1) return E;
    const double w = std::pow(in.discount, tau - 1);
    if (b <= k * tau) return E + w * F(b - k * tau + k - 1);
    return E + w * (F(b - k * tau + k - 1) - F(b - k * tau));
}

// Single arm within one task, paying `subsidy` on every passive slot.
struct SubsidizedArmMDP {
    int tau_max = 10;
    int b_max = 30;
    int capacity = 1;
    double discount = 0.99;
    PenaltyFn penalty;
    double e_saving = 0;
    double subsidy = 0;
};

struct ArmSolution {
    int tau_max = 0;
    int b_max = 0;
    std::vector<double> value;
    std::vector<double> q_active;
    std::vector<double> q_passive;
    std::vector<char> action;  // 1 = active

    std::size_t at(int tau, int b) const { return static_cast<std::size_t>(tau) * (b_max + 1) + b; }
    double v(int tau, int b) const { return value[at(tau, b)]; }
    int act(int tau, int b) const { return action[at(tau, b)]; }
};

namespace detail {

// Action values at one state given continuation values of the next level.
inline std::pair<double, double> arm_q(const SubsidizedArmMDP& m, int tau, int b, const double* next_level) {
    const double ra = reward({tau, b}, 1, m.e_saving, m.capacity, m.penalty);
    const double rp = reward({tau, b}, 0, m.e_saving, m.capacity, m.penalty) + m.subsidy;
    if (tau <= 1) return {ra, rp};
    return {ra + m.discount * next_level[std::max(b - m.capacity, 0)],
            rp + m.discount * next_level[std::max(b - 1, 0)]};
}

}  // namespace detail

// Backward induction over one task. Levels tau <= 1 end the episode; ties go passive.
inline ArmSolution single_arm_value_iteration(const SubsidizedArmMDP& m) {
    ArmSolution s;
    s.tau_max = m.tau_max;
    s.b_max = m.b_max;
    const std::size_t n = static_cast<std::size_t>(m.tau_max + 1) * (m.b_max + 1);
    s.value.assign(n, 0.0);
    s.q_active.assign(n, 0.0);
    s.q_passive.assign(n, 0.0);
    s.action.assign(n, 0);
    for (int tau = 0; tau <= m.tau_max; ++tau) {
        const double* next = tau >= 2 ? &s.value[s.at(tau - 1, 0)] : nullptr;
        for (int b = 0; b <= m.b_max; ++b) {
            const auto [qa, qp] = detail::arm_q(m, tau, b, next);
            const std::size_t i = s.at(tau, b);
            s.q_active[i] = qa;
            s.q_passive[i] = qp;
            s.action[i] = qa > qp ? 1 : 0;
            s.value[i] = std::max(qa, qp);
        }
    }
    return s;
}

// Q_passive - Q_active at `state`, solving only the levels and backlogs it can reach.
inline double passive_advantage(const SubsidizedArmMDP& m, const TaskState& state, std::vector<double>& scratch) {
    const int width = state.backlog + 1;
    scratch.assign(static_cast<std::size_t>(2 * width), 0.0);
    double* prev = scratch.data();
    double* cur = scratch.data() + width;
    for (int tau = 1; tau < state.tau; ++tau) {
        for (int b = 0; b < width; ++b) {
            const auto [qa, qp] = detail::arm_q(m, tau, b, prev);
            cur[b] = std::max(qa, qp);
        }
        std::swap(prev, cur);
    }
    const auto [qa, qp] = detail::arm_q(m, state.tau, state.backlog, prev);
    return qp - qa;
}

inline constexpr double kSubsidyTolerance = 1e-9;

inline double subsidy_bracket(const SubsidizedArmMDP& m) {
    const double half = 2.0 * (m.penalty(m.b_max) + std::abs(m.e_saving));
    return half > 0 ? half : 1.0;
}

// Least subsidy making the passive action optimal at `state`, by bisection.
inline double subsidy_threshold(SubsidizedArmMDP m, const TaskState& state, double tol = kSubsidyTolerance) {
    if (state.tau < 0 || state.tau > m.tau_max || state.backlog < 0 || state.backlog > m.b_max)
        throw ModelError("subsidy_threshold: state outside the MDP bounds");
    std::vector<double> scratch;
    const double half = subsidy_bracket(m);
    double lo = -half;
    double hi = half;
    m.subsidy = lo;
    const double g_lo = passive_advantage(m, state, scratch);
    m.subsidy = hi;
    const double g_hi = passive_advantage(m, state, scratch);
    if (!(g_lo < 0) || !(g_hi >= 0)) {
        std::ostringstream os;
        os << "subsidy_threshold bracket failure at (tau=" << state.tau << ", b=" << state.backlog
           << "): gap(" << lo << ")=" << g_lo << ", gap(" << hi << ")=" << g_hi;
        throw ModelError(os.str());
    }
    while (hi - lo > tol) {
        const double mid = 0.5 * (lo + hi);
        m.subsidy = mid;
        if (passive_advantage(m, state, scratch) >= 0) hi = mid;
        else lo = mid;
    }
    return hi;
}

struct IndexabilityResult {
    bool indexable = true;
    std::string violation;
    int grid_index = -1;  // index j of the failing grid point (pair j, j+1 for monotonicity)
    int state = -1;       // flattened state id of the witness
};

// Checks monotone growth of passive sets from empty to full along `grid`.
inline IndexabilityResult check_passive_sets(const std::vector<double>& grid,
                                             const std::function<std::vector<char>(double)>& passive_set,
                                             const std::function<std::string(int)>& describe) {
    IndexabilityResult r;
    for (std::size_t j = 1; j < grid.size(); ++j)
        if (!(grid[j] > grid[j - 1])) throw ModelError("indexability_check: grid must be strictly increasing");
    if (grid.size() < 2) return r;
    std::vector<char> prev = passive_set(grid.front());
    for (std::size_t s = 0; s < prev.size(); ++s) {
        if (prev[s]) {
            r = {false, "passive set not empty at delta=" + std::to_string(grid.front()) + ": " + describe(int(s)), 0,
                 int(s)};
            return r;
        }
    }
    for (std::size_t j = 1; j < grid.size(); ++j) {
        std::vector<char> cur = passive_set(grid[j]);
        for (std::size_t s = 0; s < cur.size(); ++s) {
            if (prev[s] && !cur[s]) {
                std::ostringstream os;
                os << describe(int(s)) << " passive at delta=" << grid[j - 1] << " but active at delta=" << grid[j];
                r = {false, os.str(), int(j - 1), int(s)};
                return r;
            }
        }
        prev = std::move(cur);
    }
    for (std::size_t s = 0; s < prev.size(); ++s) {
        if (!prev[s]) {
            r = {false, "passive set not full at delta=" + std::to_string(grid.back()) + ": " + describe(int(s)),
                 int(grid.size() - 1), int(s)};
            return r;
        }
    }
    return r;
}

inline IndexabilityResult indexability_check(SubsidizedArmMDP m, const std::vector<double>& grid) {
    // Valid states only: the idle state is (0,0), so tau = 0 carries no backlog.
    std::vector<TaskState> states{{0, 0}};
    for (int tau = 1; tau <= m.tau_max; ++tau)
        for (int b = 0; b <= m.b_max; ++b) states.push_back({tau, b});
    auto passive = [&](double delta) {
        m.subsidy = delta;
        const ArmSolution s = single_arm_value_iteration(m);
        std::vector<char> out;
        out.reserve(states.size());
        for (const auto& st : states) out.push_back(!s.act(st.tau, st.backlog));
        return out;
    };
    auto describe = [&states](int id) {
        return "state (tau=" + std::to_string(states[id].tau) + ", b=" + std::to_string(states[id].backlog) + ")";
    };
    return check_passive_sets(grid, passive, describe);
}

inline std::vector<double> linspace(double lo, double hi, int n) {
    std::vector<double> g(static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i) g[i] = n == 1 ? lo : lo + (hi - lo) * i / (n - 1);
    return g;
}

// Generic finite two-action MDP: rewards[a][s], transitions[a][s] = {(next, prob)}.
struct FiniteMdp {
    int num_states = 0;
    std::vector<double> rewards[2];
    std::vector<std::vector<std::pair<int, double>>> transitions[2];
};

struct MdpSolution {
    std::vector<double> value;
    std::vector<char> passive;
    int iterations = 0;
};

inline MdpSolution subsidized_value_iteration(const FiniteMdp& mdp, double subsidy, double discount,
                                              double tol = 1e-10, int max_iter = 1000000) {
    if (!(discount > 0 && discount < 1)) throw ModelError("value iteration needs discount in (0,1)");
    const int n = mdp.num_states;
    MdpSolution sol;
    sol.value.assign(n, 0.0);
    sol.passive.assign(n, 0);
    std::vector<double> next(n);
    auto q = [&](int a, int s, const std::vector<double>& v) {
        double acc = mdp.rewards[a][s] + (a == 0 ? subsidy : 0.0);
        for (const auto& [t, p] : mdp.transitions[a][s]) acc += discount * p * v[t];
        return acc;
    };
    for (sol.iterations = 1; sol.iterations <= max_iter; ++sol.iterations) {
        double diff = 0;
        for (int s = 0; s < n; ++s) {
            next[s] = std::max(q(1, s, sol.value), q(0, s, sol.value));
            diff = std::max(diff, std::abs(next[s] - sol.value[s]));
        }
        sol.value.swap(next);
        if (diff <= tol) break;
    }
    if (sol.iterations > max_iter) throw ModelError("value iteration did not converge");
    for (int s = 0; s < n; ++s) sol.passive[s] = q(0, s, sol.value) >= q(1, s, sol.value) ? 1 : 0;
    return sol;
}

inline IndexabilityResult indexability_check(const FiniteMdp& mdp, double discount, const std::vector<double>& grid) {
    auto passive = [&](double delta) { return subsidized_value_iteration(mdp, delta, discount).passive; };
    auto describe = [](int s) { return "state " + std::to_string(s); };
    return check_passive_sets(grid, passive, describe);
}

// Three-state arm whose middle state is passive for low and high subsidies
// but active in between (discount 0.9):
//   state 0 (X): active earns 850 and moves to 1; passive moves to 2.
//   state 1 (A): absorbing, active earns 0.
//   state 2 (B): absorbing, active earns 100.
// X is passive on [-50, 6.25], active on (6.25, 850), passive again from 850.
inline FiniteMdp non_indexable_example() {
    FiniteMdp m;
    m.num_states = 3;
    m.rewards[0] = {0, 0, 0};
    m.rewards[1] = {850, 0, 100};
    m.transitions[0] = {{{2, 1.0}}, {{1, 1.0}}, {{2, 1.0}}};
    m.transitions[1] = {{{1, 1.0}}, {{1, 1.0}}, {{2, 1.0}}};
    return m;
}

struct ConvexMin {
    double argmin = 0;
    double value = 0;
};

// Minimizes a convex function on [lo, hi]: grid scan then golden-section on
// the bracketing cell. The returned value is an actual evaluation of g.
inline ConvexMin minimize_convex(const std::function<double(double)>& g, double lo, double hi, int grid_points,
                                 double xtol = 1e-10) {
    grid_points = std::max(grid_points, 3);
    const std::vector<double> xs = linspace(lo, hi, grid_points);
    std::vector<double> ys(xs.size());
    std::size_t best = 0;
    for (std::size_t i = 0; i < xs.size(); ++i) {
        ys[i] = g(xs[i]);
        if (ys[i] < ys[best]) best = i;
    }
    ConvexMin out{xs[best], ys[best]};
    double a = xs[best == 0 ? 0 : best - 1];
    double b = xs[std::min(best + 1, xs.size() - 1)];
    const double r = (std::sqrt(5.0) - 1.0) / 2.0;
    double c = b - r * (b - a);
    double d = a + r * (b - a);
    double gc = g(c);
    double gd = g(d);
    for (int it = 0; it < 200 && b - a > xtol * (1.0 + std::abs(a) + std::abs(b)); ++it) {
        if (gc <= gd) {
            b = d;
            d = c;
            gd = gc;
            c = b - r * (b - a);
            gc = g(c);
        } else {
            a = c;
            c = d;
            gc = gd;
            d = a + r * (b - a);
            gd = g(d);
        }
    }
    if (gc < out.value) out = {c, gc};
    if (gd < out.value) out = {d, gd};
    return out;
}

// An arm running an endless stream of tasks, for the expected-value bound.
struct RecurrentArm {
    int capacity = 1;
    double e_saving = 0;
    PenaltyFn penalty;
    TaskGenerator generator;
    TaskState initial;
};

// Value of a recurrent arm under subsidy `delta`, over states (tau, b).
inline std::vector<double> recurrent_arm_values(const RecurrentArm& arm, double discount, double delta,
                                                double tol = 1e-10, int max_iter = 1000000) {
    if (!(discount > 0 && discount < 1)) throw ModelError("recurrent arm values need discount in (0,1)");
    const TaskGenerator& g = arm.generator;
    const int tmax = g.max_duration;
    const int bmax = g.max_size;
    const int w = bmax + 1;
    const auto at = [w](int tau, int b) { return static_cast<std::size_t>(tau) * w + b; };
    std::vector<double> v(static_cast<std::size_t>(tmax + 1) * w, 0.0);
    std::vector<double> nv(v.size());
    for (int it = 0; it < max_iter; ++it) {
        double arrival = 0;
        for (int d = 1; d <= tmax; ++d) {
            const int ub = g.size_upper(d);
            double acc = 0;
            for (int b = 1; b <= ub; ++b) acc += v[at(d, b)];
            arrival += acc / ub;
        }
        const double fresh = g.arrival_prob * arrival / tmax + (1.0 - g.arrival_prob) * v[at(0, 0)];
        double diff = 0;
        for (int tau = 0; tau <= tmax; ++tau) {
            for (int b = 0; b <= bmax; ++b) {
                const TaskState s{tau, b};
                double qa = reward(s, 1, arm.e_saving, arm.capacity, arm.penalty);
                double qp = reward(s, 0, arm.e_saving, arm.capacity, arm.penalty) + delta;
                if (tau >= 2) {
                    qa += discount * v[at(tau - 1, std::max(b - arm.capacity, 0))];
                    qp += discount * v[at(tau - 1, std::max(b - 1, 0))];
                } else {
                    qa += discount * fresh;
                    qp += discount * fresh;
                }
                nv[at(tau, b)] = std::max(qa, qp);
                diff = std::max(diff, std::abs(nv[at(tau, b)] - v[at(tau, b)]));
            }
        }
        v.swap(nv);
        if (diff <= tol) return v;
    }
    throw ModelError("recurrent arm value iteration did not converge");
}

struct BoundOptions {
    int grid_points = 201;
    bool literal_factor = false;  // use delta*(N-M) without the 1/(1-beta) horizon mass
    double tol = 1e-10;
};

// inf over delta of sum_i V_i^delta(s_i0) - delta*(N-M)/(1-beta).
inline double relaxed_upper_bound(const std::vector<RecurrentArm>& arms, int N, int M, double discount,
                                  const BoundOptions& opt = {}) {
    if (static_cast<int>(arms.size()) != N) throw ModelError("relaxed_upper_bound: arms.size() != N");
    if (M < 0 || M > N) throw ModelError("relaxed_upper_bound: need 0 <= M <= N");
    double half = 1.0;
    for (const auto& a : arms) half = std::max(half, 2.0 * (a.penalty(a.generator.max_size) + std::abs(a.e_saving)));
    const double mass = opt.literal_factor ? 1.0 : 1.0 / (1.0 - discount);
    auto g = [&](double delta) {
        double total = 0;
        for (const auto& a : arms) {
            const auto v = recurrent_arm_values(a, discount, delta, opt.tol);
            total += v[static_cast<std::size_t>(a.initial.tau) * (a.generator.max_size + 1) + a.initial.backlog];
        }
        return total - delta * (N - M) * mass;
    };
    return minimize_convex(g, -half, half, opt.grid_points).value;
}

// One user's realized exogenous trajectory over a finite horizon. The
// deadline clock and task arrivals do not depend on actions, so only the
// backlog is controlled. start_backlog[t] >= 0 marks slots whose backlog is
// set by the environment (t = 0 or the previous slot had tau <= 1).
struct ExogenousPath {
    int capacity = 1;
    int max_backlog = 30;
    PenaltyFn penalty;
    std::vector<int> tau;
    std::vector<double> e_saving;
    std::vector<int> start_backlog;
};

// Best subsidized discounted value of one realized path.
inline double path_value(const ExogenousPath& p, double delta, double discount) {
    const int T = static_cast<int>(p.tau.size());
    const int w = p.max_backlog + 1;
    std::vector<double> next(w, 0.0), cur(w, 0.0);
    for (int t = T - 1; t >= 0; --t) {
        const int tau = p.tau[t];
        const double fresh = (t + 1 < T && tau <= 1) ? next[p.start_backlog[t + 1]] : 0.0;
        for (int b = 0; b < w; ++b) {
            const TaskState s{tau, b};
            double qa = reward(s, 1, p.e_saving[t], p.capacity, p.penalty);
            double qp = reward(s, 0, p.e_saving[t], p.capacity, p.penalty) + delta;
            if (tau >= 2 && t + 1 < T) {
                qa += discount * next[std::max(b - p.capacity, 0)];
                qp += discount * next[std::max(b - 1, 0)];
            } else {
                qa += discount * fresh;
                qp += discount * fresh;
            }
            cur[b] = std::max(qa, qp);
        }
        next.swap(cur);
    }
    return T > 0 ? next[p.start_backlog[0]] : 0.0;
}

// Lagrangian bound on the realized discounted reward of any policy that
// activates exactly M arms per slot on these paths.
inline double pathwise_relaxed_bound(const std::vector<ExogenousPath>& paths, int M, double discount,
                                     int grid_points = 101) {
    const int N = static_cast<int>(paths.size());
    if (M < 0 || M > N) throw ModelError("pathwise_relaxed_bound: need 0 <= M <= N");
    if (N == 0) return 0.0;
    const int T = static_cast<int>(paths.front().tau.size());
    double mass = 0, w = 1;
    for (int t = 0; t < T; ++t, w *= discount) mass += w;
    double half = 1.0;
    for (const auto& p : paths) {
        double emax = 0;
        for (double e : p.e_saving) emax = std::max(emax, std::abs(e));
        half = std::max(half, 2.0 * (p.penalty(p.max_backlog) + emax));
    }
    auto g = [&](double delta) {
        double total = 0;
        for (const auto& p : paths) total += path_value(p, delta, discount);
        return total - delta * (N - M) * mass;
    };
    return minimize_convex(g, -half, half, grid_points).value;
}

}  // namespace wimec
