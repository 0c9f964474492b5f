#pragma once

#include <algorithm>
#include <cmath>
#include <compare>
#include <cstdint>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "wimec/error.hpp"
#include "wimec/rng.hpp"

namespace wimec {

// Arm state: slots left to the deadline and unfinished subtasks. (0,0) is idle.
struct TaskState {
    int tau = 0;
    int backlog = 0;

    bool idle() const { return tau == 0; }
    bool has_work() const { return tau >= 1 && backlog > 0; }
    friend bool operator==(const TaskState&, const TaskState&) = default;
};

struct TaskSpec {
    int total_subtasks = 1;
    int arrival_slot = 0;
    int deadline_slot = 0;
    int task_id = 0;

    int duration() const { return deadline_slot - arrival_slot + 1; }
};

// F(x) = (base + quad_coeff * x^2) for x > 0, and F(0) = 0.
struct PenaltyFn {
    double base = 0.0;
    double quad_coeff = 0.0;

    static PenaltyFn theory(double alpha) { return {0.0, alpha}; }
    static PenaltyFn experiment(double alpha) { return {alpha, 0.1}; }

    double operator()(double x) const { return x > 0 ? base + quad_coeff * x * x : 0.0; }

    // True when F is convex on the nonnegative integers.
    bool integer_convex() const { return base <= quad_coeff * 2.0 + 1e-15; }
};

enum class SizeLaw { uniform, capped };

// Draws new tasks: duration uniform on {1..max_duration}; size uniform on
// {1..max_size}, or on {1..min(max_size, ceil(cap_factor*k*duration))} when capped.
struct TaskGenerator {
    int max_duration = 10;
    int max_size = 30;
    double arrival_prob = 0.7;
    SizeLaw size_law = SizeLaw::uniform;
    double cap_factor = 1.0;
    int capacity = 1;
    int next_task_id = 0;

    int size_upper(int duration) const {
        if (size_law == SizeLaw::uniform) return max_size;
        const double cap = std::ceil(cap_factor * capacity * duration - 1e-9);
        return std::clamp(static_cast<int>(cap), 1, max_size);
    }
};

inline TaskSpec generate_task(TaskGenerator& gen, Rng& rng, int current_slot) {
    std::uniform_int_distribution<int> dur(1, gen.max_duration);
    const int d = dur(rng);
    std::uniform_int_distribution<int> size(1, gen.size_upper(d));
    TaskSpec spec;
    spec.total_subtasks = size(rng);
    spec.arrival_slot = current_slot;
    spec.deadline_slot = current_slot + d - 1;
    spec.task_id = gen.next_task_id++;
    return spec;
}

struct TransitionResult {
    TaskState next;
    bool new_task = false;
    TaskSpec task;
};

// One slot of the arm dynamics. `slot` is the index of the slot being left;
// a task arriving for slot+1 starts with tau equal to its drawn duration.
inline TransitionResult transition_ex(const TaskState& s, int action, int capacity, TaskGenerator& gen,
                                      Rng& rng, int slot = 0) {
    TransitionResult r;
    if (s.tau >= 2) {
        const int served = action ? capacity : 1;
        r.next = {s.tau - 1, std::max(s.backlog - served, 0)};
        return r;
    }
    std::bernoulli_distribution arrive(gen.arrival_prob);
    if (arrive(rng)) {
        r.task = generate_task(gen, rng, slot + 1);
        r.new_task = true;
        r.next = {r.task.duration(), r.task.total_subtasks};
    } else {
        r.next = {0, 0};
    }
    return r;
}

inline TaskState transition(const TaskState& s, int action, int capacity, TaskGenerator& gen, Rng& rng,
                            int slot = 0) {
    return transition_ex(s, action, capacity, gen, rng, slot).next;
}

inline double reward(const TaskState& s, int action, double e_saving, int capacity, const PenaltyFn& F) {
    if (s.backlog <= 0) return 0.0;
    if (s.tau > 1) return e_saving * action;
    if (s.tau == 1) {
        const int left = std::max(s.backlog - capacity * action - (1 - action), 0);
        return e_saving * action - F(left);
    }
    return 0.0;
}

// Exact rational p/q with q > 0.
struct Rational {
    std::int64_t num = 0;
    std::int64_t den = 1;

    friend std::strong_ordering operator<=>(const Rational& a, const Rational& b) {
        return a.num * b.den <=> b.num * a.den;
    }
    friend bool operator==(const Rational& a, const Rational& b) { return a.num * b.den == b.num * a.den; }
    double value() const { return static_cast<double>(num) / static_cast<double>(den); }
};

// tau - b/k as an exact fraction (tau*k - b)/k.
inline Rational slack_time(const TaskState& s, int capacity) {
    if (s.tau <= 0) throw ModelError("no task");
    if (capacity < 1) throw ModelError("capacity must be >= 1");
    return {static_cast<std::int64_t>(s.tau) * capacity - s.backlog, capacity};
}

struct SystemState {
    std::vector<TaskState> per_user;
    int slot = 0;
};

struct ActionVector {
    std::vector<int> selected;
};

// Per-user quantities step_system needs besides the state.
struct ArmContext {
    int capacity = 1;
    double e_saving = 0;
    PenaltyFn penalty;
};

struct StepResult {
    std::vector<double> rewards;
    std::vector<int> actions;
    int completions = 0;
    int violations = 0;
    std::vector<int> new_task_users;
};

inline StepResult step_system(SystemState& state, const ActionVector& action, int M,
                              std::span<const ArmContext> arms, std::span<TaskGenerator> gens,
                              std::span<Rng> rngs) {
    const std::size_t n = state.per_user.size();
    if (arms.size() != n || gens.size() != n || rngs.size() != n)
        throw ModelError("step_system: per-user inputs must have length N");
    if (static_cast<int>(action.selected.size()) != M)
        throw ModelError("malformed action vector: expected " + std::to_string(M) + " selected users, got " +
                         std::to_string(action.selected.size()));
    StepResult out;
    out.actions.assign(n, 0);
    for (int u : action.selected) {
        if (u < 0 || static_cast<std::size_t>(u) >= n) throw ModelError("malformed action vector: user out of range");
        if (out.actions[u]) throw ModelError("malformed action vector: duplicate user");
        out.actions[u] = 1;
    }
    out.rewards.assign(n, 0.0);
    for (std::size_t i = 0; i < n; ++i) {
        const TaskState s = state.per_user[i];
        const int a = out.actions[i];
        out.rewards[i] = reward(s, a, arms[i].e_saving, arms[i].capacity, arms[i].penalty);
        if (s.tau == 1) {
            const int left = std::max(s.backlog - (a ? arms[i].capacity : 1), 0);
            if (left == 0) ++out.completions;
            else ++out.violations;
        }
        const TransitionResult tr = transition_ex(s, a, arms[i].capacity, gens[i], rngs[i], state.slot);
        state.per_user[i] = tr.next;
        if (tr.new_task) out.new_task_users.push_back(static_cast<int>(i));
    }
    ++state.slot;
    return out;
}

}  // namespace wimec
