#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <vector>

#include "wimec/dynamics.hpp"

namespace {

using namespace wimec;

TaskGenerator gen_with(double q, int dmax = 10, int bmax = 30) {
    TaskGenerator g;
    g.arrival_prob = q;
    g.max_duration = dmax;
    g.max_size = bmax;
    return g;
}

TEST(Transition, Examples) {
    Rng rng(1);
    TaskGenerator g = gen_with(0.7);
    EXPECT_EQ(transition({3, 10}, 1, 4, g, rng), (TaskState{2, 6}));
    EXPECT_EQ(transition({2, 1}, 0, 4, g, rng), (TaskState{1, 0}));
    TaskGenerator none = gen_with(0.0);
    EXPECT_EQ(transition({1, 3}, 1, 4, none, rng), (TaskState{0, 0}));
    EXPECT_EQ(transition({0, 0}, 0, 4, none, rng), (TaskState{0, 0}));
}

TEST(Transition, ArrivalStartsAtDrawnDuration) {
    Rng rng(2);
    TaskGenerator g = gen_with(1.0);
    for (int i = 0; i < 1000; ++i) {
        const TransitionResult r = transition_ex({1, 2}, 0, 2, g, rng, 40);
        ASSERT_TRUE(r.new_task);
        EXPECT_EQ(r.task.arrival_slot, 41);
        EXPECT_EQ(r.next.tau, r.task.duration());
        EXPECT_EQ(r.next.backlog, r.task.total_subtasks);
    }
}

TEST(GenerateTask, WithinBounds) {
    Rng rng(3);
    TaskGenerator g = gen_with(0.7);
    for (int i = 0; i < 10000; ++i) {
        const TaskSpec t = generate_task(g, rng, i);
        ASSERT_GE(t.duration(), 1);
        ASSERT_LE(t.duration(), 10);
        ASSERT_GE(t.total_subtasks, 1);
        ASSERT_LE(t.total_subtasks, 30);
        ASSERT_EQ(t.task_id, i);
    }
}

TEST(GenerateTask, DegenerateSupport) {
    Rng rng(4);
    TaskGenerator g = gen_with(1.0, 1, 1);
    for (int i = 0; i < 100; ++i) {
        const TaskSpec t = generate_task(g, rng, 5);
        EXPECT_EQ(t.duration(), 1);
        EXPECT_EQ(t.total_subtasks, 1);
    }
}

TEST(GenerateTask, EmpiricalMeansNearMidpoint) {
    Rng rng(5);
    TaskGenerator g = gen_with(0.7);
    const int n = 100000;
    double sd = 0, sb = 0;
    for (int i = 0; i < n; ++i) {
        const TaskSpec t = generate_task(g, rng, 0);
        sd += t.duration();
        sb += t.total_subtasks;
    }
    // Discrete uniform on {1..m}: mean (m+1)/2, variance (m^2-1)/12.
    const double sigma_d = std::sqrt((100.0 - 1) / 12 / n);
    const double sigma_b = std::sqrt((900.0 - 1) / 12 / n);
    EXPECT_NEAR(sd / n, 5.5, 3 * sigma_d);
    EXPECT_NEAR(sb / n, 15.5, 3 * sigma_b);
}

TEST(GenerateTask, CappedSizeLaw) {
    Rng rng(6);
    TaskGenerator g = gen_with(1.0);
    g.size_law = SizeLaw::capped;
    g.capacity = 2;
    for (int i = 0; i < 5000; ++i) {
        const TaskSpec t = generate_task(g, rng, 0);
        ASSERT_LE(t.total_subtasks, std::min(30, 2 * t.duration()));
    }
}

TEST(Reward, Examples) {
    EXPECT_DOUBLE_EQ(reward({5, 8}, 1, 2.0, 4, PenaltyFn::theory(0.1)), 2.0);
    EXPECT_NEAR(reward({1, 5}, 1, 2.0, 4, PenaltyFn{0.0, 0.1}), 1.9, 1e-15);
    EXPECT_EQ(reward({0, 0}, 0, 2.0, 4, PenaltyFn::theory(1)), 0.0);
    EXPECT_EQ(reward({0, 0}, 1, 2.0, 4, PenaltyFn::theory(1)), 0.0);
}

TEST(Reward, PassiveNeverPositiveActiveAboveWorstCase) {
    Rng rng(7);
    std::uniform_int_distribution<int> tau(0, 10), b(0, 30), k(1, 10);
    std::uniform_real_distribution<double> e(-2, 3), a(0, 5);
    for (int i = 0; i < 20000; ++i) {
        const int t = tau(rng);
        const TaskState s{t, t == 0 ? 0 : b(rng)};
        const double E = e(rng);
        const PenaltyFn F = i % 2 ? PenaltyFn::theory(a(rng)) : PenaltyFn::experiment(a(rng));
        const int kk = k(rng);
        ASSERT_LE(reward(s, 0, E, kk, F), 0.0);
        // Any task still holding work: acting earns at least E - F(b).
        if (s.backlog > 0) {
            ASSERT_GE(reward(s, 1, E, kk, F), E - F(s.backlog));
        }
    }
}

TEST(Penalty, Presets) {
    EXPECT_EQ(PenaltyFn::theory(2)(0), 0.0);
    EXPECT_EQ(PenaltyFn::theory(2)(3), 18.0);
    EXPECT_EQ(PenaltyFn::experiment(5)(0), 0.0);
    EXPECT_NEAR(PenaltyFn::experiment(5)(2), 5.4, 1e-15);
    EXPECT_TRUE(PenaltyFn::theory(5).integer_convex());
    EXPECT_TRUE(PenaltyFn::experiment(0.2).integer_convex());
    EXPECT_FALSE(PenaltyFn::experiment(0.5).integer_convex());
}

TEST(SlackTime, Examples) {
    EXPECT_EQ(slack_time({5, 8}, 4), (Rational{3, 1}));
    EXPECT_EQ(slack_time({3, 0}, 4), (Rational{3, 1}));
    EXPECT_EQ(slack_time({2, 8}, 4), (Rational{0, 1}));
    EXPECT_THROW(slack_time({0, 0}, 4), ModelError);
}

TEST(SlackTime, ExactOrdering) {
    // 10 - 1/3 versus 10 - 2/6: equal as fractions.
    EXPECT_EQ(slack_time({10, 1}, 3), slack_time({10, 2}, 6));
    EXPECT_LT(slack_time({2, 5}, 3), slack_time({2, 1}, 3));
}

struct World {
    std::vector<ArmContext> arms;
    std::vector<TaskGenerator> gens;
    std::vector<Rng> rngs;

    World(int n, double q, int k, double e, PenaltyFn f, std::uint64_t seed) {
        for (int i = 0; i < n; ++i) {
            arms.push_back({k, e, f});
            gens.push_back(gen_with(q));
            gens.back().capacity = k;
            rngs.push_back(make_stream(seed, Stream::arrivals, i));
        }
    }
};

TEST(StepSystem, SingleArmCompletesAtDeadline) {
    World w(1, 0.0, 3, 1.5, PenaltyFn::theory(1), 1);
    SystemState st{{{1, 3}}, 0};
    const StepResult r = step_system(st, {{0}}, 1, w.arms, w.gens, w.rngs);
    EXPECT_DOUBLE_EQ(r.rewards[0], 1.5);
    EXPECT_EQ(r.completions, 1);
    EXPECT_EQ(r.violations, 0);
    EXPECT_EQ(st.per_user[0], (TaskState{0, 0}));
}

TEST(StepSystem, PassiveAtDeadlineWithBacklogIsViolation) {
    World w(2, 0.0, 3, 1.5, PenaltyFn::theory(1), 1);
    SystemState st{{{1, 3}, {1, 1}}, 0};
    const StepResult r = step_system(st, {{1}}, 1, w.arms, w.gens, w.rngs);
    EXPECT_EQ(r.violations, 1);
    EXPECT_EQ(r.completions, 1);
    EXPECT_DOUBLE_EQ(r.rewards[0], -4.0);
}

TEST(StepSystem, AllIdleGivesZeroRewards) {
    World w(4, 0.0, 2, 1.0, PenaltyFn::theory(1), 1);
    SystemState st{std::vector<TaskState>(4), 0};
    const StepResult r = step_system(st, {{0, 2}}, 2, w.arms, w.gens, w.rngs);
    for (double x : r.rewards) EXPECT_EQ(x, 0.0);
}

TEST(StepSystem, ActiveUserLosesCapacityPassiveLosesOne) {
    World w(2, 0.0, 4, 1.0, PenaltyFn::theory(1), 1);
    SystemState st{{{5, 20}, {5, 20}}, 0};
    step_system(st, {{1}}, 1, w.arms, w.gens, w.rngs);
    EXPECT_EQ(st.per_user[0], (TaskState{4, 19}));
    EXPECT_EQ(st.per_user[1], (TaskState{4, 16}));
}

TEST(StepSystem, RejectsMalformedActions) {
    World w(3, 0.0, 2, 1.0, PenaltyFn::theory(1), 1);
    SystemState st{std::vector<TaskState>(3), 0};
    EXPECT_THROW(step_system(st, {{0}}, 2, w.arms, w.gens, w.rngs), ModelError);
    EXPECT_THROW(step_system(st, {{1, 1}}, 2, w.arms, w.gens, w.rngs), ModelError);
    EXPECT_THROW(step_system(st, {{0, 3}}, 2, w.arms, w.gens, w.rngs), ModelError);
}

// Random feasible actions over a long horizon; returns per-slot totals.
std::vector<double> random_trajectory(std::uint64_t seed, double q, std::vector<SystemState>* states = nullptr) {
    const int n = 8, m = 3;
    World w(n, q, 3, 0.7, PenaltyFn::experiment(0.5), seed);
    Rng pick(seed ^ 0xABCDEF);
    SystemState st{std::vector<TaskState>(n), 0};
    std::vector<double> totals;
    for (int t = 0; t < 300; ++t) {
        std::vector<int> idx{0, 1, 2, 3, 4, 5, 6, 7};
        std::shuffle(idx.begin(), idx.end(), pick);
        idx.resize(m);
        if (states) states->push_back(st);
        const StepResult r = step_system(st, {idx}, m, w.arms, w.gens, w.rngs);
        double s = 0;
        for (double x : r.rewards) s += x;
        totals.push_back(s);
    }
    if (states) states->push_back(st);
    return totals;
}

TEST(StepSystem, DeadlineClockAndBacklogMonotoneWithinTask) {
    std::vector<SystemState> traj;
    random_trajectory(9, 0.7, &traj);
    for (std::size_t t = 0; t + 1 < traj.size(); ++t) {
        for (std::size_t i = 0; i < traj[t].per_user.size(); ++i) {
            const TaskState a = traj[t].per_user[i];
            const TaskState b = traj[t + 1].per_user[i];
            if (a.tau >= 2) {
                ASSERT_EQ(b.tau, a.tau - 1);
                ASSERT_LE(b.backlog, a.backlog);
            }
        }
    }
}

TEST(StepSystem, NoArrivalsMeansZeroReward) {
    for (double x : random_trajectory(10, 0.0)) ASSERT_EQ(x, 0.0);
}

TEST(StepSystem, BitReproducible) {
    EXPECT_EQ(random_trajectory(11, 0.7), random_trajectory(11, 0.7));
    EXPECT_NE(random_trajectory(11, 0.7), random_trajectory(12, 0.7));
}

}  // namespace
