#pragma once

#include <atomic>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <limits>
#include <map>
#include <mutex>
#include <optional>
#include <random>
#include <sstream>
#include <string>
#include <thread>
#include <tuple>
#include <vector>

#include <json.hpp>

#include "wimec/bayes.hpp"
#include "wimec/config.hpp"
#include "wimec/dynamics.hpp"
#include "wimec/error.hpp"
#include "wimec/index_policy.hpp"
#include "wimec/mec_model.hpp"
#include "wimec/rng.hpp"
#include "wimec/schedulers.hpp"
#include "wimec/stats.hpp"

namespace wimec {

struct RunRecord {
    std::string policy;
    int N = 0;
    int M = 0;
    double alpha = 0;
    std::uint64_t seed = 0;
    double discounted_reward = 0;
    double completion_ratio = 0;
    double energy_saving = 0;
    double relaxed_bound = std::numeric_limits<double>::quiet_NaN();
    int completions = 0;
    int violations = 0;
    int tasks_arrived = 0;
    double tail_bound = 0;  // bound on the discounted reward beyond the horizon
};

// Per-user world drawn from the profile stream of a seed.
struct UserWorld {
    UserProfile profile;
    int capacity = 1;
    double noise_var = 1;
};

inline std::vector<UserWorld> draw_users(const SimConfig& cfg, std::uint64_t seed) {
    std::vector<UserWorld> users(static_cast<std::size_t>(cfg.N));
    const ChannelEnvironment env = cfg.phys.environment();
    for (int i = 0; i < cfg.N; ++i) {
        Rng r = make_stream(seed, Stream::profile, static_cast<std::uint64_t>(i));
        auto pick = [&r](const std::vector<double>& v) {
            std::uniform_int_distribution<std::size_t> d(0, v.size() - 1);
            return v[d(r)];
        };
        UserWorld& u = users[i];
        u.profile.user_id = i;
        u.profile.cpu_freq = pick(cfg.phys.cpu_freqs);
        u.profile.cycles_per_bit = pick(cfg.phys.cycles_per_bit);
        u.profile.subtask_bits = pick(cfg.phys.subtask_bits);
        u.profile.distance = std::uniform_real_distribution<double>(cfg.phys.distance_min, cfg.phys.distance_max)(r);
        u.profile.tx_power = dbm_to_watt(
            std::uniform_real_distribution<double>(cfg.phys.tx_power_dbm_min, cfg.phys.tx_power_dbm_max)(r));
        u.profile.bandwidth = cfg.phys.bandwidth;
        u.profile.power_coeff = cfg.phys.power_coeff;
        u.profile.arrival_prob = cfg.arrival_prob;
        u.noise_var = std::uniform_real_distribution<double>(cfg.noise_var_min, cfg.noise_var_max)(r);
        u.profile.validate(cfg.phys.d0);
        u.capacity = offload_capacity(u.profile, env);
    }
    return users;
}

// True energy saving for a fresh channel realization.
inline double draw_energy_saving(const SimConfig& cfg, const UserWorld& u, Rng& fading, Rng& energy) {
    switch (cfg.energy_source) {
        case EnergySource::physical: {
            std::exponential_distribution<double> exp1(1.0);
            double kappa = exp1(fading);
            while (!(kappa > 0)) kappa = exp1(fading);
            return energy_figures(u.profile, cfg.phys.environment(kappa), cfg.phys.energy_model).e_saving;
        }
        case EnergySource::gaussian:
            return std::normal_distribution<double>(cfg.prior_mean, std::sqrt(cfg.prior_var))(energy);
        case EnergySource::laplace: {
            std::uniform_real_distribution<double> unif(-0.5, 0.5);
            const double x = unif(energy);
            const double sgn = x < 0 ? -1.0 : 1.0;
            return cfg.prior_mean - cfg.laplace_scale * sgn * std::log1p(-2.0 * std::abs(x));
        }
    }
    return 0.0;
}

inline EstimatorConfig estimator_config(const SimConfig& cfg) {
    EstimatorConfig e = cfg.estimator;
    PriorSpec& t = e.true_prior;
    t.var_shape = e.prior.nu;
    t.var_scale = e.prior.phi;
    t.location = cfg.prior_mean;
    switch (cfg.energy_source) {
        case EnergySource::laplace:
            t.kind = PriorSpec::Kind::laplace;
            t.spread = cfg.laplace_scale;
            break;
        case EnergySource::gaussian:
            t.kind = PriorSpec::Kind::gaussian;
            t.spread = cfg.prior_var;
            break;
        case EnergySource::physical:
            t.kind = PriorSpec::Kind::conjugate;
            t.conjugate = e.prior;
            break;
    }
    return e;
}

// Runs one episode. When `paths` is given it receives each user's exogenous
// trajectory for the pathwise relaxed bound.
inline RunRecord run_episode(const SimConfig& cfg, std::uint64_t seed, std::vector<ExogenousPath>* paths = nullptr) {
    cfg.validate();
    const int N = cfg.N;
    const PenaltyFn F = cfg.penalty();
    const std::vector<UserWorld> users = draw_users(cfg, seed);
    const EstimatorConfig ecfg = estimator_config(cfg);

    std::vector<TaskGenerator> gens(N);
    std::vector<Rng> arrivals, fading, energy, noise, policy;
    std::vector<Estimator> est;
    std::vector<ArmContext> arms(N);
    for (int i = 0; i < N; ++i) {
        const auto ui = static_cast<std::uint64_t>(i);
        gens[i].max_duration = cfg.max_task_duration;
        gens[i].max_size = cfg.max_task_size;
        gens[i].arrival_prob = cfg.arrival_prob;
        gens[i].size_law = cfg.size_law;
        gens[i].cap_factor = cfg.size_cap_factor;
        gens[i].capacity = users[i].capacity;
        arrivals.push_back(make_stream(seed, Stream::arrivals, ui));
        fading.push_back(make_stream(seed, Stream::fading, ui));
        energy.push_back(make_stream(seed, Stream::energy, ui));
        noise.push_back(make_stream(seed, Stream::observation, ui));
        policy.push_back(make_stream(seed, Stream::policy, ui));
        est.emplace_back(cfg.policy.estimator, ecfg);
        arms[i].capacity = users[i].capacity;
        arms[i].penalty = F;
    }
    if (paths) {
        paths->assign(N, {});
        for (int i = 0; i < N; ++i) {
            auto& p = (*paths)[i];
            p.capacity = users[i].capacity;
            p.max_backlog = cfg.max_task_size;
            p.penalty = F;
            p.tau.reserve(cfg.T);
            p.e_saving.reserve(cfg.T);
            p.start_backlog.reserve(cfg.T);
        }
    }

    const int period = cfg.fading_period_slots;
    std::vector<double> block_saving(N, 0.0);
    if (period > 0)
        for (int i = 0; i < N; ++i) block_saving[i] = draw_energy_saving(cfg, users[i], fading[i], energy[i]);

    SystemState sys;
    sys.per_user.assign(N, TaskState{});
    RunRecord rec;
    rec.policy = cfg.policy.label();
    rec.N = N;
    rec.M = cfg.M;
    rec.alpha = cfg.alpha;
    rec.seed = seed;
    std::vector<UserAux> aux(N);
    std::vector<char> exogenous(N, 1);
    double discount = 1.0;
    double max_abs_saving = 0;
    for (int t = 0; t < cfg.T; ++t) {
        for (int i = 0; i < N; ++i) {
            const TaskState& s = sys.per_user[i];
            double e_hat = arms[i].e_saving;
            if (cfg.policy.estimator != EstimatorKind::known)
                e_hat = s.has_work() ? est[i].decide(policy[i]) : est[i].estimate();
            const double wi = whittle_index({s, e_hat, users[i].capacity, cfg.beta, F});
            const double gain = reward(s, 1, e_hat, users[i].capacity, F) - reward(s, 0, e_hat, users[i].capacity, F);
            aux[i] = make_aux(s, users[i].capacity, wi, gain);
            if (paths) {
                auto& p = (*paths)[i];
                p.tau.push_back(s.tau);
                p.e_saving.push_back(arms[i].e_saving);
                p.start_backlog.push_back(exogenous[i] ? s.backlog : -1);
            }
            exogenous[i] = s.tau <= 1;
        }
        const ActionVector act = select(cfg.policy.rank, aux, cfg.M);
        const std::vector<TaskState> before = sys.per_user;
        const StepResult step = step_system(sys, act, cfg.M, arms, gens, arrivals);
        double slot_reward = 0;
        for (double r : step.rewards) slot_reward += r;
        rec.discounted_reward += discount * slot_reward;
        discount *= cfg.beta;
        rec.completions += step.completions;
        rec.violations += step.violations;
        for (int i : act.selected) {
            if (!before[i].has_work()) continue;
            rec.energy_saving += arms[i].e_saving;
            if (cfg.policy.estimator != EstimatorKind::known)
                est[i].observe(draw_observation({arms[i].e_saving, users[i].noise_var}, noise[i]), policy[i]);
        }
        // Estimators restart whenever the channel, and so the true saving,
        // changes: at every task in per-task fading, at block edges otherwise.
        for (int i : step.new_task_users) {
            ++rec.tasks_arrived;
            if (period > 0) {
                arms[i].e_saving = block_saving[i];
            } else {
                arms[i].e_saving = draw_energy_saving(cfg, users[i], fading[i], energy[i]);
                est[i].reset();
            }
        }
        if (period > 0 && (t + 1) % period == 0) {
            for (int i = 0; i < N; ++i) {
                block_saving[i] = draw_energy_saving(cfg, users[i], fading[i], energy[i]);
                arms[i].e_saving = block_saving[i];
                est[i].reset();
            }
        }
        for (int i = 0; i < N; ++i) max_abs_saving = std::max(max_abs_saving, std::abs(arms[i].e_saving));
    }
    const int elapsed = rec.completions + rec.violations;
    rec.completion_ratio = elapsed > 0 ? static_cast<double>(rec.completions) / elapsed : 0.0;
    if (cfg.beta < 1) {
        const double slot_max = N * (max_abs_saving + F(cfg.max_task_size));
        rec.tail_bound = slot_max * std::pow(cfg.beta, cfg.T) / (1.0 - cfg.beta);
    } else {
        rec.tail_bound = std::numeric_limits<double>::infinity();
    }
    return rec;
}

struct CellSummary {
    std::string policy;
    int N = 0;
    int M = 0;
    double alpha = 0;
    int runs = 0;
    double reward_mean = 0, reward_ci = 0;
    double completion_mean = 0, completion_ci = 0;
    double energy_mean = 0, energy_ci = 0;
};

struct CellFailure {
    std::string cell;
    std::uint64_t seed = 0;
    std::string message;
};

struct ExperimentResult {
    std::vector<RunRecord> records;
    std::vector<CellSummary> summaries;
    std::vector<CellFailure> failures;
};

inline std::string describe_cell(const SimConfig& c) {
    std::ostringstream os;
    os << "policy=" << c.policy.label() << " N=" << c.N << " M=" << c.M << " alpha=" << c.alpha;
    return os.str();
}

inline std::vector<CellSummary> summarize(const std::vector<RunRecord>& recs) {
    std::map<std::tuple<std::string, int, int, double>, std::vector<const RunRecord*>> groups;
    std::vector<std::tuple<std::string, int, int, double>> order;
    for (const auto& r : recs) {
        auto key = std::make_tuple(r.policy, r.N, r.M, r.alpha);
        if (!groups.count(key)) order.push_back(key);
        groups[key].push_back(&r);
    }
    std::vector<CellSummary> out;
    for (const auto& key : order) {
        const auto& g = groups[key];
        std::vector<double> rw, cr, en;
        for (const auto* r : g) {
            rw.push_back(r->discounted_reward);
            cr.push_back(r->completion_ratio);
            en.push_back(r->energy_saving);
        }
        CellSummary s;
        std::tie(s.policy, s.N, s.M, s.alpha) = key;
        s.runs = static_cast<int>(g.size());
        s.reward_mean = stats::mean(rw);
        s.reward_ci = stats::ci95_normal(rw);
        s.completion_mean = stats::mean(cr);
        s.completion_ci = stats::ci95_normal(cr);
        s.energy_mean = stats::mean(en);
        s.energy_ci = stats::ci95_normal(en);
        out.push_back(s);
    }
    return out;
}

// Runs every (cell, seed) pair. Results land in fixed slots so the output
// order never depends on thread scheduling. Seeds are master_seed + r.
inline ExperimentResult run_experiment(const ExperimentGrid& grid, int replications = -1, unsigned threads = 0) {
    const std::vector<SimConfig> cells = grid.cells();
    if (cells.empty()) throw ConfigError("experiment grid is empty");
    const int R = replications > 0 ? replications : grid.base.replications;
    const std::size_t jobs = cells.size() * static_cast<std::size_t>(R);
    std::vector<std::optional<RunRecord>> slots(jobs);
    std::vector<std::string> errors(jobs);

    // The pathwise bound depends only on the environment, which is shared
    // by every policy of a (N, M, alpha, seed) tuple.
    std::map<std::tuple<int, int, double, std::uint64_t>, double> bound_cache;
    std::mutex bound_mu;

    std::atomic<std::size_t> next{0};
    auto worker = [&]() {
        for (std::size_t j = next++; j < jobs; j = next++) {
            const SimConfig& c = cells[j / R];
            const std::uint64_t seed = c.master_seed + static_cast<std::uint64_t>(j % R);
            try {
                std::vector<ExogenousPath> paths;
                const auto key = std::make_tuple(c.N, c.M, c.alpha, seed);
                bool cached = false;
                double bound = 0;
                if (c.compute_bound) {
                    std::lock_guard<std::mutex> lk(bound_mu);
                    const auto it = bound_cache.find(key);
                    cached = it != bound_cache.end();
                    if (cached) bound = it->second;
                }
                RunRecord r = run_episode(c, seed, c.compute_bound && !cached ? &paths : nullptr);
                if (c.compute_bound) {
                    if (!cached) {
                        bound = pathwise_relaxed_bound(paths, c.M, c.beta);
                        std::lock_guard<std::mutex> lk(bound_mu);
                        bound_cache.emplace(key, bound);
                    }
                    r.relaxed_bound = bound;
                }
                slots[j] = r;
            } catch (const std::exception& e) {
                errors[j] = e.what();
            }
        }
    };
    if (threads == 0) threads = std::max(1u, std::thread::hardware_concurrency());
    threads = static_cast<unsigned>(std::min<std::size_t>(threads, jobs));
    if (threads <= 1) {
        worker();
    } else {
        std::vector<std::thread> pool;
        for (unsigned t = 0; t < threads; ++t) pool.emplace_back(worker);
        for (auto& t : pool) t.join();
    }
    ExperimentResult out;
    for (std::size_t j = 0; j < jobs; ++j) {
        if (slots[j]) out.records.push_back(*slots[j]);
        else out.failures.push_back({describe_cell(cells[j / R]), cells[j / R].master_seed + j % R, errors[j]});
    }
    out.summaries = summarize(out.records);
    return out;
}

inline std::string format_double(double x) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.17g", x);
    return buf;
}

inline const char* kCsvHeader =
    "policy,N,M,alpha,seed,discounted_reward,completion_ratio,energy_saving,relaxed_bound";

inline std::string csv_text(const std::vector<RunRecord>& records) {
    std::ostringstream os;
    os << kCsvHeader << "\n";
    for (const auto& r : records) {
        os << r.policy << ',' << r.N << ',' << r.M << ',' << format_double(r.alpha) << ',' << r.seed << ','
           << format_double(r.discounted_reward) << ',' << format_double(r.completion_ratio) << ','
           << format_double(r.energy_saving) << ',' << format_double(r.relaxed_bound) << "\n";
    }
    return os.str();
}

inline void emit_csv(const std::vector<RunRecord>& records, const std::string& path) {
    if (records.empty()) throw ModelError("emit_csv: no records to write to '" + path + "'");
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw ModelError("emit_csv: cannot open '" + path + "' for writing");
    out << csv_text(records);
    out.flush();
    if (!out) throw ModelError("emit_csv: write failed for '" + path + "'");
}

inline std::vector<RunRecord> read_csv(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ModelError("read_csv: cannot open '" + path + "'");
    std::string line;
    std::getline(in, line);
    if (line != kCsvHeader) throw ModelError("read_csv: unexpected header in '" + path + "'");
    std::vector<RunRecord> out;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        std::vector<std::string> f;
        std::stringstream ss(line);
        std::string item;
        while (std::getline(ss, item, ',')) f.push_back(item);
        if (f.size() != 9) throw ModelError("read_csv: malformed line in '" + path + "': " + line);
        RunRecord r;
        r.policy = f[0];
        r.N = std::stoi(f[1]);
        r.M = std::stoi(f[2]);
        r.alpha = std::strtod(f[3].c_str(), nullptr);
        r.seed = std::stoull(f[4]);
        r.discounted_reward = std::strtod(f[5].c_str(), nullptr);
        r.completion_ratio = std::strtod(f[6].c_str(), nullptr);
        r.energy_saving = std::strtod(f[7].c_str(), nullptr);
        r.relaxed_bound = std::strtod(f[8].c_str(), nullptr);
        out.push_back(r);
    }
    return out;
}

inline void emit_summary_csv(const std::vector<CellSummary>& s, const std::string& path) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw ModelError("cannot open '" + path + "' for writing");
    out << "policy,N,M,alpha,runs,reward_mean,reward_ci95,completion_mean,completion_ci95,energy_mean,energy_ci95\n";
    for (const auto& c : s)
        out << c.policy << ',' << c.N << ',' << c.M << ',' << format_double(c.alpha) << ',' << c.runs << ','
            << format_double(c.reward_mean) << ',' << format_double(c.reward_ci) << ','
            << format_double(c.completion_mean) << ',' << format_double(c.completion_ci) << ','
            << format_double(c.energy_mean) << ',' << format_double(c.energy_ci) << "\n";
}

inline nlohmann::json metadata(const ExperimentGrid& g, const ExperimentResult& r, int replications) {
    nlohmann::json j;
    j["preset"] = g.name;
    j["replications"] = replications;
    j["master_seed"] = g.base.master_seed;
    j["seed_rule"] = "seed = master_seed + replication index";
    j["horizon_T"] = g.base.T;
    j["discount"] = g.base.beta;
    j["penalty"] = g.base.penalty_kind == PenaltyKind::theory ? "theory: alpha*x^2" : "experiment: alpha + 0.1*x^2";
    j["completion_ratio"] =
        "completed / (completed + violated) over tasks whose deadline elapsed within the horizon; tasks in flight "
        "at T are excluded";
    j["ci_method"] = "normal approximation, 95%";
    j["relaxed_bound"] = g.base.compute_bound
                             ? "pathwise Lagrangian bound on the realized environment (finite horizon, discounted)"
                             : "not computed";
    double tail = 0;
    for (const auto& rec : r.records) tail = std::max(tail, rec.tail_bound);
    j["tail_bound_max"] = tail;
    j["failures"] = nlohmann::json::array();
    for (const auto& f : r.failures)
        j["failures"].push_back({{"cell", f.cell}, {"seed", f.seed}, {"error", f.message}});
    return j;
}

}  // namespace wimec
