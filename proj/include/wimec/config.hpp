#pragma once

#include <cmath>
#include <cstdint>
#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "wimec/bayes.hpp"
#include "wimec/dynamics.hpp"
#include "wimec/error.hpp"
#include "wimec/mec_model.hpp"
#include "wimec/schedulers.hpp"

namespace wimec {

// A ranking rule plus the source of the energy saving it ranks with.
struct PolicySpec {
    PolicyKind rank = PolicyKind::WI;
    EstimatorKind estimator = EstimatorKind::known;

    std::string label() const {
        switch (estimator) {
            case EstimatorKind::mle: return "mle-wi";
            case EstimatorKind::bl: return "bl-wi";
            case EstimatorKind::psbl: return "psbl-wi";
            case EstimatorKind::known: break;
        }
        return to_string(rank);
    }
};

inline PolicySpec parse_policy(const std::string& s) {
    if (s == "mle-wi") return {PolicyKind::WI, EstimatorKind::mle};
    if (s == "bl-wi") return {PolicyKind::WI, EstimatorKind::bl};
    if (s == "psbl-wi") return {PolicyKind::WI, EstimatorKind::psbl};
    return {parse_policy_kind(s), EstimatorKind::known};
}

enum class PenaltyKind { theory, experiment };
enum class EnergySource { physical, gaussian, laplace };

struct PhysicalParams {
    double distance_min = 100;
    double distance_max = 300;
    double noise_density_dbm_hz = -174;
    double g0_db = -40;
    double d0 = 1;
    double pathloss_exp = 4;
    double bandwidth = 1e6;
    double tx_power_dbm_min = 20;
    double tx_power_dbm_max = 25;
    double power_coeff = 1e-28;
    std::vector<double> cpu_freqs{0.2e9, 0.4e9, 0.6e9, 0.8e9, 1.0e9};
    std::vector<double> cycles_per_bit{1e5, 2e5, 3e5, 4e5, 5e5};
    std::vector<double> subtask_bits{100, 150, 200};
    double server_freq = 2e9;
    double slot_length = 0.01;  // s
    EnergyModel energy_model = EnergyModel::linear;

    ChannelEnvironment environment(double fading = 1.0) const {
        ChannelEnvironment env;
        env.pathloss_const = db_to_linear(g0_db);
        env.ref_distance = d0;
        env.pathloss_exp = pathloss_exp;
        env.noise_density = dbm_to_watt(noise_density_dbm_hz);
        env.fading_gain = fading;
        env.server_freq = server_freq;
        return env;
    }
};

struct SimConfig {
    int N = 100;
    int M = 30;
    int T = 200;
    double beta = 0.99;
    PenaltyKind penalty_kind = PenaltyKind::experiment;
    double alpha = 0.5;
    PolicySpec policy;
    EstimatorConfig estimator;
    PhysicalParams phys;
    double arrival_prob = 0.7;
    int max_task_duration = 10;
    int max_task_size = 30;
    SizeLaw size_law = SizeLaw::uniform;
    double size_cap_factor = 1.0;
    int fading_period_slots = 0;  // 0: redraw per task
    EnergySource energy_source = EnergySource::physical;
    double prior_mean = 1.0;
    double prior_var = 0.1;
    double laplace_scale = 0.2;
    double noise_var_min = 0.5;
    double noise_var_max = 1.0;
    std::uint64_t master_seed = 1;
    int replications = 20;
    bool compute_bound = false;

    PenaltyFn penalty() const {
        return penalty_kind == PenaltyKind::theory ? PenaltyFn::theory(alpha) : PenaltyFn::experiment(alpha);
    }

    // Every violated constraint, not just the first.
    std::vector<std::string> validation_errors() const {
        std::vector<std::string> e;
        if (N < 1) e.push_back("N must be >= 1");
        if (M < 0 || M > N) e.push_back("M must satisfy 0 <= M <= N");
        if (T < 1) e.push_back("T must be >= 1");
        if (!(beta > 0 && beta <= 1)) e.push_back("beta must lie in (0,1]");
        if (!(alpha >= 0)) e.push_back("alpha must be >= 0");
        if (!(arrival_prob >= 0 && arrival_prob <= 1)) e.push_back("arrival_prob must lie in [0,1]");
        if (max_task_duration < 1) e.push_back("max_task_duration must be >= 1");
        if (max_task_size < 1) e.push_back("max_task_size must be >= 1");
        if (!(size_cap_factor > 0)) e.push_back("size_cap_factor must be > 0");
        if (fading_period_slots < 0) e.push_back("fading_period_slots must be >= 0");
        if (!(phys.distance_min >= phys.d0 && phys.distance_max >= phys.distance_min))
            e.push_back("distance range must satisfy d0 <= min <= max");
        if (!(phys.bandwidth > 0)) e.push_back("bandwidth must be > 0");
        if (!(phys.slot_length > 0)) e.push_back("slot_length must be > 0");
        if (phys.cpu_freqs.empty() || phys.cycles_per_bit.empty() || phys.subtask_bits.empty())
            e.push_back("cpu_freqs, cycles_per_bit and subtask_bits must be nonempty");
        for (double f : phys.cpu_freqs)
            if (!(f > 0) || std::llround(phys.server_freq) / std::max<long long>(1, std::llround(f)) < 1)
                e.push_back("cpu frequency " + std::to_string(f) + " Hz gives zero offload capacity");
        if (!(prior_var > 0)) e.push_back("prior_var must be > 0");
        if (!(laplace_scale > 0)) e.push_back("laplace_scale must be > 0");
        if (!(noise_var_min > 0 && noise_var_max >= noise_var_min)) e.push_back("noise variance range invalid");
        if (estimator.mh_k < 1) e.push_back("mh_k must be >= 1");
        if (replications < 1) e.push_back("replications must be >= 1");
        if (e.empty() && energy_source == EnergySource::physical) {
            // Worst nominal upload (farthest user, lowest power, unit fading) must fit a slot.
            double worst = 0;
            for (double f : phys.cpu_freqs)
                for (double bits : phys.subtask_bits) {
                    UserProfile p;
                    p.cpu_freq = f;
                    p.subtask_bits = bits;
                    p.bandwidth = phys.bandwidth;
                    p.tx_power = dbm_to_watt(phys.tx_power_dbm_min);
                    p.distance = phys.distance_max;
                    const ChannelEnvironment env = phys.environment(1.0);
                    const int k = offload_capacity(p, env);
                    const double rate = transmission_rate(p, channel_gain(env, p.distance), env);
                    worst = std::max(worst, rate > 0 ? k * bits / rate : INFINITY);
                }
            if (worst > phys.slot_length)
                e.push_back("nominal transmit time " + std::to_string(worst) + " s exceeds slot_length " +
                            std::to_string(phys.slot_length) + " s");
        }
        return e;
    }

    void validate() const {
        const auto e = validation_errors();
        if (e.empty()) return;
        std::string msg = "invalid configuration:";
        for (const auto& s : e) msg += "\n  - " + s;
        throw ConfigError(msg);
    }
};

// Cartesian sweep over N, server ratio (or explicit M), alpha and policy.
struct ExperimentGrid {
    std::string name = "custom";
    SimConfig base;
    std::vector<int> n_values{100};
    std::vector<double> m_ratios{0.3};
    std::vector<int> m_values;  // overrides m_ratios when nonempty
    std::vector<double> alphas{0.5};
    std::vector<PolicySpec> policies{{PolicyKind::WI, EstimatorKind::known}};

    std::vector<SimConfig> cells() const {
        std::vector<SimConfig> out;
        for (int n : n_values) {
            std::vector<int> ms;
            if (!m_values.empty()) ms = m_values;
            else
                for (double r : m_ratios) ms.push_back(static_cast<int>(std::llround(r * n)));
            for (int m : ms)
                for (double a : alphas)
                    for (const auto& p : policies) {
                        SimConfig c = base;
                        c.N = n;
                        c.M = m;
                        c.alpha = a;
                        c.policy = p;
                        out.push_back(c);
                    }
        }
        return out;
    }
};

namespace detail {

inline std::string trim(const std::string& s) {
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string::npos) return "";
    const auto e = s.find_last_not_of(" \t\r");
    return s.substr(b, e - b + 1);
}

inline std::vector<std::string> split_list(const std::string& v) {
    std::vector<std::string> out;
    std::stringstream ss(v);
    std::string item;
    while (std::getline(ss, item, ',')) {
        item = trim(item);
        if (!item.empty()) out.push_back(item);
    }
    return out;
}

inline double to_double(const std::string& key, const std::string& v) {
    try {
        std::size_t pos = 0;
        const double d = std::stod(v, &pos);
        if (pos != v.size()) throw std::invalid_argument(v);
        return d;
    } catch (const std::exception&) {
        throw ConfigError("key '" + key + "': expected a number, got '" + v + "'");
    }
}

inline int to_int(const std::string& key, const std::string& v) {
    const double d = to_double(key, v);
    if (d != std::floor(d)) throw ConfigError("key '" + key + "': expected an integer, got '" + v + "'");
    return static_cast<int>(d);
}

inline std::vector<double> to_doubles(const std::string& key, const std::string& v) {
    std::vector<double> out;
    for (const auto& s : split_list(v)) out.push_back(to_double(key, s));
    return out;
}

inline bool to_bool(const std::string& key, const std::string& v) {
    if (v == "true" || v == "1" || v == "on" || v == "yes") return true;
    if (v == "false" || v == "0" || v == "off" || v == "no") return false;
    throw ConfigError("key '" + key + "': expected a boolean, got '" + v + "'");
}

}  // namespace detail

// Applies one `key = value` setting. Unknown keys are errors.
inline void apply_setting(ExperimentGrid& g, const std::string& key, const std::string& value) {
    using namespace detail;
    SimConfig& c = g.base;
    PhysicalParams& p = c.phys;
    const std::string& v = value;
    if (key == "N") {
        g.n_values.clear();
        for (double d : to_doubles(key, v)) g.n_values.push_back(static_cast<int>(d));
    } else if (key == "M") {
        g.m_values.clear();
        for (double d : to_doubles(key, v)) g.m_values.push_back(static_cast<int>(d));
    } else if (key == "m_ratio") {
        g.m_ratios = to_doubles(key, v);
        g.m_values.clear();
    } else if (key == "alpha") {
        g.alphas = to_doubles(key, v);
    } else if (key == "policy") {
        g.policies.clear();
        for (const auto& s : split_list(v)) g.policies.push_back(parse_policy(s));
    } else if (key == "T") {
        c.T = to_int(key, v);
    } else if (key == "beta") {
        c.beta = to_double(key, v);
    } else if (key == "penalty") {
        if (v == "theory") c.penalty_kind = PenaltyKind::theory;
        else if (v == "experiment") c.penalty_kind = PenaltyKind::experiment;
        else throw ConfigError("key 'penalty': expected theory|experiment");
    } else if (key == "arrival_prob") {
        c.arrival_prob = to_double(key, v);
    } else if (key == "max_task_duration") {
        c.max_task_duration = to_int(key, v);
    } else if (key == "max_task_size") {
        c.max_task_size = to_int(key, v);
    } else if (key == "size_law") {
        if (v == "uniform") c.size_law = SizeLaw::uniform;
        else if (v == "capped") c.size_law = SizeLaw::capped;
        else throw ConfigError("key 'size_law': expected uniform|capped");
    } else if (key == "size_cap_factor") {
        c.size_cap_factor = to_double(key, v);
    } else if (key == "fading_period_slots") {
        c.fading_period_slots = to_int(key, v);
    } else if (key == "energy_source") {
        if (v == "physical") c.energy_source = EnergySource::physical;
        else if (v == "gaussian") c.energy_source = EnergySource::gaussian;
        else if (v == "laplace") c.energy_source = EnergySource::laplace;
        else throw ConfigError("key 'energy_source': expected physical|gaussian|laplace");
    } else if (key == "energy_model") {
        if (v == "linear") p.energy_model = EnergyModel::linear;
        else if (v == "quadratic") p.energy_model = EnergyModel::quadratic;
        else throw ConfigError("key 'energy_model': expected linear|quadratic");
    } else if (key == "prior_mean") {
        c.prior_mean = to_double(key, v);
    } else if (key == "prior_var") {
        c.prior_var = to_double(key, v);
    } else if (key == "laplace_scale") {
        c.laplace_scale = to_double(key, v);
    } else if (key == "noise_var_min") {
        c.noise_var_min = to_double(key, v);
    } else if (key == "noise_var_max") {
        c.noise_var_max = to_double(key, v);
    } else if (key == "seed") {
        c.master_seed = static_cast<std::uint64_t>(to_double(key, v));
    } else if (key == "replications") {
        c.replications = to_int(key, v);
    } else if (key == "bound") {
        c.compute_bound = to_bool(key, v);
    } else if (key == "nig_variant") {
        c.estimator.variant = parse_nig_variant(v);
    } else if (key == "mh_k") {
        c.estimator.mh_k = to_int(key, v);
    } else if (key == "mh_burn_in") {
        c.estimator.mh_burn_in = to_int(key, v);
    } else if (key == "mh_scale") {
        c.estimator.mh_scale = to_double(key, v);
    } else if (key == "bl_estimate") {
        if (v == "sample") c.estimator.bl_posterior_mean = false;
        else if (v == "mean") c.estimator.bl_posterior_mean = true;
        else throw ConfigError("key 'bl_estimate': expected sample|mean");
    } else if (key == "init_estimate") {
        c.estimator.init_estimate = to_double(key, v);
    } else if (key == "nig_prior") {
        const auto x = to_doubles(key, v);
        if (x.size() != 4) throw ConfigError("key 'nig_prior': expected lam,mu,phi,nu");
        c.estimator.prior = {x[0], x[1], x[2], x[3]};
    } else if (key == "distance_min") {
        p.distance_min = to_double(key, v);
    } else if (key == "distance_max") {
        p.distance_max = to_double(key, v);
    } else if (key == "noise_density_dbm_hz") {
        p.noise_density_dbm_hz = to_double(key, v);
    } else if (key == "g0_db") {
        p.g0_db = to_double(key, v);
    } else if (key == "d0") {
        p.d0 = to_double(key, v);
    } else if (key == "pathloss_exp") {
        p.pathloss_exp = to_double(key, v);
    } else if (key == "bandwidth_hz") {
        p.bandwidth = to_double(key, v);
    } else if (key == "tx_power_dbm_min") {
        p.tx_power_dbm_min = to_double(key, v);
    } else if (key == "tx_power_dbm_max") {
        p.tx_power_dbm_max = to_double(key, v);
    } else if (key == "power_coeff") {
        p.power_coeff = to_double(key, v);
    } else if (key == "cpu_freqs_hz") {
        p.cpu_freqs = to_doubles(key, v);
    } else if (key == "cycles_per_bit") {
        p.cycles_per_bit = to_doubles(key, v);
    } else if (key == "subtask_bits") {
        p.subtask_bits = to_doubles(key, v);
    } else if (key == "server_freq_hz") {
        p.server_freq = to_double(key, v);
    } else if (key == "slot_length_s") {
        p.slot_length = to_double(key, v);
    } else {
        throw ConfigError("unknown configuration key '" + key + "'");
    }
}

inline void apply_config_text(ExperimentGrid& g, const std::string& text, const std::string& origin = "<text>") {
    std::stringstream ss(text);
    std::string line;
    int lineno = 0;
    while (std::getline(ss, line)) {
        ++lineno;
        const auto hash = line.find('#');
        if (hash != std::string::npos) line.erase(hash);
        line = detail::trim(line);
        if (line.empty()) continue;
        const auto eq = line.find('=');
        if (eq == std::string::npos)
            throw ConfigError(origin + ":" + std::to_string(lineno) + ": expected 'key = value'");
        try {
            apply_setting(g, detail::trim(line.substr(0, eq)), detail::trim(line.substr(eq + 1)));
        } catch (const ConfigError& e) {
            throw ConfigError(origin + ":" + std::to_string(lineno) + ": " + e.what());
        }
    }
}

inline void apply_config_file(ExperimentGrid& g, const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open config file '" + path + "'");
    std::stringstream buf;
    buf << in.rdbuf();
    apply_config_text(g, buf.str(), path);
}

inline std::vector<PolicySpec> baseline_policies() {
    return {{PolicyKind::STLW_WI, EstimatorKind::known},
            {PolicyKind::WI, EstimatorKind::known},
            {PolicyKind::LST, EstimatorKind::known},
            {PolicyKind::EDF, EstimatorKind::known},
            {PolicyKind::GREEDY, EstimatorKind::known}};
}

// Named experiment presets. All run T = 200 slots with discount 0.99.
inline ExperimentGrid preset(const std::string& name) {
    ExperimentGrid g;
    g.name = name;
    g.base.replications = 20;
    g.policies = baseline_policies();
    if (name == "fig3a" || name == "fig3b") {
        g.n_values = {60, 80, 100, 120, 140};
        g.m_ratios = {name == "fig3a" ? 0.3 : 0.5};
        g.alphas = {0.5};
    } else if (name == "fig4") {
        g.n_values = {100};
        g.m_ratios = {0.3};
        g.alphas = {0.001, 0.01, 0.1, 1, 10, 100};
        g.policies = {{PolicyKind::WI, EstimatorKind::known}};
    } else if (name == "fig5") {
        g.n_values = {100};
        g.m_ratios = {0.2, 0.3, 0.4, 0.5};
        g.alphas = {0.001};
    } else if (name == "fig6") {
        g.n_values = {100};
        g.m_ratios = {0.25, 0.3, 0.35, 0.4, 0.45};
        g.alphas = {5};
    } else if (name == "fig7" || name == "fig8") {
        g.n_values = {100};
        g.m_ratios = {0.3, 0.5};
        g.alphas = {0.5};
        g.base.fading_period_slots = 20;
        g.base.energy_source = name == "fig7" ? EnergySource::gaussian : EnergySource::laplace;
        g.policies = {{PolicyKind::WI, EstimatorKind::known},
                      {PolicyKind::WI, EstimatorKind::bl},
                      {PolicyKind::WI, EstimatorKind::mle}};
        if (name == "fig8") g.policies.push_back({PolicyKind::WI, EstimatorKind::psbl});
    } else {
        throw ConfigError("unknown preset '" + name + "' (expected fig3a, fig3b, fig4, fig5, fig6, fig7, fig8)");
    }
    return g;
}

inline std::vector<std::string> preset_names() { return {"fig3a", "fig3b", "fig4", "fig5", "fig6", "fig7", "fig8"}; }

}  // namespace wimec
