#pragma once

#include <cmath>
#include <cstdint>
#include <string>

#include "wimec/error.hpp"

namespace wimec {

struct UserProfile {
    int user_id = 0;
    double cpu_freq = 1e9;         // Hz
    double cycles_per_bit = 1e5;   // cycles/bit
    double subtask_bits = 100.0;   // bits
    double tx_power = 0.1;         // W
    double bandwidth = 1e6;        // Hz
    double distance = 100.0;       // m
    double power_coeff = 1e-28;    // effective switched capacitance
    double arrival_prob = 0.7;

    // Throws ModelError naming the first violated invariant.
    void validate(double ref_distance = 1.0) const {
        if (!(cpu_freq > 0)) throw ModelError("cpu_freq must be > 0");
        if (!(bandwidth > 0)) throw ModelError("bandwidth must be > 0");
        if (!(subtask_bits > 0)) throw ModelError("subtask_bits must be > 0");
        if (!(cycles_per_bit > 0)) throw ModelError("cycles_per_bit must be > 0");
        if (!(arrival_prob >= 0 && arrival_prob <= 1)) throw ModelError("arrival_prob must lie in [0,1]");
        if (!(distance >= ref_distance)) throw ModelError("distance must be >= reference distance");
        if (!(tx_power >= 0)) throw ModelError("tx_power must be >= 0");
    }
};

struct ChannelEnvironment {
    double pathloss_const = 1e-4;   // g0, linear
    double ref_distance = 1.0;      // d0, m
    double pathloss_exp = 4.0;      // iota
    double noise_density = 3.981071705534972e-21;  // N0, W/Hz (-174 dBm/Hz)
    double fading_gain = 1.0;       // kappa, per-task draw
    double server_freq = 2e9;       // Hz
};

struct EnergyFigures {
    double e_local = 0;
    double e_offload = 0;
    double e_saving = 0;
    int offload_capacity = 1;
    double tx_time = 0;
};

enum class EnergyModel { linear, quadratic };

inline double dbm_to_watt(double dbm) { return std::pow(10.0, (dbm - 30.0) / 10.0); }
inline double db_to_linear(double db) { return std::pow(10.0, db / 10.0); }

// Local computing energy for one subtask. The default follows lambda*U*C*l;
// the quadratic model uses the dynamic-power form lambda*U^2*C*l.
inline double local_energy_per_subtask(const UserProfile& p, EnergyModel model = EnergyModel::linear) {
    const double base = p.power_coeff * p.cpu_freq * p.cycles_per_bit * p.subtask_bits;
    return model == EnergyModel::linear ? base : base * p.cpu_freq;
}

// floor(U_s / U_i) on whole-Hz integers, so 2 GHz / 0.4 GHz is exactly 5.
inline int offload_capacity(const UserProfile& p, const ChannelEnvironment& env) {
    if (!(p.cpu_freq > 0)) throw ModelError("cpu_freq must be > 0");
    const auto us = static_cast<std::int64_t>(std::llround(env.server_freq));
    const auto ui = static_cast<std::int64_t>(std::llround(p.cpu_freq));
    if (ui <= 0) throw ModelError("cpu_freq rounds to 0 Hz");
    const std::int64_t k = us / ui;
    if (k < 1) {
        throw ModelError("offload capacity is zero: user CPU frequency exceeds server frequency (user " +
                         std::to_string(p.user_id) + ")");
    }
    return static_cast<int>(k);
}

inline double channel_gain(const ChannelEnvironment& env, double distance) {
    return env.fading_gain * env.pathloss_const * std::pow(env.ref_distance / distance, env.pathloss_exp);
}

inline double transmission_rate(const UserProfile& p, double gain, const ChannelEnvironment& env) {
    const double snr = p.tx_power * gain / (env.noise_density * p.bandwidth);
    return p.bandwidth * std::log2(1.0 + snr);
}

struct OffloadCost {
    double energy = 0;   // J
    double tx_time = 0;  // s
};

inline OffloadCost offload_energy(const UserProfile& p, double rate, int capacity) {
    if (!(rate > 0)) throw ModelError("zero-rate channel");
    const double t = capacity * p.subtask_bits / rate;
    return {t * p.tx_power, t};
}

inline double energy_saving(double e_local, double e_offload, int capacity) {
    return capacity * e_local - e_offload;
}

// All per-task energy quantities for one channel realization.
inline EnergyFigures energy_figures(const UserProfile& p, const ChannelEnvironment& env,
                                    EnergyModel model = EnergyModel::linear) {
    EnergyFigures f;
    f.offload_capacity = offload_capacity(p, env);
    f.e_local = local_energy_per_subtask(p, model);
    const double rate = transmission_rate(p, channel_gain(env, p.distance), env);
    const OffloadCost c = offload_energy(p, rate, f.offload_capacity);
    f.e_offload = c.energy;
    f.tx_time = c.tx_time;
    f.e_saving = energy_saving(f.e_local, f.e_offload, f.offload_capacity);
    return f;
}

}  // namespace wimec
