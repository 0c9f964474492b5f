#pragma once

#include <cmath>
#include <functional>
#include <limits>
#include <numbers>
#include <random>
#include <string>
#include <vector>

#include <boost/math/special_functions/trigamma.hpp>

#include "wimec/error.hpp"
#include "wimec/index_policy.hpp"
#include "wimec/rng.hpp"

namespace wimec {

// Noisy energy-saving observations for the current task, with running
// sufficient statistics so posterior updates cost O(1).
class ObservationLog {
public:
    void append(double e) {
        samples_.push_back(e);
        const double n = static_cast<double>(samples_.size());
        const double d = e - mean_;
        mean_ += d / n;
        m2_ += d * (e - mean_);
    }
    void clear() {
        samples_.clear();
        mean_ = 0;
        m2_ = 0;
    }
    int count() const { return static_cast<int>(samples_.size()); }
    double mean() const { return mean_; }
    // Sum of squared deviations from the sample mean.
    double sum_sq_dev() const { return m2_; }
    const std::vector<double>& samples() const { return samples_; }

private:
    std::vector<double> samples_;
    double mean_ = 0;
    double m2_ = 0;
};

struct NIGParams {
    double lam = 1;
    double mu = 1;
    double phi = 1;
    double nu = 1;

    void validate() const {
        if (!(lam > 0 && phi > 0 && nu > 0)) throw ModelError("NIG parameters lam, phi, nu must be > 0");
    }
};

struct NoiseModel {
    double true_saving = 0;
    double noise_var = 1;
};

enum class NigVariant { full, textbook };

inline NigVariant parse_nig_variant(const std::string& s) {
    if (s == "full") return NigVariant::full;
    if (s == "textbook") return NigVariant::textbook;
    throw ConfigError("unknown nig_variant '" + s + "'");
}

inline double draw_observation(const NoiseModel& noise, Rng& rng) {
    if (!(noise.noise_var > 0)) return noise.true_saving;
    std::normal_distribution<double> d(noise.true_saving, std::sqrt(noise.noise_var));
    return d(rng);
}

inline double observe(const NoiseModel& noise, Rng& rng, ObservationLog& log) {
    const double e = draw_observation(noise, rng);
    log.append(e);
    return e;
}

inline double mle_estimate(const ObservationLog& log) {
    if (log.count() < 1) throw ModelError("no observations");
    return log.mean();
}

// Posterior from the task-start prior and the whole current log. The full
// variant adds the unhalved sum of squares; textbook halves it.
inline NIGParams nig_update(const NIGParams& prior, const ObservationLog& log,
                            NigVariant variant = NigVariant::textbook) {
    const double g = log.count();
    if (g == 0) return prior;
    const double ebar = log.mean();
    NIGParams post;
    post.lam = prior.lam + g;
    post.mu = (prior.lam * prior.mu + g * ebar) / (prior.lam + g);
    const double ss = variant == NigVariant::full ? log.sum_sq_dev() : 0.5 * log.sum_sq_dev();
    const double d = ebar - prior.mu;
    post.phi = prior.phi + ss + (prior.lam * g / (prior.lam + g)) * d * d / 2.0;
    post.nu = prior.nu + g / 2.0;
    return post;
}

struct NigDraw {
    double variance = 0;
    double saving = 0;
};

inline NigDraw nig_sample(const NIGParams& p, Rng& rng) {
    std::gamma_distribution<double> gam(p.nu, 1.0);
    double g = gam(rng);
    while (!(g > 0)) g = gam(rng);
    NigDraw out;
    out.variance = p.phi / g;
    std::normal_distribution<double> nrm(p.mu, std::sqrt(out.variance / p.lam));
    out.saving = nrm(rng);
    return out;
}

inline double inv_gamma_logpdf(double x, double shape, double scale) {
    if (!(x > 0)) return -std::numeric_limits<double>::infinity();
    return shape * std::log(scale) - std::lgamma(shape) - (shape + 1) * std::log(x) - scale / x;
}

inline double normal_logpdf(double x, double mean, double var) {
    const double d = x - mean;
    return -0.5 * std::log(2 * std::numbers::pi * var) - d * d / (2 * var);
}

inline double laplace_logpdf(double x, double loc, double scale) {
    return -std::log(2 * scale) - std::abs(x - loc) / scale;
}

// Joint density of (saving, variance) under NIG: variance ~ IG(nu, phi),
// saving | variance ~ N(mu, variance/lam).
inline double nig_logpdf(double saving, double variance, const NIGParams& p) {
    if (!(variance > 0)) return -std::numeric_limits<double>::infinity();
    return normal_logpdf(saving, p.mu, variance / p.lam) + inv_gamma_logpdf(variance, p.nu, p.phi);
}

// True prior over (saving, variance). Non-conjugate kinds put an independent
// law on the saving and an inverse-gamma (var_shape, var_scale) on the variance.
struct PriorSpec {
    enum class Kind { conjugate, gaussian, laplace } kind = Kind::conjugate;
    NIGParams conjugate;
    double location = 1.0;  // gaussian mean or laplace location
    double spread = 0.1;    // gaussian variance or laplace scale
    double var_shape = 1.0;
    double var_scale = 1.0;

    double logpdf(double saving, double variance) const {
        if (!(variance > 0)) return -std::numeric_limits<double>::infinity();
        switch (kind) {
            case Kind::conjugate: return nig_logpdf(saving, variance, conjugate);
            case Kind::gaussian:
                return normal_logpdf(saving, location, spread) + inv_gamma_logpdf(variance, var_shape, var_scale);
            case Kind::laplace:
                return laplace_logpdf(saving, location, spread) + inv_gamma_logpdf(variance, var_shape, var_scale);
        }
        return -std::numeric_limits<double>::infinity();
    }
};

struct Theta {
    double saving = 0;
    double variance = 1;
};

// log p_f(theta | data) + log pi_t(theta) - log pi_f(theta), unnormalized.
inline double prior_swap_logdensity(const Theta& th, const NIGParams& false_post, const NIGParams& false_prior,
                                    const PriorSpec& true_prior) {
    if (!(th.variance > 0)) return -std::numeric_limits<double>::infinity();
    return nig_logpdf(th.saving, th.variance, false_post) + true_prior.logpdf(th.saving, th.variance) -
           nig_logpdf(th.saving, th.variance, false_prior);
}

// One Metropolis-Hastings step with a symmetric proposal. `logp` caches the
// log target at `state`; returns true on acceptance.
template <class State, class Propose, class LogTarget>
bool mh_step(State& state, double& logp, Propose&& propose, LogTarget&& log_target, Rng& rng) {
    State cand = propose(state, rng);
    const double lc = log_target(cand);
    std::uniform_real_distribution<double> unif(0.0, 1.0);
    const double rho = lc - logp;
    if (rho >= 0 || std::log(unif(rng)) < rho) {
        state = cand;
        logp = lc;
        return true;
    }
    return false;
}

struct ProposalScale {
    double saving = 0.1;
    double log_variance = 0.1;
};

// Scales proportional to the false posterior's marginal spreads: the Student-t
// scale of the saving and the standard deviation of log variance.
inline ProposalScale proposal_from_posterior(const NIGParams& post, double factor) {
    return {factor * std::sqrt(post.phi / (post.lam * post.nu)),
            factor * std::sqrt(boost::math::trigamma(post.nu))};
}

struct MhResult {
    double mean_saving = 0;
    Theta last;
    int accepted = 0;
};

// Random-walk MH on (saving, log variance); the target is a density over
// (saving, variance), so the log-variance Jacobian is added. Returns the mean
// saving over the K retained samples.
inline MhResult mh_estimate(const Theta& start, int K, const ProposalScale& scale,
                            const std::function<double(const Theta&)>& log_density, Rng& rng, int burn_in = 0) {
    if (K < 1) throw ModelError("mh_estimate: K must be >= 1");
    struct Pt {
        double s, lv;
    };
    auto target = [&](const Pt& p) { return log_density({p.s, std::exp(p.lv)}) + p.lv; };
    std::normal_distribution<double> step(0.0, 1.0);
    auto propose = [&](const Pt& p, Rng& r) { return Pt{p.s + scale.saving * step(r), p.lv + scale.log_variance * step(r)}; };
    Pt cur{start.saving, std::log(start.variance)};
    double lp = target(cur);
    MhResult out;
    for (int i = 0; i < burn_in; ++i) mh_step(cur, lp, propose, target, rng);
    double sum = 0;
    for (int i = 0; i < K; ++i) {
        out.accepted += mh_step(cur, lp, propose, target, rng) ? 1 : 0;
        sum += cur.s;
    }
    out.mean_saving = sum / K;
    out.last = {cur.s, std::exp(cur.lv)};
    return out;
}

enum class EstimatorKind { known, mle, bl, psbl };

inline std::string to_string(EstimatorKind k) {
    switch (k) {
        case EstimatorKind::known: return "known";
        case EstimatorKind::mle: return "mle";
        case EstimatorKind::bl: return "bl";
        case EstimatorKind::psbl: return "psbl";
    }
    return "?";
}

struct EstimatorConfig {
    NIGParams prior{1, 1, 1, 1};
    double init_estimate = 1.0;
    NigVariant variant = NigVariant::textbook;
    PriorSpec true_prior;
    int mh_k = 10;
    int mh_burn_in = 0;
    double mh_scale = 0.25;
    bool bl_posterior_mean = false;  // BL estimate: posterior draw (default) or posterior mean
};

// Per-user estimate of the current task's energy saving.
class Estimator {
public:
    Estimator() = default;
    Estimator(EstimatorKind kind, const EstimatorConfig& cfg) : kind_(kind), cfg_(cfg) { reset(); }

    // Forget everything at a task or channel-block boundary.
    void reset() {
        log_.clear();
        post_ = cfg_.prior;
        estimate_ = cfg_.init_estimate;
        // Chain start: initial estimate and the prior's inverse-gamma mode.
        theta_ = {cfg_.init_estimate, cfg_.prior.phi / (cfg_.prior.nu + 1.0)};
    }

    // Called for users about to be ranked. Only the prior-swapping learner
    // refreshes its estimate here, by K fresh MH steps.
    double decide(Rng& rng) {
        if (kind_ == EstimatorKind::psbl) {
            const NIGParams prior = cfg_.prior;
            const PriorSpec truth = cfg_.true_prior;
            const NIGParams post = post_;
            auto target = [&](const Theta& th) { return prior_swap_logdensity(th, post, prior, truth); };
            const MhResult r = mh_estimate(theta_, cfg_.mh_k, proposal_from_posterior(post, cfg_.mh_scale), target,
                                           rng, cfg_.mh_burn_in);
            theta_ = r.last;
            estimate_ = r.mean_saving;
        }
        return estimate_;
    }

    // Record one observation after an offload.
    void observe(double e, Rng& rng) {
        log_.append(e);
        switch (kind_) {
            case EstimatorKind::known: break;
            case EstimatorKind::mle: estimate_ = mle_estimate(log_); break;
            case EstimatorKind::bl: {
                post_ = nig_update(cfg_.prior, log_, cfg_.variant);
                estimate_ = cfg_.bl_posterior_mean ? post_.mu : nig_sample(post_, rng).saving;
                break;
            }
            case EstimatorKind::psbl: post_ = nig_update(cfg_.prior, log_, cfg_.variant); break;
        }
    }

    double estimate() const { return estimate_; }
    const ObservationLog& log() const { return log_; }
    const NIGParams& posterior() const { return post_; }
    EstimatorKind kind() const { return kind_; }

private:
    EstimatorKind kind_ = EstimatorKind::known;
    EstimatorConfig cfg_;
    ObservationLog log_;
    NIGParams post_;
    double estimate_ = 1.0;
    Theta theta_;
};

// The closed-form index with the estimator's current saving in place of the
// true one. `in.e_saving` is ignored.
inline double learned_index(const Estimator& est, IndexInput in) {
    in.e_saving = est.estimate();
    return whittle_index(in);
}

}  // namespace wimec
