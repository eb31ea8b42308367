#pragma once

#include <algorithm>
#include <cstdint>
#include <numeric>
#include <optional>
#include <stdexcept>
#include <vector>

#include "cemreg/metrics.hpp"
#include "cemreg/parallel.hpp"
#include "cemreg/rigid_solver.hpp"
#include "cemreg/rng.hpp"
#include "cemreg/sparsemax.hpp"
#include "cemreg/state.hpp"

namespace cemreg {

// Diagonal Gaussian over the 6-DoF action space [e1 e2 e3 t1 t2 t3].
struct SamplingDistribution {
    Vector6d mu = Vector6d::Zero();
    Vector6d sigma = Vector6d::Ones();
};

enum class UpdateMode { kSparsemax, kHardTopK };

struct CemConfig {
    int iterations = 15;             // T
    int population = 1000;           // N
    int future_iterations = 3;       // M: iterations using the fused reward
    double alpha = 0.5;              // weight of the current reward in the fused score
    double epsilon = 0.1;            // inlier threshold for D^mc
    int elite_count = 100;           // k for hard top-k mode
    UpdateMode update_mode = UpdateMode::kSparsemax;
    double score_scale = 1.0;        // beta applied to scores before sparsemax
    double sigma_floor = 1e-4;
    std::uint64_t rng_seed = 0;
    IcpConfig icp;

    void validate() const {
        if (iterations < 1) throw std::invalid_argument("CemConfig: iterations must be >= 1");
        if (population < 1) throw std::invalid_argument("CemConfig: population must be >= 1");
        if (future_iterations < 0 || future_iterations > iterations)
            throw std::invalid_argument("CemConfig: future_iterations must be in [0, iterations]");
        if (!(alpha >= 0.0 && alpha <= 1.0))
            throw std::invalid_argument("CemConfig: alpha must be in [0, 1]");
        if (!(epsilon > 0.0)) throw std::invalid_argument("CemConfig: epsilon must be positive");
        if (elite_count < 1 || elite_count > population)
            throw std::invalid_argument("CemConfig: elite_count must be in [1, population]");
        if (!(score_scale > 0.0)) throw std::invalid_argument("CemConfig: score_scale must be positive");
        if (!(sigma_floor >= 0.0)) throw std::invalid_argument("CemConfig: sigma_floor must be nonnegative");
    }
};

struct ScoredCandidate {
    RigidMotion action;
    double current_reward = 0.0;
    std::optional<double> future_reward;
    double fused_score = 0.0;
    double weight = 0.0;
};

struct CemTrace {
    struct Iteration {
        double best_score = 0.0;
        double mean_score = 0.0;
        Vector6d mu = Vector6d::Zero();
        Vector6d sigma = Vector6d::Zero();
        int support_size = 0;  // candidates with positive weight
    };
    std::vector<Iteration> iterations;
    double score_scale = 0.0;  // beta actually applied
};

// Reparameterized sampling: a_i = mu + z_i * sigma, z ~ N(0, I), Euler
// components wrapped into [-pi, pi]. Candidates are drawn in index order from
// one generator, so results do not depend on worker count.
inline std::vector<RigidMotion> sample_candidates(const SamplingDistribution& dist, int n, Rng& rng) {
    if (n < 1) throw std::invalid_argument("sample_candidates: n must be >= 1");
    std::vector<RigidMotion> out;
    out.reserve(static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i) {
        Vector6d a;
        for (int d = 0; d < 6; ++d) a[d] = dist.mu[d] + rng.normal() * dist.sigma[d];
        out.push_back(RigidMotion::from_vector(a));  // from_vector wraps Euler components
    }
    return out;
}

// Fused score S(s, a) = alpha * R(s, a) + (1 - alpha) * R(s', a_icp), where
// s' = T(s, a) and a_icp comes from ICP refinement of s'. Without the future
// term the score is the current reward alone.
inline ScoredCandidate fused_score(const RegistrationState& s, const RigidMotion& a,
                                   const CemConfig& cfg, bool use_future) {
    const RewardParams params(cfg.epsilon);
    ScoredCandidate out;
    out.action = a;
    out.current_reward = -d_mc(s, a, params);
    if (use_future) {
        const IcpResult refined = icp_refine(s, a, cfg.icp);
        out.future_reward = -d_mc(s, compose(refined.motion, a), params);
        out.fused_score = cfg.alpha * out.current_reward + (1.0 - cfg.alpha) * *out.future_reward;
    } else {
        out.fused_score = out.current_reward;
    }
    return out;
}

namespace detail {

// Unwraps an angle to the representative within pi of the reference, so that
// averaging candidate Euler components never crosses the +-pi seam.
inline double unwrap_near(double angle, double reference) {
    return reference + wrap_angle(angle - reference);
}

inline Vector6d unwrapped_action(const RigidMotion& a, const Vector6d& prev_mu) {
    Vector6d v = a.to_vector();
    for (int d = 0; d < 3; ++d) v[d] = unwrap_near(v[d], prev_mu[d]);
    return v;
}

inline SamplingDistribution finalize_distribution(const Vector6d& mu_raw, const Vector6d& var,
                                                  double sigma_floor) {
    SamplingDistribution dist;
    dist.mu = mu_raw;
    for (int d = 0; d < 3; ++d) dist.mu[d] = wrap_angle(mu_raw[d]);
    for (int d = 0; d < 6; ++d)
        dist.sigma[d] = std::max(std::sqrt(std::max(var[d], 0.0)), sigma_floor);
    return dist;
}

}  // namespace detail

// Eq.-style refit over the k best-scoring candidates: mu = elite mean,
// sigma^2 = elite population variance (divide by k). Ties broken by lower
// candidate index.
inline SamplingDistribution hard_topk_update(const std::vector<ScoredCandidate>& candidates, int k,
                                             double sigma_floor, const Vector6d& prev_mu) {
    if (k < 1 || static_cast<std::size_t>(k) > candidates.size())
        throw std::invalid_argument("hard_topk_update: k out of range");
    std::vector<std::size_t> order(candidates.size());
    std::iota(order.begin(), order.end(), 0u);
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        if (candidates[a].fused_score != candidates[b].fused_score)
            return candidates[a].fused_score > candidates[b].fused_score;
        return a < b;
    });

    Vector6d mu = Vector6d::Zero();
    for (int i = 0; i < k; ++i) mu += detail::unwrapped_action(candidates[order[i]].action, prev_mu);
    mu /= static_cast<double>(k);

    Vector6d var = Vector6d::Zero();
    for (int i = 0; i < k; ++i) {
        const Vector6d diff = detail::unwrapped_action(candidates[order[i]].action, prev_mu) - mu;
        var += diff.cwiseProduct(diff);
    }
    var /= static_cast<double>(k);
    return detail::finalize_distribution(mu, var, sigma_floor);
}

// General weighted refit: mu = sum p(a) a, sigma^2 = sum p(a) (a - mu)^2 with
// p on the simplex.
inline SamplingDistribution weighted_update(const std::vector<ScoredCandidate>& candidates,
                                            const Eigen::VectorXd& weights, double sigma_floor,
                                            const Vector6d& prev_mu) {
    if (static_cast<std::size_t>(weights.size()) != candidates.size())
        throw std::invalid_argument("weighted_update: weight count mismatch");
    if (weights.minCoeff() < 0.0 || std::abs(weights.sum() - 1.0) > 1e-9)
        throw std::invalid_argument("weighted_update: weights must lie on the simplex");

    Vector6d mu = Vector6d::Zero();
    for (std::size_t i = 0; i < candidates.size(); ++i)
        mu += weights(static_cast<Eigen::Index>(i)) *
              detail::unwrapped_action(candidates[i].action, prev_mu);

    Vector6d var = Vector6d::Zero();
    for (std::size_t i = 0; i < candidates.size(); ++i) {
        const Vector6d diff = detail::unwrapped_action(candidates[i].action, prev_mu) - mu;
        var += weights(static_cast<Eigen::Index>(i)) * diff.cwiseProduct(diff);
    }
    return detail::finalize_distribution(mu, var, sigma_floor);
}

struct CemResult {
    RigidMotion motion;
    CemTrace trace;
};

// The full search: T iterations of sample / score / refit, fused reward for
// the first M iterations, current-only afterwards. Returns the motion built
// from the final mean.
inline CemResult cem_register(const RegistrationState& s, const SamplingDistribution& prior,
                              const CemConfig& cfg) {
    cfg.validate();
    SamplingDistribution dist = prior;
    for (int d = 0; d < 3; ++d) dist.mu[d] = wrap_angle(dist.mu[d]);
    for (int d = 0; d < 6; ++d) dist.sigma[d] = std::max(dist.sigma[d], cfg.sigma_floor);

    Rng rng(cfg.rng_seed);
    CemTrace trace;
    trace.score_scale = cfg.score_scale;
    trace.iterations.reserve(static_cast<std::size_t>(cfg.iterations));

    for (int t = 0; t < cfg.iterations; ++t) {
        const std::vector<RigidMotion> actions = sample_candidates(dist, cfg.population, rng);
        const bool use_future = t < cfg.future_iterations;

        std::vector<ScoredCandidate> scored(actions.size());
        parallel_for(actions.size(), [&](std::size_t i) {
            scored[i] = fused_score(s, actions[i], cfg, use_future);
        });

        Eigen::VectorXd scores(static_cast<Eigen::Index>(scored.size()));
        for (std::size_t i = 0; i < scored.size(); ++i)
            scores(static_cast<Eigen::Index>(i)) = scored[i].fused_score;

        SamplingDistribution next;
        int support = 0;
        if (cfg.update_mode == UpdateMode::kSparsemax) {
            Eigen::VectorXd weights = sparsemax(cfg.score_scale * scores);
            for (std::size_t i = 0; i < scored.size(); ++i) {
                scored[i].weight = weights(static_cast<Eigen::Index>(i));
                if (scored[i].weight > 0.0) ++support;
            }
            next = weighted_update(scored, weights, cfg.sigma_floor, dist.mu);
        } else {
            next = hard_topk_update(scored, cfg.elite_count, cfg.sigma_floor, dist.mu);
            // Record the equivalent indicator weights on the elites.
            std::vector<std::size_t> order(scored.size());
            std::iota(order.begin(), order.end(), 0u);
            std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
                if (scored[a].fused_score != scored[b].fused_score)
                    return scored[a].fused_score > scored[b].fused_score;
                return a < b;
            });
            for (int i = 0; i < cfg.elite_count; ++i)
                scored[order[static_cast<std::size_t>(i)]].weight = 1.0 / cfg.elite_count;
            support = cfg.elite_count;
        }

        CemTrace::Iteration rec;
        rec.best_score = scores.maxCoeff();
        rec.mean_score = scores.mean();
        rec.mu = next.mu;
        rec.sigma = next.sigma;
        rec.support_size = support;
        trace.iterations.push_back(rec);

        dist = next;
    }

    return {RigidMotion::from_vector(dist.mu), std::move(trace)};
}

}  // namespace cemreg
