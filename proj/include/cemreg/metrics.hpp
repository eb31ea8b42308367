#pragma once

#include <cmath>
#include <stdexcept>

#include "cemreg/state.hpp"

namespace cemreg {

struct RewardParams {
    double epsilon = 0.1;  // maximum allowable inlier distance, normalized units

    explicit RewardParams(double eps = 0.1) : epsilon(eps) {
        if (!(eps > 0.0)) throw std::invalid_argument("epsilon must be positive");
    }
};

namespace detail {

// One direction of Eq-style consensus: mean over `from` of 1{d<=eps}(1 - d/eps),
// with d the closest-point distance into the indexed cloud. Index-ordered sum
// for bit-reproducibility.
inline double consensus_mean(const PointCloud& from, const NeighborIndex& to_index, double epsilon) {
    double sum = 0.0;
    for (const auto& p : from.points) {
        const double d = std::sqrt(to_index.nearest_dist2(p));
        if (d <= epsilon) sum += 1.0 - d / epsilon;
    }
    return sum / static_cast<double>(from.points.size());
}

inline double closest_distance_mean(const PointCloud& from, const NeighborIndex& to_index) {
    double sum = 0.0;
    for (const auto& p : from.points) sum += std::sqrt(to_index.nearest_dist2(p));
    return sum / static_cast<double>(from.points.size());
}

}  // namespace detail

// Maximum-consensus alignment metric D^mc in [0, 2]; 0 means every
// closest-pair distance in both directions is zero.
inline double d_mc(const PointCloud& transformed_source, const PointCloud& target,
                   const NeighborIndex& source_index, const NeighborIndex& target_index,
                   const RewardParams& params) {
    validate_cloud(transformed_source);
    validate_cloud(target);
    return 2.0 - detail::consensus_mean(transformed_source, target_index, params.epsilon)
               - detail::consensus_mean(target, source_index, params.epsilon);
}

inline double d_mc(const RegistrationState& s, const RewardParams& params) {
    return d_mc(*s.source, *s.target, *s.source_index, *s.target_index, params);
}

// D^mc of the state after motion a, without rebuilding any index: the
// source-to-target direction transforms the query point by a, the
// target-to-source direction by a^-1 (rigid motions preserve distances).
inline double d_mc(const RegistrationState& s, const RigidMotion& a, const RewardParams& params) {
    const RigidMotion inv = inverse(a);
    double sum_src = 0.0;
    for (const auto& p : s.source->points) {
        const double d = std::sqrt(s.target_index->nearest_dist2(a.apply(p)));
        if (d <= params.epsilon) sum_src += 1.0 - d / params.epsilon;
    }
    double sum_tgt = 0.0;
    for (const auto& p : s.target->points) {
        const double d = std::sqrt(s.source_index->nearest_dist2(inv.apply(p)));
        if (d <= params.epsilon) sum_tgt += 1.0 - d / params.epsilon;
    }
    return 2.0 - sum_src / static_cast<double>(s.source->points.size())
               - sum_tgt / static_cast<double>(s.target->points.size());
}

// R(s, a) = -D^mc(T(s, a)); in [-2, 0].
inline double reward(const RegistrationState& s, const RigidMotion& a, const RewardParams& params) {
    return -d_mc(s, a, params);
}

// Two-sided Chamfer metric with first-power distances, so that
// D^mc = D^cd / eps whenever eps dominates every closest-pair distance.
inline double chamfer(const PointCloud& transformed_source, const PointCloud& target,
                      const NeighborIndex& source_index, const NeighborIndex& target_index) {
    validate_cloud(transformed_source);
    validate_cloud(target);
    return detail::closest_distance_mean(transformed_source, target_index) +
           detail::closest_distance_mean(target, source_index);
}

inline double chamfer(const RegistrationState& s) {
    return chamfer(*s.source, *s.target, *s.source_index, *s.target_index);
}

// Scaled Geman-McClure estimator: mu x^2 / (mu + x^2).
inline double geman_mcclure(double x, double mu) {
    if (!(mu > 0.0)) throw std::invalid_argument("geman_mcclure: mu must be positive");
    return mu * x * x / (mu + x * x);
}

// Robust alignment loss: mean Geman-McClure penalty of closest-pair distances
// in both directions. Bounded above by 2*mu.
inline double robust_alignment_loss(const PointCloud& transformed_source, const PointCloud& target,
                                    double mu, const NeighborIndex& source_index,
                                    const NeighborIndex& target_index) {
    if (!(mu > 0.0)) throw std::invalid_argument("robust_alignment_loss: mu must be positive");
    validate_cloud(transformed_source);
    validate_cloud(target);
    double sum_src = 0.0;
    for (const auto& p : transformed_source.points)
        sum_src += geman_mcclure(std::sqrt(target_index.nearest_dist2(p)), mu);
    double sum_tgt = 0.0;
    for (const auto& p : target.points)
        sum_tgt += geman_mcclure(std::sqrt(source_index.nearest_dist2(p)), mu);
    return sum_src / static_cast<double>(transformed_source.points.size()) +
           sum_tgt / static_cast<double>(target.points.size());
}

inline double robust_alignment_loss(const RegistrationState& s, double mu) {
    return robust_alignment_loss(*s.source, *s.target, mu, *s.source_index, *s.target_index);
}

struct TransformError {
    double rmse_rotation_deg = 0.0;
    double mae_rotation_deg = 0.0;
    double rmse_translation = 0.0;
    double mae_translation = 0.0;
};

// Per-component errors: Euler angles in degrees with wrap-aware shortest
// difference, translation componentwise. RMSE/MAE aggregate over the 3
// components of each quantity.
inline TransformError transform_error(const RigidMotion& pred, const RigidMotion& truth) {
    constexpr double rad2deg = 180.0 / std::numbers::pi;
    TransformError err;
    double rot_sq = 0.0, rot_abs = 0.0, trans_sq = 0.0, trans_abs = 0.0;
    for (int i = 0; i < 3; ++i) {
        const double de = std::abs(wrap_angle(pred.euler.e[i] - truth.euler.e[i])) * rad2deg;
        rot_sq += de * de;
        rot_abs += de;
        const double dt = std::abs(pred.translation[i] - truth.translation[i]);
        trans_sq += dt * dt;
        trans_abs += dt;
    }
    err.rmse_rotation_deg = std::sqrt(rot_sq / 3.0);
    err.mae_rotation_deg = rot_abs / 3.0;
    err.rmse_translation = std::sqrt(trans_sq / 3.0);
    err.mae_translation = trans_abs / 3.0;
    return err;
}

}  // namespace cemreg
