#pragma once

#include <Eigen/Core>
#include <Eigen/SVD>
#include <cmath>
#include <limits>
#include <span>
#include <stdexcept>
#include <vector>

#include "cemreg/state.hpp"

namespace cemreg {

struct Correspondence {
    Eigen::Vector3d source;
    Eigen::Vector3d matched;
    double weight = 1.0;
};

struct KabschResult {
    RigidMotion motion;
    bool degenerate = false;  // rank-deficient cross-covariance; motion is best effort
    double residual_rms = 0.0;  // sqrt of the weighted mean squared residual
};

// Weighted least-squares rigid alignment: minimizes sum w_i |R x_i + t - y_i|^2
// with det(R) = +1 enforced (reflection corrected).
inline KabschResult kabsch_solve(std::span<const Correspondence> pairs) {
    double wsum = 0.0;
    std::size_t positive = 0;
    for (const auto& c : pairs) {
        if (!(c.weight >= 0.0) || !std::isfinite(c.weight))
            throw std::invalid_argument("kabsch_solve: weights must be finite and nonnegative");
        if (c.weight > 0.0) ++positive;
        wsum += c.weight;
    }
    if (positive < 3 || wsum <= 0.0)
        throw std::invalid_argument("kabsch_solve: need at least 3 positively weighted pairs");

    Eigen::Vector3d src_mean = Eigen::Vector3d::Zero(), dst_mean = Eigen::Vector3d::Zero();
    for (const auto& c : pairs) {
        src_mean += c.weight * c.source;
        dst_mean += c.weight * c.matched;
    }
    src_mean /= wsum;
    dst_mean /= wsum;

    Eigen::Matrix3d cross = Eigen::Matrix3d::Zero();
    for (const auto& c : pairs)
        cross += c.weight * (c.source - src_mean) * (c.matched - dst_mean).transpose();
    cross /= wsum;

    Eigen::JacobiSVD<Eigen::Matrix3d> svd(cross, Eigen::ComputeFullU | Eigen::ComputeFullV);
    Eigen::Matrix3d u = svd.matrixU(), v = svd.matrixV();
    Eigen::Vector3d d = Eigen::Vector3d::Ones();
    if ((v * u.transpose()).determinant() < 0.0) d.z() = -1.0;
    Eigen::Matrix3d rot = v * d.asDiagonal() * u.transpose();

    KabschResult result;
    const Eigen::Vector3d sv = svd.singularValues();
    // Two vanishing singular values leave the rotation about the remaining
    // axis unconstrained.
    result.degenerate = sv(0) <= 0.0 || sv(1) <= 1e-12 * sv(0);

    Eigen::Vector3d t = dst_mean - rot * src_mean;
    result.motion = RigidMotion::from_matrix(rot, t);

    double residual = 0.0;
    for (const auto& c : pairs)
        residual += c.weight * (rot * c.source + t - c.matched).squaredNorm();
    result.residual_rms = std::sqrt(residual / wsum);
    return result;
}

// Soft matching: row-stochastic map M_ij = softmax_j(<f_xi, f_yj>), then
// y_hat_i = sum_j M_ij y_j. Rows are shift-invariant in the logits.
inline std::vector<Eigen::Vector3d> soft_correspondence(const Eigen::MatrixXd& features_source,
                                                        const Eigen::MatrixXd& features_target,
                                                        const PointCloud& target) {
    if (features_source.cols() != features_target.cols() || features_source.cols() < 1)
        throw std::invalid_argument("soft_correspondence: feature dimensions disagree");
    if (static_cast<std::size_t>(features_target.rows()) != target.points.size())
        throw std::invalid_argument("soft_correspondence: target feature count mismatch");
    if (!features_source.allFinite() || !features_target.allFinite())
        throw std::invalid_argument("soft_correspondence: features must be finite");

    const Eigen::Index n = features_source.rows(), m = features_target.rows();
    std::vector<Eigen::Vector3d> matched(static_cast<std::size_t>(n));
    Eigen::VectorXd logits(m);
    for (Eigen::Index i = 0; i < n; ++i) {
        logits.noalias() = features_target * features_source.row(i).transpose();
        const double shift = logits.maxCoeff();
        double z = 0.0;
        Eigen::Vector3d acc = Eigen::Vector3d::Zero();
        for (Eigen::Index j = 0; j < m; ++j) {
            const double w = std::exp(logits(j) - shift);
            z += w;
            acc += w * target.points[static_cast<std::size_t>(j)];
        }
        matched[static_cast<std::size_t>(i)] = acc / z;
    }
    return matched;
}

struct IcpConfig {
    int max_iterations = 10;
    double mse_tolerance = 1e-9;  // stop when MSE improvement falls below this

    IcpConfig() = default;
    IcpConfig(int iters, double tol) : max_iterations(iters), mse_tolerance(tol) {
        if (iters < 1) throw std::invalid_argument("IcpConfig: max_iterations must be >= 1");
        if (!(tol >= 0.0)) throw std::invalid_argument("IcpConfig: mse_tolerance must be nonnegative");
    }
};

struct IcpResult {
    RigidMotion motion;          // accumulated motion relative to the input state
    double final_mse = 0.0;      // correspondence MSE after the last solve
    bool degenerate = false;     // a solve step hit degeneracy; stopped early
    std::vector<double> mse_history;
};

// Point-to-point ICP with unit weights: alternates nearest-neighbor matching
// against the target and a Kabsch solve until max_iterations or the MSE stops
// improving.
// The loop can be started from `initial`; the returned motion is then relative
// to the state already transformed by `initial`, so refining a sampled
// candidate needs no source index rebuild.
inline IcpResult icp_refine(const RegistrationState& s, const RigidMotion& initial,
                            const IcpConfig& cfg = IcpConfig()) {
    if (s.source->points.size() < 3 || s.target->points.size() < 3)
        throw std::invalid_argument("icp: both clouds need at least 3 points");

    IcpResult result;
    result.motion = RigidMotion::identity();
    std::vector<Eigen::Vector3d> current(s.source->points.size());
    for (std::size_t i = 0; i < current.size(); ++i) current[i] = initial.apply(s.source->points[i]);
    std::vector<Correspondence> corr(current.size());

    double prev_mse = std::numeric_limits<double>::infinity();
    for (int iter = 0; iter < cfg.max_iterations; ++iter) {
        for (std::size_t i = 0; i < current.size(); ++i) {
            const auto nn = s.target_index->nearest(current[i]);
            corr[i] = {current[i], s.target->points[nn.index], 1.0};
        }
        KabschResult step;
        try {
            step = kabsch_solve(corr);
        } catch (const std::invalid_argument&) {
            result.degenerate = true;
            break;
        }
        if (step.degenerate) result.degenerate = true;

        result.motion = compose(step.motion, result.motion);
        for (auto& p : current) p = step.motion.apply(p);

        double mse = 0.0;
        for (const auto& c : corr) mse += (step.motion.apply(c.source) - c.matched).squaredNorm();
        mse /= static_cast<double>(corr.size());
        result.mse_history.push_back(mse);
        result.final_mse = mse;

        if (result.degenerate) break;
        if (prev_mse - mse < cfg.mse_tolerance) break;
        prev_mse = mse;
    }
    return result;
}

inline IcpResult icp(const RegistrationState& s, const IcpConfig& cfg = IcpConfig()) {
    return icp_refine(s, RigidMotion::identity(), cfg);
}

}  // namespace cemreg
