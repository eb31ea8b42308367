#pragma once

#include <Eigen/Core>
#include <algorithm>
#include <functional>
#include <utility>
#include <vector>

#include "cemreg/cem.hpp"
#include "cemreg/rigid_solver.hpp"
#include "cemreg/state.hpp"

namespace cemreg {

// Produces feature matrices for a (source, target) pair; rows are per-point
// features, columns standardized jointly so inner products are comparable
// across the two clouds.
using FeatureFn =
    std::function<std::pair<Eigen::MatrixXd, Eigen::MatrixXd>(const PointCloud&, const PointCloud&)>;

struct PriorResult {
    SamplingDistribution dist;
    bool fallback = false;  // degenerate solve; the fixed N(0, I) prior was returned
};

inline SamplingDistribution fixed_prior(const Vector6d& mu0, const Vector6d& sigma0,
                                        double sigma_floor = 1e-4) {
    if (sigma0.minCoeff() < 0.0) throw std::invalid_argument("fixed_prior: sigma0 must be nonnegative");
    if (!mu0.allFinite() || !sigma0.allFinite())
        throw std::invalid_argument("fixed_prior: parameters must be finite");
    SamplingDistribution dist;
    dist.mu = mu0;
    for (int d = 0; d < 3; ++d) dist.mu[d] = wrap_angle(mu0[d]);
    dist.sigma = sigma0.cwiseMax(sigma_floor);
    return dist;
}

// The pre-defined baseline: unit sigma on rotation, half the normalized cloud
// radius on translation.
inline SamplingDistribution default_prior(double sigma_floor = 1e-4) {
    Vector6d sigma;
    sigma << 1.0, 1.0, 1.0, 0.5, 0.5, 0.5;
    return fixed_prior(Vector6d::Zero(), sigma, sigma_floor);
}

namespace detail {

// Raw per-point descriptor: coordinates plus the 6 distinct entries of the
// covariance of the point's k nearest neighbors.
inline Eigen::MatrixXd covariance_descriptor(const PointCloud& cloud, int k) {
    const std::size_t n = cloud.points.size();
    const int kk = std::min<int>(k, static_cast<int>(n) - 1);
    Eigen::MatrixXd feat(n, 9);
    std::vector<std::pair<double, std::size_t>> dists(n);
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = 0; j < n; ++j)
            dists[j] = {(cloud.points[j] - cloud.points[i]).squaredNorm(), j};
        dists[i].first = std::numeric_limits<double>::infinity();  // exclude self
        std::partial_sort(dists.begin(), dists.begin() + kk, dists.end());

        Eigen::Vector3d mean = Eigen::Vector3d::Zero();
        for (int j = 0; j < kk; ++j) mean += cloud.points[dists[static_cast<std::size_t>(j)].second];
        mean /= static_cast<double>(kk);
        Eigen::Matrix3d cov = Eigen::Matrix3d::Zero();
        for (int j = 0; j < kk; ++j) {
            const Eigen::Vector3d d = cloud.points[dists[static_cast<std::size_t>(j)].second] - mean;
            cov += d * d.transpose();
        }
        cov /= static_cast<double>(kk);

        feat.row(static_cast<Eigen::Index>(i)) << cloud.points[i].x(), cloud.points[i].y(),
            cloud.points[i].z(), cov(0, 0), cov(0, 1), cov(0, 2), cov(1, 1), cov(1, 2), cov(2, 2);
    }
    return feat;
}

}  // namespace detail

// Default feature: [coordinates | local 16-NN covariance entries], each column
// standardized over the union of both clouds, then each row rescaled to norm
// logit_scale. Row normalization makes the inner-product argmax the cosine
// argmax (a point's own feature always wins on identical clouds), and the
// scale drives the matching softmax into saturation on clear matches.
inline FeatureFn covariance_feature_fn(double logit_scale = 1000.0, int neighbors = 16) {
    return [logit_scale, neighbors](const PointCloud& source, const PointCloud& target) {
        Eigen::MatrixXd fs = detail::covariance_descriptor(source, neighbors);
        Eigen::MatrixXd ft = detail::covariance_descriptor(target, neighbors);
        const Eigen::Index total = fs.rows() + ft.rows();
        for (Eigen::Index c = 0; c < fs.cols(); ++c) {
            const double mean = (fs.col(c).sum() + ft.col(c).sum()) / static_cast<double>(total);
            double var = (fs.col(c).array() - mean).square().sum() +
                         (ft.col(c).array() - mean).square().sum();
            var /= static_cast<double>(total);
            const double sd = std::sqrt(var);
            if (sd < 1e-12) {
                fs.col(c).setZero();
                ft.col(c).setZero();
            } else {
                fs.col(c) = (fs.col(c).array() - mean) / sd;
                ft.col(c) = (ft.col(c).array() - mean) / sd;
            }
        }
        auto scale_rows = [logit_scale](Eigen::MatrixXd& f) {
            for (Eigen::Index r = 0; r < f.rows(); ++r) {
                const double norm = f.row(r).norm();
                if (norm > 1e-12) f.row(r) *= logit_scale / norm;
            }
        };
        scale_rows(fs);
        scale_rows(ft);
        return std::make_pair(std::move(fs), std::move(ft));
    };
}

struct CorrespondencePriorOptions {
    double sigma_scale_rotation = 0.5;
    double sigma_scale_translation = 0.5;
    // Floors default to the fixed-prior sigma: the solve residual can only
    // widen the search, never narrow it below the uninformed baseline, so a
    // biased mu0 cannot trap the downstream search.
    double sigma_min_rotation = 1.0;
    double sigma_min_translation = 0.5;
    double sigma_floor = 1e-4;
};

// Soft-correspondence prior: matching map + weighted matches + SVD solve give
// mu0 = [e, t]; sigma0 scales with the solve residual in place of a learned
// variance head. Falls back to the fixed N(0, I) prior on degenerate geometry.
inline PriorResult correspondence_prior(const RegistrationState& s, const FeatureFn& feature_fn,
                                        const CorrespondencePriorOptions& opts = {}) {
    if (s.source->points.size() < 3 || s.target->points.size() < 3)
        throw std::invalid_argument("correspondence_prior: both clouds need at least 3 points");

    const auto [fs, ft] = feature_fn(*s.source, *s.target);
    const std::vector<Eigen::Vector3d> matched = soft_correspondence(fs, ft, *s.target);

    std::vector<Correspondence> pairs(s.source->points.size());
    for (std::size_t i = 0; i < pairs.size(); ++i)
        pairs[i] = {s.source->points[i], matched[i], 1.0};

    KabschResult solve;
    bool failed = false;
    try {
        solve = kabsch_solve(pairs);
    } catch (const std::invalid_argument&) {
        failed = true;
    }
    if (failed || solve.degenerate) {
        PriorResult out;
        out.dist = default_prior(opts.sigma_floor);
        out.fallback = true;
        return out;
    }

    PriorResult out;
    out.dist.mu = solve.motion.to_vector();
    const double r = solve.residual_rms;
    for (int d = 0; d < 3; ++d)
        out.dist.sigma[d] = std::max({opts.sigma_scale_rotation * r, opts.sigma_min_rotation,
                                      opts.sigma_floor});
    for (int d = 3; d < 6; ++d)
        out.dist.sigma[d] = std::max({opts.sigma_scale_translation * r, opts.sigma_min_translation,
                                      opts.sigma_floor});
    return out;
}

}  // namespace cemreg
