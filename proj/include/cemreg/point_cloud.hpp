#pragma once

#include <Eigen/Core>
#include <cmath>
#include <optional>
#include <stdexcept>
#include <vector>

namespace cemreg {

// Record of the unit-sphere normalization applied to a cloud, kept so the
// original coordinates can be restored.
struct Normalization {
    Eigen::Vector3d centroid = Eigen::Vector3d::Zero();
    double scale = 1.0;  // max radius before scaling; > 0
};

struct PointCloud {
    std::vector<Eigen::Vector3d> points;
    std::optional<Normalization> normalization;

    std::size_t size() const { return points.size(); }
};

inline bool all_finite(const Eigen::Vector3d& v) {
    return std::isfinite(v.x()) && std::isfinite(v.y()) && std::isfinite(v.z());
}

inline void validate_cloud(const PointCloud& cloud) {
    if (cloud.points.empty()) throw std::invalid_argument("point cloud is empty");
    for (const auto& p : cloud.points) {
        if (!all_finite(p)) throw std::invalid_argument("point cloud contains non-finite coordinate");
    }
}

inline Eigen::Vector3d centroid(const PointCloud& cloud) {
    Eigen::Vector3d c = Eigen::Vector3d::Zero();
    for (const auto& p : cloud.points) c += p;
    return c / static_cast<double>(cloud.points.size());
}

// Shifts the centroid to the origin and scales the farthest point to radius 1.
inline PointCloud normalize_unit_sphere(const PointCloud& cloud) {
    validate_cloud(cloud);
    Eigen::Vector3d c = centroid(cloud);
    double radius = 0.0;
    for (const auto& p : cloud.points) radius = std::max(radius, (p - c).norm());
    if (radius <= 0.0) radius = 1.0;  // all points coincide
    PointCloud out;
    out.points.reserve(cloud.points.size());
    for (const auto& p : cloud.points) out.points.push_back((p - c) / radius);
    out.normalization = Normalization{c, radius};
    return out;
}

// Applies an externally computed normalization record to a cloud (used when
// source and target must share one frame).
inline PointCloud apply_normalization(const PointCloud& cloud, const Normalization& norm) {
    validate_cloud(cloud);
    if (norm.scale <= 0.0) throw std::invalid_argument("normalization scale must be positive");
    PointCloud out;
    out.points.reserve(cloud.points.size());
    for (const auto& p : cloud.points) out.points.push_back((p - norm.centroid) / norm.scale);
    out.normalization = norm;
    return out;
}

inline PointCloud denormalize(const PointCloud& cloud) {
    if (!cloud.normalization) return cloud;
    const auto& n = *cloud.normalization;
    PointCloud out;
    out.points.reserve(cloud.points.size());
    for (const auto& p : cloud.points) out.points.push_back(p * n.scale + n.centroid);
    return out;
}

}  // namespace cemreg
