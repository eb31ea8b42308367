#pragma once

#include <Eigen/Core>
#include <Eigen/Geometry>
#include <cmath>
#include <numbers>
#include <stdexcept>

#include "cemreg/point_cloud.hpp"

namespace cemreg {

using Vector6d = Eigen::Matrix<double, 6, 1>;

// Wraps an angle into [-pi, pi].
inline double wrap_angle(double a) {
    constexpr double pi = std::numbers::pi;
    constexpr double two_pi = 2.0 * std::numbers::pi;
    if (a >= -pi && a <= pi) return a;  // exact for in-range values
    a = std::fmod(a + pi, two_pi);
    if (a < 0.0) a += two_pi;
    return a - pi;
}

struct EulerAngles {
    Eigen::Vector3d e = Eigen::Vector3d::Zero();  // radians, each in [-pi, pi]

    EulerAngles() = default;
    explicit EulerAngles(const Eigen::Vector3d& angles)
        : e(wrap_angle(angles.x()), wrap_angle(angles.y()), wrap_angle(angles.z())) {
        if (!all_finite(angles)) throw std::invalid_argument("euler angles must be finite");
    }
    EulerAngles(double e1, double e2, double e3) : EulerAngles(Eigen::Vector3d(e1, e2, e3)) {}
};

// Convention: R = Rz(e3) * Ry(e2) * Rx(e1).
inline Eigen::Matrix3d euler_to_matrix(const EulerAngles& euler) {
    if (!all_finite(euler.e)) throw std::invalid_argument("euler angles must be finite");
    const double c1 = std::cos(euler.e.x()), s1 = std::sin(euler.e.x());
    const double c2 = std::cos(euler.e.y()), s2 = std::sin(euler.e.y());
    const double c3 = std::cos(euler.e.z()), s3 = std::sin(euler.e.z());
    Eigen::Matrix3d r;
    r << c3 * c2, c3 * s2 * s1 - s3 * c1, c3 * s2 * c1 + s3 * s1,
         s3 * c2, s3 * s2 * s1 + c3 * c1, s3 * s2 * c1 - c3 * s1,
             -s2,                c2 * s1,                c2 * c1;
    return r;
}

inline bool is_rotation_matrix(const Eigen::Matrix3d& r, double tol) {
    Eigen::Matrix3d gram = r.transpose() * r;
    if ((gram - Eigen::Matrix3d::Identity()).cwiseAbs().maxCoeff() > tol) return false;
    return std::abs(r.determinant() - 1.0) <= tol;
}

// Inverse of euler_to_matrix. At gimbal lock (|cos e2| ~ 0) e1 is fixed to 0.
inline EulerAngles matrix_to_euler(const Eigen::Matrix3d& r) {
    if (!r.allFinite() || !is_rotation_matrix(r, 1e-6))
        throw std::invalid_argument("matrix_to_euler requires an orthogonal matrix with det=+1");
    const double s2 = std::clamp(-r(2, 0), -1.0, 1.0);
    const double c2 = std::sqrt(std::max(0.0, 1.0 - s2 * s2));
    if (c2 < 1e-9) {
        const double e2 = s2 > 0 ? std::numbers::pi / 2.0 : -std::numbers::pi / 2.0;
        // e1 and e3 are coupled; resolve with e1 = 0.
        const double e3 = std::atan2(-r(0, 1), r(1, 1));
        return EulerAngles(0.0, e2, e3);
    }
    const double e1 = std::atan2(r(2, 1), r(2, 2));
    const double e2 = std::asin(s2);
    const double e3 = std::atan2(r(1, 0), r(0, 0));
    return EulerAngles(e1, e2, e3);
}

// 6-DoF rigid motion a = [e, t] with the rotation matrix cached.
struct RigidMotion {
    EulerAngles euler;
    Eigen::Vector3d translation = Eigen::Vector3d::Zero();
    Eigen::Matrix3d rotation = Eigen::Matrix3d::Identity();

    RigidMotion() = default;
    RigidMotion(const EulerAngles& e, const Eigen::Vector3d& t)
        : euler(e), translation(t), rotation(euler_to_matrix(e)) {
        if (!all_finite(t)) throw std::invalid_argument("translation must be finite");
    }

    static RigidMotion identity() { return RigidMotion(); }

    static RigidMotion from_matrix(const Eigen::Matrix3d& r, const Eigen::Vector3d& t) {
        EulerAngles e = matrix_to_euler(r);
        RigidMotion m(e, t);
        return m;
    }

    static RigidMotion from_vector(const Vector6d& v) {
        return RigidMotion(EulerAngles(v.head<3>()), v.tail<3>());
    }

    Vector6d to_vector() const {
        Vector6d v;
        v << euler.e, translation;
        return v;
    }

    Eigen::Vector3d apply(const Eigen::Vector3d& p) const { return rotation * p + translation; }
};

// Applying the result equals applying inner then outer.
inline RigidMotion compose(const RigidMotion& outer, const RigidMotion& inner) {
    Eigen::Matrix3d r = outer.rotation * inner.rotation;
    Eigen::Vector3d t = outer.rotation * inner.translation + outer.translation;
    return RigidMotion::from_matrix(r, t);
}

inline RigidMotion inverse(const RigidMotion& m) {
    Eigen::Matrix3d rt = m.rotation.transpose();
    return RigidMotion::from_matrix(rt, -(rt * m.translation));
}

inline PointCloud transform_cloud(const PointCloud& cloud, const RigidMotion& motion) {
    PointCloud out;
    out.points.reserve(cloud.points.size());
    for (const auto& p : cloud.points) out.points.push_back(motion.apply(p));
    out.normalization = cloud.normalization;
    return out;
}

}  // namespace cemreg
