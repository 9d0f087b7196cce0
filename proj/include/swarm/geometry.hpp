#pragma once

#include <Eigen/Core>
#include <Eigen/Geometry>

#include <cmath>

namespace swarm {

inline constexpr double kPi = 3.14159265358979323846;

/// Wraps an angle into (-pi, pi].
inline double wrap_angle(double a) {
    a = std::remainder(a, 2.0 * kPi);
    if (a <= -kPi) a = kPi;
    return a;
}

/// Rotation matrix wrapper. Invariants: orthonormal, det = +1.
struct Rot3 {
    Eigen::Matrix3d m = Eigen::Matrix3d::Identity();

    static Rot3 identity() { return {}; }
    static Rot3 from_quaternion(const Eigen::Quaterniond& q) { return {q.normalized().toRotationMatrix()}; }

    Eigen::Quaterniond quaternion() const { return Eigen::Quaterniond(m); }
    Rot3 transpose() const { return {m.transpose()}; }

    /// Rotation angle in [0, pi].
    double angle() const {
        double c = 0.5 * (m.trace() - 1.0);
        return std::acos(std::clamp(c, -1.0, 1.0));
    }

    bool is_valid(double tol = 1e-9) const {
        return (m.transpose() * m - Eigen::Matrix3d::Identity()).norm() < tol &&
               std::abs(m.determinant() - 1.0) < tol;
    }

    Eigen::Vector3d operator*(const Eigen::Vector3d& v) const { return m * v; }
    Rot3 operator*(const Rot3& o) const { return {m * o.m}; }
};

/// Rotation about +z by yaw radians.
inline Rot3 rotz(double yaw) {
    const double c = std::cos(yaw), s = std::sin(yaw);
    Rot3 r;
    r.m << c, -s, 0.0,
           s,  c, 0.0,
           0.0, 0.0, 1.0;
    return r;
}

/// Derivative of rotz with respect to yaw.
inline Eigen::Matrix3d drotz(double yaw) {
    const double c = std::cos(yaw), s = std::sin(yaw);
    Eigen::Matrix3d d;
    d << -s, -c, 0.0,
          c, -s, 0.0,
          0.0, 0.0, 0.0;
    return d;
}

/// Yaw angle of a rotation: atan2 of the rotated x-axis projected on the
/// world xy plane, in (-pi, pi]. A rotation mapping the x-axis to +-z has
/// no defined yaw; returns 0 with *degenerate set.
inline double yaw_of(const Rot3& r, bool* degenerate = nullptr) {
    const double xx = r.m(0, 0), yx = r.m(1, 0);
    if (degenerate) *degenerate = false;
    if (std::abs(xx) < 1e-12 && std::abs(yx) < 1e-12) {
        if (degenerate) *degenerate = true;
        return 0.0;
    }
    return wrap_angle(std::atan2(yx, xx));
}

/// 4-DoF pose: translation plus yaw. Yaw kept in (-pi, pi] by all ops.
struct Pose4 {
    double x = 0.0, y = 0.0, z = 0.0, yaw = 0.0;

    static Pose4 identity() { return {}; }
    static Pose4 from(const Eigen::Vector3d& p, double yaw) { return {p.x(), p.y(), p.z(), yaw}; }

    Eigen::Vector3d position() const { return {x, y, z}; }
    void set_position(const Eigen::Vector3d& p) { x = p.x(); y = p.y(); z = p.z(); }

    bool is_finite() const {
        return std::isfinite(x) && std::isfinite(y) && std::isfinite(z) && std::isfinite(yaw);
    }
};

inline Pose4 compose4(const Pose4& a, const Pose4& b) {
    Eigen::Vector3d t = rotz(a.yaw) * b.position() + a.position();
    return Pose4::from(t, wrap_angle(a.yaw + b.yaw));
}

inline Pose4 inverse4(const Pose4& a) {
    Eigen::Vector3d t = -(rotz(-a.yaw) * a.position());
    return Pose4::from(t, wrap_angle(-a.yaw));
}

/// Pose of b expressed in the frame of a: inverse4(a) * b.
inline Pose4 relative4(const Pose4& a, const Pose4& b) {
    return compose4(inverse4(a), b);
}

/// 6-DoF pose.
struct Pose6 {
    Rot3 rotation;
    Eigen::Vector3d translation = Eigen::Vector3d::Zero();

    static Pose6 identity() { return {}; }
};

inline Pose6 compose6(const Pose6& a, const Pose6& b) {
    return {a.rotation * b.rotation, a.rotation * b.translation + a.translation};
}

inline Pose6 inverse6(const Pose6& a) {
    Rot3 rt = a.rotation.transpose();
    return {rt, -(rt * a.translation)};
}

inline Pose6 relative6(const Pose6& a, const Pose6& b) {
    return compose6(inverse6(a), b);
}

/// 4-DoF projection: translation plus the yaw of the rotation.
inline Pose4 project_to_4dof(const Pose6& t, bool* degenerate = nullptr) {
    return Pose4::from(t.translation, yaw_of(t.rotation, degenerate));
}

/// Recovers a 6-DoF pose from an estimated 4-DoF pose and the drone's VIO:
/// the VIO rotation supplies the drift-free roll/pitch while the yaw drift
/// is replaced by the estimate. vio4 must be the 4-DoF projection of vio6.
inline Pose6 lift_to_6dof(const Pose4& p4, const Pose6& vio6, const Pose4& vio4) {
    Pose6 out;
    out.rotation = rotz(wrap_angle(p4.yaw - vio4.yaw)) * vio6.rotation;
    out.translation = p4.position();
    return out;
}

}  // namespace swarm
