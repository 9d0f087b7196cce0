#pragma once

#include <Eigen/Core>

#include <optional>
#include <utility>

#include "swarm/geometry.hpp"
#include "swarm/types.hpp"

namespace swarm {

/// Relative 4-DoF pose between two consecutive keyframes of one drone,
/// taken from its VIO stream.
struct OdometryEdge {
    DroneId drone = kInvalidDrone;
    double t_prev = 0.0;
    double t = 0.0;
    Pose4 delta;
    Eigen::Vector4d sigma = Eigen::Vector4d::Ones();  // (m, m, m, rad)
};

/// UWB range between drones i and j, measured by i.
struct DistanceEdge {
    DroneId i = kInvalidDrone;
    DroneId j = kInvalidDrone;
    double t = 0.0;
    double d = 0.0;       // meters
    double sigma = 0.15;  // meters
};

/// Bearing plus inverse depth of a detected drone, in the observer's
/// 4-DoF body frame.
struct DetectionEdge {
    DroneId observer = kInvalidDrone;
    DroneId target = kInvalidDrone;
    double t = 0.0;
    Eigen::Vector3d dir = Eigen::Vector3d::UnitZ();  // unit, body frame
    double inv_depth = 0.0;                          // 1/m
    Rot3 cam_rot;                                    // camera in body frame
    Eigen::Vector3d cam_pos = Eigen::Vector3d::Zero();
    double sigma_dir = 0.02;        // rad
    double sigma_inv_depth = 0.01;  // 1/m
};

/// Relative 4-DoF pose between two keyframes (possibly different drones
/// and times) produced by place recognition.
struct MapEdge {
    DroneId from_drone = kInvalidDrone;
    double from_t = 0.0;
    DroneId to_drone = kInvalidDrone;
    double to_t = 0.0;
    Pose4 rel;
    Eigen::Vector4d sigma = Eigen::Vector4d(0.05, 0.05, 0.05, 0.02);
    int inliers = 0;
};

/// Physical drone width and virtual-camera focal length used by the
/// bounding-box detection model.
struct DroneGeometry {
    double width_m = 0.4;
    double focal_px = 250.0;
};

OdometryEdge make_odometry_edge(DroneId drone, double t_prev, double t,
                                const Pose4& p_prev, const Pose4& p_now,
                                const Eigen::Vector4d& sigma);

/// Converts a bounding box (center in pixels relative to the principal
/// point, width in pixels) into a body-frame unit direction and inverse
/// depth. Returns nullopt when width_px <= 0.
std::optional<std::pair<Eigen::Vector3d, double>> bbox_to_detection(
    const Eigen::Vector2d& center_px, double width_px, const DroneGeometry& geom,
    const Rot3& cam_rot, const Eigen::Vector3d& cam_pos);

/// Noiseless detection generator: direction and inverse depth of a target
/// at rel_pos_body (observer 4-DoF body frame). Returns nullopt at zero range.
std::optional<std::pair<Eigen::Vector3d, double>> detection_forward_model(
    const Eigen::Vector3d& rel_pos_body, const Rot3& cam_rot,
    const Eigen::Vector3d& cam_pos);

/// Inverse of the forward model: the pixel bounding box a drone at
/// rel_pos_body would produce. Valid only in front of the camera.
std::optional<std::pair<Eigen::Vector2d, double>> detection_to_bbox(
    const Eigen::Vector3d& rel_pos_body, const DroneGeometry& geom,
    const Rot3& cam_rot, const Eigen::Vector3d& cam_pos);

/// Robust loss on a squared residual s: identity below delta^2, then
/// 2*delta*sqrt(s) - delta^2.
inline double huber(double s, double delta) {
    const double d2 = delta * delta;
    if (s <= d2) return s;
    return 2.0 * delta * std::sqrt(s) - d2;
}

/// Derivative of huber with respect to s (the IRLS weight).
inline double huber_weight(double s, double delta) {
    const double d2 = delta * delta;
    if (s <= d2) return 1.0;
    return delta / std::sqrt(s);
}

/// Deterministic orthonormal basis of the plane orthogonal to unit vector u.
std::pair<Eigen::Vector3d, Eigen::Vector3d> tangent_basis(const Eigen::Vector3d& u);

// Whitened residuals. States are the poses the edge is incident to; the
// caller resolves variable lookup.

/// (x, y, z, yaw) of delta^-1 * (prev^-1 * now), componentwise / sigma.
Eigen::Vector4d residual_odometry(const OdometryEdge& e, const Pose4& prev, const Pose4& now);

/// Same shape across drones/times: rel^-1 * (from^-1 * to), whitened.
Eigen::Vector4d residual_map_edge(const MapEdge& e, const Pose4& from, const Pose4& to);

/// (d - |xi - xj|) / sigma.
double residual_distance(const DistanceEdge& e, const Eigen::Vector3d& xi,
                         const Eigen::Vector3d& xj);

/// Tangent-plane projection of the direction error plus the inverse-depth
/// error, whitened. Returns nullopt when the predicted target position
/// coincides with the camera.
std::optional<Eigen::Vector3d> residual_detection(const DetectionEdge& e,
                                                  const Pose4& observer,
                                                  const Pose4& target);

// Analytic Jacobians of the whitened residuals w.r.t. the incident Pose4
// variables, parameter order (x, y, z, yaw).

void jacobian_odometry(const OdometryEdge& e, const Pose4& prev, const Pose4& now,
                       Eigen::Matrix4d* J_prev, Eigen::Matrix4d* J_now);

void jacobian_map_edge(const MapEdge& e, const Pose4& from, const Pose4& to,
                       Eigen::Matrix4d* J_from, Eigen::Matrix4d* J_to);

void jacobian_distance(const DistanceEdge& e, const Pose4& pi, const Pose4& pj,
                       Eigen::RowVector4d* J_i, Eigen::RowVector4d* J_j);

/// Returns false when the residual is undefined (coincident positions).
bool jacobian_detection(const DetectionEdge& e, const Pose4& observer, const Pose4& target,
                        Eigen::Matrix<double, 3, 4>* J_obs,
                        Eigen::Matrix<double, 3, 4>* J_tgt);

}  // namespace swarm
