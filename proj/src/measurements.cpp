#include "swarm/measurements.hpp"

#include <cmath>

namespace swarm {

namespace {
constexpr double kMinRange = 1e-9;

Eigen::Vector4d whiten(const Pose4& r, const Eigen::Vector4d& sigma) {
    Eigen::Vector4d v(r.x, r.y, r.z, wrap_angle(r.yaw));
    return v.cwiseQuotient(sigma);
}

// Shared core of the odometry and map-edge residuals: both compare a
// measured relative pose against the relative pose of two state variables.
Eigen::Vector4d residual_between(const Pose4& meas, const Pose4& from, const Pose4& to,
                                 const Eigen::Vector4d& sigma) {
    return whiten(relative4(meas, relative4(from, to)), sigma);
}

void jacobian_between(const Pose4& meas, const Pose4& from, const Pose4& to,
                      const Eigen::Vector4d& sigma,
                      Eigen::Matrix4d* J_from, Eigen::Matrix4d* J_to) {
    const Eigen::Matrix3d R = rotz(-meas.yaw - from.yaw).m;
    const Eigen::Vector3d dp = to.position() - from.position();

    if (J_from) {
        J_from->setZero();
        J_from->topLeftCorner<3, 3>() = -R;
        J_from->block<3, 1>(0, 3) = -(rotz(-meas.yaw).m * drotz(-from.yaw) * dp);
        (*J_from)(3, 3) = -1.0;
        for (int r = 0; r < 4; ++r) J_from->row(r) /= sigma(r);
    }
    if (J_to) {
        J_to->setZero();
        J_to->topLeftCorner<3, 3>() = R;
        (*J_to)(3, 3) = 1.0;
        for (int r = 0; r < 4; ++r) J_to->row(r) /= sigma(r);
    }
}
}  // namespace

OdometryEdge make_odometry_edge(DroneId drone, double t_prev, double t,
                                const Pose4& p_prev, const Pose4& p_now,
                                const Eigen::Vector4d& sigma) {
    OdometryEdge e;
    e.drone = drone;
    e.t_prev = t_prev;
    e.t = t;
    e.delta = relative4(p_prev, p_now);
    e.sigma = sigma;
    return e;
}

std::optional<std::pair<Eigen::Vector3d, double>> bbox_to_detection(
    const Eigen::Vector2d& center_px, double width_px, const DroneGeometry& geom,
    const Rot3& cam_rot, const Eigen::Vector3d& /*cam_pos*/) {
    if (width_px <= 0.0) return std::nullopt;
    Eigen::Vector3d ray(center_px.x(), center_px.y(), geom.focal_px);
    Eigen::Vector3d dir = cam_rot * ray.normalized();
    double inv_depth = width_px / (geom.width_m * geom.focal_px);
    return std::make_pair(dir, inv_depth);
}

std::optional<std::pair<Eigen::Vector3d, double>> detection_forward_model(
    const Eigen::Vector3d& rel_pos_body, const Rot3& /*cam_rot*/,
    const Eigen::Vector3d& cam_pos) {
    const Eigen::Vector3d p = rel_pos_body - cam_pos;
    const double n = p.norm();
    if (n < kMinRange) return std::nullopt;
    return std::make_pair(Eigen::Vector3d(p / n), 1.0 / n);
}

std::optional<std::pair<Eigen::Vector2d, double>> detection_to_bbox(
    const Eigen::Vector3d& rel_pos_body, const DroneGeometry& geom,
    const Rot3& cam_rot, const Eigen::Vector3d& cam_pos) {
    const Eigen::Vector3d v = cam_rot.transpose() * (rel_pos_body - cam_pos);
    if (v.z() < kMinRange) return std::nullopt;  // behind or beside the camera
    Eigen::Vector2d center(geom.focal_px * v.x() / v.z(), geom.focal_px * v.y() / v.z());
    double width_px = geom.width_m * geom.focal_px / v.norm();
    return std::make_pair(center, width_px);
}

std::pair<Eigen::Vector3d, Eigen::Vector3d> tangent_basis(const Eigen::Vector3d& u) {
    // Pick the world axis least aligned with u; stable for any unit input.
    int k = 0;
    double best = std::abs(u.x());
    if (std::abs(u.y()) < best) { k = 1; best = std::abs(u.y()); }
    if (std::abs(u.z()) < best) { k = 2; }
    Eigen::Vector3d e = Eigen::Vector3d::Unit(k);
    Eigen::Vector3d b1 = u.cross(e).normalized();
    Eigen::Vector3d b2 = u.cross(b1);
    return {b1, b2};
}

Eigen::Vector4d residual_odometry(const OdometryEdge& e, const Pose4& prev, const Pose4& now) {
    return residual_between(e.delta, prev, now, e.sigma);
}

Eigen::Vector4d residual_map_edge(const MapEdge& e, const Pose4& from, const Pose4& to) {
    return residual_between(e.rel, from, to, e.sigma);
}

double residual_distance(const DistanceEdge& e, const Eigen::Vector3d& xi,
                         const Eigen::Vector3d& xj) {
    return (e.d - (xi - xj).norm()) / e.sigma;
}

std::optional<Eigen::Vector3d> residual_detection(const DetectionEdge& e,
                                                  const Pose4& observer,
                                                  const Pose4& target) {
    const Eigen::Vector3d body = relative4(observer, target).position();
    const Eigen::Vector3d p = body - e.cam_pos;
    const double n = p.norm();
    if (n < kMinRange) return std::nullopt;
    const Eigen::Vector3d u_pred = p / n;
    auto [b1, b2] = tangent_basis(e.dir);
    Eigen::Vector3d r;
    r(0) = b1.dot(e.dir - u_pred) / e.sigma_dir;
    r(1) = b2.dot(e.dir - u_pred) / e.sigma_dir;
    r(2) = (e.inv_depth - 1.0 / n) / e.sigma_inv_depth;
    return r;
}

void jacobian_odometry(const OdometryEdge& e, const Pose4& prev, const Pose4& now,
                       Eigen::Matrix4d* J_prev, Eigen::Matrix4d* J_now) {
    jacobian_between(e.delta, prev, now, e.sigma, J_prev, J_now);
}

void jacobian_map_edge(const MapEdge& e, const Pose4& from, const Pose4& to,
                       Eigen::Matrix4d* J_from, Eigen::Matrix4d* J_to) {
    jacobian_between(e.rel, from, to, e.sigma, J_from, J_to);
}

void jacobian_distance(const DistanceEdge& e, const Pose4& pi, const Pose4& pj,
                       Eigen::RowVector4d* J_i, Eigen::RowVector4d* J_j) {
    const Eigen::Vector3d d = pi.position() - pj.position();
    const double n = d.norm();
    Eigen::RowVector3d g = Eigen::RowVector3d::Zero();
    if (n > kMinRange) g = d.transpose() / (n * e.sigma);
    if (J_i) {
        J_i->setZero();
        J_i->head<3>() = -g;
    }
    if (J_j) {
        J_j->setZero();
        J_j->head<3>() = g;
    }
}

bool jacobian_detection(const DetectionEdge& e, const Pose4& observer, const Pose4& target,
                        Eigen::Matrix<double, 3, 4>* J_obs,
                        Eigen::Matrix<double, 3, 4>* J_tgt) {
    const Eigen::Vector3d dp = target.position() - observer.position();
    const Eigen::Vector3d body = rotz(-observer.yaw) * dp;
    const Eigen::Vector3d p = body - e.cam_pos;
    const double n = p.norm();
    if (n < kMinRange) return false;
    const Eigen::Vector3d u = p / n;
    auto [b1, b2] = tangent_basis(e.dir);

    // d(residual)/d(p), rows: two tangent components, inverse depth.
    Eigen::Matrix3d dr_dp;
    const Eigen::Matrix3d du_dp = (Eigen::Matrix3d::Identity() - u * u.transpose()) / n;
    dr_dp.row(0) = -b1.transpose() * du_dp / e.sigma_dir;
    dr_dp.row(1) = -b2.transpose() * du_dp / e.sigma_dir;
    dr_dp.row(2) = u.transpose() / (n * n * e.sigma_inv_depth);

    const Eigen::Matrix3d R = rotz(-observer.yaw).m;
    if (J_obs) {
        J_obs->setZero();
        J_obs->leftCols<3>() = dr_dp * (-R);
        J_obs->col(3) = dr_dp * (-(drotz(-observer.yaw) * dp));
    }
    if (J_tgt) {
        J_tgt->setZero();
        J_tgt->leftCols<3>() = dr_dp * R;
    }
    return true;
}

}  // namespace swarm
