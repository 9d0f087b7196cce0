#pragma once

#include <optional>
#include <vector>

#include "swarm/geometry.hpp"

namespace swarm::eval {

struct TimedPose4 {
    double t = 0.0;
    Pose4 pose;
};

/// Per-axis RMSE of body-frame relative-position error plus wrapped yaw
/// RMSE, over timestamps aligned within dt_tol. n = 0 when nothing aligns.
struct ReResult {
    Eigen::Vector3d rmse_xyz = Eigen::Vector3d::Zero();
    double rmse_yaw = 0.0;
    int n = 0;
    double pos_norm() const { return rmse_xyz.norm(); }
};

ReResult compute_re(const std::vector<TimedPose4>& est_rel, const std::vector<TimedPose4>& gt_rel,
                    double dt_tol);

/// Position and yaw RMSE of an absolute trajectory against ground truth in
/// the same (anchor) frame; no additional alignment is applied.
struct AteResult {
    double rmse_pos = 0.0;
    double rmse_yaw = 0.0;
    int n = 0;
};

AteResult compute_ate(const std::vector<TimedPose4>& est, const std::vector<TimedPose4>& gt,
                      double dt_tol);

/// Final position error over ground-truth path length. Nullopt when the
/// path length is zero or nothing aligns.
std::optional<double> compute_drift(const std::vector<TimedPose4>& est,
                                    const std::vector<TimedPose4>& gt, double dt_tol);

}  // namespace swarm::eval
