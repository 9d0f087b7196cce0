#pragma once

#include <Eigen/Core>

#include <optional>
#include <vector>

#include "swarm/geometry.hpp"
#include "swarm/types.hpp"

namespace swarm {

/// Per-drone visual snapshot: the VIO pose at capture plus one global
/// descriptor per virtual camera. Keyframes double as graph vertices.
struct Keyframe {
    DroneId drone = kInvalidDrone;
    double t = 0.0;
    Pose4 vio4;
    Pose6 vio6;
    std::vector<Eigen::VectorXd> descriptors;  // unit-normalized
    bool remote = false;

    // Ground truth carried for the synthetic relative-pose oracle; a real
    // front-end recovers the equivalent from co-observed structure.
    bool has_gt = false;
    Pose4 gt4;
    Pose6 gt6;
};

/// Result of relative-pose extraction between a stored keyframe (drone i
/// at t0) and an incoming keyframe (drone j at t1): the 6-DoF pose of the
/// stored keyframe's body expressed in the incoming drone's VIO frame.
struct PoseExtraction {
    int inliers = 0;
    Pose6 pose_in_query_frame;
};

/// Interface stood in front of PnP-style relative pose extraction so the
/// back-end pipeline is independent of how matches are geometrically
/// verified. The synthetic oracle is the default implementation.
class RelativePoseExtractor {
public:
    virtual ~RelativePoseExtractor() = default;
    virtual std::optional<PoseExtraction> extract(const Keyframe& stored,
                                                  const Keyframe& incoming) = 0;
};

}  // namespace swarm
