#pragma once

#include <Eigen/Core>

#include <vector>

#include "swarm/geometry.hpp"
#include "swarm/types.hpp"

namespace swarm::sim {

/// Analytic trajectory shapes for one drone.
struct TrajectorySpec {
    enum class Type { Static, Circle, Lissajous, Waypoints };
    enum class YawMode { Fixed, FollowVelocity };

    Type type = Type::Static;
    YawMode yaw_mode = YawMode::Fixed;
    double fixed_yaw = 0.0;

    // Static: pose = (center, fixed_yaw). Circle/Lissajous: center offset.
    Eigen::Vector3d center = Eigen::Vector3d::Zero();

    // Circle.
    double radius = 2.0;
    double period_s = 20.0;
    double phase = 0.0;  // radians

    // Lissajous.
    Eigen::Vector3d amplitude = Eigen::Vector3d(2.0, 1.5, 0.3);
    Eigen::Vector3d freq_hz = Eigen::Vector3d(0.05, 0.1, 0.08);
    Eigen::Vector3d lissajous_phase = Eigen::Vector3d::Zero();

    // Waypoints: Catmull-Rom through points over total_duration.
    std::vector<Eigen::Vector3d> waypoints;

    // Roll/pitch induced by lateral acceleration (thrust-vector model);
    // 0 keeps flight level.
    double tilt_gain = 1.0;
};

/// Per-drone poses sampled on the master clock.
struct GroundTruth {
    double dt = 0.05;
    int n_ticks = 0;
    std::vector<std::vector<Pose4>> pose4;  // [drone][tick]
    std::vector<std::vector<Pose6>> pose6;

    int n_drones() const { return static_cast<int>(pose4.size()); }
    const Pose4& at4(DroneId d, int tick) const { return pose4[d][tick]; }
    const Pose6& at6(DroneId d, int tick) const { return pose6[d][tick]; }

    /// Polyline path length of one drone over [tick_a, tick_b].
    double path_length(DroneId d, int tick_a, int tick_b) const;
};

/// Samples smooth trajectories at rate_hz for duration_s seconds.
/// Throws std::invalid_argument when a waypoint spec implies a speed
/// above v_max or has fewer than two points.
GroundTruth generate_trajectory(const std::vector<TrajectorySpec>& specs, double duration_s,
                                double rate_hz, double v_max = 5.0);

}  // namespace swarm::sim
