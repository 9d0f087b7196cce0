#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "swarm/measurements.hpp"
#include "swarm/sim/trajectory.hpp"

namespace swarm::sim {

/// VIO drift model: white noise plus a per-run constant bias, both scaled
/// by distance traveled so drift grows with path length.
struct VioNoiseConfig {
    double pos_white_frac = 0.005;   // sigma per step, fraction of step length
    double yaw_white_per_m = 0.002;  // rad of white noise per meter stepped
    double pos_bias_frac = 0.01;     // constant bias, fraction of distance
    double yaw_bias_per_m = 0.002;   // rad of bias per meter
};

struct NoiseConfig {
    VioNoiseConfig vio;
    double uwb_sigma = 0.15;              // m, typical UWB ranging noise
    double det_sigma_dir = 0.02;          // rad
    double det_sigma_inv_depth_frac = 0.05;
    double desc_sigma = 0.01;             // per descriptor component
};

struct OutlierConfig {
    double uwb_rate = 0.0;       // probability of +U(0.5, 3) m on a range
    double loop_rate = 0.0;      // probability of a gross-error oracle pose
    double misassoc_rate = 0.0;  // probability of a wrong detection label
};

struct DetectionSimConfig {
    double max_range = 8.0;
    double dead_zone_half_angle = 30.0 * kPi / 180.0;  // downward cone
    DroneGeometry geom;
    Rot3 cam_rot;
    Eigen::Vector3d cam_pos = Eigen::Vector3d::Zero();
};

struct OracleConfig {
    double r_loop = 5.0;       // range below which matches yield many inliers
    int max_inliers = 60;
    int low_inliers = 5;
    double pos_sigma = 0.03;   // m, on the extracted relative pose
    double yaw_sigma = 0.01;   // rad
    double gross_pos_min = 5.0, gross_pos_max = 15.0;  // m, injected error
    double gross_yaw = 0.5;    // rad, +-
};

struct DescriptorConfig {
    int dim = 24;
    double cell_m = 0.5;
    double kernel_m = 0.75;
    int virtual_cams = 1;
};

struct Scenario {
    uint64_t seed = 42;
    double duration_s = 60.0;
    double vio_hz = 20.0;   // master clock
    double uwb_hz = 10.0;
    double det_hz = 4.0;
    double v_max = 5.0;
    std::vector<TrajectorySpec> drones;
    NoiseConfig noise;
    OutlierConfig outliers;
    DetectionSimConfig detection;
    OracleConfig oracle;
    DescriptorConfig descriptor;

    int n_drones() const { return static_cast<int>(drones.size()); }
    double dt() const { return 1.0 / vio_hz; }
    int tick_of(double t) const { return static_cast<int>(std::llround(t * vio_hz)); }
    double time_of(int tick) const { return tick * dt(); }
};

/// Parses the sim portion of a config file. Throws std::runtime_error on
/// missing or malformed fields.
Scenario scenario_from_json_text(const std::string& text);
Scenario load_scenario(const std::string& path);

}  // namespace swarm::sim
