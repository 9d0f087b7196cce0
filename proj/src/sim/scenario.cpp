#include "swarm/sim/scenario.hpp"

#include <json.hpp>

#include <fstream>
#include <stdexcept>

namespace swarm::sim {

using nlohmann::json;

namespace {

Eigen::Vector3d vec3(const json& j) {
    if (!j.is_array() || j.size() != 3) throw std::runtime_error("expected [x, y, z]");
    return {j[0].get<double>(), j[1].get<double>(), j[2].get<double>()};
}

TrajectorySpec parse_trajectory(const json& j) {
    TrajectorySpec s;
    const std::string type = j.at("type").get<std::string>();
    if (type == "static") {
        s.type = TrajectorySpec::Type::Static;
    } else if (type == "circle") {
        s.type = TrajectorySpec::Type::Circle;
        s.radius = j.at("radius").get<double>();
        s.period_s = j.at("period_s").get<double>();
        s.phase = j.value("phase_deg", 0.0) * kPi / 180.0;
    } else if (type == "lissajous") {
        s.type = TrajectorySpec::Type::Lissajous;
        if (j.contains("amplitude")) s.amplitude = vec3(j["amplitude"]);
        if (j.contains("freq_hz")) s.freq_hz = vec3(j["freq_hz"]);
        if (j.contains("phase")) s.lissajous_phase = vec3(j["phase"]);
    } else if (type == "waypoints") {
        s.type = TrajectorySpec::Type::Waypoints;
        for (const auto& p : j.at("points")) s.waypoints.push_back(vec3(p));
    } else {
        throw std::runtime_error("unknown trajectory type: " + type);
    }
    if (j.contains("center")) s.center = vec3(j["center"]);
    const std::string yaw = j.value("yaw", "fixed");
    if (yaw == "follow") {
        s.yaw_mode = TrajectorySpec::YawMode::FollowVelocity;
    } else if (yaw == "fixed") {
        s.yaw_mode = TrajectorySpec::YawMode::Fixed;
        s.fixed_yaw = j.value("yaw_deg", 0.0) * kPi / 180.0;
    } else {
        throw std::runtime_error("yaw must be \"fixed\" or \"follow\"");
    }
    s.tilt_gain = j.value("tilt_gain", 1.0);
    return s;
}

}  // namespace

Scenario scenario_from_json_text(const std::string& text) {
    json j = json::parse(text);
    Scenario sc;
    sc.seed = j.value("seed", 42ull);
    sc.duration_s = j.at("duration_s").get<double>();
    if (j.contains("rates")) {
        const auto& r = j["rates"];
        sc.vio_hz = r.value("vio_hz", sc.vio_hz);
        sc.uwb_hz = r.value("uwb_hz", sc.uwb_hz);
        sc.det_hz = r.value("detection_hz", sc.det_hz);
    }
    if (sc.vio_hz <= 0 || sc.uwb_hz < 0 || sc.det_hz < 0) {
        throw std::runtime_error("rates must be positive");
    }
    sc.v_max = j.value("v_max", sc.v_max);

    for (const auto& d : j.at("drones")) {
        sc.drones.push_back(parse_trajectory(d.at("trajectory")));
    }
    if (sc.drones.empty()) throw std::runtime_error("at least one drone required");

    if (j.contains("noise")) {
        const auto& n = j["noise"];
        sc.noise.vio.pos_white_frac = n.value("vio_pos_white_frac", sc.noise.vio.pos_white_frac);
        sc.noise.vio.yaw_white_per_m = n.value("vio_yaw_white_per_m", sc.noise.vio.yaw_white_per_m);
        sc.noise.vio.pos_bias_frac = n.value("vio_pos_bias_frac", sc.noise.vio.pos_bias_frac);
        sc.noise.vio.yaw_bias_per_m = n.value("vio_yaw_bias_per_m", sc.noise.vio.yaw_bias_per_m);
        sc.noise.uwb_sigma = n.value("uwb_sigma", sc.noise.uwb_sigma);
        sc.noise.det_sigma_dir = n.value("det_sigma_dir", sc.noise.det_sigma_dir);
        sc.noise.det_sigma_inv_depth_frac =
            n.value("det_sigma_inv_depth_frac", sc.noise.det_sigma_inv_depth_frac);
        sc.noise.desc_sigma = n.value("desc_sigma", sc.noise.desc_sigma);
    }
    if (j.value("noiseless", false)) {
        sc.noise = NoiseConfig{};
        sc.noise.vio = VioNoiseConfig{0, 0, 0, 0};
        sc.noise.uwb_sigma = 0.0;
        sc.noise.det_sigma_dir = 0.0;
        sc.noise.det_sigma_inv_depth_frac = 0.0;
        sc.noise.desc_sigma = 0.0;
        sc.outliers = OutlierConfig{};
        sc.oracle.pos_sigma = 0.0;
        sc.oracle.yaw_sigma = 0.0;
    }
    if (j.contains("outliers")) {
        const auto& o = j["outliers"];
        sc.outliers.uwb_rate = o.value("uwb_rate", sc.outliers.uwb_rate);
        sc.outliers.loop_rate = o.value("loop_rate", sc.outliers.loop_rate);
        sc.outliers.misassoc_rate = o.value("misassoc_rate", sc.outliers.misassoc_rate);
    }
    if (j.contains("detection")) {
        const auto& d = j["detection"];
        sc.detection.max_range = d.value("max_range", sc.detection.max_range);
        sc.detection.dead_zone_half_angle =
            d.value("dead_zone_half_angle_deg", 30.0) * kPi / 180.0;
        sc.detection.geom.width_m = d.value("drone_width_m", sc.detection.geom.width_m);
        sc.detection.geom.focal_px = d.value("focal_px", sc.detection.geom.focal_px);
        if (d.contains("cam_pos")) sc.detection.cam_pos = vec3(d["cam_pos"]);
    }
    if (j.contains("oracle")) {
        const auto& o = j["oracle"];
        sc.oracle.r_loop = o.value("r_loop", sc.oracle.r_loop);
        sc.oracle.max_inliers = o.value("max_inliers", sc.oracle.max_inliers);
        sc.oracle.low_inliers = o.value("low_inliers", sc.oracle.low_inliers);
        sc.oracle.pos_sigma = o.value("pos_sigma", sc.oracle.pos_sigma);
        sc.oracle.yaw_sigma = o.value("yaw_sigma", sc.oracle.yaw_sigma);
    }
    if (j.contains("descriptor")) {
        const auto& d = j["descriptor"];
        sc.descriptor.dim = d.value("dim", sc.descriptor.dim);
        sc.descriptor.cell_m = d.value("cell_m", sc.descriptor.cell_m);
        sc.descriptor.kernel_m = d.value("kernel_m", sc.descriptor.kernel_m);
        sc.descriptor.virtual_cams = d.value("virtual_cams", sc.descriptor.virtual_cams);
    }
    return sc;
}

Scenario load_scenario(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open config: " + path);
    std::string text((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    return scenario_from_json_text(text);
}

}  // namespace swarm::sim
