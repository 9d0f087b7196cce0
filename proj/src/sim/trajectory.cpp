#include "swarm/sim/trajectory.hpp"

#include <Eigen/Geometry>

#include <cmath>
#include <stdexcept>

namespace swarm::sim {

namespace {

constexpr double kGravity = 9.81;
constexpr double kMaxTilt = 0.15;     // rad
constexpr double kMinFollowSpeed = 0.05;  // below this, hold the last yaw

struct Sample {
    Eigen::Vector3d p, v, a;
};

Sample eval_circle(const TrajectorySpec& s, double t) {
    const double w = 2.0 * kPi / s.period_s;
    const double th = w * t + s.phase;
    Sample out;
    out.p = s.center + Eigen::Vector3d(s.radius * std::cos(th), s.radius * std::sin(th), 0.0);
    out.v = Eigen::Vector3d(-s.radius * w * std::sin(th), s.radius * w * std::cos(th), 0.0);
    out.a = Eigen::Vector3d(-s.radius * w * w * std::cos(th), -s.radius * w * w * std::sin(th), 0.0);
    return out;
}

Sample eval_lissajous(const TrajectorySpec& s, double t) {
    Sample out;
    for (int k = 0; k < 3; ++k) {
        const double w = 2.0 * kPi * s.freq_hz(k);
        const double th = w * t + s.lissajous_phase(k);
        out.p(k) = s.center(k) + s.amplitude(k) * std::sin(th);
        out.v(k) = s.amplitude(k) * w * std::cos(th);
        out.a(k) = -s.amplitude(k) * w * w * std::sin(th);
    }
    return out;
}

// Catmull-Rom through the waypoints with uniform segment timing.
Sample eval_waypoints(const TrajectorySpec& s, double t, double duration) {
    const auto& wp = s.waypoints;
    const int n_seg = static_cast<int>(wp.size()) - 1;
    const double seg_T = duration / n_seg;
    double u = std::clamp(t / seg_T, 0.0, static_cast<double>(n_seg) - 1e-9);
    const int seg = static_cast<int>(u);
    u -= seg;

    auto at = [&](int i) { return wp[std::clamp(i, 0, n_seg)]; };
    const Eigen::Vector3d p0 = at(seg - 1), p1 = at(seg), p2 = at(seg + 1), p3 = at(seg + 2);
    const Eigen::Vector3d m1 = 0.5 * (p2 - p0);
    const Eigen::Vector3d m2 = 0.5 * (p3 - p1);

    const double u2 = u * u, u3 = u2 * u;
    Sample out;
    out.p = (2 * u3 - 3 * u2 + 1) * p1 + (u3 - 2 * u2 + u) * m1 +
            (-2 * u3 + 3 * u2) * p2 + (u3 - u2) * m2;
    Eigen::Vector3d dp = (6 * u2 - 6 * u) * p1 + (3 * u2 - 4 * u + 1) * m1 +
                         (-6 * u2 + 6 * u) * p2 + (3 * u2 - 2 * u) * m2;
    Eigen::Vector3d ddp = (12 * u - 6) * p1 + (6 * u - 4) * m1 +
                          (-12 * u + 6) * p2 + (6 * u - 2) * m2;
    out.v = dp / seg_T;
    out.a = ddp / (seg_T * seg_T);
    return out;
}

Sample eval(const TrajectorySpec& s, double t, double duration) {
    switch (s.type) {
        case TrajectorySpec::Type::Static: {
            Sample out;
            out.p = s.center;
            out.v.setZero();
            out.a.setZero();
            return out;
        }
        case TrajectorySpec::Type::Circle: return eval_circle(s, t);
        case TrajectorySpec::Type::Lissajous: return eval_lissajous(s, t);
        case TrajectorySpec::Type::Waypoints: return eval_waypoints(s, t, duration);
    }
    return {};
}

// Rotation aligning body z with the thrust direction, then yawed.
Rot3 attitude(const Sample& s, double yaw, double tilt_gain) {
    Eigen::Vector3d thrust = tilt_gain * s.a + Eigen::Vector3d(0, 0, kGravity);
    if (thrust.norm() < 1e-9) return rotz(yaw);
    thrust.normalize();
    Eigen::Vector3d local = rotz(-yaw) * thrust;
    double angle = std::acos(std::clamp(local.z(), -1.0, 1.0));
    angle = std::min(angle, kMaxTilt);
    if (angle < 1e-12) return rotz(yaw);
    Eigen::Vector3d axis = Eigen::Vector3d::UnitZ().cross(local).normalized();
    Rot3 tilt{Eigen::AngleAxisd(angle, axis).toRotationMatrix()};
    return rotz(yaw) * tilt;
}

}  // namespace

double GroundTruth::path_length(DroneId d, int tick_a, int tick_b) const {
    double len = 0.0;
    for (int k = tick_a + 1; k <= tick_b; ++k) {
        len += (pose4[d][k].position() - pose4[d][k - 1].position()).norm();
    }
    return len;
}

GroundTruth generate_trajectory(const std::vector<TrajectorySpec>& specs, double duration_s,
                                double rate_hz, double v_max) {
    GroundTruth gt;
    gt.dt = 1.0 / rate_hz;
    gt.n_ticks = static_cast<int>(std::floor(duration_s * rate_hz)) + 1;
    gt.pose4.resize(specs.size());
    gt.pose6.resize(specs.size());

    for (size_t d = 0; d < specs.size(); ++d) {
        const auto& spec = specs[d];
        if (spec.type == TrajectorySpec::Type::Waypoints) {
            if (spec.waypoints.size() < 2) {
                throw std::invalid_argument("waypoint trajectory needs at least two points");
            }
        }
        gt.pose4[d].reserve(gt.n_ticks);
        gt.pose6[d].reserve(gt.n_ticks);

        double last_yaw = spec.fixed_yaw;
        for (int k = 0; k < gt.n_ticks; ++k) {
            const double t = k * gt.dt;
            Sample s = eval(spec, t, duration_s);
            if (s.v.norm() > v_max) {
                throw std::invalid_argument("trajectory exceeds v_max");
            }
            double yaw = spec.fixed_yaw;
            if (spec.yaw_mode == TrajectorySpec::YawMode::FollowVelocity) {
                yaw = s.v.head<2>().norm() > kMinFollowSpeed ? std::atan2(s.v.y(), s.v.x())
                                                             : last_yaw;
            }
            last_yaw = yaw;

            Pose6 p6{attitude(s, yaw, spec.tilt_gain), s.p};
            gt.pose6[d].push_back(p6);
            gt.pose4[d].push_back(project_to_4dof(p6));
        }
    }
    return gt;
}

}  // namespace swarm::sim
