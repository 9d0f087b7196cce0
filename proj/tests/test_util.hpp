#pragma once

#include <Eigen/Core>
#include <Eigen/Geometry>

#include <random>

#include "swarm/geometry.hpp"

namespace swarm::testutil {

inline std::mt19937_64 make_rng(uint64_t seed) { return std::mt19937_64(seed); }

inline double uniform(std::mt19937_64& rng, double lo, double hi) {
    return std::uniform_real_distribution<double>(lo, hi)(rng);
}

inline Pose4 random_pose4(std::mt19937_64& rng, double span = 10.0) {
    return {uniform(rng, -span, span), uniform(rng, -span, span),
            uniform(rng, -span, span), uniform(rng, -kPi, kPi)};
}

inline Rot3 random_rot3(std::mt19937_64& rng) {
    Eigen::Quaterniond q(uniform(rng, -1, 1), uniform(rng, -1, 1),
                         uniform(rng, -1, 1), uniform(rng, -1, 1));
    while (q.norm() < 1e-6) {
        q = Eigen::Quaterniond(uniform(rng, -1, 1), uniform(rng, -1, 1),
                               uniform(rng, -1, 1), uniform(rng, -1, 1));
    }
    q.normalize();
    return Rot3{q.toRotationMatrix()};
}

inline Eigen::Vector3d random_unit(std::mt19937_64& rng) {
    Eigen::Vector3d v(uniform(rng, -1, 1), uniform(rng, -1, 1), uniform(rng, -1, 1));
    while (v.norm() < 1e-3) {
        v = Eigen::Vector3d(uniform(rng, -1, 1), uniform(rng, -1, 1), uniform(rng, -1, 1));
    }
    return v.normalized();
}

/// Homogeneous 4x4 matrix of a 4-DoF pose; independent route used as a
/// test oracle for the pose algebra.
inline Eigen::Matrix4d homogeneous(const Pose4& p) {
    Eigen::Matrix4d h = Eigen::Matrix4d::Identity();
    h.topLeftCorner<3, 3>() = rotz(p.yaw).m;
    h.topRightCorner<3, 1>() = p.position();
    return h;
}

inline Pose4 from_homogeneous(const Eigen::Matrix4d& h) {
    return {h(0, 3), h(1, 3), h(2, 3), std::atan2(h(1, 0), h(0, 0))};
}

}  // namespace swarm::testutil
