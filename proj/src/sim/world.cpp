#include "swarm/sim/world.hpp"

#include <Eigen/Geometry>

#include <random>
#include <stdexcept>

namespace swarm::sim {

namespace {

std::mt19937_64 keyed_rng(uint64_t seed, uint64_t tag, uint64_t a = 0, uint64_t b = 0,
                          uint64_t c = 0, uint64_t d = 0) {
    uint64_t k = hash_combine(seed, tag);
    k = hash_combine(k, a);
    k = hash_combine(k, b);
    k = hash_combine(k, c);
    k = hash_combine(k, d);
    return std::mt19937_64(k);
}

double gauss(std::mt19937_64& rng, double sigma) {
    if (sigma <= 0.0) return 0.0;
    return std::normal_distribution<double>(0.0, sigma)(rng);
}

Pose6 pose6_of_yaw(const Pose4& p) { return {rotz(p.yaw), p.position()}; }

// True pose of (drone, tick) expressed in the drone's own start frame,
// which is where a drift-free VIO would put it.
Pose4 local_gt4(const GroundTruth& gt, DroneId d, int tick) {
    return relative4(gt.at4(d, 0), gt.at4(d, tick));
}

Pose6 local_gt6(const GroundTruth& gt, DroneId d, int tick) {
    return compose6(inverse6(pose6_of_yaw(gt.at4(d, 0))), gt.at6(d, tick));
}

// Emit on master ticks at a decimated rate.
bool rate_tick(int tick, double master_hz, double rate_hz) {
    if (rate_hz <= 0.0) return false;
    if (tick == 0) return true;
    auto count = [&](int k) { return static_cast<int64_t>(std::floor(k * rate_hz / master_hz + 1e-9)); };
    return count(tick) > count(tick - 1);
}

}  // namespace

bool detection_visible(const Eigen::Vector3d& rel_body, const DetectionSimConfig& cfg) {
    auto fm = detection_forward_model(rel_body, cfg.cam_rot, cfg.cam_pos);
    if (!fm) return false;
    if (1.0 / fm->second > cfg.max_range) return false;
    double down = std::acos(std::clamp(fm->first.dot(Eigen::Vector3d(0, 0, -1)), -1.0, 1.0));
    return down > cfg.dead_zone_half_angle;
}

SimStreams generate_streams(const Scenario& sc) {
    SimStreams out;
    out.gt = generate_trajectory(sc.drones, sc.duration_s, sc.vio_hz, sc.v_max);
    const int n = sc.n_drones();
    const auto& gt = out.gt;

    // VIO: chained composition of true per-tick deltas, each perturbed by
    // white noise and a per-run bias, both proportional to the step length.
    for (DroneId d = 0; d < n; ++d) {
        auto rng = keyed_rng(sc.seed, 0x7601, static_cast<uint64_t>(d));
        auto bias_rng = keyed_rng(sc.seed, 0x7602, static_cast<uint64_t>(d));
        const auto& vn = sc.noise.vio;
        Eigen::Vector3d pos_bias(gauss(bias_rng, vn.pos_bias_frac),
                                 gauss(bias_rng, vn.pos_bias_frac),
                                 gauss(bias_rng, vn.pos_bias_frac));
        const double yaw_bias = gauss(bias_rng, vn.yaw_bias_per_m);

        Pose4 p4;  // VIO initializes at the origin of its local frame
        for (int k = 0; k < gt.n_ticks; ++k) {
            if (k > 0) {
                Pose4 delta = relative4(local_gt4(gt, d, k - 1), local_gt4(gt, d, k));
                const double step = delta.position().norm();
                delta.x += gauss(rng, vn.pos_white_frac * step) + pos_bias.x() * step;
                delta.y += gauss(rng, vn.pos_white_frac * step) + pos_bias.y() * step;
                delta.z += gauss(rng, vn.pos_white_frac * step) + pos_bias.z() * step;
                delta.yaw = wrap_angle(delta.yaw + gauss(rng, vn.yaw_white_per_m * step) +
                                       yaw_bias * step);
                p4 = compose4(p4, delta);
            }
            Pose6 truth6 = local_gt6(gt, d, k);
            VioSample s;
            s.drone = d;
            s.t = k * gt.dt;
            s.p4 = p4;
            s.p6 = lift_to_6dof(p4, truth6, project_to_4dof(truth6));
            out.vio.push_back(s);
        }
    }
    // Reorder by (tick, drone) so the log is time-ordered.
    std::vector<VioSample> ordered;
    ordered.reserve(out.vio.size());
    for (int k = 0; k < gt.n_ticks; ++k) {
        for (DroneId d = 0; d < n; ++d) ordered.push_back(out.vio[d * gt.n_ticks + k]);
    }
    out.vio = std::move(ordered);

    // UWB ranges, both directions with independent noise.
    auto uwb_rng = keyed_rng(sc.seed, 0x7603);
    for (int k = 0; k < gt.n_ticks; ++k) {
        if (!rate_tick(k, sc.vio_hz, sc.uwb_hz)) continue;
        for (DroneId i = 0; i < n; ++i) {
            for (DroneId j = 0; j < n; ++j) {
                if (i == j) continue;
                DistanceEdge e;
                e.i = i;
                e.j = j;
                e.t = k * gt.dt;
                e.sigma = sc.noise.uwb_sigma > 0 ? sc.noise.uwb_sigma : 0.15;
                double d_true = (gt.at4(i, k).position() - gt.at4(j, k).position()).norm();
                e.d = d_true + gauss(uwb_rng, sc.noise.uwb_sigma);
                if (sc.outliers.uwb_rate > 0.0 &&
                    std::uniform_real_distribution<double>(0, 1)(uwb_rng) < sc.outliers.uwb_rate) {
                    e.d += std::uniform_real_distribution<double>(0.5, 3.0)(uwb_rng);
                    out.uwb_injections.push_back({e.t, i, j});
                }
                e.d = std::max(e.d, 0.0);
                out.uwb.push_back(e);
            }
        }
    }

    // Detections: omnidirectional except the downward dead-zone cone.
    auto det_rng = keyed_rng(sc.seed, 0x7604);
    const auto& dc = sc.detection;
    for (int k = 0; k < gt.n_ticks; ++k) {
        if (!rate_tick(k, sc.vio_hz, sc.det_hz)) continue;
        for (DroneId obs = 0; obs < n; ++obs) {
            for (DroneId tgt = 0; tgt < n; ++tgt) {
                if (obs == tgt) continue;
                Eigen::Vector3d body = relative4(gt.at4(obs, k), gt.at4(tgt, k)).position();
                if (!detection_visible(body, dc)) continue;
                const auto& [dir, inv_depth] = *detection_forward_model(body, dc.cam_rot, dc.cam_pos);
                DetectionRecord rec;
                rec.true_target = tgt;
                rec.edge.observer = obs;
                rec.edge.target = tgt;
                rec.edge.t = k * gt.dt;
                rec.edge.cam_rot = dc.cam_rot;
                rec.edge.cam_pos = dc.cam_pos;
                rec.edge.sigma_dir = std::max(sc.noise.det_sigma_dir, 0.01);
                rec.edge.sigma_inv_depth =
                    std::max(sc.noise.det_sigma_inv_depth_frac * inv_depth, 1e-3);

                Eigen::Vector3d noisy_dir = dir;
                if (sc.noise.det_sigma_dir > 0.0) {
                    auto [b1, b2] = tangent_basis(dir);
                    double phi = std::uniform_real_distribution<double>(0, 2 * kPi)(det_rng);
                    double ang = gauss(det_rng, sc.noise.det_sigma_dir);
                    Eigen::Vector3d axis = std::cos(phi) * b1 + std::sin(phi) * b2;
                    noisy_dir = Eigen::AngleAxisd(ang, axis).toRotationMatrix() * dir;
                }
                rec.edge.dir = noisy_dir;
                double s = inv_depth;
                if (sc.noise.det_sigma_inv_depth_frac > 0.0) {
                    s *= 1.0 + gauss(det_rng, sc.noise.det_sigma_inv_depth_frac);
                }
                rec.edge.inv_depth = std::max(s, 1e-6);

                if (sc.outliers.misassoc_rate > 0.0 &&
                    std::uniform_real_distribution<double>(0, 1)(det_rng) <
                        sc.outliers.misassoc_rate) {
                    std::vector<DroneId> others;
                    for (DroneId o = 0; o < n; ++o) {
                        if (o != tgt && o != obs) others.push_back(o);
                    }
                    if (!others.empty()) {
                        rec.edge.target = others[std::uniform_int_distribution<size_t>(
                            0, others.size() - 1)(det_rng)];
                    }
                }
                out.detections.push_back(rec);
            }
        }
    }
    return out;
}

SimFrontEnd::SimFrontEnd(const Scenario& sc, const SimStreams& streams)
    : sc_(sc),
      field_(sc.seed, sc.descriptor.dim, sc.descriptor.cell_m, sc.descriptor.kernel_m) {
    const int n = streams.gt.n_drones();
    vio_by_tick_.assign(n, std::vector<VioSample>(streams.gt.n_ticks));
    for (const auto& s : streams.vio) {
        int tick = sc.tick_of(s.t);
        if (s.drone >= 0 && s.drone < n && tick >= 0 && tick < streams.gt.n_ticks) {
            vio_by_tick_[s.drone][tick] = s;
        }
    }
    // Stash ground truth inside the dense table for keyframe assembly.
    gt_ = &streams.gt;
}

Keyframe SimFrontEnd::make_keyframe(DroneId drone, double t) const {
    const int tick = sc_.tick_of(t);
    if (drone < 0 || drone >= static_cast<DroneId>(vio_by_tick_.size()) || tick < 0 ||
        tick >= static_cast<int>(vio_by_tick_[drone].size())) {
        throw std::out_of_range("make_keyframe outside simulated range");
    }
    Keyframe kf;
    kf.drone = drone;
    kf.t = sc_.time_of(tick);
    kf.vio4 = vio_by_tick_[drone][tick].p4;
    kf.vio6 = vio_by_tick_[drone][tick].p6;
    kf.has_gt = true;
    kf.gt4 = gt_->at4(drone, tick);
    kf.gt6 = gt_->at6(drone, tick);

    auto rng = keyed_rng(sc_.seed, 0x7605, static_cast<uint64_t>(drone),
                         static_cast<uint64_t>(tick));
    for (int cam = 0; cam < sc_.descriptor.virtual_cams; ++cam) {
        Eigen::VectorXd desc = field_.embed(kf.gt4.position(), cam);
        for (int c = 0; c < desc.size(); ++c) desc(c) += gauss(rng, sc_.noise.desc_sigma);
        desc.normalize();
        kf.descriptors.push_back(desc);
    }
    return kf;
}

SimFrontEnd::OracleDraw SimFrontEnd::draw_oracle(const Keyframe& stored,
                                                 const Keyframe& incoming) {
    auto rng = keyed_rng(sc_.seed, 0x7606, static_cast<uint64_t>(stored.drone),
                         static_cast<uint64_t>(sc_.tick_of(stored.t)),
                         static_cast<uint64_t>(incoming.drone),
                         static_cast<uint64_t>(sc_.tick_of(incoming.t)));
    const auto& oc = sc_.oracle;
    OracleDraw d;

    const double range = (stored.gt4.position() - incoming.gt4.position()).norm();
    const bool close = range <= oc.r_loop;
    if (close) {
        d.inliers = oc.max_inliers - std::uniform_int_distribution<int>(0, 5)(rng);
    } else {
        d.inliers = oc.low_inliers + std::uniform_int_distribution<int>(0, 8)(rng);
    }

    Pose4 rel_true = relative4(stored.gt4, incoming.gt4);
    Pose6 rel6_true = relative6(stored.gt6, incoming.gt6);
    Pose4 rel = rel_true;
    if (close && sc_.outliers.loop_rate > 0.0 &&
        std::uniform_real_distribution<double>(0, 1)(rng) < sc_.outliers.loop_rate) {
        d.injected = true;
        double mag = std::uniform_real_distribution<double>(oc.gross_pos_min, oc.gross_pos_max)(rng);
        Eigen::Vector3d dir(gauss(rng, 1.0), gauss(rng, 1.0), gauss(rng, 1.0));
        if (dir.norm() < 1e-9) dir = Eigen::Vector3d::UnitX();
        dir.normalize();
        rel.set_position(rel.position() + mag * dir);
        rel.yaw = wrap_angle(rel.yaw +
                             std::uniform_real_distribution<double>(-oc.gross_yaw, oc.gross_yaw)(rng));
    } else {
        rel.x += gauss(rng, oc.pos_sigma);
        rel.y += gauss(rng, oc.pos_sigma);
        rel.z += gauss(rng, oc.pos_sigma);
        rel.yaw = wrap_angle(rel.yaw + gauss(rng, oc.yaw_sigma));
    }
    d.rel4 = rel;
    d.rel6 = lift_to_6dof(rel, rel6_true, project_to_4dof(rel6_true));
    return d;
}

std::optional<PoseExtraction> SimFrontEnd::extract(const Keyframe& stored,
                                                   const Keyframe& incoming) {
    if (!stored.has_gt || !incoming.has_gt) return std::nullopt;
    OracleDraw d = draw_oracle(stored, incoming);
    if (d.injected) {
        loop_injections_.push_back({stored.drone, stored.t, incoming.drone, incoming.t});
    }
    PoseExtraction ext;
    ext.inliers = d.inliers;
    ext.pose_in_query_frame = compose6(incoming.vio6, inverse6(d.rel6));
    return ext;
}

std::pair<int, Pose4> SimFrontEnd::oracle_relative4(const Keyframe& kf_a, const Keyframe& kf_b) {
    OracleDraw d = draw_oracle(kf_a, kf_b);
    if (d.injected) {
        loop_injections_.push_back({kf_a.drone, kf_a.t, kf_b.drone, kf_b.t});
    }
    return {d.inliers, d.rel4};
}

}  // namespace swarm::sim
