#include "swarm/eval/metrics.hpp"

#include <algorithm>
#include <cmath>

namespace swarm::eval {

namespace {

// Nearest ground-truth sample within dt_tol for each estimate timestamp.
std::vector<std::pair<const TimedPose4*, const TimedPose4*>> align(
    const std::vector<TimedPose4>& est, const std::vector<TimedPose4>& gt, double dt_tol) {
    std::vector<std::pair<const TimedPose4*, const TimedPose4*>> out;
    if (gt.empty()) return out;
    for (const auto& e : est) {
        auto it = std::lower_bound(gt.begin(), gt.end(), e.t,
                                   [](const TimedPose4& g, double t) { return g.t < t; });
        const TimedPose4* best = nullptr;
        double best_dt = dt_tol;
        if (it != gt.end() && std::abs(it->t - e.t) <= best_dt) {
            best = &*it;
            best_dt = std::abs(it->t - e.t);
        }
        if (it != gt.begin()) {
            auto prev = std::prev(it);
            if (std::abs(prev->t - e.t) <= best_dt) best = &*prev;
        }
        if (best) out.emplace_back(&e, best);
    }
    return out;
}

}  // namespace

ReResult compute_re(const std::vector<TimedPose4>& est_rel, const std::vector<TimedPose4>& gt_rel,
                    double dt_tol) {
    ReResult r;
    Eigen::Vector3d acc = Eigen::Vector3d::Zero();
    double yaw_acc = 0.0;
    for (const auto& [e, g] : align(est_rel, gt_rel, dt_tol)) {
        Eigen::Vector3d d = e->pose.position() - g->pose.position();
        acc += d.cwiseAbs2();
        double dy = wrap_angle(e->pose.yaw - g->pose.yaw);
        yaw_acc += dy * dy;
        ++r.n;
    }
    if (r.n > 0) {
        r.rmse_xyz = (acc / r.n).cwiseSqrt();
        r.rmse_yaw = std::sqrt(yaw_acc / r.n);
    }
    return r;
}

AteResult compute_ate(const std::vector<TimedPose4>& est, const std::vector<TimedPose4>& gt,
                      double dt_tol) {
    AteResult r;
    double pos_acc = 0.0, yaw_acc = 0.0;
    for (const auto& [e, g] : align(est, gt, dt_tol)) {
        pos_acc += (e->pose.position() - g->pose.position()).squaredNorm();
        double dy = wrap_angle(e->pose.yaw - g->pose.yaw);
        yaw_acc += dy * dy;
        ++r.n;
    }
    if (r.n > 0) {
        r.rmse_pos = std::sqrt(pos_acc / r.n);
        r.rmse_yaw = std::sqrt(yaw_acc / r.n);
    }
    return r;
}

std::optional<double> compute_drift(const std::vector<TimedPose4>& est,
                                    const std::vector<TimedPose4>& gt, double dt_tol) {
    auto pairs = align(est, gt, dt_tol);
    if (pairs.empty()) return std::nullopt;
    double length = 0.0;
    for (size_t i = 1; i < gt.size(); ++i) {
        length += (gt[i].pose.position() - gt[i - 1].pose.position()).norm();
    }
    if (length <= 0.0) return std::nullopt;
    const auto& [e, g] = pairs.back();
    return (e->pose.position() - g->pose.position()).norm() / length;
}

}  // namespace swarm::eval
