#include "swarm/maploc.hpp"

#include <algorithm>
#include <cmath>
#include <istream>
#include <ostream>
#include <sstream>

#include "swarm/io/records.hpp"

namespace swarm::maploc {

namespace {
int64_t time_key(double t) { return static_cast<int64_t>(std::llround(t * 1e6)); }
}  // namespace

bool KeyframeDatabase::add(const Keyframe& kf) {
    auto key = std::make_pair(kf.drone, time_key(kf.t));
    if (by_key_.count(key)) return false;
    int idx = static_cast<int>(keyframes_.size());
    by_key_[key] = idx;
    keyframes_.push_back(kf);
    for (int d = 0; d < static_cast<int>(kf.descriptors.size()); ++d) {
        entries_.emplace_back(idx, d);
    }
    return true;
}

std::vector<KeyframeDatabase::Match> KeyframeDatabase::knn(const Eigen::VectorXd& desc,
                                                           int k) const {
    std::vector<Match> all;
    all.reserve(entries_.size());
    for (const auto& [ki, di] : entries_) {
        const Eigen::VectorXd& stored = keyframes_[ki].descriptors[di];
        if (stored.size() != desc.size()) continue;
        all.push_back({ki, (stored - desc).norm()});
    }
    std::sort(all.begin(), all.end(), [](const Match& a, const Match& b) {
        if (a.distance != b.distance) return a.distance < b.distance;
        return a.kf_index < b.kf_index;
    });
    if (static_cast<int>(all.size()) > k) all.resize(k);
    return all;
}

void KeyframeDatabase::dump(std::ostream& os) const {
    for (const auto& kf : keyframes_) os << io::keyframe_line(kf) << "\n";
}

KeyframeDatabase KeyframeDatabase::load(std::istream& is) {
    KeyframeDatabase db;
    std::string line;
    while (std::getline(is, line)) {
        if (line.empty()) continue;
        db.add(io::parse_keyframe_line(line));
    }
    return db;
}

bool g_check(const Rot3& extracted_rot, const Rot3& vio_rot_stored, const Rot3& vio_rot_incoming,
             double tau_rot, double* angle_out) {
    // delta between the extracted pose of the stored body and its own VIO
    // attitude, pushed forward to predict the incoming body's attitude.
    Rot3 delta = extracted_rot.transpose() * vio_rot_stored;
    Rot3 predicted = vio_rot_stored * delta;
    double dpsi = yaw_of(vio_rot_incoming) - yaw_of(predicted);
    Rot3 residual = (rotz(dpsi) * predicted).transpose() * vio_rot_incoming;
    double angle = residual.angle();
    if (angle_out) *angle_out = angle;
    return angle <= tau_rot;
}

MapLocalizer::MapLocalizer(DroneId self, const LoopThresholds& th,
                           RelativePoseExtractor* extractor, const Eigen::Vector4d& map_sigma)
    : self_(self), th_(th), extractor_(extractor), map_sigma_(map_sigma) {}

std::optional<int> MapLocalizer::kf_query(const Keyframe& f,
                                          const KeyframeDatabase** which_db) const {
    double best = th_.tau_fl;
    int best_idx = -1;
    const KeyframeDatabase* best_db = nullptr;

    auto scan = [&](const KeyframeDatabase& db) {
        for (const auto& desc : f.descriptors) {
            for (const auto& m : db.knn(desc, kKnn)) {
                const Keyframe& cand = db.keyframe(m.kf_index);
                if (cand.drone == f.drone && std::abs(cand.t - f.t) < th_.t_guard) continue;
                if (m.distance < best) {
                    best = m.distance;
                    best_idx = m.kf_index;
                    best_db = &db;
                }
            }
        }
    };

    if (f.drone == self_) scan(remote_);
    scan(local_);

    if (best_idx < 0) return std::nullopt;
    if (which_db) *which_db = best_db;
    return best_idx;
}

std::optional<MapEdge> MapLocalizer::process_keyframe(const Keyframe& f) {
    ++stats_.processed;
    std::optional<MapEdge> result;

    const KeyframeDatabase* db = nullptr;
    if (auto idx = kf_query(f, &db)) {
        ++stats_.matched;
        const Keyframe& stored = db->keyframe(*idx);
        auto ext = extractor_ ? extractor_->extract(stored, f) : std::nullopt;
        if (!ext || ext->inliers < th_.tau_in) {
            ++stats_.inlier_rejected;
        } else if (!g_check(ext->pose_in_query_frame.rotation, stored.vio6.rotation,
                            f.vio6.rotation, th_.tau_rot)) {
            ++stats_.gcheck_rejected;
        } else {
            Pose4 rel = project_to_4dof(compose6(inverse6(ext->pose_in_query_frame), f.vio6));
            if (rel.position().norm() > th_.l_max) {
                ++stats_.length_rejected;
            } else {
                MapEdge e;
                e.from_drone = stored.drone;
                e.from_t = stored.t;
                e.to_drone = f.drone;
                e.to_t = f.t;
                e.rel = rel;
                e.sigma = map_sigma_;
                e.inliers = ext->inliers;
                ++stats_.edges;
                result = e;
            }
        }
    }
    add_keyframe(f);
    return result;
}

void MapLocalizer::add_keyframe(const Keyframe& f) {
    Keyframe kf = f;
    kf.remote = (f.drone != self_);
    bool added = kf.remote ? remote_.add(kf) : local_.add(kf);
    if (!added) ++stats_.duplicates;
}

}  // namespace swarm::maploc
