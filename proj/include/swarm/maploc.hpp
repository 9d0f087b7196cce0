#pragma once

#include <cstdint>
#include <iosfwd>
#include <map>
#include <optional>
#include <vector>

#include "swarm/keyframe.hpp"
#include "swarm/measurements.hpp"

namespace swarm::maploc {

struct LoopThresholds {
    double tau_fl = 0.5;                     // max descriptor distance
    int tau_in = 20;                         // min extractor inliers
    double tau_rot = 5.0 * kPi / 180.0;      // max residual rotation
    double l_max = 10.0;                     // max edge length, meters
    double t_guard = 5.0;                    // same-drone temporal exclusion, s
};

/// Linear-scan descriptor index over stored keyframes. Exact and
/// deterministic; plenty at the scale a single flight produces.
class KeyframeDatabase {
public:
    /// Returns false (and keeps the store unchanged) on a duplicate
    /// (drone, t) insert.
    bool add(const Keyframe& kf);

    size_t size() const { return keyframes_.size(); }

    struct Match {
        int kf_index = -1;
        double distance = 0.0;
    };

    /// k nearest stored descriptors to the query, ascending distance.
    std::vector<Match> knn(const Eigen::VectorXd& desc, int k) const;

    const Keyframe& keyframe(int index) const { return keyframes_[index]; }
    const std::vector<Keyframe>& keyframes() const { return keyframes_; }

    void dump(std::ostream& os) const;
    static KeyframeDatabase load(std::istream& is);

private:
    std::vector<Keyframe> keyframes_;
    std::vector<std::pair<int, int>> entries_;  // (keyframe index, descriptor index)
    std::map<std::pair<DroneId, int64_t>, int> by_key_;
};

/// Gravity-consistency test on an extracted 6-DoF pose. The yaw offset
/// between the two VIO frames is removed, then the residual rotation must
/// stay below tau_rot. Passes on small deviation.
bool g_check(const Rot3& extracted_rot, const Rot3& vio_rot_stored, const Rot3& vio_rot_incoming,
             double tau_rot, double* angle_out = nullptr);

/// Per-drone map-based localization: keyframe databases plus the loop
/// detection pipeline producing map edges.
class MapLocalizer {
public:
    struct Stats {
        int64_t processed = 0;
        int64_t matched = 0;
        int64_t inlier_rejected = 0;
        int64_t gcheck_rejected = 0;
        int64_t length_rejected = 0;
        int64_t edges = 0;
        int64_t duplicates = 0;
    };

    MapLocalizer(DroneId self, const LoopThresholds& th, RelativePoseExtractor* extractor,
                 const Eigen::Vector4d& map_sigma);

    /// Best stored keyframe with descriptor distance below tau_fl, or
    /// nullopt. Remote keyframes query only the local database.
    std::optional<int> kf_query(const Keyframe& f, const KeyframeDatabase** which_db) const;

    /// Full pipeline for one received keyframe: query, extract, gate,
    /// compose the edge; the keyframe is stored regardless of outcome.
    std::optional<MapEdge> process_keyframe(const Keyframe& f);

    /// Routes to the local or remote database by owner.
    void add_keyframe(const Keyframe& f);

    const KeyframeDatabase& local_db() const { return local_; }
    const KeyframeDatabase& remote_db() const { return remote_; }
    const Stats& stats() const { return stats_; }
    const LoopThresholds& thresholds() const { return th_; }

private:
    DroneId self_;
    LoopThresholds th_;
    RelativePoseExtractor* extractor_;
    Eigen::Vector4d map_sigma_;
    KeyframeDatabase local_;
    KeyframeDatabase remote_;
    Stats stats_;
    static constexpr int kKnn = 5;
};

}  // namespace swarm::maploc
