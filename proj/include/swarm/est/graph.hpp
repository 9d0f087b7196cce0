#pragma once

#include <climits>
#include <map>
#include <optional>
#include <random>
#include <vector>

#include "swarm/measurements.hpp"

namespace swarm::est {

/// One pose variable: a drone at a master-clock tick.
struct VarKey {
    DroneId drone = kInvalidDrone;
    int tick = -1;
    auto operator<=>(const VarKey&) const = default;
};

using StateMap = std::map<VarKey, Pose4>;

struct FrameNode {
    double t = 0.0;
    Pose4 vio4;
    Pose6 vio6;
};

/// Time-aligned bundle: every drone's node at one tick.
struct SwarmFrame {
    int tick = -1;
    double t = 0.0;
    std::map<DroneId, FrameNode> nodes;
};

struct OdomEntry {
    OdometryEdge e;
    int tick_prev = -1, tick = -1;
};

struct DistEntry {
    DistanceEdge e;
    int tick = -1;
};

struct DetEntry {
    DetectionEdge e;
    int tick = -1;
};

struct MapEntry {
    MapEdge e;
    int from_tick = -1, to_tick = -1;
};

/// Bounded set of swarm frames plus asynchronous map edges and the state
/// variables they constrain. The anchor variable fixes the gauge and is
/// never pruned or optimized.
struct EstimatorGraph {
    std::map<int, SwarmFrame> frames;
    std::vector<OdomEntry> odometry;
    std::vector<DistEntry> distances;
    std::vector<DetEntry> detections;
    std::vector<MapEntry> map_edges;
    StateMap states;
    std::optional<VarKey> anchor;

    bool has_var(const VarKey& k) const { return states.count(k) > 0; }
    size_t frame_count() const { return frames.size(); }
    int horizon_tick() const { return frames.empty() ? INT_MIN : frames.begin()->first; }
    std::vector<DroneId> drones_present() const;

    /// Consecutive node ticks per drone match the odometry chain: every
    /// neighboring pair of a drone's frames is linked by exactly one edge.
    bool odometry_chain_consistent() const;
};

struct PruneRecord {
    int tick = -1;
    std::vector<DistanceEdge> removed_distances;
    std::vector<DetectionEdge> removed_detections;
    std::vector<MapEdge> removed_map_edges;
};

/// Removes one frame: synchronous edges go away, the odometry chain is
/// re-linked by composing the removed frame's deltas, map edges touching
/// the frame are dropped.
PruneRecord remove_frame(EstimatorGraph& g, int tick);

/// Deletes frames until at most m_max remain. Victims are picked uniformly
/// at random among non-anchor frames (or oldest-first when fifo is set).
std::vector<PruneRecord> prune(EstimatorGraph& g, size_t m_max, bool fifo, std::mt19937_64& rng);

}  // namespace swarm::est
