#pragma once

#include <functional>
#include <limits>
#include <memory>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "swarm/est/observability.hpp"
#include "swarm/est/solver.hpp"
#include "swarm/maploc.hpp"
#include "swarm/netsim.hpp"

namespace swarm::est {

struct EstimatorConfig {
    size_t m_max = 100;                      // graph frame bound
    double d_kf = 0.3;                       // m, keyframe translation trigger
    double psi_kf = 10.0 * kPi / 180.0;      // keyframe yaw trigger
    double t_kf = 2.0;                       // s, keyframe time trigger
    double d_mot = 0.5;                      // m, "in motion" threshold
    double motion_window = 10.0;             // s
    double h_max = 2.0;                      // m, UWB height-difference gate
    double tau_bidir = 0.3;                  // m, bidirectional UWB gate
    double tau_res = 3.0;                    // whitened residual gate
    int n_init = 8;                          // initialization restarts
    double theta_assoc = 10.0 * kPi / 180.0; // NN association gate
    double t_stale = 1.0;                    // s, VIO staleness for propagation
    double odom_sigma_per_m = 0.02;
    double odom_sigma_floor = 0.01;
    double odom_yaw_sigma_per_m = 0.01;
    double odom_yaw_sigma_floor = 0.005;
    Eigen::Vector4d map_sigma = Eigen::Vector4d(0.05, 0.05, 0.05, 0.02);
    maploc::LoopThresholds loop;
    SolverOptions solver;
    bool pruning_fifo = false;
    bool use_uwb = true;        // ablation switches
    bool use_detections = true;
    bool use_map = true;
    double vio_hz = 20.0;       // master clock, for tick conversion
    uint64_t seed = 42;
};

/// Per-drone back-end instance: swarm-frame assembly, keyframe policy,
/// observability-gated initialization, outlier rejection, graph
/// optimization and forward propagation. Exchanges only immutable message
/// values with the outside; single-writer over its own graph.
class SwarmEstimator {
public:
    using KeyframeFactory = std::function<Keyframe(DroneId, double)>;

    SwarmEstimator(DroneId self, const EstimatorConfig& cfg, KeyframeFactory factory,
                   RelativePoseExtractor* extractor);

    // Local measurements and delivered broadcasts.
    void ingest_vio(const sim::VioSample& s);
    void ingest_distances(const net::DistanceSet& ds);
    void ingest_detection(const DetectionEdge& det);
    void ingest_keyframe(const Keyframe& kf);
    void ingest_map_edge(const MapEdge& e, bool rebroadcast);
    void ingest(const net::Envelope& env);

    /// Frame policy, initialization and optimization; call once per master
    /// tick with monotone time.
    void on_tick(double t);

    /// Broadcasts produced since the last drain (keyframes, map edges).
    std::vector<net::Payload> drain_outbox();

    DroneId self() const { return self_; }
    bool initialized() const { return initialized_; }

    /// Whether a specific drone's pose chain has been initialized; remote
    /// drones stay not-ready until their observability condition is met.
    bool drone_ready(DroneId d) const {
        auto it = tracks_.find(d);
        return it != tracks_.end() && it->second.pose_initialized;
    }
    const EstimatorGraph& graph() const { return graph_; }
    const ObservabilityReport& last_report() const { return report_; }
    maploc::MapLocalizer& localizer() { return maploc_; }

    /// Forward-propagated 4-DoF estimate of a drone at time t, in this
    /// drone's local frame. status (optional): "optimized", "propagated",
    /// "stale" or "uninitialized".
    std::optional<Pose4> estimate4(DroneId d, double t, std::string* status = nullptr) const;
    std::optional<Pose6> estimate6(DroneId d, double t) const;

    /// Relative pose of drone i in this drone's 4-DoF body frame at t.
    std::optional<Pose4> body_relative(DroneId i, double t) const;

    struct Counters {
        int64_t frames = 0;
        int64_t late_dropped = 0;
        int64_t assoc_dropped = 0;
        int64_t malformed = 0;
        int64_t solves = 0;
        int64_t solve_failures = 0;
        int64_t init_attempts = 0;
        int64_t pruned_frames = 0;
    };
    const Counters& counters() const { return counters_; }
    const SolveStats& last_solve() const { return last_solve_; }
    double init_time() const { return init_time_; }

    enum class Fate {
        Active,
        RejectedHeight,
        RejectedBidir,
        RejectedLength,
        RejectedResidual,
        Pruned,
    };
    struct EdgeKey {
        char kind = '?';  // 'D' distance, 'T' detection, 'M' map edge, 'O' odometry
        int tick = -1, tick2 = -1;
        DroneId a = kInvalidDrone, b = kInvalidDrone;
        auto operator<=>(const EdgeKey&) const = default;
    };
    const std::map<EdgeKey, Fate>& edge_fates() const { return fates_; }
    std::vector<std::string> rejection_log() const;

    /// NN data association: candidate drone whose predicted direction is
    /// closest to the measured one, accepted below theta_assoc.
    std::optional<DroneId> associate_detection(const DetectionEdge& det) const;

private:
    struct Track {
        std::map<int, sim::VioSample> vio;
        int last_vio_tick = -1;
        int last_node_tick = -1;   // last graph node of this drone
        Pose4 last_node_vio;
        bool pose_initialized = false;
        bool yaw_frozen = false;
        int solved_tick = -1;      // snapshot for propagation
        Pose4 solved_pose;
        Pose4 solved_vio;
    };

    int tick_of(double t) const { return static_cast<int>(std::llround(t * cfg_.vio_hz)); }
    double time_of(int tick) const { return tick / cfg_.vio_hz; }

    void maybe_trigger_frame(DroneId d, int tick);
    void create_frame(int tick, bool emit_self_keyframe);
    void add_node(SwarmFrame& frame, DroneId d, const FrameNode& node);
    void attach_pending(int tick);
    void try_attach_map_edges();
    double motion_in_window(DroneId d, int now_tick) const;
    std::map<DroneId, double> motion_map(int now_tick) const;
    void attempt_initialization(int tick);
    void initialize_drone_set(const std::set<DroneId>& drones, int first_tick);
    bool detections_hemisphere_ok(const StateMap& x) const;
    void run_solve();
    ProblemFilter make_filter() const;
    void reject_outliers();
    void update_snapshots();
    void record_fate(const EdgeKey& k, Fate f);

    DroneId self_;
    EstimatorConfig cfg_;
    KeyframeFactory factory_;
    maploc::MapLocalizer maploc_;
    EstimatorGraph graph_;
    std::map<DroneId, Track> tracks_;
    std::vector<net::Payload> outbox_;

    std::map<int, std::vector<DistanceEdge>> pending_dist_;
    std::map<int, std::vector<DetectionEdge>> pending_det_;
    std::vector<MapEntry> pending_map_;
    std::set<std::tuple<DroneId, int, DroneId, int>> seen_map_edges_;

    std::set<size_t> excl_odom_, excl_dist_, excl_det_, excl_map_;
    std::map<EdgeKey, Fate> fates_;

    ObservabilityReport report_;
    Counters counters_;
    SolveStats last_solve_;
    bool initialized_ = false;
    double init_time_ = -1.0;
    bool graph_dirty_ = false;
    int last_frame_tick_ = std::numeric_limits<int>::min();
    int now_tick_ = -1;
    double max_observed_distance_ = 0.0;
    std::mt19937_64 prune_rng_;
    std::mt19937_64 init_rng_;
};

}  // namespace swarm::est
