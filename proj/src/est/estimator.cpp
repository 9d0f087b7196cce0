#include "swarm/est/estimator.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

namespace swarm::est {

namespace {

const char* fate_name(SwarmEstimator::Fate f) {
    switch (f) {
        case SwarmEstimator::Fate::Active: return "active";
        case SwarmEstimator::Fate::RejectedHeight: return "height";
        case SwarmEstimator::Fate::RejectedBidir: return "bidir";
        case SwarmEstimator::Fate::RejectedLength: return "length";
        case SwarmEstimator::Fate::RejectedResidual: return "residual";
        case SwarmEstimator::Fate::Pruned: return "pruned";
    }
    return "?";
}

Eigen::Vector3d sample_in_ball(std::mt19937_64& rng, double radius) {
    std::normal_distribution<double> gauss(0.0, 1.0);
    Eigen::Vector3d dir(gauss(rng), gauss(rng), gauss(rng));
    if (dir.norm() < 1e-12) dir = Eigen::Vector3d::UnitX();
    dir.normalize();
    double u = std::uniform_real_distribution<double>(0.0, 1.0)(rng);
    return radius * std::cbrt(u) * dir;
}

}  // namespace

SwarmEstimator::SwarmEstimator(DroneId self, const EstimatorConfig& cfg, KeyframeFactory factory,
                               RelativePoseExtractor* extractor)
    : self_(self),
      cfg_(cfg),
      factory_(std::move(factory)),
      maploc_(self, cfg.loop, extractor, cfg.map_sigma),
      prune_rng_(cfg.seed ^ (0x9e3779b9ull + static_cast<uint64_t>(self) * 0x85ebca6bull)),
      init_rng_(cfg.seed ^ (0xc2b2ae35ull + static_cast<uint64_t>(self) * 0x27d4eb2full)) {}

void SwarmEstimator::record_fate(const EdgeKey& k, Fate f) { fates_[k] = f; }

void SwarmEstimator::ingest(const net::Envelope& env) {
    if (std::holds_alternative<sim::VioSample>(env.payload)) {
        ingest_vio(std::get<sim::VioSample>(env.payload));
    } else if (std::holds_alternative<net::DistanceSet>(env.payload)) {
        ingest_distances(std::get<net::DistanceSet>(env.payload));
    } else if (std::holds_alternative<DetectionEdge>(env.payload)) {
        ingest_detection(std::get<DetectionEdge>(env.payload));
    } else if (std::holds_alternative<Keyframe>(env.payload)) {
        ingest_keyframe(std::get<Keyframe>(env.payload));
    } else if (std::holds_alternative<MapEdge>(env.payload)) {
        ingest_map_edge(std::get<MapEdge>(env.payload), false);
    }
}

void SwarmEstimator::ingest_vio(const sim::VioSample& s) {
    if (s.drone < 0 || !s.p4.is_finite()) {
        ++counters_.malformed;
        return;
    }
    const int tick = tick_of(s.t);
    Track& track = tracks_[s.drone];
    track.vio[tick] = s;
    track.last_vio_tick = std::max(track.last_vio_tick, tick);
    maybe_trigger_frame(s.drone, tick);
}

void SwarmEstimator::maybe_trigger_frame(DroneId d, int tick) {
    Track& track = tracks_[d];
    if (tick <= track.last_node_tick) return;
    bool trigger = track.last_node_tick < 0;  // first data from this drone
    if (!trigger) {
        const Pose4& now = track.vio.at(tick).p4;
        double moved = (now.position() - track.last_node_vio.position()).norm();
        double turned = std::abs(wrap_angle(now.yaw - track.last_node_vio.yaw));
        trigger = moved > cfg_.d_kf || turned > cfg_.psi_kf;
    }
    if (trigger) create_frame(tick, true);
}

void SwarmEstimator::add_node(SwarmFrame& frame, DroneId d, const FrameNode& node) {
    if (frame.nodes.count(d)) return;
    frame.nodes[d] = node;
    Track& track = tracks_[d];
    VarKey key{d, frame.tick};

    // The newest surviving node of this drone; the track's last keyframe
    // may have been pruned away.
    int prev_tick = -1;
    const FrameNode* prev_node = nullptr;
    for (auto fit = graph_.frames.rbegin(); fit != graph_.frames.rend(); ++fit) {
        if (fit->first >= frame.tick) continue;
        auto nit = fit->second.nodes.find(d);
        if (nit != fit->second.nodes.end()) {
            prev_tick = fit->first;
            prev_node = &nit->second;
            break;
        }
    }

    if (d == self_ && !graph_.anchor) {
        graph_.anchor = key;
        graph_.states[key] = node.vio4;
        track.pose_initialized = true;
    } else if (track.pose_initialized && prev_node && graph_.has_var({d, prev_tick})) {
        Pose4 prev = graph_.states.at({d, prev_tick});
        graph_.states[key] = compose4(prev, relative4(prev_node->vio4, node.vio4));
    } else {
        graph_.states[key] = node.vio4;
    }

    if (prev_node && prev_tick < frame.tick) {
        // VIO path length between the nodes sets the odometry noise scale.
        double len = 0.0;
        Pose4 prev_sample = prev_node->vio4;
        for (auto it = track.vio.upper_bound(prev_tick);
             it != track.vio.end() && it->first <= frame.tick; ++it) {
            len += (it->second.p4.position() - prev_sample.position()).norm();
            prev_sample = it->second.p4;
        }
        OdomEntry oe;
        oe.e.drone = d;
        oe.e.t_prev = time_of(prev_tick);
        oe.e.t = frame.t;
        oe.e.delta = relative4(prev_node->vio4, node.vio4);
        double s_xyz = cfg_.odom_sigma_floor + cfg_.odom_sigma_per_m * len;
        double s_yaw = cfg_.odom_yaw_sigma_floor + cfg_.odom_yaw_sigma_per_m * len;
        oe.e.sigma = Eigen::Vector4d(s_xyz, s_xyz, s_xyz, s_yaw);
        oe.tick_prev = prev_tick;
        oe.tick = frame.tick;
        graph_.odometry.push_back(oe);
    }
    track.last_node_tick = frame.tick;
    track.last_node_vio = node.vio4;
}

void SwarmEstimator::create_frame(int tick, bool emit_self_keyframe) {
    if (!graph_.frames.empty() && tick < graph_.horizon_tick()) {
        ++counters_.late_dropped;
        return;
    }
    bool fresh = !graph_.frames.count(tick);
    SwarmFrame& frame = graph_.frames[tick];
    if (fresh) {
        frame.tick = tick;
        frame.t = time_of(tick);
        ++counters_.frames;
    }
    for (auto& [d, track] : tracks_) {
        auto it = track.vio.find(tick);
        if (it == track.vio.end()) continue;
        add_node(frame, d, FrameNode{frame.t, it->second.p4, it->second.p6});
    }
    last_frame_tick_ = std::max(last_frame_tick_, tick);
    graph_dirty_ = true;

    attach_pending(tick);
    try_attach_map_edges();

    if (emit_self_keyframe && frame.nodes.count(self_) && factory_) {
        Keyframe kf = factory_(self_, frame.t);
        auto edge = maploc_.process_keyframe(kf);
        outbox_.push_back(kf);
        if (edge) ingest_map_edge(*edge, true);
    }
}

void SwarmEstimator::ingest_distances(const net::DistanceSet& ds) {
    for (const auto& e : ds.edges) {
        if (e.i < 0 || e.j < 0 || e.i == e.j || !std::isfinite(e.d) || e.d < 0) {
            ++counters_.malformed;
            continue;
        }
        max_observed_distance_ = std::max(max_observed_distance_, e.d);
        if (!cfg_.use_uwb) continue;
        const int tick = tick_of(e.t);
        if (!graph_.frames.empty() && tick < graph_.horizon_tick()) {
            ++counters_.late_dropped;
            continue;
        }
        if (graph_.frames.count(tick)) {
            graph_.distances.push_back({e, tick});
            record_fate({'D', tick, tick, e.i, e.j}, Fate::Active);
            graph_dirty_ = true;
        } else {
            pending_dist_[tick].push_back(e);
        }
    }
}

void SwarmEstimator::ingest_detection(const DetectionEdge& det_in) {
    if (!cfg_.use_detections) return;
    DetectionEdge det = det_in;
    if (det.observer < 0 || !std::isfinite(det.inv_depth) || det.inv_depth <= 0 ||
        std::abs(det.dir.norm() - 1.0) > 1e-6) {
        ++counters_.malformed;
        return;
    }
    if (det.inv_depth > 0) {
        max_observed_distance_ = std::max(max_observed_distance_, 1.0 / det.inv_depth);
    }
    const bool label_usable = det.target >= 0 && det.target != det.observer;
    if (initialized_ && drone_ready(det.observer) &&
        (label_usable ? drone_ready(det.target) : true)) {
        auto assoc = associate_detection(det);
        if (!assoc) {
            ++counters_.assoc_dropped;
            return;
        }
        det.target = *assoc;
    } else if (!label_usable) {
        // Either endpoint lacks an estimate, so the NN policy cannot run;
        // without a usable tracker label the detection is unusable too.
        ++counters_.malformed;
        return;
    }
    const int tick = tick_of(det.t);
    if (!graph_.frames.empty() && tick < graph_.horizon_tick()) {
        ++counters_.late_dropped;
        return;
    }
    if (graph_.frames.count(tick)) {
        graph_.detections.push_back({det, tick});
        record_fate({'T', tick, tick, det.observer, det.target}, Fate::Active);
        graph_dirty_ = true;
    } else {
        pending_det_[tick].push_back(det);
    }
}

void SwarmEstimator::ingest_keyframe(const Keyframe& kf) {
    const int tick = tick_of(kf.t);
    Track& track = tracks_[kf.drone];
    if (!track.vio.count(tick)) {
        // The keyframe carries its own VIO pose; backfill the track.
        sim::VioSample s;
        s.drone = kf.drone;
        s.t = kf.t;
        s.p4 = kf.vio4;
        s.p6 = kf.vio6;
        track.vio[tick] = s;
        track.last_vio_tick = std::max(track.last_vio_tick, tick);
    }
    if (graph_.frames.empty() || tick >= graph_.horizon_tick()) {
        create_frame(tick, false);
    } else {
        ++counters_.late_dropped;
    }
    auto edge = maploc_.process_keyframe(kf);
    if (edge) ingest_map_edge(*edge, true);
}

void SwarmEstimator::ingest_map_edge(const MapEdge& e, bool rebroadcast) {
    if (!cfg_.use_map) return;
    const int ft = tick_of(e.from_t), tt = tick_of(e.to_t);
    auto key = std::make_tuple(e.from_drone, ft, e.to_drone, tt);
    if (seen_map_edges_.count(key)) return;
    seen_map_edges_.insert(key);

    EdgeKey jk{'M', ft, tt, e.from_drone, e.to_drone};
    if (e.rel.position().norm() > cfg_.loop.l_max) {
        record_fate(jk, Fate::RejectedLength);
        return;
    }
    if (rebroadcast) outbox_.push_back(e);

    MapEntry me{e, ft, tt};
    if (graph_.has_var({e.from_drone, ft}) && graph_.has_var({e.to_drone, tt})) {
        graph_.map_edges.push_back(me);
        record_fate(jk, Fate::Active);
        graph_dirty_ = true;
    } else {
        pending_map_.push_back(me);
    }
}

void SwarmEstimator::attach_pending(int tick) {
    if (auto it = pending_dist_.find(tick); it != pending_dist_.end()) {
        for (const auto& e : it->second) {
            graph_.distances.push_back({e, tick});
            record_fate({'D', tick, tick, e.i, e.j}, Fate::Active);
        }
        pending_dist_.erase(it);
        graph_dirty_ = true;
    }
    if (auto it = pending_det_.find(tick); it != pending_det_.end()) {
        for (const auto& e : it->second) {
            graph_.detections.push_back({e, tick});
            record_fate({'T', tick, tick, e.observer, e.target}, Fate::Active);
        }
        pending_det_.erase(it);
        graph_dirty_ = true;
    }
}

void SwarmEstimator::try_attach_map_edges() {
    std::vector<MapEntry> keep;
    for (const auto& me : pending_map_) {
        if (graph_.has_var({me.e.from_drone, me.from_tick}) &&
            graph_.has_var({me.e.to_drone, me.to_tick})) {
            graph_.map_edges.push_back(me);
            record_fate({'M', me.from_tick, me.to_tick, me.e.from_drone, me.e.to_drone},
                        Fate::Active);
            graph_dirty_ = true;
        } else if (!graph_.frames.empty() &&
                   (me.from_tick < graph_.horizon_tick() || me.to_tick < graph_.horizon_tick())) {
            ++counters_.late_dropped;
        } else {
            keep.push_back(me);
        }
    }
    pending_map_ = std::move(keep);
}

double SwarmEstimator::motion_in_window(DroneId d, int now_tick) const {
    auto it = tracks_.find(d);
    if (it == tracks_.end()) return 0.0;
    const int from = now_tick - static_cast<int>(cfg_.motion_window * cfg_.vio_hz);
    double len = 0.0;
    const Pose4* prev = nullptr;
    for (auto vit = it->second.vio.lower_bound(from); vit != it->second.vio.end(); ++vit) {
        if (prev) len += (vit->second.p4.position() - prev->position()).norm();
        prev = &vit->second.p4;
    }
    return len;
}

std::map<DroneId, double> SwarmEstimator::motion_map(int now_tick) const {
    std::map<DroneId, double> m;
    for (const auto& [d, track] : tracks_) m[d] = motion_in_window(d, now_tick);
    return m;
}

void SwarmEstimator::on_tick(double t) {
    now_tick_ = tick_of(t);

    // Time-triggered swarm keyframe.
    if (now_tick_ - last_frame_tick_ >= static_cast<int>(cfg_.t_kf * cfg_.vio_hz) &&
        tracks_.count(self_) && tracks_[self_].vio.count(now_tick_)) {
        create_frame(now_tick_, true);
    }

    // Bound the graph before touching the states.
    auto removed = prune(graph_, cfg_.m_max, cfg_.pruning_fifo, prune_rng_);
    for (const auto& rec : removed) {
        ++counters_.pruned_frames;
        for (const auto& e : rec.removed_distances) {
            record_fate({'D', rec.tick, rec.tick, e.i, e.j}, Fate::Pruned);
        }
        for (const auto& e : rec.removed_detections) {
            record_fate({'T', rec.tick, rec.tick, e.observer, e.target}, Fate::Pruned);
        }
        for (const auto& e : rec.removed_map_edges) {
            record_fate({'M', tick_of(e.from_t), tick_of(e.to_t), e.from_drone, e.to_drone},
                        Fate::Pruned);
        }
        graph_dirty_ = true;
    }

    // Expire pendings behind the horizon.
    const int horizon = graph_.horizon_tick();
    for (auto it = pending_dist_.begin(); it != pending_dist_.end();) {
        if (it->first < horizon) {
            counters_.late_dropped += static_cast<int64_t>(it->second.size());
            it = pending_dist_.erase(it);
        } else {
            ++it;
        }
    }
    for (auto it = pending_det_.begin(); it != pending_det_.end();) {
        if (it->first < horizon) {
            counters_.late_dropped += static_cast<int64_t>(it->second.size());
            it = pending_det_.erase(it);
        } else {
            ++it;
        }
    }

    if (!graph_dirty_) return;
    report_ = check_observability(graph_, self_, motion_map(now_tick_), cfg_.d_mot);

    if (!initialized_) {
        attempt_initialization(now_tick_);
        graph_dirty_ = false;
        return;
    }

    // Late joiners get their own restart-based initialization.
    for (auto& [d, track] : tracks_) {
        if (track.pose_initialized || d == self_) continue;
        auto lvl = report_.level.find(d);
        if (lvl == report_.level.end() || lvl->second == ObsLevel::None) continue;
        std::vector<int> node_ticks;
        for (const auto& [tick, f] : graph_.frames) {
            if (f.nodes.count(d)) node_ticks.push_back(tick);
        }
        if (node_ticks.empty()) continue;
        initialize_drone_set({d}, node_ticks.front());
    }

    // Yaw freeze follows the current observability level.
    for (auto& [d, track] : tracks_) {
        auto lvl = report_.level.find(d);
        if (lvl != report_.level.end() && lvl->second == ObsLevel::Dof6) track.yaw_frozen = false;
    }

    reject_outliers();
    run_solve();
    update_snapshots();
    graph_dirty_ = false;
}

void SwarmEstimator::attempt_initialization(int tick) {
    if (!graph_.anchor) return;
    auto present = graph_.drones_present();
    if (present.empty()) return;

    if (present.size() == 1 && present.front() == self_) {
        initialized_ = true;
        init_time_ = time_of(tick);
        tracks_[self_].pose_initialized = true;
        update_snapshots();
        return;
    }

    for (DroneId d : present) {
        auto lvl = report_.level.find(d);
        if (lvl == report_.level.end() || lvl->second == ObsLevel::None) return;  // not ready
    }
    ++counters_.init_attempts;

    double radius = std::max(max_observed_distance_, 1.0);
    for (const auto& me : graph_.map_edges) {
        radius = std::max(radius, me.e.rel.position().norm());
    }

    std::set<DroneId> frozen;
    for (DroneId d : present) {
        if (d != self_ && report_.level.at(d) == ObsLevel::Dof3) frozen.insert(d);
    }

    std::optional<StateMap> best;
    double best_cost = std::numeric_limits<double>::infinity();
    SolveStats best_stats;

    for (int restart = 0; restart < cfg_.n_init; ++restart) {
        StateMap candidate = graph_.states;
        for (DroneId d : present) {
            if (d == self_) continue;
            std::vector<std::pair<int, const FrameNode*>> nodes;
            for (const auto& [ftick, f] : graph_.frames) {
                auto nit = f.nodes.find(d);
                if (nit != f.nodes.end()) nodes.emplace_back(ftick, &nit->second);
            }
            if (nodes.empty()) continue;
            Pose4 base;
            base.set_position(sample_in_ball(init_rng_, radius));
            base.yaw = frozen.count(d)
                           ? 0.0
                           : std::uniform_real_distribution<double>(-kPi, kPi)(init_rng_);
            const Pose4 vio0 = nodes.front().second->vio4;
            for (const auto& [ftick, node] : nodes) {
                candidate[{d, ftick}] = compose4(base, relative4(vio0, node->vio4));
            }
        }
        GraphProblem problem(graph_, cfg_.solver, frozen, std::nullopt, make_filter());
        SolveStats stats = problem.solve(&candidate);
        if (stats.converged && stats.final_cost < best_cost &&
            detections_hemisphere_ok(candidate)) {
            best_cost = stats.final_cost;
            best = std::move(candidate);
            best_stats = stats;
        }
    }

    if (!best) return;  // not ready; retry on new data
    graph_.states = *best;
    last_solve_ = best_stats;
    initialized_ = true;
    init_time_ = time_of(tick);
    for (DroneId d : present) {
        tracks_[d].pose_initialized = true;
        tracks_[d].yaw_frozen = frozen.count(d) > 0;
    }
    update_snapshots();
}

void SwarmEstimator::initialize_drone_set(const std::set<DroneId>& drones, int /*first_tick*/) {
    double radius = std::max(max_observed_distance_, 1.0);
    std::set<DroneId> frozen;
    for (DroneId d : drones) {
        if (report_.level.count(d) && report_.level.at(d) == ObsLevel::Dof3) frozen.insert(d);
    }
    std::optional<StateMap> best;
    double best_cost = std::numeric_limits<double>::infinity();
    for (int restart = 0; restart < cfg_.n_init; ++restart) {
        StateMap candidate = graph_.states;
        for (DroneId d : drones) {
            std::vector<std::pair<int, const FrameNode*>> nodes;
            for (const auto& [ftick, f] : graph_.frames) {
                auto nit = f.nodes.find(d);
                if (nit != f.nodes.end()) nodes.emplace_back(ftick, &nit->second);
            }
            if (nodes.empty()) continue;
            Pose4 base;
            base.set_position(sample_in_ball(init_rng_, radius));
            base.yaw = frozen.count(d)
                           ? 0.0
                           : std::uniform_real_distribution<double>(-kPi, kPi)(init_rng_);
            const Pose4 vio0 = nodes.front().second->vio4;
            for (const auto& [ftick, node] : nodes) {
                candidate[{d, ftick}] = compose4(base, relative4(vio0, node->vio4));
            }
        }
        GraphProblem problem(graph_, cfg_.solver, frozen, drones, make_filter());
        SolveStats stats = problem.solve(&candidate);
        if (stats.converged && stats.final_cost < best_cost &&
            detections_hemisphere_ok(candidate)) {
            best_cost = stats.final_cost;
            best = std::move(candidate);
        }
    }
    if (!best) return;
    graph_.states = *best;
    for (DroneId d : drones) {
        tracks_[d].pose_initialized = true;
        tracks_[d].yaw_frozen = frozen.count(d) > 0;
    }
}

bool SwarmEstimator::detections_hemisphere_ok(const StateMap& x) const {
    // The tangent-plane direction residual vanishes for the antipodal
    // direction as well; candidate states from random restarts must point
    // the right way along every detection ray.
    for (const auto& dd : graph_.detections) {
        VarKey a{dd.e.observer, dd.tick}, b{dd.e.target, dd.tick};
        auto ia = x.find(a), ib = x.find(b);
        if (ia == x.end() || ib == x.end()) continue;
        Eigen::Vector3d p = relative4(ia->second, ib->second).position() - dd.e.cam_pos;
        if (p.norm() < 1e-9) continue;
        if (p.normalized().dot(dd.e.dir) < 0.0) return false;
    }
    return true;
}

ProblemFilter SwarmEstimator::make_filter() const {
    ProblemFilter f;
    f.use_uwb = cfg_.use_uwb;
    f.use_detections = cfg_.use_detections;
    f.use_map = cfg_.use_map;
    f.excluded_odom = &excl_odom_;
    f.excluded_dist = &excl_dist_;
    f.excluded_det = &excl_det_;
    f.excluded_map = &excl_map_;
    return f;
}

void SwarmEstimator::reject_outliers() {
    excl_odom_.clear();
    excl_dist_.clear();
    excl_det_.clear();
    excl_map_.clear();

    auto drone_ready = [&](DroneId d) {
        auto it = tracks_.find(d);
        return it != tracks_.end() && it->second.pose_initialized;
    };

    // Bidirectional consistency: both directions of a pair at one tick must
    // agree within tau_bidir, otherwise both are dropped.
    std::map<std::tuple<int, DroneId, DroneId>, std::pair<double, double>> pair_range;
    for (const auto& x : graph_.distances) {
        DroneId lo = std::min(x.e.i, x.e.j), hi = std::max(x.e.i, x.e.j);
        auto key = std::make_tuple(x.tick, lo, hi);
        auto& entry = pair_range.try_emplace(key, std::make_pair(-1.0, -1.0)).first->second;
        if (x.e.i == lo) entry.first = x.e.d;
        else entry.second = x.e.d;
    }
    std::set<std::tuple<int, DroneId, DroneId>> bad_pairs;
    for (const auto& [key, dd] : pair_range) {
        if (dd.first >= 0 && dd.second >= 0 && std::abs(dd.first - dd.second) > cfg_.tau_bidir) {
            bad_pairs.insert(key);
        }
    }

    std::vector<DistEntry> kept;
    kept.reserve(graph_.distances.size());
    for (const auto& x : graph_.distances) {
        DroneId lo = std::min(x.e.i, x.e.j), hi = std::max(x.e.i, x.e.j);
        EdgeKey jk{'D', x.tick, x.tick, x.e.i, x.e.j};
        if (bad_pairs.count({x.tick, lo, hi})) {
            record_fate(jk, Fate::RejectedBidir);
            continue;
        }
        // Large estimated height difference degrades UWB ranging.
        if (drone_ready(x.e.i) && drone_ready(x.e.j) && graph_.has_var({x.e.i, x.tick}) &&
            graph_.has_var({x.e.j, x.tick})) {
            double dz = std::abs(graph_.states.at({x.e.i, x.tick}).z -
                                 graph_.states.at({x.e.j, x.tick}).z);
            if (dz > cfg_.h_max) {
                record_fate(jk, Fate::RejectedHeight);
                continue;
            }
        }
        kept.push_back(x);
    }
    graph_.distances = std::move(kept);

    if (!initialized_) return;

    // Whitened-residual gate at the current estimate, all edge classes.
    auto vars_ready = [&](const VarKey& a, const VarKey& b) {
        return graph_.has_var(a) && graph_.has_var(b) && drone_ready(a.drone) &&
               drone_ready(b.drone);
    };
    for (size_t i = 0; i < graph_.odometry.size(); ++i) {
        const auto& o = graph_.odometry[i];
        VarKey a{o.e.drone, o.tick_prev}, b{o.e.drone, o.tick};
        if (!vars_ready(a, b)) continue;
        double rn = residual_odometry(o.e, graph_.states.at(a), graph_.states.at(b)).norm();
        EdgeKey jk{'O', o.tick_prev, o.tick, o.e.drone, o.e.drone};
        if (rn > cfg_.tau_res) {
            excl_odom_.insert(i);
            record_fate(jk, Fate::RejectedResidual);
        } else if (auto it = fates_.find(jk);
                   it != fates_.end() && it->second == Fate::RejectedResidual) {
            record_fate(jk, Fate::Active);
        }
    }
    for (size_t i = 0; i < graph_.distances.size(); ++i) {
        const auto& x = graph_.distances[i];
        VarKey a{x.e.i, x.tick}, b{x.e.j, x.tick};
        if (!vars_ready(a, b)) continue;
        double rn = std::abs(residual_distance(x.e, graph_.states.at(a).position(),
                                               graph_.states.at(b).position()));
        EdgeKey jk{'D', x.tick, x.tick, x.e.i, x.e.j};
        if (rn > cfg_.tau_res) {
            excl_dist_.insert(i);
            record_fate(jk, Fate::RejectedResidual);
        } else if (auto it = fates_.find(jk);
                   it != fates_.end() && it->second == Fate::RejectedResidual) {
            record_fate(jk, Fate::Active);
        }
    }
    for (size_t i = 0; i < graph_.detections.size(); ++i) {
        const auto& x = graph_.detections[i];
        VarKey a{x.e.observer, x.tick}, b{x.e.target, x.tick};
        if (!vars_ready(a, b)) continue;
        auto r = residual_detection(x.e, graph_.states.at(a), graph_.states.at(b));
        EdgeKey jk{'T', x.tick, x.tick, x.e.observer, x.e.target};
        if (!r || r->norm() > cfg_.tau_res) {
            excl_det_.insert(i);
            record_fate(jk, Fate::RejectedResidual);
        } else if (auto it = fates_.find(jk);
                   it != fates_.end() && it->second == Fate::RejectedResidual) {
            record_fate(jk, Fate::Active);
        }
    }
    for (size_t i = 0; i < graph_.map_edges.size(); ++i) {
        const auto& x = graph_.map_edges[i];
        VarKey a{x.e.from_drone, x.from_tick}, b{x.e.to_drone, x.to_tick};
        if (!vars_ready(a, b)) continue;
        double rn = residual_map_edge(x.e, graph_.states.at(a), graph_.states.at(b)).norm();
        EdgeKey jk{'M', x.from_tick, x.to_tick, x.e.from_drone, x.e.to_drone};
        if (rn > cfg_.tau_res) {
            excl_map_.insert(i);
            record_fate(jk, Fate::RejectedResidual);
        } else if (auto it = fates_.find(jk);
                   it != fates_.end() && it->second == Fate::RejectedResidual) {
            record_fate(jk, Fate::Active);
        }
    }
}

void SwarmEstimator::run_solve() {
    std::set<DroneId> frozen;
    for (const auto& [d, track] : tracks_) {
        if (track.yaw_frozen) frozen.insert(d);
    }
    GraphProblem problem(graph_, cfg_.solver, frozen, std::nullopt, make_filter());
    last_solve_ = problem.solve(&graph_.states);
    ++counters_.solves;
    if (!last_solve_.converged) ++counters_.solve_failures;
}

void SwarmEstimator::update_snapshots() {
    for (auto& [d, track] : tracks_) {
        if (!track.pose_initialized) continue;
        for (auto fit = graph_.frames.rbegin(); fit != graph_.frames.rend(); ++fit) {
            auto nit = fit->second.nodes.find(d);
            if (nit == fit->second.nodes.end()) continue;
            VarKey key{d, fit->first};
            if (!graph_.has_var(key)) break;
            track.solved_tick = fit->first;
            track.solved_pose = graph_.states.at(key);
            track.solved_vio = nit->second.vio4;
            break;
        }
    }
}

std::optional<DroneId> SwarmEstimator::associate_detection(const DetectionEdge& det) const {
    auto obs = estimate4(det.observer, det.t);
    if (!obs) return std::nullopt;
    double best_angle = std::numeric_limits<double>::infinity();
    double best_mismatch = std::numeric_limits<double>::infinity();
    DroneId best = kInvalidDrone;
    for (const auto& [d, track] : tracks_) {
        if (d == det.observer) continue;
        auto est = estimate4(d, det.t);
        if (!est) continue;
        Eigen::Vector3d p = relative4(*obs, *est).position() - det.cam_pos;
        if (p.norm() < 1e-9) continue;
        double angle = std::acos(std::clamp(p.normalized().dot(det.dir), -1.0, 1.0));
        double mismatch = std::abs(1.0 / det.inv_depth - p.norm());
        if (angle < best_angle || (angle == best_angle && mismatch < best_mismatch)) {
            best_angle = angle;
            best_mismatch = mismatch;
            best = d;
        }
    }
    if (best == kInvalidDrone || best_angle > cfg_.theta_assoc) return std::nullopt;
    return best;
}

std::optional<Pose4> SwarmEstimator::estimate4(DroneId d, double t, std::string* status) const {
    auto it = tracks_.find(d);
    if (it == tracks_.end() || !it->second.pose_initialized || it->second.solved_tick < 0) {
        if (status) *status = "uninitialized";
        return std::nullopt;
    }
    const Track& track = it->second;
    const int tick = tick_of(t);
    auto vit = track.vio.upper_bound(tick);
    if (vit == track.vio.begin()) {
        if (status) *status = "uninitialized";
        return std::nullopt;
    }
    --vit;
    const sim::VioSample& latest = vit->second;
    if (status) {
        if (t - latest.t > cfg_.t_stale) *status = "stale";
        else if (vit->first == track.solved_tick) *status = "optimized";
        else *status = "propagated";
    }
    return compose4(track.solved_pose, relative4(track.solved_vio, latest.p4));
}

std::optional<Pose6> SwarmEstimator::estimate6(DroneId d, double t) const {
    auto p4 = estimate4(d, t);
    if (!p4) return std::nullopt;
    const Track& track = tracks_.at(d);
    auto vit = track.vio.upper_bound(tick_of(t));
    --vit;
    const sim::VioSample& latest = vit->second;
    return lift_to_6dof(*p4, latest.p6, latest.p4);
}

std::optional<Pose4> SwarmEstimator::body_relative(DroneId i, double t) const {
    auto self_pose = estimate4(self_, t);
    auto other = estimate4(i, t);
    if (!self_pose || !other) return std::nullopt;
    return relative4(*self_pose, *other);
}

std::vector<net::Payload> SwarmEstimator::drain_outbox() {
    std::vector<net::Payload> out = std::move(outbox_);
    outbox_.clear();
    return out;
}

std::vector<std::string> SwarmEstimator::rejection_log() const {
    std::vector<std::string> lines;
    lines.reserve(fates_.size());
    for (const auto& [k, f] : fates_) {
        std::ostringstream os;
        os << "EDGE " << k.kind << ' ' << k.tick << ' ' << k.tick2 << ' ' << k.a << ' ' << k.b
           << ' ' << fate_name(f);
        lines.push_back(os.str());
    }
    return lines;
}

}  // namespace swarm::est
