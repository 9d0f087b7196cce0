#include "swarm/eval/runner.hpp"

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>

namespace swarm::eval {

namespace fs = std::filesystem;
using nlohmann::json;
using nlohmann::ordered_json;

RunConfig config_from_json_text(const std::string& text) {
    RunConfig cfg;
    cfg.scenario = sim::scenario_from_json_text(text);
    json j = json::parse(text);

    if (j.contains("network")) {
        const auto& n = j["network"];
        cfg.network.latency_s = n.value("latency_ms", 20.0) / 1000.0;
        cfg.network.jitter_s = n.value("jitter_ms", 10.0) / 1000.0;
        cfg.network.allow_reorder = n.value("allow_reorder", true);
        auto cls = [&](const char* name, net::MessageClass c) {
            cfg.network.drop[static_cast<int>(c)] = n.value(name, 0.0);
        };
        cls("drop_vio", net::MessageClass::Vio);
        cls("drop_uwb", net::MessageClass::Uwb);
        cls("drop_detection", net::MessageClass::Detection);
        cls("drop_keyframe", net::MessageClass::KeyframeMsg);
        cls("drop_mapedge", net::MessageClass::MapEdgeMsg);
    }
    cfg.network.seed = cfg.scenario.seed ^ 0xabcd1234ull;

    auto& e = cfg.estimator;
    if (j.contains("estimator")) {
        const auto& n = j["estimator"];
        e.m_max = n.value("m_max", e.m_max);
        e.d_kf = n.value("d_kf", e.d_kf);
        e.psi_kf = n.value("psi_kf_deg", e.psi_kf * 180.0 / kPi) * kPi / 180.0;
        e.t_kf = n.value("t_kf", e.t_kf);
        e.d_mot = n.value("d_mot", e.d_mot);
        e.motion_window = n.value("motion_window", e.motion_window);
        e.h_max = n.value("h_max", e.h_max);
        e.tau_bidir = n.value("tau_bidir", e.tau_bidir);
        e.tau_res = n.value("tau_res", e.tau_res);
        e.n_init = n.value("n_init", e.n_init);
        e.theta_assoc = n.value("theta_assoc_deg", e.theta_assoc * 180.0 / kPi) * kPi / 180.0;
        e.t_stale = n.value("t_stale", e.t_stale);
        e.odom_sigma_per_m = n.value("odom_sigma_per_m", e.odom_sigma_per_m);
        e.odom_sigma_floor = n.value("odom_sigma_floor", e.odom_sigma_floor);
        e.odom_yaw_sigma_per_m = n.value("odom_yaw_sigma_per_m", e.odom_yaw_sigma_per_m);
        e.odom_yaw_sigma_floor = n.value("odom_yaw_sigma_floor", e.odom_yaw_sigma_floor);
        e.pruning_fifo = n.value("pruning", std::string("random")) == std::string("fifo");
        e.loop.tau_fl = n.value("tau_fl", e.loop.tau_fl);
        e.loop.tau_in = n.value("tau_in", e.loop.tau_in);
        e.loop.tau_rot = n.value("tau_rot_deg", e.loop.tau_rot * 180.0 / kPi) * kPi / 180.0;
        e.loop.l_max = n.value("l_max", e.loop.l_max);
        e.loop.t_guard = n.value("t_guard", e.loop.t_guard);
    }
    e.vio_hz = cfg.scenario.vio_hz;
    e.seed = cfg.scenario.seed;
    return cfg;
}

RunConfig load_run_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open config: " + path);
    std::string text((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    return config_from_json_text(text);
}

void apply_overrides(RunConfig* cfg, const RunOptions& opt) {
    if (opt.seed) {
        cfg->scenario.seed = *opt.seed;
        cfg->estimator.seed = *opt.seed;
        cfg->network.seed = *opt.seed ^ 0xabcd1234ull;
    }
    if (opt.loss_uwb) cfg->network.drop[static_cast<int>(net::MessageClass::Uwb)] = *opt.loss_uwb;
    if (opt.loss_vio) cfg->network.drop[static_cast<int>(net::MessageClass::Vio)] = *opt.loss_vio;
    if (opt.m_max) cfg->estimator.m_max = *opt.m_max;
    if (opt.pruning) cfg->estimator.pruning_fifo = (*opt.pruning == "fifo");
    if (opt.ablate == "no-uwb") cfg->estimator.use_uwb = false;
    else if (opt.ablate == "no-detection") cfg->estimator.use_detections = false;
    else if (opt.ablate == "no-map") cfg->estimator.use_map = false;
    else if (!opt.ablate.empty() && opt.ablate != "full") {
        throw std::runtime_error("unknown ablation: " + opt.ablate);
    }
}

void simulate_to_dir(const RunConfig& cfg, const std::string& dir) {
    fs::create_directories(dir);
    auto streams = sim::generate_streams(cfg.scenario);

    std::ofstream log(fs::path(dir) / "measurements.log");
    io::write_measurement_log(log, streams);

    std::ofstream inj(fs::path(dir) / "uwb_outliers.log");
    io::write_uwb_injections(inj, streams.uwb_injections);

    std::ofstream truth(fs::path(dir) / "det_truth.log");
    io::write_detection_truth(truth, streams.detections);

    for (DroneId d = 0; d < cfg.scenario.n_drones(); ++d) {
        std::ofstream tum(fs::path(dir) / ("gt_" + std::to_string(d) + ".tum"));
        for (int k = 0; k < streams.gt.n_ticks; ++k) {
            io::write_tum_line(tum, k * streams.gt.dt, streams.gt.at6(d, k));
        }
    }
}

bool EstimateResult::all_initialized() const {
    for (const auto& e : estimators) {
        if (!e->initialized()) return false;
    }
    return !estimators.empty();
}

int64_t EstimateResult::solve_failures() const {
    int64_t n = 0;
    for (const auto& e : estimators) n += e->counters().solve_failures;
    return n;
}

EstimateResult estimate_from_dir(const RunConfig& cfg, const std::string& dir,
                                 const RunOptions& opt) {
    const auto& sc = cfg.scenario;
    EstimateResult res;

    {
        std::ifstream in(fs::path(dir) / "measurements.log");
        if (!in) throw std::runtime_error("no measurements.log in " + dir);
        res.streams = std::make_unique<sim::SimStreams>(io::read_measurement_log(in, sc));
    }
    {
        std::ifstream in(fs::path(dir) / "uwb_outliers.log");
        if (in) res.uwb_injections = io::read_uwb_injections(in);
    }
    res.frontend = std::make_unique<sim::SimFrontEnd>(sc, *res.streams);

    const int n = sc.n_drones();
    net::BroadcastNetwork network(cfg.network);
    network.enable_packet_log(opt.packet_log);
    for (DroneId d = 0; d < n; ++d) network.register_drone(d);

    auto* fe = res.frontend.get();
    for (DroneId d = 0; d < n; ++d) {
        res.estimators.push_back(std::make_unique<est::SwarmEstimator>(
            d, cfg.estimator,
            [fe](DroneId drone, double t) { return fe->make_keyframe(drone, t); }, fe));
    }

    // Index the streams by tick.
    const int n_ticks = res.streams->gt.n_ticks;
    std::vector<std::vector<const sim::VioSample*>> vio_at(n_ticks);
    for (const auto& s : res.streams->vio) {
        int tick = sc.tick_of(s.t);
        if (tick >= 0 && tick < n_ticks) vio_at[tick].push_back(&s);
    }
    std::vector<std::map<DroneId, net::DistanceSet>> uwb_at(n_ticks);
    for (const auto& e : res.streams->uwb) {
        int tick = sc.tick_of(e.t);
        if (tick < 0 || tick >= n_ticks) continue;
        auto& ds = uwb_at[tick][e.i];
        ds.measurer = e.i;
        ds.t = e.t;
        ds.edges.push_back(e);
    }
    std::vector<std::vector<const DetectionEdge*>> det_at(n_ticks);
    for (const auto& r : res.streams->detections) {
        int tick = sc.tick_of(r.edge.t);
        if (tick >= 0 && tick < n_ticks) det_at[tick].push_back(&r.edge);
    }

    const double prop_hz = opt.prop_hz > 0 ? opt.prop_hz : sc.vio_hz;
    std::vector<std::ofstream> est_logs(n);
    std::vector<std::map<DroneId, std::ofstream>> tum_logs(n);
    for (DroneId k = 0; k < n; ++k) {
        est_logs[k].open(fs::path(dir) / ("estimate_" + std::to_string(k) + ".log"));
        for (DroneId d = 0; d < n; ++d) {
            tum_logs[k][d].open(fs::path(dir) /
                                ("est_" + std::to_string(k) + "_" + std::to_string(d) + ".tum"));
        }
    }

    auto send = [&](DroneId sender, double t, net::Payload payload) {
        net::Envelope env;
        env.sender = sender;
        env.send_time = t;
        env.size_bytes = net::estimate_size(payload);
        env.payload = std::move(payload);
        network.broadcast(env);
    };

    // Flushes outboxes and hands out every delivery due by t. Zero-latency
    // traffic fans out within the same tick; repeated rounds settle chains
    // like keyframe -> map edge -> rebroadcast.
    auto deliver_all = [&](double t) {
        for (int round = 0; round < 8; ++round) {
            bool sent_any = false;
            for (DroneId d = 0; d < n; ++d) {
                for (auto& payload : res.estimators[d]->drain_outbox()) {
                    send(d, t, std::move(payload));
                    sent_any = true;
                }
            }
            auto deliveries = network.step(t);
            for (const auto& delivery : deliveries) {
                res.estimators[delivery.recipient]->ingest(delivery.envelope);
            }
            if (deliveries.empty() && !sent_any) break;
        }
    };

    int64_t prop_count = 0;
    int64_t prop_emitted = -1;
    for (int tick = 0; tick < n_ticks; ++tick) {
        const double t = tick * sc.dt();

        deliver_all(t);
        for (const auto* s : vio_at[tick]) {
            res.estimators[s->drone]->ingest_vio(*s);
            send(s->drone, t, *s);
        }
        for (const auto& [measurer, ds] : uwb_at[tick]) {
            res.estimators[measurer]->ingest_distances(ds);
            send(measurer, t, ds);
        }
        for (const auto* e : det_at[tick]) {
            res.estimators[e->observer]->ingest_detection(*e);
            send(e->observer, t, *e);
        }
        for (DroneId d = 0; d < n; ++d) res.estimators[d]->on_tick(t);
        deliver_all(t);

        // Emit the high-rate propagation grid covered by this tick.
        const int64_t prop_idx = static_cast<int64_t>(std::floor(t * prop_hz + 1e-9));
        while (prop_emitted < prop_idx) {
            ++prop_emitted;
            ++prop_count;
            const double pt = static_cast<double>(prop_emitted) / prop_hz;
            for (DroneId k = 0; k < n; ++k) {
                for (DroneId d = 0; d < n; ++d) {
                    std::string status;
                    auto p4 = res.estimators[k]->estimate4(d, pt, &status);
                    if (!p4) continue;
                    est_logs[k] << "EST " << io::fmt(pt) << ' ' << d << ' ' << io::fmt(p4->x)
                                << ' ' << io::fmt(p4->y) << ' ' << io::fmt(p4->z) << ' '
                                << io::fmt(p4->yaw) << " local-of-self " << status << '\n';
                    if (auto p6 = res.estimators[k]->estimate6(d, pt)) {
                        io::write_tum_line(tum_logs[k][d], pt, *p6);
                    }
                }
            }
        }
    }

    // Settle whatever is still in flight, then give every instance a final
    // solve over the complete edge set.
    const double t_end = (n_ticks - 1) * sc.dt();
    deliver_all(t_end);
    for (DroneId d = 0; d < n; ++d) res.estimators[d]->on_tick(t_end);

    res.loop_injections = fe->loop_injections();
    {
        std::set<std::tuple<DroneId, double, DroneId, double>> seen;
        std::vector<sim::LoopInjection> dedup;
        for (const auto& x : res.loop_injections) {
            if (seen.insert({x.i, x.t0, x.j, x.t1}).second) dedup.push_back(x);
        }
        res.loop_injections = dedup;
        std::ofstream out(fs::path(dir) / "loop_outliers.log");
        io::write_loop_injections(out, res.loop_injections);
    }
    for (DroneId k = 0; k < n; ++k) {
        std::ofstream rej(fs::path(dir) / ("rejections_" + std::to_string(k) + ".log"));
        for (const auto& line : res.estimators[k]->rejection_log()) rej << line << '\n';
    }
    if (opt.packet_log) {
        std::ofstream pkt(fs::path(dir) / "packets.log");
        for (const auto& line : network.packet_log()) pkt << line << '\n';
    }

    // Run summary: per-estimator counters plus network stats.
    ordered_json summary;
    summary["prop_updates"] = prop_count;
    for (DroneId k = 0; k < n; ++k) {
        const auto& c = res.estimators[k]->counters();
        ordered_json jc;
        jc["initialized"] = res.estimators[k]->initialized();
        jc["init_time"] = res.estimators[k]->init_time();
        jc["frames"] = c.frames;
        jc["solves"] = c.solves;
        jc["solve_failures"] = c.solve_failures;
        jc["init_attempts"] = c.init_attempts;
        jc["pruned_frames"] = c.pruned_frames;
        jc["late_dropped"] = c.late_dropped;
        jc["assoc_dropped"] = c.assoc_dropped;
        jc["malformed"] = c.malformed;
        summary["estimators"][std::to_string(k)] = jc;
    }
    const auto& st = network.stats();
    for (int c = 0; c < static_cast<int>(net::MessageClass::kCount); ++c) {
        ordered_json jc;
        jc["sent"] = st.sent[c];
        jc["delivered"] = st.delivered[c];
        jc["dropped"] = st.dropped[c];
        summary["network"][net::class_name(static_cast<net::MessageClass>(c))] = jc;
    }
    std::ofstream sum(fs::path(dir) / "run_summary.json");
    sum << summary.dump(2) << '\n';

    return res;
}

namespace {

struct EstSeries {
    // [drone] -> series in the observer's local frame
    std::map<DroneId, std::vector<TimedPose4>> by_drone;
};

EstSeries read_estimate_log(const fs::path& path) {
    EstSeries out;
    std::ifstream in(path);
    std::string line, tag, frame, status;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        std::istringstream ls(line);
        TimedPose4 p;
        DroneId d;
        ls >> tag >> p.t >> d >> p.pose.x >> p.pose.y >> p.pose.z >> p.pose.yaw >> frame >> status;
        if (!ls || tag != "EST") continue;
        out.by_drone[d].push_back(p);
    }
    return out;
}

ordered_json re_json(const ReResult& r) {
    ordered_json j;
    if (r.n == 0) {
        j["pos_rmse"] = nullptr;
        j["pos_rmse_norm"] = nullptr;
        j["yaw_rmse"] = nullptr;
    } else {
        j["pos_rmse"] = {r.rmse_xyz.x(), r.rmse_xyz.y(), r.rmse_xyz.z()};
        j["pos_rmse_norm"] = r.pos_norm();
        j["yaw_rmse"] = r.rmse_yaw;
    }
    j["n"] = r.n;
    return j;
}

ordered_json ate_json(const AteResult& r) {
    ordered_json j;
    if (r.n == 0) {
        j["pos_rmse"] = nullptr;
        j["yaw_rmse"] = nullptr;
    } else {
        j["pos_rmse"] = r.rmse_pos;
        j["yaw_rmse"] = r.rmse_yaw;
    }
    j["n"] = r.n;
    return j;
}

}  // namespace

nlohmann::ordered_json evaluate_dir(const RunConfig& cfg, const std::string& dir) {
    const auto& sc = cfg.scenario;
    sim::SimStreams streams;
    {
        std::ifstream in(fs::path(dir) / "measurements.log");
        if (!in) throw std::runtime_error("no measurements.log in " + dir);
        streams = io::read_measurement_log(in, sc);
    }
    const auto& gt = streams.gt;
    const int n = sc.n_drones();
    const double tol = 0.5 * sc.dt();
    const DroneId observer = 0;

    // Ground truth expressed in the observer's local (start) frame.
    std::map<DroneId, std::vector<TimedPose4>> gt_local;
    std::map<DroneId, std::vector<TimedPose4>> gt_rel;  // observer body frame
    for (DroneId d = 0; d < n; ++d) {
        for (int k = 0; k < gt.n_ticks; ++k) {
            double t = k * gt.dt;
            gt_local[d].push_back({t, relative4(gt.at4(observer, 0), gt.at4(d, k))});
            if (d != observer) {
                gt_rel[d].push_back({t, relative4(gt.at4(observer, k), gt.at4(d, k))});
            }
        }
    }

    // Aligned-VIO baseline: VIO anchored to ground truth at t = 0.
    std::map<DroneId, std::vector<TimedPose4>> vio_world;
    for (const auto& s : streams.vio) {
        vio_world[s.drone].push_back({s.t, compose4(gt.at4(s.drone, 0), s.p4)});
    }

    EstSeries est = read_estimate_log(fs::path(dir) / ("estimate_" + std::to_string(observer) +
                                                       ".log"));

    ordered_json report;
    report["scenario"]["seed"] = sc.seed;
    report["scenario"]["duration_s"] = sc.duration_s;
    report["scenario"]["n_drones"] = n;
    report["observer"] = observer;

    for (DroneId d = 0; d < n; ++d) {
        report["trajectory_length"][std::to_string(d)] = gt.path_length(d, 0, gt.n_ticks - 1);
    }

    // Fused relative error per pair observer -> d.
    for (DroneId d = 0; d < n; ++d) {
        if (d == observer) continue;
        std::vector<TimedPose4> rel;
        const auto& so = est.by_drone[observer];
        const auto& sd = est.by_drone[d];
        size_t j = 0;
        for (const auto& po : so) {
            while (j < sd.size() && sd[j].t < po.t - 1e-9) ++j;
            if (j < sd.size() && std::abs(sd[j].t - po.t) < 1e-9) {
                rel.push_back({po.t, relative4(po.pose, sd[j].pose)});
            }
        }
        report["re"][std::to_string(d)] = re_json(compute_re(rel, gt_rel[d], tol));
    }
    for (DroneId d = 0; d < n; ++d) {
        report["ate"][std::to_string(d)] = ate_json(compute_ate(est.by_drone[d], gt_local[d], tol));
        auto drift = compute_drift(est.by_drone[d], gt_local[d], tol);
        report["drift"][std::to_string(d)] =
            drift ? ordered_json(*drift) : ordered_json(nullptr);
    }

    // Baseline block, same schema.
    ordered_json base;
    for (DroneId d = 0; d < n; ++d) {
        if (d == observer) continue;
        std::vector<TimedPose4> rel;
        const auto& vo = vio_world[observer];
        const auto& vd = vio_world[d];
        for (size_t i = 0; i < std::min(vo.size(), vd.size()); ++i) {
            rel.push_back({vo[i].t, relative4(vo[i].pose, vd[i].pose)});
        }
        base["re"][std::to_string(d)] = re_json(compute_re(rel, gt_rel[d], tol));
    }
    for (DroneId d = 0; d < n; ++d) {
        std::vector<TimedPose4> local;
        for (const auto& p : vio_world[d]) {
            local.push_back({p.t, relative4(gt.at4(observer, 0), p.pose)});
        }
        base["ate"][std::to_string(d)] = ate_json(compute_ate(local, gt_local[d], tol));
        auto drift = compute_drift(local, gt_local[d], tol);
        base["drift"][std::to_string(d)] = drift ? ordered_json(*drift) : ordered_json(nullptr);
    }
    report["aligned_vio"] = base;

    // Estimator status from the run summary, when present.
    std::ifstream sum(fs::path(dir) / "run_summary.json");
    if (sum) {
        ordered_json s = ordered_json::parse(sum, nullptr, false);
        if (!s.is_discarded()) {
            report["run"] = s;
        }
    }

    std::ofstream out(fs::path(dir) / "metrics.json");
    out << report.dump(2) << '\n';
    return report;
}

RunArtifacts run_scenario(RunConfig cfg, const RunOptions& opt) {
    apply_overrides(&cfg, opt);
    RunArtifacts art;
    art.out_dir = opt.out_dir;
    simulate_to_dir(cfg, opt.out_dir);
    art.estimate = estimate_from_dir(cfg, opt.out_dir, opt);
    art.report = evaluate_dir(cfg, opt.out_dir);
    art.config = std::move(cfg);
    return art;
}

}  // namespace swarm::eval
