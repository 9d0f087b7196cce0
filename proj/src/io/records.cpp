#include "swarm/io/records.hpp"

#include <cstdio>
#include <istream>
#include <ostream>
#include <sstream>
#include <stdexcept>

namespace swarm::io {

std::string fmt(double v) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

namespace {

void put_pose4(std::ostream& os, const Pose4& p) {
    os << ' ' << fmt(p.x) << ' ' << fmt(p.y) << ' ' << fmt(p.z) << ' ' << fmt(p.yaw);
}

void put_pose6(std::ostream& os, const Pose6& p) {
    Eigen::Quaterniond q = p.rotation.quaternion();
    os << ' ' << fmt(p.translation.x()) << ' ' << fmt(p.translation.y()) << ' '
       << fmt(p.translation.z()) << ' ' << fmt(q.w()) << ' ' << fmt(q.x()) << ' ' << fmt(q.y())
       << ' ' << fmt(q.z());
}

Pose4 get_pose4(std::istringstream& is) {
    Pose4 p;
    is >> p.x >> p.y >> p.z >> p.yaw;
    return p;
}

Pose6 get_pose6(std::istringstream& is) {
    Pose6 p;
    double w, x, y, z;
    is >> p.translation.x() >> p.translation.y() >> p.translation.z() >> w >> x >> y >> z;
    p.rotation = Rot3::from_quaternion(Eigen::Quaterniond(w, x, y, z));
    return p;
}

}  // namespace

std::string keyframe_line(const Keyframe& kf) {
    std::ostringstream os;
    os << "KF " << kf.drone << ' ' << fmt(kf.t);
    put_pose4(os, kf.vio4);
    put_pose6(os, kf.vio6);
    os << ' ' << (kf.has_gt ? 1 : 0);
    put_pose4(os, kf.gt4);
    put_pose6(os, kf.gt6);
    os << ' ' << kf.descriptors.size();
    os << ' ' << (kf.descriptors.empty() ? 0 : kf.descriptors[0].size());
    for (const auto& d : kf.descriptors) {
        for (int c = 0; c < d.size(); ++c) os << ' ' << fmt(d(c));
    }
    return os.str();
}

Keyframe parse_keyframe_line(const std::string& line) {
    std::istringstream is(line);
    std::string tag;
    is >> tag;
    if (tag != "KF") throw std::runtime_error("not a keyframe record: " + line);
    Keyframe kf;
    is >> kf.drone >> kf.t;
    kf.vio4 = get_pose4(is);
    kf.vio6 = get_pose6(is);
    int has_gt = 0;
    is >> has_gt;
    kf.has_gt = has_gt != 0;
    kf.gt4 = get_pose4(is);
    kf.gt6 = get_pose6(is);
    size_t n_desc = 0, dim = 0;
    is >> n_desc >> dim;
    for (size_t d = 0; d < n_desc; ++d) {
        Eigen::VectorXd v(dim);
        for (size_t c = 0; c < dim; ++c) is >> v(static_cast<int>(c));
        kf.descriptors.push_back(v);
    }
    if (!is) throw std::runtime_error("truncated keyframe record");
    return kf;
}

void write_measurement_log(std::ostream& os, const sim::SimStreams& streams) {
    const auto& gt = streams.gt;
    for (int k = 0; k < gt.n_ticks; ++k) {
        for (DroneId d = 0; d < gt.n_drones(); ++d) {
            os << "GT " << fmt(k * gt.dt) << ' ' << d;
            put_pose4(os, gt.at4(d, k));
            put_pose6(os, gt.at6(d, k));
            os << '\n';
        }
    }
    for (const auto& s : streams.vio) {
        os << "VIO " << fmt(s.t) << ' ' << s.drone;
        put_pose4(os, s.p4);
        put_pose6(os, s.p6);
        os << '\n';
    }
    for (const auto& e : streams.uwb) {
        os << "UWB " << fmt(e.t) << ' ' << e.i << ' ' << e.j << ' ' << fmt(e.d) << ' '
           << fmt(e.sigma) << '\n';
    }
    for (const auto& r : streams.detections) {
        const auto& e = r.edge;
        os << "DET " << fmt(e.t) << ' ' << e.observer << ' ' << e.target << ' ' << fmt(e.dir.x())
           << ' ' << fmt(e.dir.y()) << ' ' << fmt(e.dir.z()) << ' ' << fmt(e.inv_depth) << ' '
           << fmt(e.sigma_dir) << ' ' << fmt(e.sigma_inv_depth) << '\n';
    }
}

sim::SimStreams read_measurement_log(std::istream& is, const sim::Scenario& sc) {
    sim::SimStreams out;
    auto& gt = out.gt;
    gt.dt = sc.dt();
    gt.n_ticks = static_cast<int>(std::floor(sc.duration_s * sc.vio_hz)) + 1;
    gt.pose4.assign(sc.n_drones(), std::vector<Pose4>(gt.n_ticks));
    gt.pose6.assign(sc.n_drones(), std::vector<Pose6>(gt.n_ticks));

    std::string line;
    while (std::getline(is, line)) {
        if (line.empty()) continue;
        std::istringstream ls(line);
        std::string tag;
        ls >> tag;
        if (tag == "GT") {
            double t;
            DroneId d;
            ls >> t >> d;
            int tick = sc.tick_of(t);
            if (d < 0 || d >= sc.n_drones() || tick < 0 || tick >= gt.n_ticks) {
                throw std::runtime_error("GT record outside scenario bounds");
            }
            gt.pose4[d][tick] = get_pose4(ls);
            gt.pose6[d][tick] = get_pose6(ls);
        } else if (tag == "VIO") {
            sim::VioSample s;
            ls >> s.t >> s.drone;
            s.p4 = get_pose4(ls);
            s.p6 = get_pose6(ls);
            out.vio.push_back(s);
        } else if (tag == "UWB") {
            DistanceEdge e;
            ls >> e.t >> e.i >> e.j >> e.d >> e.sigma;
            out.uwb.push_back(e);
        } else if (tag == "DET") {
            sim::DetectionRecord r;
            auto& e = r.edge;
            ls >> e.t >> e.observer >> e.target >> e.dir.x() >> e.dir.y() >> e.dir.z() >>
                e.inv_depth >> e.sigma_dir >> e.sigma_inv_depth;
            e.cam_rot = sc.detection.cam_rot;
            e.cam_pos = sc.detection.cam_pos;
            r.true_target = kInvalidDrone;
            out.detections.push_back(r);
        } else {
            throw std::runtime_error("unknown record type: " + tag);
        }
        if (!ls) throw std::runtime_error("malformed record: " + line);
    }
    return out;
}

void write_uwb_injections(std::ostream& os, const std::vector<sim::UwbInjection>& inj) {
    for (const auto& x : inj) {
        os << "UWBOUT " << fmt(x.t) << ' ' << x.i << ' ' << x.j << '\n';
    }
}

std::vector<sim::UwbInjection> read_uwb_injections(std::istream& is) {
    std::vector<sim::UwbInjection> out;
    std::string line, tag;
    while (std::getline(is, line)) {
        if (line.empty()) continue;
        std::istringstream ls(line);
        sim::UwbInjection x;
        ls >> tag >> x.t >> x.i >> x.j;
        out.push_back(x);
    }
    return out;
}

void write_loop_injections(std::ostream& os, const std::vector<sim::LoopInjection>& inj) {
    for (const auto& x : inj) {
        os << "LOOPOUT " << x.i << ' ' << fmt(x.t0) << ' ' << x.j << ' ' << fmt(x.t1) << '\n';
    }
}

std::vector<sim::LoopInjection> read_loop_injections(std::istream& is) {
    std::vector<sim::LoopInjection> out;
    std::string line, tag;
    while (std::getline(is, line)) {
        if (line.empty()) continue;
        std::istringstream ls(line);
        sim::LoopInjection x;
        ls >> tag >> x.i >> x.t0 >> x.j >> x.t1;
        out.push_back(x);
    }
    return out;
}

void write_detection_truth(std::ostream& os, const std::vector<sim::DetectionRecord>& dets) {
    for (const auto& r : dets) {
        os << "DETTRUE " << fmt(r.edge.t) << ' ' << r.edge.observer << ' ' << r.true_target << ' '
           << r.edge.target << '\n';
    }
}

void write_tum_line(std::ostream& os, double t, const Pose6& pose) {
    Eigen::Quaterniond q = pose.rotation.quaternion();
    os << fmt(t) << ' ' << fmt(pose.translation.x()) << ' ' << fmt(pose.translation.y()) << ' '
       << fmt(pose.translation.z()) << ' ' << fmt(q.x()) << ' ' << fmt(q.y()) << ' ' << fmt(q.z())
       << ' ' << fmt(q.w()) << '\n';
}

}  // namespace swarm::io
