#include "swarm/est/observability.hpp"

namespace swarm::est {

ObsLevel classify(const PairEvidence& ev) {
    if (ev.map_edge) return ObsLevel::Dof6;
    if (ev.det_k_to_i && ev.det_i_to_k) return ObsLevel::Dof6;
    if (ev.motion_k && !ev.motion_i && ev.det_i_to_k) return ObsLevel::Dof6;
    if (ev.motion_k && ev.motion_i && ev.distance) return ObsLevel::Dof6;
    if (ev.motion_k && !ev.motion_i && ev.distance && !ev.det_i_to_k && !ev.map_edge) {
        return ObsLevel::Dof3;
    }
    return ObsLevel::None;
}

ObservabilityReport check_observability(const EstimatorGraph& g, DroneId self,
                                        const std::map<DroneId, double>& motion_accum,
                                        double d_mot) {
    ObservabilityReport rep;
    auto moved = [&](DroneId d) {
        auto it = motion_accum.find(d);
        return it != motion_accum.end() && it->second > d_mot;
    };

    for (DroneId i : g.drones_present()) {
        if (i == self) {
            rep.level[i] = ObsLevel::Dof6;  // own frame is the gauge
            rep.evidence[i] = PairEvidence{};
            continue;
        }
        PairEvidence ev;
        ev.motion_k = moved(self);
        ev.motion_i = moved(i);
        for (const auto& x : g.distances) {
            if ((x.e.i == self && x.e.j == i) || (x.e.i == i && x.e.j == self)) {
                ev.distance = true;
                break;
            }
        }
        for (const auto& x : g.detections) {
            if (x.e.observer == self && x.e.target == i) ev.det_k_to_i = true;
            if (x.e.observer == i && x.e.target == self) ev.det_i_to_k = true;
        }
        for (const auto& x : g.map_edges) {
            DroneId a = x.e.from_drone, b = x.e.to_drone;
            if ((a == self && b == i) || (a == i && b == self)) {
                ev.map_edge = true;
                break;
            }
        }
        rep.evidence[i] = ev;
        rep.level[i] = classify(ev);
    }
    return rep;
}

}  // namespace swarm::est
