#include "swarm/est/graph.hpp"

#include <algorithm>
#include <set>

namespace swarm::est {

std::vector<DroneId> EstimatorGraph::drones_present() const {
    std::set<DroneId> ids;
    for (const auto& [tick, f] : frames) {
        for (const auto& [d, node] : f.nodes) ids.insert(d);
    }
    return {ids.begin(), ids.end()};
}

bool EstimatorGraph::odometry_chain_consistent() const {
    std::map<DroneId, std::vector<int>> ticks;
    for (const auto& [tick, f] : frames) {
        for (const auto& [d, node] : f.nodes) ticks[d].push_back(tick);
    }
    std::set<std::pair<DroneId, std::pair<int, int>>> links;
    for (const auto& o : odometry) {
        links.insert({o.e.drone, {o.tick_prev, o.tick}});
    }
    for (const auto& [d, ts] : ticks) {
        for (size_t i = 1; i < ts.size(); ++i) {
            if (!links.count({d, {ts[i - 1], ts[i]}})) return false;
        }
    }
    return true;
}

PruneRecord remove_frame(EstimatorGraph& g, int tick) {
    PruneRecord rec;
    rec.tick = tick;
    auto fit = g.frames.find(tick);
    if (fit == g.frames.end()) return rec;

    // Re-link each drone's odometry chain across the gap.
    for (const auto& [d, node] : fit->second.nodes) {
        const OdomEntry* before = nullptr;
        const OdomEntry* after = nullptr;
        for (const auto& o : g.odometry) {
            if (o.e.drone != d) continue;
            if (o.tick == tick) before = &o;
            if (o.tick_prev == tick) after = &o;
        }
        if (before && after) {
            OdomEntry joined;
            joined.e.drone = d;
            joined.e.t_prev = before->e.t_prev;
            joined.e.t = after->e.t;
            joined.e.delta = compose4(before->e.delta, after->e.delta);
            joined.e.sigma = (before->e.sigma.cwiseAbs2() + after->e.sigma.cwiseAbs2()).cwiseSqrt();
            joined.tick_prev = before->tick_prev;
            joined.tick = after->tick;
            std::erase_if(g.odometry,
                          [&](const OdomEntry& o) { return o.e.drone == d && (o.tick == tick || o.tick_prev == tick); });
            g.odometry.push_back(joined);
        } else {
            std::erase_if(g.odometry,
                          [&](const OdomEntry& o) { return o.e.drone == d && (o.tick == tick || o.tick_prev == tick); });
        }
        g.states.erase(VarKey{d, tick});
    }

    std::erase_if(g.distances, [&](const DistEntry& x) {
        if (x.tick != tick) return false;
        rec.removed_distances.push_back(x.e);
        return true;
    });
    std::erase_if(g.detections, [&](const DetEntry& x) {
        if (x.tick != tick) return false;
        rec.removed_detections.push_back(x.e);
        return true;
    });
    std::erase_if(g.map_edges, [&](const MapEntry& x) {
        if (x.from_tick != tick && x.to_tick != tick) return false;
        rec.removed_map_edges.push_back(x.e);
        return true;
    });

    g.frames.erase(fit);
    return rec;
}

std::vector<PruneRecord> prune(EstimatorGraph& g, size_t m_max, bool fifo, std::mt19937_64& rng) {
    std::vector<PruneRecord> out;
    while (g.frame_count() > m_max) {
        const int newest = g.frames.rbegin()->first;
        std::vector<int> candidates;
        candidates.reserve(g.frames.size());
        for (const auto& [tick, f] : g.frames) {
            if (g.anchor && g.anchor->tick == tick) continue;
            if (tick == newest) continue;  // keep the freshest poses linkable
            candidates.push_back(tick);
        }
        if (candidates.empty()) break;
        int victim;
        if (fifo) {
            victim = candidates.front();
        } else {
            victim = candidates[std::uniform_int_distribution<size_t>(0, candidates.size() - 1)(rng)];
        }
        out.push_back(remove_frame(g, victim));
    }
    return out;
}

}  // namespace swarm::est
