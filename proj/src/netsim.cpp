#include "swarm/netsim.hpp"

#include <algorithm>
#include <cstdio>
#include <stdexcept>

namespace swarm::net {

MessageClass class_of(const Payload& p) {
    if (std::holds_alternative<sim::VioSample>(p)) return MessageClass::Vio;
    if (std::holds_alternative<DistanceSet>(p)) return MessageClass::Uwb;
    if (std::holds_alternative<DetectionEdge>(p)) return MessageClass::Detection;
    if (std::holds_alternative<Keyframe>(p)) return MessageClass::KeyframeMsg;
    return MessageClass::MapEdgeMsg;
}

const char* class_name(MessageClass c) {
    switch (c) {
        case MessageClass::Vio: return "vio";
        case MessageClass::Uwb: return "uwb";
        case MessageClass::Detection: return "det";
        case MessageClass::KeyframeMsg: return "kf";
        case MessageClass::MapEdgeMsg: return "mapedge";
        default: return "?";
    }
}

size_t estimate_size(const Payload& p) {
    if (std::holds_alternative<sim::VioSample>(p)) return 8 * 12;
    if (std::holds_alternative<DistanceSet>(p)) {
        return 16 + std::get<DistanceSet>(p).edges.size() * 8 * 3;
    }
    if (std::holds_alternative<DetectionEdge>(p)) return 8 * 8;
    if (std::holds_alternative<Keyframe>(p)) {
        const auto& kf = std::get<Keyframe>(p);
        size_t desc = 0;
        for (const auto& d : kf.descriptors) desc += d.size() * 8;
        return 8 * 24 + desc;
    }
    return 8 * 10;
}

BroadcastNetwork::BroadcastNetwork(const ChannelConfig& cfg) : cfg_(cfg), rng_(cfg.seed) {}

void BroadcastNetwork::register_drone(DroneId id) {
    if (std::find(drones_.begin(), drones_.end(), id) == drones_.end()) {
        drones_.push_back(id);
        std::sort(drones_.begin(), drones_.end());
    }
}

void BroadcastNetwork::broadcast(const Envelope& env) {
    if (std::find(drones_.begin(), drones_.end(), env.sender) == drones_.end()) {
        throw std::invalid_argument("broadcast from unregistered sender");
    }
    const MessageClass cls = class_of(env.payload);
    const int ci = static_cast<int>(cls);
    ++stats_.sent[ci];

    for (DroneId rcpt : drones_) {
        if (rcpt == env.sender) continue;
        const double u = std::uniform_real_distribution<double>(0, 1)(rng_);
        if (u < cfg_.drop[ci]) {
            ++stats_.dropped[ci];
            if (log_enabled_) {
                char buf[128];
                std::snprintf(buf, sizeof(buf), "DROP %.6f %s %d %d", env.send_time,
                              class_name(cls), env.sender, rcpt);
                packet_log_.emplace_back(buf);
            }
            continue;
        }
        double latency = cfg_.latency_s;
        if (cfg_.jitter_s > 0.0) {
            latency += std::uniform_real_distribution<double>(-cfg_.jitter_s, cfg_.jitter_s)(rng_);
        }
        latency = std::max(latency, 0.0);
        double when = env.send_time + latency;
        if (!cfg_.allow_reorder) {
            auto key = std::make_pair(env.sender, rcpt);
            auto it = last_link_delivery_.find(key);
            if (it != last_link_delivery_.end()) when = std::max(when, it->second);
            last_link_delivery_[key] = when;
        }
        queue_.push(Pending{when, seq_++, rcpt, env});
    }
}

std::vector<Delivery> BroadcastNetwork::step(double until) {
    if (until < now_) throw std::invalid_argument("network clock moved backwards");
    now_ = until;
    std::vector<Delivery> out;
    while (!queue_.empty() && queue_.top().deliver_time <= until) {
        const Pending& p = queue_.top();
        ++stats_.delivered[static_cast<int>(class_of(p.env.payload))];
        if (log_enabled_) {
            char buf[128];
            std::snprintf(buf, sizeof(buf), "DLVR %.6f %s %d %d", p.deliver_time,
                          class_name(class_of(p.env.payload)), p.env.sender, p.recipient);
            packet_log_.emplace_back(buf);
        }
        out.push_back(Delivery{p.recipient, p.deliver_time, p.env});
        queue_.pop();
    }
    return out;
}

}  // namespace swarm::net
