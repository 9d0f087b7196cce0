#pragma once

#include <cstdint>
#include <map>
#include <queue>
#include <random>
#include <variant>
#include <vector>

#include "swarm/keyframe.hpp"
#include "swarm/measurements.hpp"
#include "swarm/sim/world.hpp"

namespace swarm::net {

/// One drone's UWB ranges to all peers at a tick.
struct DistanceSet {
    DroneId measurer = kInvalidDrone;
    double t = 0.0;
    std::vector<DistanceEdge> edges;
};

using Payload = std::variant<sim::VioSample, DistanceSet, DetectionEdge, Keyframe, MapEdge>;

enum class MessageClass : int { Vio = 0, Uwb, Detection, KeyframeMsg, MapEdgeMsg, kCount };

MessageClass class_of(const Payload& p);
const char* class_name(MessageClass c);

struct Envelope {
    DroneId sender = kInvalidDrone;
    double send_time = 0.0;
    Payload payload;
    size_t size_bytes = 0;  // rough wire estimate, for the packet log
};

size_t estimate_size(const Payload& p);

struct ChannelConfig {
    double drop[static_cast<int>(MessageClass::kCount)] = {0, 0, 0, 0, 0};
    double latency_s = 0.020;
    double jitter_s = 0.010;  // uniform in [-jitter, jitter]
    bool allow_reorder = true;
    uint64_t seed = 1;
};

struct Delivery {
    DroneId recipient = kInvalidDrone;
    double deliver_time = 0.0;
    Envelope envelope;
};

/// Lossy, latent broadcast fabric with a virtual clock. Every broadcast
/// fans out to all registered drones except the sender; each copy is
/// independently dropped or delayed. step() releases messages in delivery
/// order with a stable sequence tie-break.
class BroadcastNetwork {
public:
    explicit BroadcastNetwork(const ChannelConfig& cfg);

    void register_drone(DroneId id);

    /// Throws std::invalid_argument if the sender is not registered.
    void broadcast(const Envelope& env);

    /// All deliveries with deliver_time <= until, in order. Throws on time
    /// regression.
    std::vector<Delivery> step(double until);

    struct Stats {
        int64_t sent[static_cast<int>(MessageClass::kCount)] = {0, 0, 0, 0, 0};
        int64_t delivered[static_cast<int>(MessageClass::kCount)] = {0, 0, 0, 0, 0};
        int64_t dropped[static_cast<int>(MessageClass::kCount)] = {0, 0, 0, 0, 0};
    };
    const Stats& stats() const { return stats_; }

    /// Optional line-delimited packet log (send/drop/deliver events).
    const std::vector<std::string>& packet_log() const { return packet_log_; }
    void enable_packet_log(bool on) { log_enabled_ = on; }

private:
    struct Pending {
        double deliver_time;
        uint64_t seq;
        DroneId recipient;
        Envelope env;
        bool operator>(const Pending& o) const {
            if (deliver_time != o.deliver_time) return deliver_time > o.deliver_time;
            return seq > o.seq;
        }
    };

    ChannelConfig cfg_;
    std::mt19937_64 rng_;
    std::vector<DroneId> drones_;
    std::priority_queue<Pending, std::vector<Pending>, std::greater<>> queue_;
    std::map<std::pair<DroneId, DroneId>, double> last_link_delivery_;
    uint64_t seq_ = 0;
    double now_ = 0.0;
    Stats stats_;
    bool log_enabled_ = false;
    std::vector<std::string> packet_log_;
};

}  // namespace swarm::net
