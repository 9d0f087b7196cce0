#pragma once

#include <memory>
#include <optional>
#include <vector>

#include "swarm/keyframe.hpp"
#include "swarm/measurements.hpp"
#include "swarm/sim/descriptor_field.hpp"
#include "swarm/sim/scenario.hpp"
#include "swarm/sim/trajectory.hpp"

namespace swarm::sim {

struct VioSample {
    DroneId drone = kInvalidDrone;
    double t = 0.0;
    Pose4 p4;
    Pose6 p6;
};

struct DetectionRecord {
    DetectionEdge edge;          // edge.target carries the (possibly wrong) label
    DroneId true_target = kInvalidDrone;
};

struct UwbInjection {
    double t = 0.0;
    DroneId i = kInvalidDrone, j = kInvalidDrone;
};

struct LoopInjection {
    DroneId i = kInvalidDrone;
    double t0 = 0.0;
    DroneId j = kInvalidDrone;
    double t1 = 0.0;
};

/// Everything the synthetic world emits for one scenario, in deterministic
/// (tick, id) order.
struct SimStreams {
    GroundTruth gt;
    std::vector<VioSample> vio;
    std::vector<DistanceEdge> uwb;
    std::vector<DetectionRecord> detections;
    std::vector<UwbInjection> uwb_injections;
};

/// Emission predicate: a target at rel_body (observer 4-DoF body frame) is
/// detected iff it is within range and outside the downward dead-zone cone.
bool detection_visible(const Eigen::Vector3d& rel_body, const DetectionSimConfig& cfg);

SimStreams generate_streams(const Scenario& sc);

/// Front-end services backed by the synthetic world: keyframe construction
/// with place descriptors, and the relative-pose oracle standing in for
/// PnP-based extraction. Oracle noise is keyed on the keyframe pair, so
/// results do not depend on query order. Holds a reference to the streams,
/// which must outlive it.
class SimFrontEnd : public RelativePoseExtractor {
public:
    SimFrontEnd(const Scenario& sc, const SimStreams& streams);

    Keyframe make_keyframe(DroneId drone, double t) const;

    std::optional<PoseExtraction> extract(const Keyframe& stored,
                                          const Keyframe& incoming) override;

    /// Oracle in measurement form: inlier count plus the noisy relative
    /// 4-DoF pose from kf_a (stored) to kf_b (incoming).
    std::pair<int, Pose4> oracle_relative4(const Keyframe& kf_a, const Keyframe& kf_b);

    const std::vector<LoopInjection>& loop_injections() const { return loop_injections_; }
    const DescriptorField& field() const { return field_; }

private:
    struct OracleDraw {
        int inliers = 0;
        Pose4 rel4;
        Pose6 rel6;
        bool injected = false;
    };
    OracleDraw draw_oracle(const Keyframe& stored, const Keyframe& incoming);

    const Scenario sc_;
    DescriptorField field_;
    const GroundTruth* gt_ = nullptr;
    std::vector<std::vector<VioSample>> vio_by_tick_;  // [drone][tick]
    std::vector<LoopInjection> loop_injections_;
};

}  // namespace swarm::sim
