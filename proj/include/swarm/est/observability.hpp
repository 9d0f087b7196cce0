#pragma once

#include <map>

#include "swarm/est/graph.hpp"

namespace swarm::est {

enum class ObsLevel { None, Dof3, Dof6 };

/// Measurement evidence for one drone i relative to the running drone k.
struct PairEvidence {
    bool motion_k = false;
    bool motion_i = false;
    bool distance = false;
    bool det_k_to_i = false;
    bool det_i_to_k = false;
    bool map_edge = false;
};

/// The observability rules for typical measurement combinations:
///   map edge                                      -> 6 DoF
///   mutual detection                              -> 6 DoF
///   motion_k, static i, detection i->k            -> 6 DoF
///   motion_k, motion_i, distance                  -> 6 DoF
///   motion_k, static i, distance, nothing else    -> 3 DoF
ObsLevel classify(const PairEvidence& ev);

struct ObservabilityReport {
    std::map<DroneId, ObsLevel> level;
    std::map<DroneId, PairEvidence> evidence;

    bool all_at_least_3dof() const {
        for (const auto& [d, l] : level) {
            if (l == ObsLevel::None) return false;
        }
        return !level.empty();
    }
};

/// Evaluates evidence for every drone present in the graph against self.
/// motion_accum carries each drone's accumulated VIO translation over the
/// caller's window; a drone is "in motion" above d_mot.
ObservabilityReport check_observability(const EstimatorGraph& g, DroneId self,
                                        const std::map<DroneId, double>& motion_accum,
                                        double d_mot);

}  // namespace swarm::est
