#pragma once

#include <iosfwd>
#include <string>
#include <vector>

#include "swarm/keyframe.hpp"
#include "swarm/sim/world.hpp"

namespace swarm::io {

/// Round-trip-exact decimal formatting; every log field goes through this
/// so repeated runs produce byte-identical files.
std::string fmt(double v);

std::string keyframe_line(const Keyframe& kf);
Keyframe parse_keyframe_line(const std::string& line);

/// Measurement log: GT/VIO/UWB/DET line records in stable field order.
void write_measurement_log(std::ostream& os, const sim::SimStreams& streams);

/// Rebuilds streams from a log. n_drones/ticks/rates come from the scenario.
sim::SimStreams read_measurement_log(std::istream& is, const sim::Scenario& sc);

void write_uwb_injections(std::ostream& os, const std::vector<sim::UwbInjection>& inj);
std::vector<sim::UwbInjection> read_uwb_injections(std::istream& is);

void write_loop_injections(std::ostream& os, const std::vector<sim::LoopInjection>& inj);
std::vector<sim::LoopInjection> read_loop_injections(std::istream& is);

void write_detection_truth(std::ostream& os, const std::vector<sim::DetectionRecord>& dets);

/// Trajectory in the common "t x y z qx qy qz qw" text layout.
void write_tum_line(std::ostream& os, double t, const Pose6& pose);

}  // namespace swarm::io
