#pragma once

#include <cstdint>

namespace swarm {

using DroneId = int32_t;

inline constexpr DroneId kInvalidDrone = -1;

}  // namespace swarm
