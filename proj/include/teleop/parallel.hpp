#pragma once

#include "teleop/kinematics.hpp"
#include "teleop/planner.hpp"

#include <cstdint>
#include <span>
#include <vector>

namespace teleop {

// Batch kernels over many joint configurations. Each has an OpenMP version and a
// serial reference; results are identical element for element.

std::vector<Position> batch_tool_positions(std::span<const JointVector> configs, const DhTable& dh);
std::vector<Position> batch_tool_positions_serial(std::span<const JointVector> configs, const DhTable& dh);

std::vector<std::uint8_t> batch_collision_free(std::span<const JointVector> configs, const Scene& scene,
                                               const DhTable& dh, double margin = kDefaultSafetyMargin);
std::vector<std::uint8_t> batch_collision_free_serial(std::span<const JointVector> configs, const Scene& scene,
                                                      const DhTable& dh, double margin = kDefaultSafetyMargin);

/// Uniform random configurations within the joint limits.
std::vector<JointVector> random_configurations(std::size_t n, const DhTable& dh, std::uint64_t seed);

}  // namespace teleop
