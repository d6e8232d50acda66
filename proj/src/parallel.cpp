#include "teleop/parallel.hpp"

#include <random>

namespace teleop {

std::vector<Position> batch_tool_positions(std::span<const JointVector> configs, const DhTable& dh) {
  std::vector<Position> out(configs.size());
  const auto n = static_cast<std::ptrdiff_t>(configs.size());
#pragma omp parallel for schedule(static)
  for (std::ptrdiff_t i = 0; i < n; ++i) out[i] = forward_kinematics(configs[i], dh).position;
  return out;
}

std::vector<Position> batch_tool_positions_serial(std::span<const JointVector> configs, const DhTable& dh) {
  std::vector<Position> out;
  out.reserve(configs.size());
  for (const auto& q : configs) out.push_back(forward_kinematics(q, dh).position);
  return out;
}

std::vector<std::uint8_t> batch_collision_free(std::span<const JointVector> configs, const Scene& scene,
                                               const DhTable& dh, double margin) {
  std::vector<std::uint8_t> out(configs.size());
  const auto n = static_cast<std::ptrdiff_t>(configs.size());
#pragma omp parallel for schedule(dynamic, 64)
  for (std::ptrdiff_t i = 0; i < n; ++i) out[i] = collision_free(configs[i], scene, dh, margin) ? 1 : 0;
  return out;
}

std::vector<std::uint8_t> batch_collision_free_serial(std::span<const JointVector> configs, const Scene& scene,
                                                      const DhTable& dh, double margin) {
  std::vector<std::uint8_t> out;
  out.reserve(configs.size());
  for (const auto& q : configs) out.push_back(collision_free(q, scene, dh, margin) ? 1 : 0);
  return out;
}

std::vector<JointVector> random_configurations(std::size_t n, const DhTable& dh, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::vector<JointVector> out(n);
  for (auto& q : out) {
    for (int j = 0; j < kArmDof; ++j) {
      q[j] = dh.lower_limits[j] + unit(rng) * (dh.upper_limits[j] - dh.lower_limits[j]);
    }
  }
  return out;
}

}  // namespace teleop
