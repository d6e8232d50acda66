#pragma once

#include "teleop/kinematics.hpp"

#include <cstdint>
#include <optional>
#include <string>
#include <variant>
#include <vector>

namespace teleop {

struct Sphere {
  double radius = 0.0;
  bool operator==(const Sphere&) const = default;
};

/// Axis-aligned box.
struct Box {
  Eigen::Vector3d half_extents = Eigen::Vector3d::Zero();
  bool operator==(const Box&) const = default;
};

struct SceneObject {
  std::string id;
  Position centroid = Position::Zero();
  std::variant<Sphere, Box> shape;

  bool operator==(const SceneObject&) const = default;
};

using Scene = std::vector<SceneObject>;

/// Throws ConfigError on non-positive sizes or duplicate ids.
void validate_scene(const Scene& scene);
Scene parse_scene(const std::string& json_text);
Scene load_scene(const std::string& path);
std::string scene_to_json(const Scene& scene);
const SceneObject* find_object(const Scene& scene, const std::string& id);

double segment_point_distance(const Position& a, const Position& b, const Position& p);
double segment_box_distance(const Position& a, const Position& b, const Position& center,
                            const Eigen::Vector3d& half_extents);
double segment_object_distance(const Position& a, const Position& b, const SceneObject& object);

inline constexpr double kDefaultSafetyMargin = 0.02;

/// True iff every link segment keeps at least `margin` clearance from every object.
bool collision_free(const JointVector& q, const Scene& scene, const DhTable& dh,
                    double margin = kDefaultSafetyMargin);

/// Checks the straight joint-space edge a→b at `resolution` (per-joint, radians).
bool edge_collision_free(const JointVector& a, const JointVector& b, const Scene& scene,
                         const DhTable& dh, double resolution, double margin = kDefaultSafetyMargin);

struct PlanRequest {
  JointVector q_start = JointVector::Zero();
  JointVector q_goal = JointVector::Zero();
  Scene scene;
  double step_size = 0.1;
  std::size_t max_iterations = 20000;
  std::uint64_t rng_seed = 0;
  double safety_margin = kDefaultSafetyMargin;
  bool smooth = false;
};

using JointPath = std::vector<JointVector>;

/// Bidirectional RRT-Connect in joint space. Throws NoPathError when the iteration
/// budget runs out and ParameterError when start or goal are in collision.
JointPath plan(const PlanRequest& request, const DhTable& dh);

/// Linear joint interpolation at step_size; nullopt when any sample collides.
std::optional<JointPath> straight_line_plan(const JointVector& q_start, const JointVector& q_goal,
                                            const Scene& scene, const DhTable& dh,
                                            double step_size = 0.1,
                                            double margin = kDefaultSafetyMargin);

/// Random shortcutting followed by re-densification at step_size.
JointPath shortcut_path(const JointPath& path, const Scene& scene, const DhTable& dh,
                        double step_size, std::uint64_t seed, double margin = kDefaultSafetyMargin,
                        int attempts = 200);

/// Joint-space length (sum of L2 steps).
double joint_path_length(const JointPath& path);

}  // namespace teleop
