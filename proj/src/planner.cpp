#include "teleop/planner.hpp"

#include "teleop/errors.hpp"

#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <random>
#include <set>
#include <sstream>

namespace teleop {

using nlohmann::json;

void validate_scene(const Scene& scene) {
  std::set<std::string> ids;
  for (const auto& obj : scene) {
    if (obj.id.empty()) throw ConfigError("scene object with empty id");
    if (!ids.insert(obj.id).second) throw ConfigError("duplicate scene object id " + obj.id);
    if (!obj.centroid.allFinite()) throw ConfigError("non-finite centroid for " + obj.id);
    if (const auto* s = std::get_if<Sphere>(&obj.shape)) {
      if (!(s->radius > 0.0)) throw ConfigError("sphere radius must be positive: " + obj.id);
    } else {
      const auto& b = std::get<Box>(obj.shape);
      if (!(b.half_extents.array() > 0.0).all()) {
        throw ConfigError("box half extents must be positive: " + obj.id);
      }
    }
  }
}

namespace {

Eigen::Vector3d vec3_from(const json& j) {
  if (!j.is_array() || j.size() != 3) throw ConfigError("expected a 3-vector");
  return {j.at(0).get<double>(), j.at(1).get<double>(), j.at(2).get<double>()};
}

}  // namespace

Scene parse_scene(const std::string& json_text) {
  Scene scene;
  try {
    const json doc = json::parse(json_text);
    for (const auto& o : doc.at("objects")) {
      SceneObject obj;
      obj.id = o.at("id").get<std::string>();
      obj.centroid = vec3_from(o.at("centroid"));
      const json& shape = o.at("shape");
      const auto type = shape.at("type").get<std::string>();
      if (type == "sphere") {
        obj.shape = Sphere{shape.at("radius").get<double>()};
      } else if (type == "box") {
        obj.shape = Box{vec3_from(shape.at("half_extents"))};
      } else {
        throw ConfigError("unknown shape type " + type);
      }
      scene.push_back(std::move(obj));
    }
  } catch (const json::exception& e) {
    throw ConfigError(std::string("scene document: ") + e.what());
  }
  validate_scene(scene);
  return scene;
}

Scene load_scene(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open scene file " + path);
  std::stringstream buffer;
  buffer << in.rdbuf();
  return parse_scene(buffer.str());
}

std::string scene_to_json(const Scene& scene) {
  json objects = json::array();
  for (const auto& obj : scene) {
    json o;
    o["id"] = obj.id;
    o["centroid"] = {obj.centroid.x(), obj.centroid.y(), obj.centroid.z()};
    if (const auto* s = std::get_if<Sphere>(&obj.shape)) {
      o["shape"] = {{"type", "sphere"}, {"radius", s->radius}};
    } else {
      const auto& h = std::get<Box>(obj.shape).half_extents;
      o["shape"] = {{"type", "box"}, {"half_extents", {h.x(), h.y(), h.z()}}};
    }
    objects.push_back(std::move(o));
  }
  return json{{"objects", objects}}.dump(2);
}

const SceneObject* find_object(const Scene& scene, const std::string& id) {
  for (const auto& obj : scene) {
    if (obj.id == id) return &obj;
  }
  return nullptr;
}

double segment_point_distance(const Position& a, const Position& b, const Position& p) {
  const Eigen::Vector3d ab = b - a;
  const double len_sq = ab.squaredNorm();
  double t = len_sq > 0.0 ? (p - a).dot(ab) / len_sq : 0.0;
  t = std::clamp(t, 0.0, 1.0);
  return (a + t * ab - p).norm();
}

namespace {

double point_box_distance(const Position& p, const Position& center, const Eigen::Vector3d& half) {
  return ((p - center).cwiseAbs() - half).cwiseMax(0.0).norm();
}

}  // namespace

double segment_box_distance(const Position& a, const Position& b, const Position& center,
                            const Eigen::Vector3d& half_extents) {
  // Distance to a convex set is convex along the segment; golden-section search.
  auto f = [&](double t) { return point_box_distance(a + t * (b - a), center, half_extents); };
  const double inv_phi = (std::sqrt(5.0) - 1.0) / 2.0;
  double lo = 0.0;
  double hi = 1.0;
  double x1 = hi - inv_phi * (hi - lo);
  double x2 = lo + inv_phi * (hi - lo);
  double f1 = f(x1);
  double f2 = f(x2);
  for (int i = 0; i < 90 && hi - lo > 1e-15; ++i) {
    if (f1 <= f2) {
      hi = x2;
      x2 = x1;
      f2 = f1;
      x1 = hi - inv_phi * (hi - lo);
      f1 = f(x1);
    } else {
      lo = x1;
      x1 = x2;
      f1 = f2;
      x2 = lo + inv_phi * (hi - lo);
      f2 = f(x2);
    }
  }
  return std::min({f(0.0), f(1.0), f1, f2, f(0.5 * (lo + hi))});
}

double segment_object_distance(const Position& a, const Position& b, const SceneObject& object) {
  if (const auto* s = std::get_if<Sphere>(&object.shape)) {
    return segment_point_distance(a, b, object.centroid) - s->radius;
  }
  return segment_box_distance(a, b, object.centroid, std::get<Box>(object.shape).half_extents);
}

bool collision_free(const JointVector& q, const Scene& scene, const DhTable& dh, double margin) {
  if (scene.empty()) return true;
  const auto origins = frame_origins(q, dh);
  for (std::size_t i = 0; i + 1 < origins.size(); ++i) {
    for (const auto& obj : scene) {
      if (segment_object_distance(origins[i], origins[i + 1], obj) < margin) return false;
    }
  }
  return true;
}

bool edge_collision_free(const JointVector& a, const JointVector& b, const Scene& scene,
                         const DhTable& dh, double resolution, double margin) {
  const double span = (b - a).cwiseAbs().maxCoeff();
  const int n = std::max(1, static_cast<int>(std::ceil(span / resolution - 1e-12)));
  for (int i = 0; i <= n; ++i) {
    const JointVector q = a + (static_cast<double>(i) / n) * (b - a);
    if (!collision_free(q, scene, dh, margin)) return false;
  }
  return true;
}

namespace {

struct Node {
  JointVector q;
  std::ptrdiff_t parent;
};

using Tree = std::vector<Node>;

enum class Growth { Trapped, Advanced, Reached };

std::size_t nearest(const Tree& tree, const JointVector& q) {
  std::size_t best = 0;
  double best_d = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < tree.size(); ++i) {
    const double d = (tree[i].q - q).squaredNorm();
    if (d < best_d) {
      best_d = d;
      best = i;
    }
  }
  return best;
}

class Extender {
public:
  Extender(const PlanRequest& req, const DhTable& dh) : req_(req), dh_(dh) {}

  Growth extend(Tree& tree, const JointVector& target) {
    const std::size_t near = nearest(tree, target);
    const JointVector& q_near = tree[near].q;
    const JointVector diff = target - q_near;
    const double span = diff.cwiseAbs().maxCoeff();
    const bool reaches = span <= req_.step_size;
    const JointVector q_new = reaches ? target : JointVector(q_near + diff * (req_.step_size / span));
    if (!dh_.within_limits(q_new) ||
        !edge_collision_free(q_near, q_new, req_.scene, dh_, req_.step_size / 4.0,
                             req_.safety_margin)) {
      return Growth::Trapped;
    }
    tree.push_back({q_new, static_cast<std::ptrdiff_t>(near)});
    return reaches ? Growth::Reached : Growth::Advanced;
  }

  Growth connect(Tree& tree, const JointVector& target) {
    Growth g = Growth::Advanced;
    while (g == Growth::Advanced) g = extend(tree, target);
    return g;
  }

private:
  const PlanRequest& req_;
  const DhTable& dh_;
};

std::vector<JointVector> branch_to_root(const Tree& tree, std::size_t leaf) {
  std::vector<JointVector> out;
  for (auto i = static_cast<std::ptrdiff_t>(leaf); i >= 0; i = tree[i].parent) {
    out.push_back(tree[i].q);
  }
  return out;
}

JointPath densify(const JointPath& sparse, double step_size) {
  JointPath out{sparse.front()};
  for (std::size_t i = 1; i < sparse.size(); ++i) {
    const JointVector diff = sparse[i] - sparse[i - 1];
    const double span = diff.cwiseAbs().maxCoeff();
    const int n = std::max(1, static_cast<int>(std::ceil(span / step_size - 1e-12)));
    for (int k = 1; k <= n; ++k) {
      out.push_back(sparse[i - 1] + (static_cast<double>(k) / n) * diff);
    }
  }
  return out;
}

}  // namespace

JointPath plan(const PlanRequest& req, const DhTable& dh) {
  if (!(req.step_size > 0.0)) throw ParameterError("plan: step_size must be positive");
  if (!dh.within_limits(req.q_start) || !dh.within_limits(req.q_goal)) {
    throw ParameterError("plan: start or goal outside joint limits");
  }
  if (!collision_free(req.q_start, req.scene, dh, req.safety_margin) ||
      !collision_free(req.q_goal, req.scene, dh, req.safety_margin)) {
    throw ParameterError("plan: start or goal in collision");
  }
  if (req.q_start == req.q_goal) return {req.q_start};

  std::mt19937_64 rng(req.rng_seed);
  std::array<std::uniform_real_distribution<double>, kArmDof> dist;
  for (int i = 0; i < kArmDof; ++i) {
    dist[i] = std::uniform_real_distribution<double>(dh.lower_limits[i], dh.upper_limits[i]);
  }

  Tree start_tree{{req.q_start, -1}};
  Tree goal_tree{{req.q_goal, -1}};
  Tree* a = &start_tree;
  Tree* b = &goal_tree;
  Extender ext(req, dh);

  for (std::size_t iter = 0; iter < req.max_iterations; ++iter) {
    JointVector q_rand;
    for (int i = 0; i < kArmDof; ++i) q_rand[i] = dist[i](rng);

    if (ext.extend(*a, q_rand) != Growth::Trapped) {
      const JointVector q_new = a->back().q;
      if (ext.connect(*b, q_new) == Growth::Reached) {
        auto from_a = branch_to_root(*a, a->size() - 1);
        auto from_b = branch_to_root(*b, b->size() - 1);
        // Both branches end at the shared node q_new; drop the duplicate.
        from_b.erase(from_b.begin());
        JointPath path;
        if (a == &start_tree) {
          path.assign(from_a.rbegin(), from_a.rend());
          path.insert(path.end(), from_b.begin(), from_b.end());
        } else {
          path.assign(from_b.rbegin(), from_b.rend());
          path.insert(path.end(), from_a.begin(), from_a.end());
        }
        if (req.smooth) {
          return shortcut_path(path, req.scene, dh, req.step_size, req.rng_seed, req.safety_margin);
        }
        return path;
      }
    }
    std::swap(a, b);
  }
  throw NoPathError("plan: iteration budget exhausted");
}

std::optional<JointPath> straight_line_plan(const JointVector& q_start, const JointVector& q_goal,
                                            const Scene& scene, const DhTable& dh,
                                            double step_size, double margin) {
  if (!(step_size > 0.0)) throw ParameterError("straight_line_plan: step_size must be positive");
  if (q_start == q_goal) return JointPath{q_start};
  JointPath path = densify({q_start, q_goal}, step_size);
  for (std::size_t i = 0; i < path.size(); ++i) {
    const JointVector& from = path[i == 0 ? 0 : i - 1];
    if (!edge_collision_free(from, path[i], scene, dh, step_size / 4.0, margin)) {
      return std::nullopt;
    }
  }
  return path;
}

JointPath shortcut_path(const JointPath& path, const Scene& scene, const DhTable& dh,
                        double step_size, std::uint64_t seed, double margin, int attempts) {
  if (path.size() < 3) return path;
  JointPath sparse = path;
  std::mt19937_64 rng(seed ^ 0x5DEECE66DULL);
  for (int k = 0; k < attempts && sparse.size() > 2; ++k) {
    std::uniform_int_distribution<std::size_t> pick(0, sparse.size() - 1);
    std::size_t i = pick(rng);
    std::size_t j = pick(rng);
    if (i > j) std::swap(i, j);
    if (j - i < 2) continue;
    if (edge_collision_free(sparse[i], sparse[j], scene, dh, step_size / 4.0, margin)) {
      sparse.erase(sparse.begin() + static_cast<std::ptrdiff_t>(i) + 1,
                   sparse.begin() + static_cast<std::ptrdiff_t>(j));
    }
  }
  return densify(sparse, step_size);
}

double joint_path_length(const JointPath& path) {
  double total = 0.0;
  for (std::size_t i = 1; i < path.size(); ++i) total += (path[i] - path[i - 1]).norm();
  return total;
}

}  // namespace teleop
