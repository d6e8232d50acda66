#include "teleop/kinematics.hpp"

#include "teleop/errors.hpp"

#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <ostream>
#include <sstream>

namespace teleop {

using nlohmann::json;

void DhTable::validate() const {
  for (int i = 0; i < kArmDof; ++i) {
    if (!(lower_limits[i] < upper_limits[i])) {
      throw ConfigError("joint " + std::to_string(i + 1) + ": lower limit must be below upper limit");
    }
    if (!(max_joint_speed[i] > 0.0)) {
      throw ConfigError("joint " + std::to_string(i + 1) + ": max speed must be positive");
    }
  }
  if (!home.allFinite() || !within_limits(home)) {
    throw ConfigError("home configuration outside joint limits");
  }
}

bool DhTable::within_limits(const JointVector& q) const {
  return q.allFinite() && (q.array() >= lower_limits.array()).all() &&
         (q.array() <= upper_limits.array()).all();
}

JointVector DhTable::clamp(const JointVector& q) const {
  return q.cwiseMax(lower_limits).cwiseMin(upper_limits);
}

namespace {

JointVector joint_vector_from(const json& j, const char* field) {
  if (!j.is_array() || j.size() != kArmDof) {
    throw ConfigError(std::string(field) + " must hold 6 numbers");
  }
  JointVector v;
  for (int i = 0; i < kArmDof; ++i) v[i] = j.at(i).get<double>();
  return v;
}

json joint_vector_to(const JointVector& v) {
  json out = json::array();
  for (int i = 0; i < kArmDof; ++i) out.push_back(v[i]);
  return out;
}

}  // namespace

DhTable parse_kinematics(const std::string& json_text) {
  DhTable dh;
  try {
    const json doc = json::parse(json_text);
    const json& rows = doc.at("dh");
    if (!rows.is_array() || rows.size() != kArmDof) throw ConfigError("dh must hold 6 rows");
    for (int i = 0; i < kArmDof; ++i) {
      const json& r = rows.at(i);
      dh.rows[i] = DhRow{r.at("a").get<double>(), r.at("d").get<double>(),
                         r.at("alpha").get<double>(), r.value("theta_offset", 0.0)};
    }
    const json& limits = doc.at("joint_limits");
    if (!limits.is_array() || limits.size() != kArmDof) {
      throw ConfigError("joint_limits must hold 6 [lower, upper] pairs");
    }
    for (int i = 0; i < kArmDof; ++i) {
      dh.lower_limits[i] = limits.at(i).at(0).get<double>();
      dh.upper_limits[i] = limits.at(i).at(1).get<double>();
    }
    dh.max_joint_speed = joint_vector_from(doc.at("max_joint_speed"), "max_joint_speed");
    if (doc.contains("home")) dh.home = joint_vector_from(doc.at("home"), "home");
  } catch (const json::exception& e) {
    throw ConfigError(std::string("kinematics document: ") + e.what());
  }
  dh.validate();
  return dh;
}

DhTable load_kinematics(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open kinematics file " + path);
  std::stringstream buffer;
  buffer << in.rdbuf();
  return parse_kinematics(buffer.str());
}

std::string kinematics_to_json(const DhTable& dh) {
  json doc;
  doc["dh"] = json::array();
  for (const auto& r : dh.rows) {
    doc["dh"].push_back({{"a", r.a}, {"d", r.d}, {"alpha", r.alpha}, {"theta_offset", r.theta_offset}});
  }
  doc["joint_limits"] = json::array();
  for (int i = 0; i < kArmDof; ++i) {
    doc["joint_limits"].push_back({dh.lower_limits[i], dh.upper_limits[i]});
  }
  doc["max_joint_speed"] = joint_vector_to(dh.max_joint_speed);
  doc["home"] = joint_vector_to(dh.home);
  return doc.dump(2);
}

Eigen::Matrix4d dh_transform(const DhRow& row, double q) {
  const double theta = q + row.theta_offset;
  const double ct = std::cos(theta);
  const double st = std::sin(theta);
  const double ca = std::cos(row.alpha);
  const double sa = std::sin(row.alpha);
  Eigen::Matrix4d t;
  t << ct, -st * ca, st * sa, row.a * ct,
       st, ct * ca, -ct * sa, row.a * st,
       0.0, sa, ca, row.d,
       0.0, 0.0, 0.0, 1.0;
  return t;
}

CartesianPose forward_kinematics(const JointVector& q, const DhTable& dh) {
  Eigen::Matrix4d t = Eigen::Matrix4d::Identity();
  for (int i = 0; i < kArmDof; ++i) t = t * dh_transform(dh.rows[i], q[i]);
  CartesianPose pose;
  pose.position = t.block<3, 1>(0, 3);
  pose.orientation = Eigen::Quaterniond(Eigen::Matrix3d(t.block<3, 3>(0, 0)));
  pose.orientation.normalize();
  return pose;
}

std::array<Position, kArmDof + 1> frame_origins(const JointVector& q, const DhTable& dh) {
  std::array<Position, kArmDof + 1> origins;
  Eigen::Matrix4d t = Eigen::Matrix4d::Identity();
  origins[0] = Position::Zero();
  for (int i = 0; i < kArmDof; ++i) {
    t = t * dh_transform(dh.rows[i], q[i]);
    origins[i + 1] = t.block<3, 1>(0, 3);
  }
  return origins;
}

Eigen::Matrix<double, 3, kArmDof> positional_jacobian(const JointVector& q, const DhTable& dh,
                                                      double step) {
  Eigen::Matrix<double, 3, kArmDof> jac;
  for (int i = 0; i < kArmDof; ++i) {
    JointVector plus = q;
    JointVector minus = q;
    plus[i] += step;
    minus[i] -= step;
    jac.col(i) = (forward_kinematics(plus, dh).position - forward_kinematics(minus, dh).position) /
                 (2.0 * step);
  }
  return jac;
}

JointVector ik_step(const JointVector& q_current, const Position& cartesian_delta,
                    const DhTable& dh, const IkOptions& options) {
  if (!q_current.allFinite() || !cartesian_delta.allFinite()) {
    throw ParameterError("ik_step: non-finite input");
  }
  if (cartesian_delta.norm() > options.max_step * (1.0 + 1e-12)) {
    throw ParameterError("ik_step: delta exceeds the per-step cap");
  }
  const Position target = forward_kinematics(q_current, dh).position + cartesian_delta;
  const double lambda_sq = options.damping * options.damping;

  JointVector q = q_current;
  Position error = target - forward_kinematics(q, dh).position;
  for (int iter = 0; iter < options.max_iterations && error.norm() >= options.tolerance; ++iter) {
    const auto jac = positional_jacobian(q, dh, options.jacobian_step);
    const Eigen::Matrix3d jjt = jac * jac.transpose() + lambda_sq * Eigen::Matrix3d::Identity();
    const JointVector dq = jac.transpose() * jjt.ldlt().solve(error);
    q = dh.clamp(q + dq);
    error = target - forward_kinematics(q, dh).position;
  }

  const double residual = error.norm();
  if (residual > options.unreachable_residual) {
    std::ostringstream msg;
    msg << "ik_step: target unreachable, residual " << residual << " m";
    throw UnreachableError(msg.str(), residual);
  }
  return q;
}

JointVector solve_ik_to(const JointVector& q_start, const Position& target, const DhTable& dh,
                        const IkOptions& options, int max_segments) {
  JointVector q = q_start;
  Position error = target - forward_kinematics(q, dh).position;
  for (int seg = 0; seg < max_segments && error.norm() >= options.tolerance; ++seg) {
    Position delta = error;
    if (delta.norm() > options.max_step) delta *= options.max_step / delta.norm();
    q = ik_step(q, delta, dh, options);
    error = target - forward_kinematics(q, dh).position;
  }
  if (error.norm() >= options.tolerance) {
    throw UnreachableError("solve_ik_to: target not reached", error.norm());
  }
  return q;
}

TrajectoryLog execute(std::span<const JointVector> q_path, const DhTable& dh, double dt,
                      double min_segment_time) {
  if (!(dt > 0.0)) throw ParameterError("execute: dt must be positive");
  if (!(min_segment_time >= 0.0)) throw ParameterError("execute: min_segment_time must be non-negative");
  if (q_path.empty()) throw ParameterError("execute: empty path");
  for (std::size_t i = 0; i < q_path.size(); ++i) {
    if (!dh.within_limits(q_path[i])) {
      throw LimitError("execute: waypoint " + std::to_string(i) + " outside joint limits");
    }
  }

  // Knot times: each segment runs at the speed of its slowest-to-finish joint.
  std::vector<double> knots(q_path.size(), 0.0);
  for (std::size_t i = 1; i < q_path.size(); ++i) {
    const JointVector step = (q_path[i] - q_path[i - 1]).cwiseAbs();
    knots[i] = knots[i - 1] + std::max(min_segment_time, step.cwiseQuotient(dh.max_joint_speed).maxCoeff());
  }
  const double total = knots.back();
  const auto n = static_cast<std::size_t>(std::ceil(total / dt - 1e-9));

  TrajectoryLog log;
  log.dt = dt;
  log.samples.reserve(n + 1);
  std::size_t seg = 1;
  for (std::size_t k = 0; k <= n; ++k) {
    const double t = static_cast<double>(k) * dt;
    JointVector q;
    if (k == n || t >= total) {
      q = q_path.back();
    } else {
      while (seg < knots.size() - 1 && knots[seg] <= t) ++seg;
      const double span_t = knots[seg] - knots[seg - 1];
      const double s = span_t > 0.0 ? (t - knots[seg - 1]) / span_t : 1.0;
      q = q_path[seg - 1] + s * (q_path[seg] - q_path[seg - 1]);
    }
    log.samples.push_back({t, q});
  }
  return log;
}

double path_length(std::span<const Position> positions) {
  if (positions.empty()) throw ParameterError("path_length: empty input");
  double total = 0.0;
  for (std::size_t i = 1; i < positions.size(); ++i) {
    total += (positions[i] - positions[i - 1]).norm();
  }
  return total;
}

double path_length(std::span<const CartesianPose> poses) {
  if (poses.empty()) throw ParameterError("path_length: empty input");
  double total = 0.0;
  for (std::size_t i = 1; i < poses.size(); ++i) {
    total += (poses[i].position - poses[i - 1].position).norm();
  }
  return total;
}

std::vector<Position> tool_positions(const TrajectoryLog& log, const DhTable& dh) {
  std::vector<Position> out;
  out.reserve(log.samples.size());
  for (const auto& s : log.samples) out.push_back(forward_kinematics(s.q, dh).position);
  return out;
}

void write_trajectory_csv(const TrajectoryLog& log, std::ostream& out) {
  out << "t,q1,q2,q3,q4,q5,q6\n";
  out.precision(17);
  for (const auto& s : log.samples) {
    out << s.t;
    for (int i = 0; i < kArmDof; ++i) out << ',' << s.q[i];
    out << '\n';
  }
}

}  // namespace teleop
