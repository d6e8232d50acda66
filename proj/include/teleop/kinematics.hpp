#pragma once

#include <Eigen/Dense>
#include <Eigen/Geometry>

#include <array>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

namespace teleop {

inline constexpr int kArmDof = 6;

using JointVector = Eigen::Matrix<double, kArmDof, 1>;
using Position = Eigen::Vector3d;

/// One standard Denavit-Hartenberg row. Joint i contributes
/// Rz(q_i + theta_offset) * Tz(d) * Tx(a) * Rx(alpha).
struct DhRow {
  double a = 0.0;
  double d = 0.0;
  double alpha = 0.0;
  double theta_offset = 0.0;
};

struct DhTable {
  std::array<DhRow, kArmDof> rows{};
  JointVector lower_limits = JointVector::Constant(-2.0 * EIGEN_PI);
  JointVector upper_limits = JointVector::Constant(2.0 * EIGEN_PI);
  JointVector max_joint_speed = JointVector::Ones();
  JointVector home = JointVector::Zero();

  /// Throws ConfigError when limits are inverted or speeds are not positive.
  void validate() const;
  bool within_limits(const JointVector& q) const;
  JointVector clamp(const JointVector& q) const;
};

struct CartesianPose {
  Position position = Position::Zero();
  Eigen::Quaterniond orientation = Eigen::Quaterniond::Identity();
};

struct TrajectorySample {
  double t = 0.0;
  JointVector q = JointVector::Zero();
};

struct TrajectoryLog {
  double dt = 0.0;
  std::vector<TrajectorySample> samples;
};

struct IkOptions {
  double max_step = 0.05;         // m, per-call cap on |delta|
  double damping = 0.05;          // DLS lambda
  double jacobian_step = 1e-6;    // rad, central differences
  double tolerance = 1e-4;        // m
  double unreachable_residual = 1e-3;  // m
  int max_iterations = 50;
};

/// Reads the kinematics configuration document (DH rows, limits, speeds, home).
DhTable load_kinematics(const std::string& path);
DhTable parse_kinematics(const std::string& json_text);
std::string kinematics_to_json(const DhTable& dh);

Eigen::Matrix4d dh_transform(const DhRow& row, double q);

CartesianPose forward_kinematics(const JointVector& q, const DhTable& dh);

/// Origins of the base frame and the six link frames, base first.
std::array<Position, kArmDof + 1> frame_origins(const JointVector& q, const DhTable& dh);

/// 3x6 positional Jacobian by central finite differences.
Eigen::Matrix<double, 3, kArmDof> positional_jacobian(const JointVector& q, const DhTable& dh,
                                                      double step = 1e-6);

/// Damped least-squares step moving the tool position by cartesian_delta.
/// Throws UnreachableError if the residual stays above the unreachable threshold.
JointVector ik_step(const JointVector& q_current, const Position& cartesian_delta,
                    const DhTable& dh, const IkOptions& options = {});

/// Chains ik_step calls, each capped at options.max_step, until the tool reaches target.
JointVector solve_ik_to(const JointVector& q_start, const Position& target, const DhTable& dh,
                        const IkOptions& options = {}, int max_segments = 200);

/// Time-parameterizes q_path under the per-joint speed caps and resamples it at dt.
/// A positive min_segment_time keeps the timing of paths that already carry one
/// (e.g. rollouts sampled at dt); segments only stretch when a joint would overspeed.
TrajectoryLog execute(std::span<const JointVector> q_path, const DhTable& dh, double dt,
                      double min_segment_time = 0.0);

double path_length(std::span<const CartesianPose> poses);
double path_length(std::span<const Position> positions);

/// Tool positions along a joint trajectory.
std::vector<Position> tool_positions(const TrajectoryLog& log, const DhTable& dh);

/// CSV with header `t,q1,q2,q3,q4,q5,q6`.
void write_trajectory_csv(const TrajectoryLog& log, std::ostream& out);

}  // namespace teleop
