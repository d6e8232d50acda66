#pragma once

#include "teleop/calibration.hpp"
#include "teleop/dmp.hpp"
#include "teleop/kinematics.hpp"
#include "teleop/planner.hpp"

#include <array>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <string>
#include <vector>

namespace teleop::eval {

// ---- tracking accuracy ----

struct TrackingConfig {
  double sigma = 0.0107;     // m, injected per-axis noise
  std::size_t n_samples = 10000;
  std::uint64_t seed = 7;
  double train_fraction = 0.6;
  double sample_dt = 0.02;
  // Synthetic tracker distortion: tracker = scale * (truth + noise) + offset, per axis.
  Eigen::Vector3d distortion_scale{1.8, 0.9, 1.25};
  Eigen::Vector3d distortion_offset{0.05, -0.12, 0.30};
  // Hand path: Lissajous curve inside centre +/- amplitude (all coordinates positive).
  Eigen::Vector3d path_centre{0.6, 0.4, 0.5};
  Eigen::Vector3d path_amplitude{0.2, 0.2, 0.2};
};

struct TrackingReport {
  TrackingConfig config;
  CalibrationModel calibration;
  std::array<double, 3> mad{};
  std::array<MapeResult, 3> mape{};
  std::size_t n_train = 0;
  std::size_t n_test = 0;
  std::vector<double> test_t;                 // held-out sample times
  std::vector<Eigen::Vector3d> test_error;    // calibrated - truth
};

/// Throws ParameterError if n_samples < 100 or sigma < 0.
TrackingReport run_tracking_eval(const TrackingConfig& config);

/// Half-normal mean: expected |e| for e ~ N(0, sigma^2).
double expected_mad(double sigma);

// ---- DMP vs planner end-effector distance ----

struct DistanceConfig {
  std::size_t n_goals = 15;
  std::uint64_t seed = 42;
  Eigen::Vector3d box_centre{0.7, 0.0, 0.647};
  double box_edge = 0.6;
  double demo_duration = 2.0;
  double demo_dt = 0.01;
  double exec_dt = 0.02;
  double plan_step = 0.1;
  std::size_t plan_iterations = 20000;
  std::size_t max_resamples_per_goal = 200;
  std::size_t n_basis = 20;
};

struct DistanceRecord {
  std::size_t goal_index = 0;
  double euclidean = 0.0;
  double dmp_length = 0.0;
  double planner_length = 0.0;
  std::uint64_t rng_seed = 0;
  Position goal = Position::Zero();
  std::size_t resamples = 0;
};

struct DistanceSummary {
  std::size_t goals = 0;
  std::size_t degenerate = 0;
  std::size_t resamples = 0;
  double mean_dmp_ratio = 0.0;
  double mean_planner_ratio = 0.0;
  std::size_t planner_longer = 0;
  bool lower_bounds_hold = true;
};

/// One goal, start at the home tool position. A goal within 1e-9 m of the start gives
/// the degenerate all-zero record.
DistanceRecord evaluate_goal(const Position& goal, const JointVector& q_goal, std::size_t index,
                             std::uint64_t seed, const DhTable& dh, const Scene& scene,
                             const DistanceConfig& config);

/// Samples a reachable, collision-free goal for one index; counts rejected draws.
DistanceRecord sample_and_evaluate(std::size_t index, const DhTable& dh, const Scene& scene,
                                   const DistanceConfig& config);

/// Goals run in parallel (OpenMP); the serial variant is the reference and must produce
/// identical records.
std::vector<DistanceRecord> run_distance_eval(const DhTable& dh, const Scene& scene, const DistanceConfig& config);
std::vector<DistanceRecord> run_distance_eval_serial(const DhTable& dh, const Scene& scene,
                                                     const DistanceConfig& config);

DistanceSummary summarize(const std::vector<DistanceRecord>& records);

// ---- outputs ----

void write_tracking_csv(const TrackingReport& report, std::ostream& out);
void write_tracking_errors_csv(const TrackingReport& report, std::ostream& out);
void write_distance_csv(const std::vector<DistanceRecord>& records, std::ostream& out);
std::string tracking_summary(const TrackingReport& report);
std::string distance_summary(const DistanceSummary& summary, const DistanceConfig& config);
/// Gnuplot script that renders distance_report.csv as three series per goal.
std::string distance_gnuplot(const std::string& csv_name);
std::string tracking_gnuplot(const std::string& csv_name);

void write_tracking_outputs(const TrackingReport& report, const std::filesystem::path& dir);
void write_distance_outputs(const std::vector<DistanceRecord>& records, const DistanceConfig& config,
                            const std::filesystem::path& dir);

}  // namespace teleop::eval
