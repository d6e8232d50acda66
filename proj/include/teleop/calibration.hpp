#pragma once

#include <Eigen/Dense>

#include <array>
#include <cstddef>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

namespace teleop {

/// reference ≈ scale * tracker + offset
struct AxisRegression {
  double scale = 1.0;
  double offset = 0.0;
  double r_squared = 1.0;

  double apply(double tracker) const { return scale * tracker + offset; }
};

struct CalibrationModel {
  AxisRegression x;
  AxisRegression y;
  AxisRegression z;

  static CalibrationModel identity() { return {}; }
  const AxisRegression& axis(int i) const { return i == 0 ? x : (i == 1 ? y : z); }
  AxisRegression& axis(int i) { return i == 0 ? x : (i == 1 ? y : z); }
};

struct PairedSamples {
  std::vector<Eigen::Vector3d> tracker;
  std::vector<Eigen::Vector3d> reference;
};

/// Ordinary least squares of reference on tracker. Throws FitError on a degenerate
/// tracker column and ParameterError on mismatched or too-short inputs.
AxisRegression fit_axis(std::span<const double> tracker, std::span<const double> reference);

CalibrationModel fit_calibration(const PairedSamples& samples);

Eigen::Vector3d apply(const CalibrationModel& model, const Eigen::Vector3d& p);

double mad(std::span<const double> errors);

struct MapeResult {
  double percent = 0.0;
  std::size_t used = 0;
  std::size_t excluded = 0;
};

inline constexpr double kMapeReferenceFloor = 1e-6;

/// Samples whose |reference| is below the floor are excluded and counted.
MapeResult mape(std::span<const double> predicted, std::span<const double> reference,
                double reference_floor = kMapeReferenceFloor);

/// CSV `tx,ty,tz,rx,ry,rz` in meters, header required.
PairedSamples read_paired_csv(std::istream& in);
PairedSamples load_paired_csv(const std::string& path);

std::string calibration_to_json(const CalibrationModel& model);
CalibrationModel calibration_from_json(const std::string& text);
CalibrationModel load_calibration(const std::string& path);

}  // namespace teleop
