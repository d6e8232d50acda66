#include "teleop/calibration.hpp"

#include "teleop/errors.hpp"

#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <istream>
#include <sstream>

namespace teleop {

using nlohmann::json;

AxisRegression fit_axis(std::span<const double> tracker, std::span<const double> reference) {
  if (tracker.size() != reference.size()) throw ParameterError("fit_axis: length mismatch");
  if (tracker.size() < 2) throw ParameterError("fit_axis: need at least two pairs");
  const auto n = static_cast<double>(tracker.size());

  double mean_t = 0.0;
  double mean_r = 0.0;
  for (std::size_t i = 0; i < tracker.size(); ++i) {
    mean_t += tracker[i];
    mean_r += reference[i];
  }
  mean_t /= n;
  mean_r /= n;

  double s_tt = 0.0;
  double s_tr = 0.0;
  double s_rr = 0.0;
  for (std::size_t i = 0; i < tracker.size(); ++i) {
    const double dt = tracker[i] - mean_t;
    const double dr = reference[i] - mean_r;
    s_tt += dt * dt;
    s_tr += dt * dr;
    s_rr += dr * dr;
  }
  if (!(s_tt > 0.0) || !std::isfinite(s_tt)) {
    throw FitError("fit_axis: tracker column has zero variance");
  }

  AxisRegression reg;
  reg.scale = s_tr / s_tt;
  reg.offset = mean_r - reg.scale * mean_t;
  if (!std::isfinite(reg.scale) || reg.scale == 0.0) throw FitError("fit_axis: degenerate scale");

  double ss_res = 0.0;
  for (std::size_t i = 0; i < tracker.size(); ++i) {
    const double e = reference[i] - reg.apply(tracker[i]);
    ss_res += e * e;
  }
  reg.r_squared = s_rr > 0.0 ? std::clamp(1.0 - ss_res / s_rr, 0.0, 1.0) : 1.0;
  return reg;
}

CalibrationModel fit_calibration(const PairedSamples& samples) {
  if (samples.tracker.size() != samples.reference.size()) {
    throw ParameterError("fit_calibration: tracker/reference length mismatch");
  }
  CalibrationModel model;
  std::vector<double> t(samples.tracker.size());
  std::vector<double> r(samples.tracker.size());
  for (int axis = 0; axis < 3; ++axis) {
    for (std::size_t i = 0; i < t.size(); ++i) {
      t[i] = samples.tracker[i][axis];
      r[i] = samples.reference[i][axis];
    }
    model.axis(axis) = fit_axis(t, r);
  }
  return model;
}

Eigen::Vector3d apply(const CalibrationModel& model, const Eigen::Vector3d& p) {
  return {model.x.apply(p.x()), model.y.apply(p.y()), model.z.apply(p.z())};
}

double mad(std::span<const double> errors) {
  if (errors.empty()) throw ParameterError("mad: empty input");
  double sum = 0.0;
  for (double e : errors) sum += std::abs(e);
  return sum / static_cast<double>(errors.size());
}

MapeResult mape(std::span<const double> predicted, std::span<const double> reference,
                double reference_floor) {
  if (predicted.size() != reference.size()) throw ParameterError("mape: length mismatch");
  if (predicted.empty()) throw ParameterError("mape: empty input");
  MapeResult result;
  double sum = 0.0;
  for (std::size_t i = 0; i < predicted.size(); ++i) {
    if (std::abs(reference[i]) <= reference_floor) {
      ++result.excluded;
      continue;
    }
    sum += std::abs(predicted[i] - reference[i]) / std::abs(reference[i]);
    ++result.used;
  }
  result.percent = result.used > 0 ? 100.0 * sum / static_cast<double>(result.used) : 0.0;
  return result;
}

PairedSamples read_paired_csv(std::istream& in) {
  PairedSamples out;
  std::string line;
  if (!std::getline(in, line)) throw DataError("paired CSV: missing header");
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty() || line == "\r") continue;
    std::stringstream ss(line);
    std::string cell;
    std::array<double, 6> v{};
    for (int i = 0; i < 6; ++i) {
      if (!std::getline(ss, cell, ',')) {
        throw DataError("paired CSV line " + std::to_string(line_no) + ": expected 6 columns");
      }
      try {
        v[i] = std::stod(cell);
      } catch (const std::exception&) {
        throw DataError("paired CSV line " + std::to_string(line_no) + ": bad number");
      }
      if (!std::isfinite(v[i])) throw DataError("paired CSV line " + std::to_string(line_no) + ": non-finite");
    }
    out.tracker.emplace_back(v[0], v[1], v[2]);
    out.reference.emplace_back(v[3], v[4], v[5]);
  }
  return out;
}

PairedSamples load_paired_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open paired-sample file " + path);
  return read_paired_csv(in);
}

std::string calibration_to_json(const CalibrationModel& model) {
  json doc;
  const char* names[] = {"x", "y", "z"};
  for (int i = 0; i < 3; ++i) {
    const auto& a = model.axis(i);
    doc[names[i]] = {{"scale", a.scale}, {"offset", a.offset}, {"r_squared", a.r_squared}};
  }
  return doc.dump(2);
}

CalibrationModel calibration_from_json(const std::string& text) {
  CalibrationModel model;
  try {
    const json doc = json::parse(text);
    const char* names[] = {"x", "y", "z"};
    for (int i = 0; i < 3; ++i) {
      const json& a = doc.at(names[i]);
      model.axis(i) = {a.at("scale").get<double>(), a.at("offset").get<double>(),
                       a.value("r_squared", 1.0)};
      if (!std::isfinite(model.axis(i).scale) || model.axis(i).scale == 0.0) {
        throw DataError("calibration: scale must be finite and nonzero");
      }
    }
  } catch (const json::exception& e) {
    throw DataError(std::string("calibration document: ") + e.what());
  }
  return model;
}

CalibrationModel load_calibration(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open calibration file " + path);
  std::stringstream buffer;
  buffer << in.rdbuf();
  return calibration_from_json(buffer.str());
}

}  // namespace teleop
