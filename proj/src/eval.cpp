#include "teleop/eval.hpp"

#include "teleop/errors.hpp"

#include <algorithm>
#include <cmath>
#include <exception>
#include <fstream>
#include <iomanip>
#include <numbers>
#include <numeric>
#include <random>
#include <sstream>

#ifdef _OPENMP
#include <omp.h>
#endif

namespace teleop::eval {

double expected_mad(double sigma) { return sigma * std::sqrt(2.0 / std::numbers::pi); }

TrackingReport run_tracking_eval(const TrackingConfig& config) {
  if (config.n_samples < 100) throw ParameterError("tracking eval needs at least 100 samples");
  if (!(config.sigma >= 0.0) || !std::isfinite(config.sigma)) throw ParameterError("sigma must be >= 0");
  if (!(config.train_fraction > 0.0 && config.train_fraction < 1.0)) {
    throw ParameterError("train_fraction must lie in (0, 1)");
  }

  std::mt19937_64 rng(config.seed);
  std::normal_distribution<double> noise(0.0, 1.0);

  const std::size_t n = config.n_samples;
  std::vector<Eigen::Vector3d> truth(n);
  std::vector<Eigen::Vector3d> tracker(n);
  // Incommensurate frequencies so the path sweeps the whole box.
  const Eigen::Vector3d freq(0.31, 0.47, 0.23);
  const Eigen::Vector3d phase(0.0, 1.1, 2.3);
  for (std::size_t k = 0; k < n; ++k) {
    const double t = static_cast<double>(k) * config.sample_dt;
    for (int a = 0; a < 3; ++a) {
      truth[k][a] = config.path_centre[a] + config.path_amplitude[a] * std::sin(2.0 * std::numbers::pi * freq[a] * t + phase[a]);
    }
    Eigen::Vector3d observed = truth[k];
    for (int a = 0; a < 3; ++a) observed[a] += config.sigma * noise(rng);
    tracker[k] = config.distortion_scale.cwiseProduct(observed) + config.distortion_offset;
  }

  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::shuffle(order.begin(), order.end(), rng);
  const auto n_train = static_cast<std::size_t>(std::floor(config.train_fraction * static_cast<double>(n)));
  std::vector<std::size_t> test(order.begin() + static_cast<std::ptrdiff_t>(n_train), order.end());
  std::sort(test.begin(), test.end());

  PairedSamples train;
  for (std::size_t i = 0; i < n_train; ++i) {
    train.tracker.push_back(tracker[order[i]]);
    train.reference.push_back(truth[order[i]]);
  }

  TrackingReport report;
  report.config = config;
  report.calibration = fit_calibration(train);
  report.n_train = n_train;
  report.n_test = test.size();

  std::array<std::vector<double>, 3> err;
  std::array<std::vector<double>, 3> pred;
  std::array<std::vector<double>, 3> ref;
  for (std::size_t k : test) {
    const Eigen::Vector3d p = apply(report.calibration, tracker[k]);
    const Eigen::Vector3d e = p - truth[k];
    report.test_t.push_back(static_cast<double>(k) * config.sample_dt);
    report.test_error.push_back(e);
    for (int a = 0; a < 3; ++a) {
      err[a].push_back(e[a]);
      pred[a].push_back(p[a]);
      ref[a].push_back(truth[k][a]);
    }
  }
  for (int a = 0; a < 3; ++a) {
    report.mad[a] = mad(err[a]);
    report.mape[a] = mape(pred[a], ref[a]);
  }
  return report;
}

namespace {

std::vector<Position> min_jerk_line(const Position& a, const Position& b, double duration, double dt) {
  const auto steps = static_cast<std::size_t>(std::llround(duration / dt));
  std::vector<Position> out(steps + 1);
  for (std::size_t k = 0; k <= steps; ++k) {
    const double s = static_cast<double>(k) / static_cast<double>(steps);
    out[k] = a + (s * s * s * (10.0 - 15.0 * s + 6.0 * s * s)) * (b - a);
  }
  return out;
}

}  // namespace

DistanceRecord evaluate_goal(const Position& goal, const JointVector& q_goal, std::size_t index,
                             std::uint64_t seed, const DhTable& dh, const Scene& scene,
                             const DistanceConfig& config) {
  DistanceRecord rec;
  rec.goal_index = index;
  rec.rng_seed = seed;
  rec.goal = goal;
  const Position start = forward_kinematics(dh.home, dh).position;
  rec.euclidean = (goal - start).norm();
  if (rec.euclidean < 1e-9) {
    rec.euclidean = 0.0;
    return rec;
  }

  // DMP: straight-line Cartesian demonstration, reproduced by its own rollout.
  const auto demo_path = min_jerk_line(start, goal, config.demo_duration, config.demo_dt);
  Demonstration demo;
  demo.dt = config.demo_dt;
  demo.positions.resize(static_cast<Eigen::Index>(demo_path.size()), 3);
  for (std::size_t k = 0; k < demo_path.size(); ++k) demo.positions.row(static_cast<Eigen::Index>(k)) = demo_path[k];
  FitOptions fo;
  fo.n_basis = config.n_basis;
  fo.space = DmpSpace::CartesianSpace;
  const DmpModel model = fit(demo, fo);
  const Eigen::MatrixXd rows = reproduce(model);
  std::vector<Position> dmp_positions(static_cast<std::size_t>(rows.rows()));
  for (Eigen::Index r = 0; r < rows.rows(); ++r) dmp_positions[static_cast<std::size_t>(r)] = rows.row(r).transpose();
  rec.dmp_length = path_length(dmp_positions);

  // Planner: unsmoothed RRT-Connect in joint space, executed and measured through FK.
  PlanRequest req;
  req.q_start = dh.home;
  req.q_goal = q_goal;
  req.scene = scene;
  req.step_size = config.plan_step;
  req.max_iterations = config.plan_iterations;
  req.rng_seed = seed;
  req.smooth = false;
  const JointPath path = plan(req, dh);
  rec.planner_length = path_length(tool_positions(execute(path, dh, config.exec_dt), dh));
  return rec;
}

DistanceRecord sample_and_evaluate(std::size_t index, const DhTable& dh, const Scene& scene,
                                   const DistanceConfig& config) {
  const std::uint64_t seed = config.seed ^ static_cast<std::uint64_t>(index);
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> unit(-0.5, 0.5);
  std::size_t rejected = 0;
  for (std::size_t attempt = 0; attempt <= config.max_resamples_per_goal; ++attempt) {
    const Position goal = config.box_centre + config.box_edge * Position(unit(rng), unit(rng), unit(rng));
    JointVector q_goal;
    try {
      q_goal = solve_ik_to(dh.home, goal, dh);
    } catch (const UnreachableError&) {
      ++rejected;
      continue;
    }
    if (!dh.within_limits(q_goal) || !collision_free(q_goal, scene, dh)) {
      ++rejected;
      continue;
    }
    try {
      DistanceRecord rec = evaluate_goal(goal, q_goal, index, seed, dh, scene, config);
      rec.resamples = rejected;
      return rec;
    } catch (const NoPathError&) {
      ++rejected;
    }
  }
  throw ConfigError("goal " + std::to_string(index) + ": no reachable goal after " +
                    std::to_string(rejected) + " draws; check the goal box");
}

std::vector<DistanceRecord> run_distance_eval_serial(const DhTable& dh, const Scene& scene,
                                                     const DistanceConfig& config) {
  std::vector<DistanceRecord> records;
  records.reserve(config.n_goals);
  for (std::size_t i = 0; i < config.n_goals; ++i) records.push_back(sample_and_evaluate(i, dh, scene, config));
  return records;
}

std::vector<DistanceRecord> run_distance_eval(const DhTable& dh, const Scene& scene, const DistanceConfig& config) {
  std::vector<DistanceRecord> records(config.n_goals);
  std::vector<std::exception_ptr> failures(config.n_goals);
  const auto n = static_cast<std::ptrdiff_t>(config.n_goals);
#pragma omp parallel for schedule(dynamic, 1)
  for (std::ptrdiff_t i = 0; i < n; ++i) {
    const auto k = static_cast<std::size_t>(i);
    try {
      records[k] = sample_and_evaluate(k, dh, scene, config);
    } catch (...) {
      failures[k] = std::current_exception();
    }
  }
  for (const auto& f : failures) {
    if (f) std::rethrow_exception(f);
  }
  return records;
}

DistanceSummary summarize(const std::vector<DistanceRecord>& records) {
  DistanceSummary s;
  s.goals = records.size();
  double dmp_sum = 0.0;
  double plan_sum = 0.0;
  std::size_t used = 0;
  for (const auto& r : records) {
    s.resamples += r.resamples;
    if (r.dmp_length < r.euclidean - 1e-9 || r.planner_length < r.euclidean - 1e-9) s.lower_bounds_hold = false;
    if (r.euclidean <= 0.0) {
      ++s.degenerate;
      continue;
    }
    ++used;
    dmp_sum += r.dmp_length / r.euclidean;
    plan_sum += r.planner_length / r.euclidean;
    if (r.planner_length > r.dmp_length) ++s.planner_longer;
  }
  if (used > 0) {
    s.mean_dmp_ratio = dmp_sum / static_cast<double>(used);
    s.mean_planner_ratio = plan_sum / static_cast<double>(used);
  }
  return s;
}

void write_tracking_csv(const TrackingReport& report, std::ostream& out) {
  out << "axis,scale,offset,r_squared,mad_m,mape_percent,mape_used,mape_excluded,n_train,n_test,sigma_m,seed\n";
  out << std::setprecision(10);
  const char* names[] = {"x", "y", "z"};
  for (int a = 0; a < 3; ++a) {
    const auto& reg = report.calibration.axis(a);
    out << names[a] << ',' << reg.scale << ',' << reg.offset << ',' << reg.r_squared << ',' << report.mad[a] << ','
        << report.mape[a].percent << ',' << report.mape[a].used << ',' << report.mape[a].excluded << ','
        << report.n_train << ',' << report.n_test << ',' << report.config.sigma << ',' << report.config.seed << '\n';
  }
}

void write_tracking_errors_csv(const TrackingReport& report, std::ostream& out) {
  out << "t,ex,ey,ez\n" << std::setprecision(10);
  for (std::size_t i = 0; i < report.test_t.size(); ++i) {
    const auto& e = report.test_error[i];
    out << report.test_t[i] << ',' << e.x() << ',' << e.y() << ',' << e.z() << '\n';
  }
}

void write_distance_csv(const std::vector<DistanceRecord>& records, std::ostream& out) {
  out << "goal,euclidean_m,dmp_m,planner_m,seed\n" << std::fixed << std::setprecision(9);
  for (const auto& r : records) {
    out << r.goal_index << ',' << r.euclidean << ',' << r.dmp_length << ',' << r.planner_length << ',' << r.rng_seed
        << '\n';
  }
}

std::string tracking_summary(const TrackingReport& report) {
  std::ostringstream s;
  s << std::setprecision(6);
  s << "tracking accuracy (synthetic tracker, reference data not available)\n";
  s << "sigma_m " << report.config.sigma << "  samples " << report.config.n_samples << "  seed "
    << report.config.seed << "  train/test " << report.n_train << '/' << report.n_test << '\n';
  s << "expected MAD (half-normal) " << expected_mad(report.config.sigma) << " m\n";
  const char* names[] = {"x", "y", "z"};
  for (int a = 0; a < 3; ++a) {
    s << names[a] << ": MAD " << report.mad[a] << " m  MAPE " << report.mape[a].percent << " %  scale "
      << report.calibration.axis(a).scale << "  offset " << report.calibration.axis(a).offset << '\n';
  }
  return s.str();
}

std::string distance_summary(const DistanceSummary& summary, const DistanceConfig& config) {
  std::ostringstream s;
  s << std::setprecision(6);
  s << "DMP vs planner end-effector distance (ordering property, reference plot values not available)\n";
  s << "goals " << summary.goals << "  seed " << config.seed << "  degenerate " << summary.degenerate
    << "  resampled draws " << summary.resamples << '\n';
  s << "mean dmp/euclidean " << summary.mean_dmp_ratio << '\n';
  s << "mean planner/euclidean " << summary.mean_planner_ratio << '\n';
  s << "planner longer than dmp on " << summary.planner_longer << " of " << (summary.goals - summary.degenerate)
    << " goals\n";
  s << "path length >= euclidean on every record: " << (summary.lower_bounds_hold ? "yes" : "NO") << '\n';
  return s.str();
}

std::string distance_gnuplot(const std::string& csv_name) {
  std::ostringstream s;
  s << "set datafile separator ','\n"
    << "set key autotitle columnhead\n"
    << "set style data histograms\nset style fill solid 0.8\n"
    << "set xlabel 'goal'\nset ylabel 'distance [m]'\n"
    << "plot '" << csv_name << "' using 2:xtic(1) title 'euclidean', '' using 3 title 'dmp', '' using 4 title 'planner'\n";
  return s.str();
}

std::string tracking_gnuplot(const std::string& csv_name) {
  std::ostringstream s;
  s << "set datafile separator ','\n"
    << "set xlabel 't [s]'\nset ylabel 'error [m]'\n"
    << "plot '" << csv_name << "' using 1:2 with dots title 'x', '' using 1:3 with dots title 'y', "
    << "'' using 1:4 with dots title 'z'\n";
  return s.str();
}

namespace {

void write_file(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw ConfigError("cannot write " + path.string());
  out << text;
}

}  // namespace

void write_tracking_outputs(const TrackingReport& report, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  std::ostringstream csv;
  write_tracking_csv(report, csv);
  write_file(dir / "tracking_report.csv", csv.str());
  std::ostringstream errors;
  write_tracking_errors_csv(report, errors);
  write_file(dir / "tracking_errors.csv", errors.str());
  write_file(dir / "tracking.gnuplot", tracking_gnuplot("tracking_errors.csv"));
  write_file(dir / "summary.txt", tracking_summary(report));
}

void write_distance_outputs(const std::vector<DistanceRecord>& records, const DistanceConfig& config,
                            const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  std::ostringstream csv;
  write_distance_csv(records, csv);
  write_file(dir / "distance_report.csv", csv.str());
  write_file(dir / "distance.gnuplot", distance_gnuplot("distance_report.csv"));
  write_file(dir / "summary.txt", distance_summary(summarize(records), config));
}

}  // namespace teleop::eval
