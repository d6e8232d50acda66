#include "teleop/eval.hpp"

#include <CLI11.hpp>

#include <chrono>
#include <iostream>

int main(int argc, char** argv) {
  using namespace teleop;
  CLI::App app{"Desk-scale reproductions of the tracking-accuracy and DMP-vs-planner experiments."};
  app.require_subcommand(1);

  eval::TrackingConfig tc;
  std::string tracking_out = "eval_out";
  auto* tracking = app.add_subcommand("tracking", "calibrate a synthetic noisy tracker and report MAD/MAPE");
  tracking->add_option("--sigma", tc.sigma, "per-axis noise [m]")->capture_default_str();
  tracking->add_option("--n", tc.n_samples, "sample count")->capture_default_str();
  tracking->add_option("--seed", tc.seed, "random seed")->capture_default_str();
  tracking->add_option("--out", tracking_out, "output directory")->capture_default_str();

  eval::DistanceConfig dc;
  std::string distance_out = "eval_out";
  std::string kin_path = TELEOP_CONFIG_DIR "/ur10.json";
  std::string scene_path = TELEOP_CONFIG_DIR "/scene.json";
  bool serial = false;
  auto* distance = app.add_subcommand("distance", "compare DMP and planner end-effector path lengths");
  distance->add_option("--goals", dc.n_goals, "number of goals")->capture_default_str();
  distance->add_option("--seed", dc.seed, "random seed")->capture_default_str();
  distance->add_option("--out", distance_out, "output directory")->capture_default_str();
  distance->add_option("--kinematics", kin_path, "kinematics document")->capture_default_str();
  distance->add_option("--scene", scene_path, "scene document")->capture_default_str();
  distance->add_flag("--serial", serial, "run the serial reference instead of the parallel kernel");

  CLI11_PARSE(app, argc, argv);

  try {
    const auto t0 = std::chrono::steady_clock::now();
    if (*tracking) {
      const auto report = eval::run_tracking_eval(tc);
      eval::write_tracking_outputs(report, tracking_out);
      std::cout << eval::tracking_summary(report);
      std::cout << "\nplot layout (gnuplot, run in " << tracking_out << "):\n" << eval::tracking_gnuplot("tracking_errors.csv");
    } else {
      const DhTable dh = load_kinematics(kin_path);
      const Scene scene = load_scene(scene_path);
      const auto records = serial ? eval::run_distance_eval_serial(dh, scene, dc) : eval::run_distance_eval(dh, scene, dc);
      eval::write_distance_outputs(records, dc, distance_out);
      std::cout << eval::distance_summary(eval::summarize(records), dc);
      std::cout << "\nplot layout (gnuplot, run in " << distance_out << "):\n"
                << eval::distance_gnuplot("distance_report.csv");
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    std::cout << "elapsed_s " << secs << '\n';
  } catch (const std::exception& e) {
    std::cerr << "eval: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
