#include "endpoint.hpp"

#include "teleop/errors.hpp"
#include "teleop/host_server.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <atomic>
#include <csignal>
#include <fstream>
#include <iostream>
#include <thread>

namespace {

std::atomic<bool> g_quit{false};

void on_signal(int) { g_quit = true; }

// Admin commands on stdin, one per line:
//   add {"id":..,"centroid":[..],"shape":{..}}
//   remove <id>
//   quit
void admin_loop(teleop::host::HostServer& server) {
  std::string line;
  while (!g_quit && std::getline(std::cin, line)) {
    const auto space = line.find(' ');
    const std::string cmd = line.substr(0, space);
    const std::string arg = space == std::string::npos ? "" : line.substr(space + 1);
    try {
      if (cmd == "add") {
        const auto scene = teleop::parse_scene("{\"objects\":[" + arg + "]}");
        server.post([obj = scene.at(0)](teleop::host::HostCore& core) { return core.add_object(obj); });
      } else if (cmd == "remove") {
        server.post([arg](teleop::host::HostCore& core) { return core.remove_object(arg); });
      } else if (cmd == "quit") {
        g_quit = true;
      } else if (!cmd.empty()) {
        std::cerr << "robot-host: unknown admin command '" << cmd << "'\n";
      }
    } catch (const std::exception& e) {
      std::cerr << "robot-host: " << e.what() << '\n';
    }
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Remote-side arm simulator: applies hand deltas, records teaching, executes DMP skills."};
  std::string listen = "127.0.0.1:7000";
  std::string scene_path = TELEOP_CONFIG_DIR "/scene.json";
  std::string kin_path = TELEOP_CONFIG_DIR "/ur10.json";
  std::string event_log;
  teleop::host::HostConfig config;
  bool no_stdin = false;
  app.add_option("--listen", listen, "address:port to accept the gateway on")->capture_default_str();
  app.add_option("--scene", scene_path, "scene document")->capture_default_str();
  app.add_option("--kinematics", kin_path, "kinematics document")->capture_default_str();
  app.add_option("--dt", config.dt, "control period [s]")->capture_default_str()->check(CLI::PositiveNumber);
  app.add_flag("--cartesian-dmp", config.cartesian_dmp, "execute Cartesian-space skills instead of joint-space");
  app.add_option("--pregrasp-offset", config.pregrasp_offset, "height above the object centroid [m]")
      ->capture_default_str();
  app.add_option("--plan-seed", config.plan_seed, "seed for fallback plans")->capture_default_str();
  app.add_option("--event-log", event_log, "transition log file (default stderr)");
  app.add_flag("--no-stdin", no_stdin, "ignore stdin admin commands");
  CLI11_PARSE(app, argc, argv);

  try {
    config.dh = teleop::load_kinematics(kin_path);
    config.scene = teleop::load_scene(scene_path);
    const auto [host, port] = split_endpoint(listen);
    teleop::host::ServerOptions options;
    options.address = host;
    options.port = port;

    teleop::host::HostServer server(config, options);
    std::ofstream log_file;
    if (!event_log.empty()) {
      log_file.open(event_log, std::ios::app);
      if (!log_file) throw teleop::ConfigError("cannot open " + event_log);
    }
    std::ostream& log = event_log.empty() ? std::cerr : log_file;
    server.set_event_sink([&log](const std::string& line) { log << line << std::endl; });

    std::signal(SIGINT, on_signal);
    std::signal(SIGTERM, on_signal);
    server.start();
    std::cerr << "robot-host: listening on " << host << ':' << server.port() << '\n';
    if (!no_stdin) std::thread(admin_loop, std::ref(server)).detach();
    while (!g_quit) std::this_thread::sleep_for(std::chrono::milliseconds(50));
    server.stop();
  } catch (const std::exception& e) {
    std::cerr << "robot-host: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
