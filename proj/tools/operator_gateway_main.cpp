#include "endpoint.hpp"

#include "teleop/console_bridge.hpp"
#include "teleop/errors.hpp"
#include "teleop/gateway_session.hpp"

#include <CLI11.hpp>

#include <atomic>
#include <csignal>
#include <iostream>
#include <mutex>
#include <thread>

namespace {

std::atomic<bool> g_quit{false};
std::shared_ptr<teleop::gateway::ConsoleSource> g_console;

void on_signal(int) {
  g_quit = true;
}

}  // namespace

int main(int argc, char** argv) {
  using namespace teleop;
  using namespace teleop::gateway;

  CLI::App app{"Operator-side gateway: streams hand deltas, keeps the digital twin, trains and uploads DMPs."};
  std::string host_ep;
  std::string calibration_path;
  std::string source_spec = "console";
  std::string console_ep;
  std::string console_root;
  std::string kin_path = TELEOP_CONFIG_DIR "/ur10.json";
  std::string object_id;
  bool cartesian = false;
  bool linger = false;
  GatewayOptions options;
  options.store_dir = "dmp_store";
  std::string store_dir = options.store_dir.string();
  app.add_option("--host", host_ep, "robot host address:port")->required();
  app.add_option("--calibration", calibration_path, "calibration document (identity if omitted)");
  app.add_option("--source", source_spec, "replay:<csv> | script:<name> | console")->capture_default_str();
  app.add_option("--console-listen", console_ep, "address:port for the browser console");
  app.add_option("--console-root", console_root, "directory with console static assets");
  app.add_option("--store", store_dir, "DMP store directory")->capture_default_str();
  app.add_option("--kinematics", kin_path, "kinematics document served to the console")->capture_default_str();
  app.add_option("--object", object_id, "object id used by scripted sessions and unnamed commands");
  app.add_option("--gain", options.gain, "steering gain")->capture_default_str();
  app.add_option("--dt", options.host_dt, "host control period [s]")->capture_default_str()->check(CLI::PositiveNumber);
  app.add_option("--pace", options.pace, "replay speed factor, 0 = as fast as possible")->capture_default_str();
  app.add_flag("--cartesian-dmp", cartesian, "train Cartesian-space skills");
  app.add_flag("--linger", linger, "keep the twin and console alive after the source ends");
  CLI11_PARSE(app, argc, argv);

  try {
    const DhTable dh = load_kinematics(kin_path);
    options.store_dir = store_dir;
    if (!calibration_path.empty()) options.calibration = load_calibration(calibration_path);
    if (!object_id.empty()) options.default_object_id = object_id;
    if (cartesian) {
      options.train.fit.space = DmpSpace::CartesianSpace;
      options.train.kinematics = dh;
    }

    HostLink link;
    const auto [host, port] = split_endpoint(host_ep);
    link.connect(host, port);
    std::cerr << "operator-gateway: connected to " << host << ':' << port << '\n';

    std::mutex print_mutex;
    auto print = [&print_mutex](const nlohmann::json& ev) {
      std::lock_guard lock(print_mutex);
      std::cout << ev.dump() << std::endl;
    };

    std::unique_ptr<ConsoleBridge> bridge;
    g_console = std::make_shared<ConsoleSource>();
    if (!console_ep.empty()) {
      const auto [chost, cport] = split_endpoint(console_ep);
      ConsoleBridgeOptions bo;
      bo.address = chost;
      bo.port = cport;
      bo.static_root = console_root;
      bridge = std::make_unique<ConsoleBridge>(bo, dh, [&link] { return link.twin(); }, g_console);
      bridge->start();
      std::cerr << "operator-gateway: console on http://" << chost << ':' << bridge->port() << "/\n";
    } else if (source_spec == "console") {
      throw ConfigError("--source console needs --console-listen");
    }

    auto emit = [&](const nlohmann::json& ev) {
      print(ev);
      if (bridge) bridge->broadcast(ev);
    };
    link.set_listener(emit);

    Gateway gw(options, link);
    gw.set_listener(emit);
    auto source = make_source(source_spec, g_console,
                              object_id.empty() ? std::nullopt : std::optional<std::string>(object_id));

    std::signal(SIGINT, on_signal);
    std::signal(SIGTERM, on_signal);
    std::thread watcher([] {
      while (!g_quit) std::this_thread::sleep_for(std::chrono::milliseconds(50));
      g_console->close();
    });
    watcher.detach();

    gw.run(*source);
    const auto& ds = gw.deltas();
    emit({{"type", "stream"},
          {"clamp_events", ds.clamp_events()},
          {"clamp_loss", {ds.clamp_loss().x(), ds.clamp_loss().y(), ds.clamp_loss().z()}}});
    emit(twin_to_json(link.twin()));
    while (linger && !g_quit && link.connected()) std::this_thread::sleep_for(std::chrono::milliseconds(100));
    if (bridge) bridge->stop();
    link.close();
  } catch (const std::exception& e) {
    std::cerr << "operator-gateway: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
