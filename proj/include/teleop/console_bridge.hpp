#pragma once

#include "teleop/gateway.hpp"

#include <boost/asio.hpp>
#include <json.hpp>

#include <filesystem>
#include <functional>
#include <memory>
#include <set>
#include <string>
#include <thread>

namespace teleop::gateway {

struct ConsoleBridgeOptions {
  std::string address = "127.0.0.1";
  std::uint16_t port = 0;
  /// Static console assets; "/" maps to index.html. Empty serves a placeholder page.
  std::filesystem::path static_root;
  double twin_period = 0.05;  // s between twin pushes (only sent when changed)
};

/// HTTP + WebSocket endpoint for the browser console.
///
///   GET /kinematics        DH table document
///   GET /debug/fk?q=...    frame origins for six comma-separated joint angles (home if absent)
///   GET /twin              current twin message
///   GET /ws                WebSocket: twin/event JSON out, hand/control JSON in
class ConsoleBridge {
public:
  ConsoleBridge(ConsoleBridgeOptions options, DhTable dh, std::function<TwinState()> twin,
                std::shared_ptr<ConsoleSource> inbound);
  ~ConsoleBridge();

  ConsoleBridge(const ConsoleBridge&) = delete;
  ConsoleBridge& operator=(const ConsoleBridge&) = delete;

  void start();
  void stop();
  std::uint16_t port() const { return port_; }

  /// Sends an event to every connected console. Thread-safe.
  void broadcast(const nlohmann::json& event);

  struct WsSession;

private:
  friend struct HttpSession;

  void do_accept();
  void schedule_twin();
  void on_ws_message(const std::string& text, const std::shared_ptr<WsSession>& from);

  ConsoleBridgeOptions options_;
  DhTable dh_;
  std::function<TwinState()> twin_;
  std::shared_ptr<ConsoleSource> inbound_;

  boost::asio::io_context io_;
  boost::asio::ip::tcp::acceptor acceptor_;
  boost::asio::steady_timer twin_timer_;
  std::uint16_t port_ = 0;
  std::set<std::shared_ptr<WsSession>> sessions_;  // io thread only
  std::string last_twin_;
  std::uint64_t hand_frame_ = 0;
  std::chrono::steady_clock::time_point epoch_ = std::chrono::steady_clock::now();
  std::thread thread_;
  bool running_ = false;
};

/// Body of GET /debug/fk: {"q":[6], "origins":[[x,y,z] x 7]}.
nlohmann::json fk_debug_json(const JointVector& q, const DhTable& dh);

/// Parses "a,b,c,d,e,f" into a joint vector; throws ParameterError otherwise.
JointVector parse_joint_list(const std::string& text);

}  // namespace teleop::gateway
