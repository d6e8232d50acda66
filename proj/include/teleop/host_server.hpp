#pragma once

#include "teleop/robot_host.hpp"

#include <boost/asio.hpp>

#include <atomic>
#include <condition_variable>
#include <cstdint>
#include <deque>
#include <functional>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <thread>
#include <vector>

namespace teleop::host {

/// Outbound buffer between the control loop and the socket writer. Telemetry beyond
/// the capacity evicts the oldest telemetry entry; replies are never evicted.
class OutboundQueue {
public:
  explicit OutboundQueue(std::size_t telemetry_capacity = 256);

  void push(Outgoing item);
  std::optional<Outgoing> pop();
  void clear();

  std::size_t size() const;
  std::size_t dropped() const;

private:
  mutable std::mutex mutex_;
  std::deque<Outgoing> items_;
  std::size_t telemetry_ = 0;
  std::size_t capacity_;
  std::size_t dropped_ = 0;
};

struct ServerOptions {
  std::string address = "127.0.0.1";
  std::uint16_t port = 0;  // 0 picks a free port
  std::size_t telemetry_capacity = 256;
};

/// TCP front end for one HostCore. The control loop thread owns the core; the network
/// thread only decodes frames into the inbound queue and drains the outbound queue.
/// One client at a time; a new connection replaces the previous one.
class HostServer {
public:
  HostServer(HostConfig config, ServerOptions options);
  ~HostServer();

  HostServer(const HostServer&) = delete;
  HostServer& operator=(const HostServer&) = delete;

  void start();
  void stop();
  /// Blocks until stop() is called from another thread.
  void wait();

  std::uint16_t port() const { return port_; }

  /// Runs `job` on the control loop between messages; its outbox is sent like any other.
  void post(std::function<Outbox(HostCore&)> job);

  std::vector<Transition> transitions() const;
  HostState state() const;
  std::size_t dropped_telemetry() const { return outbound_.dropped(); }

  void set_event_sink(std::function<void(const std::string&)> sink);

private:
  struct Connection;

  void do_accept();
  void start_read(const std::shared_ptr<Connection>& conn);
  void kick_writer();
  void write_next(const std::shared_ptr<Connection>& conn);
  void control_loop();
  void emit(Outbox out);

  boost::asio::io_context io_;
  boost::asio::ip::tcp::acceptor acceptor_;
  std::shared_ptr<Connection> conn_;  // touched only on the io thread
  std::uint16_t port_ = 0;
  double dt_;

  mutable std::mutex core_mutex_;
  HostCore core_;

  std::mutex inbound_mutex_;
  std::condition_variable inbound_cv_;
  std::deque<wire::Message> inbound_;
  std::deque<std::function<Outbox(HostCore&)>> jobs_;

  OutboundQueue outbound_;

  std::atomic<bool> running_{false};
  std::mutex stop_mutex_;
  std::condition_variable stop_cv_;
  std::thread io_thread_;
  std::thread control_thread_;
};

}  // namespace teleop::host
