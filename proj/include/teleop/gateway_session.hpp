#pragma once

#include "teleop/gateway.hpp"

#include <boost/asio.hpp>
#include <json.hpp>

#include <atomic>
#include <chrono>
#include <condition_variable>
#include <deque>
#include <functional>
#include <map>
#include <mutex>
#include <thread>

namespace teleop::gateway {

/// Client side of the host connection. A reader thread folds telemetry into the twin
/// and sorts replies: while hand deltas are in flight the next reply belongs to the
/// oldest delta, otherwise it answers the outstanding control command.
class HostLink {
public:
  using Clock = std::chrono::steady_clock;

  HostLink() = default;
  ~HostLink();
  HostLink(const HostLink&) = delete;
  HostLink& operator=(const HostLink&) = delete;

  /// Retries until the host accepts or the timeout elapses; throws ConfigError then.
  void connect(const std::string& host, std::uint16_t port, double timeout_s = 5.0);
  void close();
  bool connected() const { return connected_.load(); }

  void send(const wire::Message& msg);
  void send_delta(const wire::HandDelta& delta);

  /// Waits until every sent delta has been answered. Returns false on timeout.
  bool settle_deltas(double timeout_s);
  /// Next reply to a control command. Throws ProtocolError on timeout or disconnect.
  wire::Message await_reply(double timeout_s);

  TwinState twin() const;
  /// Blocks until a twin update arrives or the timeout elapses; returns the update count.
  std::uint64_t wait_twin_update(std::uint64_t seen, double timeout_s) const;

  /// Receives delta replies (Ack/Nack) and disconnect notices.
  void set_listener(std::function<void(const nlohmann::json&)> listener);

private:
  void read_loop();
  void on_message(const wire::Message& msg);
  void notify(const nlohmann::json& event);

  boost::asio::io_context io_;
  boost::asio::ip::tcp::socket socket_{io_};
  std::thread reader_;
  std::atomic<bool> connected_{false};
  std::mutex write_mutex_;

  mutable std::mutex mutex_;
  mutable std::condition_variable cv_;
  TwinState twin_;
  std::uint64_t twin_updates_ = 0;
  std::map<std::uint64_t, Clock::time_point> sent_at_;
  std::size_t deltas_in_flight_ = 0;
  std::deque<wire::Message> replies_;
  std::function<void(const nlohmann::json&)> listener_;
};

struct GatewayOptions {
  CalibrationModel calibration;
  double gain = 1.0;
  double host_dt = 0.02;
  double step_cap = kDefaultStepCap;
  TrainOptions train;
  std::filesystem::path store_dir = "dmp_store";
  std::size_t max_chunk_bytes = wire::kMaxFrameBytes;
  double reply_timeout = 30.0;
  /// Replay sources at their recorded timing (scaled); 0 streams as fast as possible.
  double pace = 1.0;
  std::string default_object_id = "demo";
};

enum class SessionState { Idle, Steering, Teaching, Executing };
const char* session_state_name(SessionState s);

/// Drives one operator session: hand samples become deltas, control commands become
/// host requests; teach_stop trains, persists and uploads the model.
class Gateway {
public:
  Gateway(GatewayOptions options, HostLink& link);

  /// Consumes the source until it ends. Control command failures are reported through
  /// the listener and do not stop the session.
  void run(PoseSource& source);
  void handle(const SourceEvent& event);

  /// Each returns true when the host confirmed the request.
  bool teach_start();
  std::optional<DmpModel> teach_stop(const std::string& object_id);
  bool execute(const std::string& object_id);

  SessionState state() const { return state_.load(); }
  const DeltaStream& deltas() const { return deltas_; }
  const DmpStore& store() const { return store_; }
  std::optional<wire::NackError> last_nack() const;

  void set_listener(std::function<void(const nlohmann::json&)> listener) { listener_ = std::move(listener); }

private:
  void on_sample(const HandSample& sample);
  void flush_deltas();
  std::optional<wire::NackError> expect_ack(const char* what);
  void report(const nlohmann::json& event);

  GatewayOptions options_;
  HostLink& link_;
  DeltaStream deltas_;
  DmpStore store_;
  std::atomic<SessionState> state_{SessionState::Idle};
  std::optional<wire::NackError> last_nack_;
  std::function<void(const nlohmann::json&)> listener_;
  std::optional<HostLink::Clock::time_point> pace_origin_;
  double pace_t0_ = 0.0;
};

}  // namespace teleop::gateway
