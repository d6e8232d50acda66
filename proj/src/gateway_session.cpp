#include "teleop/gateway_session.hpp"

#include "teleop/dmp_io.hpp"
#include "teleop/errors.hpp"

#include <iostream>

namespace teleop::gateway {

namespace asio = boost::asio;
using tcp = asio::ip::tcp;
using nlohmann::json;

namespace {

json nack_json(const wire::NackError& n) {
  return {{"type", "nack"},
          {"code", n.code},
          {"name", wire::nack_code_name(static_cast<wire::NackCode>(n.code))},
          {"detail", n.detail}};
}

std::chrono::duration<double> seconds(double s) { return std::chrono::duration<double>(s); }

}  // namespace

HostLink::~HostLink() { close(); }

void HostLink::connect(const std::string& host, std::uint16_t port, double timeout_s) {
  if (connected_) throw ParameterError("host link already connected");
  tcp::resolver resolver(io_);
  const auto deadline = Clock::now() + std::chrono::duration_cast<Clock::duration>(seconds(timeout_s));
  boost::system::error_code ec;
  for (;;) {
    const auto endpoints = resolver.resolve(host, std::to_string(port), ec);
    if (!ec) {
      asio::connect(socket_, endpoints, ec);
      if (!ec) break;
    }
    if (Clock::now() >= deadline) {
      throw ConfigError("cannot reach host " + host + ":" + std::to_string(port) + ": " + ec.message());
    }
    std::this_thread::sleep_for(std::chrono::milliseconds(50));
  }
  socket_.set_option(tcp::no_delay(true));
  connected_ = true;
  reader_ = std::thread([this] { read_loop(); });
}

void HostLink::close() {
  if (socket_.is_open()) {
    boost::system::error_code ignored;
    socket_.shutdown(tcp::socket::shutdown_both, ignored);
  }
  if (reader_.joinable()) reader_.join();
  boost::system::error_code ignored;
  socket_.close(ignored);
  connected_ = false;
  cv_.notify_all();
}

void HostLink::send(const wire::Message& msg) {
  const auto bytes = wire::encode(msg);
  std::lock_guard lock(write_mutex_);
  if (!connected_) throw ProtocolError("host link is not connected");
  boost::system::error_code ec;
  asio::write(socket_, asio::buffer(bytes), ec);
  if (ec) throw ProtocolError("host link write failed: " + ec.message());
}

void HostLink::send_delta(const wire::HandDelta& delta) {
  {
    std::lock_guard lock(mutex_);
    sent_at_[delta.frame] = Clock::now();
    ++deltas_in_flight_;
  }
  try {
    send(delta);
  } catch (...) {
    std::lock_guard lock(mutex_);
    sent_at_.erase(delta.frame);
    --deltas_in_flight_;
    throw;
  }
}

bool HostLink::settle_deltas(double timeout_s) {
  std::unique_lock lock(mutex_);
  return cv_.wait_for(lock, seconds(timeout_s), [this] { return deltas_in_flight_ == 0 || !connected_; }) &&
         deltas_in_flight_ == 0;
}

wire::Message HostLink::await_reply(double timeout_s) {
  std::unique_lock lock(mutex_);
  if (!cv_.wait_for(lock, seconds(timeout_s), [this] { return !replies_.empty() || !connected_; })) {
    throw ProtocolError("timed out waiting for the host");
  }
  if (replies_.empty()) throw ProtocolError("host link closed");
  wire::Message msg = std::move(replies_.front());
  replies_.pop_front();
  return msg;
}

TwinState HostLink::twin() const {
  std::lock_guard lock(mutex_);
  return twin_;
}

std::uint64_t HostLink::wait_twin_update(std::uint64_t seen, double timeout_s) const {
  std::unique_lock lock(mutex_);
  cv_.wait_for(lock, seconds(timeout_s), [&] { return twin_updates_ != seen || !connected_; });
  return twin_updates_;
}

void HostLink::set_listener(std::function<void(const json&)> listener) {
  std::lock_guard lock(mutex_);
  listener_ = std::move(listener);
}

void HostLink::notify(const json& event) {
  std::function<void(const json&)> listener;
  {
    std::lock_guard lock(mutex_);
    listener = listener_;
  }
  if (listener) listener(event);
}

void HostLink::on_message(const wire::Message& msg) {
  const bool telemetry =
      std::holds_alternative<wire::JointState>(msg) || std::holds_alternative<wire::SceneSnapshot>(msg);
  std::optional<json> event;
  {
    std::lock_guard lock(mutex_);
    std::optional<double> rtt;
    if (const auto* ack = std::get_if<wire::Ack>(&msg)) {
      const auto it = sent_at_.find(ack->ref_frame);
      if (it != sent_at_.end()) {
        rtt = std::chrono::duration<double>(Clock::now() - it->second).count();
        sent_at_.erase(sent_at_.begin(), std::next(it));
      }
    }
    twin_ = twin_update(std::move(twin_), msg, rtt);
    ++twin_updates_;
    if (!telemetry) {
      if (deltas_in_flight_ > 0) {
        --deltas_in_flight_;
        if (const auto* nack = std::get_if<wire::NackError>(&msg)) event = nack_json(*nack);
      } else {
        replies_.push_back(msg);
      }
    }
  }
  cv_.notify_all();
  if (event) notify(*event);
}

void HostLink::read_loop() {
  wire::FrameReader reader;
  std::array<std::uint8_t, 8192> buf{};
  std::string reason = "host closed the connection";
  for (;;) {
    boost::system::error_code ec;
    const std::size_t n = socket_.read_some(asio::buffer(buf), ec);
    if (ec) {
      if (ec != asio::error::eof) reason = ec.message();
      break;
    }
    reader.feed(std::span<const std::uint8_t>(buf.data(), n));
    try {
      while (auto msg = reader.next()) on_message(*msg);
    } catch (const ProtocolError& e) {
      reason = std::string("protocol error from host: ") + e.what();
      break;
    }
  }
  {
    std::lock_guard lock(mutex_);
    connected_ = false;
  }
  cv_.notify_all();
  notify({{"type", "session"}, {"state", "Disconnected"}, {"detail", reason}});
}

const char* session_state_name(SessionState s) {
  switch (s) {
    case SessionState::Idle: return "Idle";
    case SessionState::Steering: return "Steering";
    case SessionState::Teaching: return "Teaching";
    case SessionState::Executing: return "Executing";
  }
  return "?";
}

Gateway::Gateway(GatewayOptions options, HostLink& link)
    : options_(std::move(options)),
      link_(link),
      deltas_(options_.calibration, options_.gain, options_.host_dt, options_.step_cap),
      store_(options_.store_dir) {}

std::optional<wire::NackError> Gateway::last_nack() const { return last_nack_; }

void Gateway::report(const json& event) {
  if (listener_) listener_(event);
}

void Gateway::run(PoseSource& source) {
  while (auto ev = source.next()) {
    if (!link_.connected()) throw ProtocolError("host link closed");
    handle(*ev);
  }
  flush_deltas();
  link_.settle_deltas(options_.reply_timeout);
}

void Gateway::handle(const SourceEvent& event) {
  if (const auto* sample = std::get_if<HandSample>(&event)) {
    on_sample(*sample);
    return;
  }
  const auto& cmd = std::get<ControlCommand>(event);
  const std::string id = cmd.object_id.value_or(options_.default_object_id);
  switch (cmd.kind) {
    case ControlCommand::Kind::TeachStart: teach_start(); break;
    case ControlCommand::Kind::TeachStop: teach_stop(id); break;
    case ControlCommand::Kind::Execute: execute(id); break;
  }
  pace_origin_.reset();
}

void Gateway::on_sample(const HandSample& sample) {
  if (options_.pace > 0.0) {
    const auto now = HostLink::Clock::now();
    if (!pace_origin_) {
      pace_origin_ = now;
      pace_t0_ = sample.t;
    } else {
      const auto due = *pace_origin_ + std::chrono::duration_cast<HostLink::Clock::duration>(
                                           seconds((sample.t - pace_t0_) / options_.pace));
      std::this_thread::sleep_until(due);
    }
  }
  if (auto delta = deltas_.offer(sample)) {
    link_.send_delta(*delta);
    if (state_ == SessionState::Idle) state_ = SessionState::Steering;
  }
}

void Gateway::flush_deltas() {
  if (auto delta = deltas_.flush()) link_.send_delta(*delta);
}

std::optional<wire::NackError> Gateway::expect_ack(const char* what) {
  const wire::Message reply = link_.await_reply(options_.reply_timeout);
  if (std::holds_alternative<wire::Ack>(reply)) return std::nullopt;
  if (const auto* nack = std::get_if<wire::NackError>(&reply)) {
    last_nack_ = *nack;
    json ev = nack_json(*nack);
    ev["request"] = what;
    report(ev);
    return *nack;
  }
  throw ProtocolError(std::string("unexpected ") + wire::tag_name(wire::tag_of(reply)) + " answering " + what);
}

bool Gateway::teach_start() {
  flush_deltas();
  if (!link_.settle_deltas(options_.reply_timeout)) throw ProtocolError("host did not answer hand deltas");
  link_.send(wire::TeachStart{});
  if (expect_ack("teach_start")) return false;
  state_ = SessionState::Teaching;
  report({{"type", "session"}, {"state", "Teaching"}});
  return true;
}

std::optional<DmpModel> Gateway::teach_stop(const std::string& object_id) {
  flush_deltas();
  if (!link_.settle_deltas(options_.reply_timeout)) throw ProtocolError("host did not answer hand deltas");
  link_.send(wire::TeachStop{});
  std::vector<wire::TrajectoryUpload> chunks;
  for (;;) {
    wire::Message reply = link_.await_reply(options_.reply_timeout);
    if (auto* chunk = std::get_if<wire::TrajectoryUpload>(&reply)) {
      chunks.push_back(std::move(*chunk));
      continue;
    }
    if (std::holds_alternative<wire::Ack>(reply)) break;
    if (const auto* nack = std::get_if<wire::NackError>(&reply)) {
      last_nack_ = *nack;
      json ev = nack_json(*nack);
      ev["request"] = "teach_stop";
      report(ev);
      return std::nullopt;
    }
    throw ProtocolError(std::string("unexpected ") + wire::tag_name(wire::tag_of(reply)) + " answering teach_stop");
  }
  state_ = SessionState::Idle;
  report({{"type", "session"}, {"state", "Idle"}});

  DmpModel model;
  try {
    model = train_model(chunks, object_id, options_.train);
    store_.save(model);
  } catch (const Error& e) {
    report({{"type", "error"}, {"request", "train"}, {"detail", e.what()}});
    return std::nullopt;
  }
  const auto upload = wire::chunk_model(model_to_json(model), options_.max_chunk_bytes);
  for (const auto& chunk : upload) link_.send(chunk);
  if (expect_ack("model_upload")) return std::nullopt;
  std::size_t samples = 0;
  for (const auto& c : chunks) samples += c.samples.size();
  report({{"type", "trained"}, {"object_id", object_id}, {"samples", samples}});
  return model;
}

bool Gateway::execute(const std::string& object_id) {
  flush_deltas();
  if (!link_.settle_deltas(options_.reply_timeout)) throw ProtocolError("host did not answer hand deltas");
  const SessionState before = state_;
  link_.send(wire::ExecuteToObject{object_id});
  state_ = SessionState::Executing;
  report({{"type", "session"}, {"state", "Executing"}, {"object_id", object_id}});
  const bool ok = !expect_ack("execute");
  state_ = ok ? SessionState::Idle : before;
  // Hand motion during the blocking execution must not turn into one large step.
  deltas_.reset();
  report({{"type", "session"}, {"state", session_state_name(state_)}});
  return ok;
}

}  // namespace teleop::gateway
