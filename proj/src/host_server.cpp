#include "teleop/host_server.hpp"

#include "teleop/errors.hpp"

#include <chrono>
#include <iostream>

namespace teleop::host {

namespace asio = boost::asio;
using tcp = asio::ip::tcp;

OutboundQueue::OutboundQueue(std::size_t telemetry_capacity) : capacity_(telemetry_capacity) {
  if (capacity_ == 0) throw ParameterError("outbound queue: capacity must be positive");
}

void OutboundQueue::push(Outgoing item) {
  std::lock_guard lock(mutex_);
  if (item.telemetry) {
    if (telemetry_ == capacity_) {
      for (auto it = items_.begin(); it != items_.end(); ++it) {
        if (it->telemetry) {
          items_.erase(it);
          --telemetry_;
          ++dropped_;
          break;
        }
      }
    }
    ++telemetry_;
  }
  items_.push_back(std::move(item));
}

std::optional<Outgoing> OutboundQueue::pop() {
  std::lock_guard lock(mutex_);
  if (items_.empty()) return std::nullopt;
  Outgoing item = std::move(items_.front());
  items_.pop_front();
  if (item.telemetry) --telemetry_;
  return item;
}

void OutboundQueue::clear() {
  std::lock_guard lock(mutex_);
  items_.clear();
  telemetry_ = 0;
}

std::size_t OutboundQueue::size() const {
  std::lock_guard lock(mutex_);
  return items_.size();
}

std::size_t OutboundQueue::dropped() const {
  std::lock_guard lock(mutex_);
  return dropped_;
}

struct HostServer::Connection {
  explicit Connection(tcp::socket s) : socket(std::move(s)) {}
  tcp::socket socket;
  wire::FrameReader reader;
  std::array<std::uint8_t, 4096> read_buf{};
  std::vector<std::uint8_t> write_buf;
  bool writing = false;
  bool close_after_flush = false;
};

HostServer::HostServer(HostConfig config, ServerOptions options)
    : acceptor_(io_), dt_(config.dt), core_(std::move(config)), outbound_(options.telemetry_capacity) {
  const tcp::endpoint ep(asio::ip::make_address(options.address), options.port);
  acceptor_.open(ep.protocol());
  acceptor_.set_option(tcp::acceptor::reuse_address(true));
  acceptor_.bind(ep);
  acceptor_.listen();
  port_ = acceptor_.local_endpoint().port();
}

HostServer::~HostServer() { stop(); }

void HostServer::set_event_sink(std::function<void(const std::string&)> sink) {
  std::lock_guard lock(core_mutex_);
  core_.set_event_sink(std::move(sink));
}

void HostServer::start() {
  if (running_.exchange(true)) return;
  do_accept();
  io_thread_ = std::thread([this] { io_.run(); });
  control_thread_ = std::thread([this] { control_loop(); });
}

void HostServer::stop() {
  if (!running_.exchange(false)) return;
  inbound_cv_.notify_all();
  if (control_thread_.joinable()) control_thread_.join();
  asio::post(io_, [this] {
    boost::system::error_code ec;
    acceptor_.close(ec);
    if (conn_) conn_->socket.close(ec);
    conn_.reset();
  });
  // Closing the acceptor and socket cancels the remaining handlers, so run() returns.
  if (io_thread_.joinable()) io_thread_.join();
  stop_cv_.notify_all();
}

void HostServer::wait() {
  std::unique_lock lock(stop_mutex_);
  stop_cv_.wait(lock, [this] { return !running_.load(); });
}

void HostServer::post(std::function<Outbox(HostCore&)> job) {
  {
    std::lock_guard lock(inbound_mutex_);
    jobs_.push_back(std::move(job));
  }
  inbound_cv_.notify_one();
}

std::vector<Transition> HostServer::transitions() const {
  std::lock_guard lock(core_mutex_);
  return core_.transitions();
}

HostState HostServer::state() const {
  std::lock_guard lock(core_mutex_);
  return core_.state();
}

void HostServer::do_accept() {
  acceptor_.async_accept([this](boost::system::error_code ec, tcp::socket socket) {
    if (ec) return;  // acceptor closed
    socket.set_option(tcp::no_delay(true));
    if (conn_) {
      boost::system::error_code ignored;
      conn_->socket.close(ignored);
    }
    outbound_.clear();
    conn_ = std::make_shared<Connection>(std::move(socket));
    {
      std::lock_guard lock(inbound_mutex_);
      inbound_.clear();
    }
    post([](HostCore& core) { return core.on_connect(); });
    start_read(conn_);
    do_accept();
  });
}

void HostServer::start_read(const std::shared_ptr<Connection>& conn) {
  conn->socket.async_read_some(
      asio::buffer(conn->read_buf), [this, conn](boost::system::error_code ec, std::size_t n) {
        if (ec || conn != conn_ || conn->close_after_flush) return;
        conn->reader.feed(std::span<const std::uint8_t>(conn->read_buf.data(), n));
        std::vector<wire::Message> decoded;
        try {
          while (auto msg = conn->reader.next()) decoded.push_back(std::move(*msg));
        } catch (const ProtocolError& e) {
          // Framing is lost; answer once and hang up after the reply is flushed.
          std::string detail = e.what();
          if (detail.size() > wire::kMaxDetailBytes) detail.resize(wire::kMaxDetailBytes);
          outbound_.push({wire::NackError{static_cast<std::uint16_t>(wire::NackCode::Protocol), detail}, false});
          conn->close_after_flush = true;
        }
        if (!decoded.empty()) {
          {
            std::lock_guard lock(inbound_mutex_);
            for (auto& m : decoded) inbound_.push_back(std::move(m));
          }
          inbound_cv_.notify_one();
        }
        write_next(conn);
        if (!conn->close_after_flush) start_read(conn);
      });
}

void HostServer::kick_writer() {
  asio::post(io_, [this] {
    if (conn_) write_next(conn_);
  });
}

void HostServer::write_next(const std::shared_ptr<Connection>& conn) {
  if (conn->writing || conn != conn_) return;
  auto item = outbound_.pop();
  if (!item) {
    if (conn->close_after_flush) {
      boost::system::error_code ignored;
      conn->socket.shutdown(tcp::socket::shutdown_both, ignored);
      conn->socket.close(ignored);
      conn_.reset();
    }
    return;
  }
  conn->write_buf = wire::encode(item->message);
  conn->writing = true;
  asio::async_write(conn->socket, asio::buffer(conn->write_buf),
                    [this, conn](boost::system::error_code ec, std::size_t) {
                      conn->writing = false;
                      if (ec) {
                        if (conn == conn_) conn_.reset();
                        return;
                      }
                      write_next(conn);
                    });
}

void HostServer::emit(Outbox out) {
  if (out.empty()) return;
  for (auto& item : out) outbound_.push(std::move(item));
  kick_writer();
}

void HostServer::control_loop() {
  using clock = std::chrono::steady_clock;
  const auto period = std::chrono::duration_cast<clock::duration>(std::chrono::duration<double>(dt_));
  auto deadline = clock::now() + period;

  while (running_.load()) {
    std::deque<wire::Message> messages;
    std::deque<std::function<Outbox(HostCore&)>> jobs;
    {
      std::unique_lock lock(inbound_mutex_);
      inbound_cv_.wait_until(lock, deadline,
                             [this] { return !running_.load() || !inbound_.empty() || !jobs_.empty(); });
      messages.swap(inbound_);
      jobs.swap(jobs_);
    }
    if (!running_.load()) break;

    Outbox out;
    {
      std::lock_guard lock(core_mutex_);
      for (auto& job : jobs) {
        try {
          for (auto& o : job(core_)) out.push_back(std::move(o));
        } catch (const Error& e) {
          std::cerr << "robot-host: admin command failed: " << e.what() << '\n';
        }
      }
      for (const auto& msg : messages) {
        for (auto& o : core_.handle(msg)) out.push_back(std::move(o));
      }
      const auto now = clock::now();
      if (now >= deadline) {
        for (auto& o : core_.tick()) out.push_back(std::move(o));
        deadline += period;
        if (deadline < now) deadline = now + period;  // fell behind; do not burst
      }
    }
    emit(std::move(out));
  }
}

}  // namespace teleop::host
