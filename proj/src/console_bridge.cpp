#include "teleop/console_bridge.hpp"

#include "teleop/errors.hpp"

#include <boost/beast/core.hpp>
#include <boost/beast/http.hpp>
#include <boost/beast/websocket.hpp>

#include <deque>
#include <fstream>
#include <iostream>
#include <sstream>

namespace teleop::gateway {

namespace asio = boost::asio;
namespace beast = boost::beast;
namespace http = beast::http;
namespace websocket = beast::websocket;
using tcp = asio::ip::tcp;
using nlohmann::json;

json fk_debug_json(const JointVector& q, const DhTable& dh) {
  json qs = json::array();
  for (int i = 0; i < kArmDof; ++i) qs.push_back(q[i]);
  json origins = json::array();
  for (const auto& p : frame_origins(q, dh)) origins.push_back({p.x(), p.y(), p.z()});
  return {{"q", qs}, {"origins", origins}};
}

JointVector parse_joint_list(const std::string& text) {
  std::string s = text;
  std::replace(s.begin(), s.end(), ',', ' ');
  std::istringstream in(s);
  JointVector q;
  for (int i = 0; i < kArmDof; ++i) {
    if (!(in >> q[i])) throw ParameterError("expected 6 comma-separated joint angles");
  }
  std::string rest;
  if (in >> rest) throw ParameterError("expected exactly 6 joint angles");
  if (!q.allFinite()) throw ParameterError("joint angles must be finite");
  return q;
}

namespace {

std::string mime_type(const std::filesystem::path& p) {
  const auto ext = p.extension().string();
  if (ext == ".html") return "text/html";
  if (ext == ".js" || ext == ".mjs") return "application/javascript";
  if (ext == ".css") return "text/css";
  if (ext == ".json") return "application/json";
  if (ext == ".svg") return "image/svg+xml";
  if (ext == ".png") return "image/png";
  return "application/octet-stream";
}

std::string query_param(std::string_view target, std::string_view key) {
  const auto qpos = target.find('?');
  if (qpos == std::string_view::npos) return {};
  std::string_view query = target.substr(qpos + 1);
  while (!query.empty()) {
    const auto amp = query.find('&');
    const std::string_view pair = query.substr(0, amp);
    const auto eq = pair.find('=');
    if (pair.substr(0, eq) == key && eq != std::string_view::npos) {
      std::string value(pair.substr(eq + 1));
      // Only %2C and %20 appear in practice for joint lists.
      for (std::size_t i; (i = value.find("%2C")) != std::string::npos || (i = value.find("%2c")) != std::string::npos;) {
        value.replace(i, 3, ",");
      }
      for (std::size_t i; (i = value.find("%20")) != std::string::npos;) value.replace(i, 3, " ");
      return value;
    }
    if (amp == std::string_view::npos) break;
    query.remove_prefix(amp + 1);
  }
  return {};
}

const char* kPlaceholderPage =
    "<!doctype html><title>operator console</title>"
    "<p>Console assets are not installed. Start the gateway with --console-root.</p>";

}  // namespace

struct ConsoleBridge::WsSession : std::enable_shared_from_this<WsSession> {
  WsSession(tcp::socket socket, ConsoleBridge& bridge) : ws(std::move(socket)), bridge(bridge) {}

  void start(http::request<http::string_body> req) {
    ws.set_option(websocket::stream_base::timeout::suggested(beast::role_type::server));
    ws.async_accept(req, [self = shared_from_this()](beast::error_code ec) {
      if (ec) return;
      self->bridge.sessions_.insert(self);
      self->send(twin_to_json(self->bridge.twin_()).dump());
      self->read();
    });
  }

  void read() {
    ws.async_read(buffer, [self = shared_from_this()](beast::error_code ec, std::size_t) {
      if (ec) {
        self->bridge.sessions_.erase(self);
        return;
      }
      std::string text = beast::buffers_to_string(self->buffer.data());
      self->buffer.consume(self->buffer.size());
      self->bridge.on_ws_message(text, self);
      self->read();
    });
  }

  void send(std::string text) {
    outbox.push_back(std::move(text));
    if (outbox.size() == 1) write();
  }

  void write() {
    ws.text(true);
    ws.async_write(asio::buffer(outbox.front()), [self = shared_from_this()](beast::error_code ec, std::size_t) {
      if (ec) {
        self->bridge.sessions_.erase(self);
        return;
      }
      self->outbox.pop_front();
      if (!self->outbox.empty()) self->write();
    });
  }

  websocket::stream<beast::tcp_stream> ws;
  ConsoleBridge& bridge;
  beast::flat_buffer buffer;
  std::deque<std::string> outbox;
};

struct HttpSession : std::enable_shared_from_this<HttpSession> {
  HttpSession(tcp::socket socket, ConsoleBridge& bridge) : stream(std::move(socket)), bridge(bridge) {}

  void read() {
    req = {};
    stream.expires_after(std::chrono::seconds(30));
    http::async_read(stream, buffer, req, [self = shared_from_this()](beast::error_code ec, std::size_t) {
      if (ec) return;
      self->dispatch();
    });
  }

  void dispatch() {
    if (websocket::is_upgrade(req)) {
      stream.expires_never();
      auto ws = std::make_shared<ConsoleBridge::WsSession>(stream.release_socket(), bridge);
      ws->start(std::move(req));
      return;
    }
    auto res = std::make_shared<http::response<http::string_body>>(route());
    res->keep_alive(req.keep_alive());
    res->prepare_payload();
    http::async_write(stream, *res, [self = shared_from_this(), res](beast::error_code ec, std::size_t) {
      if (ec) return;
      if (res->keep_alive()) {
        self->read();
      } else {
        beast::error_code ignored;
        self->stream.socket().shutdown(tcp::socket::shutdown_send, ignored);
      }
    });
  }

  http::response<http::string_body> reply(http::status status, std::string body, std::string type) {
    http::response<http::string_body> res{status, req.version()};
    res.set(http::field::content_type, type);
    res.set(http::field::access_control_allow_origin, "*");
    res.set(http::field::cache_control, "no-store");
    res.body() = std::move(body);
    return res;
  }

  http::response<http::string_body> route() {
    if (req.method() != http::verb::get) return reply(http::status::method_not_allowed, "GET only\n", "text/plain");
    const std::string_view target(req.target().data(), req.target().size());
    const std::string_view path = target.substr(0, target.find('?'));
    try {
      if (path == "/kinematics") return reply(http::status::ok, kinematics_to_json(bridge.dh_), "application/json");
      if (path == "/twin") return reply(http::status::ok, twin_to_json(bridge.twin_()).dump(), "application/json");
      if (path == "/debug/fk") {
        const std::string q = query_param(target, "q");
        const JointVector joints = q.empty() ? bridge.dh_.home : parse_joint_list(q);
        return reply(http::status::ok, fk_debug_json(joints, bridge.dh_).dump(), "application/json");
      }
    } catch (const Error& e) {
      return reply(http::status::bad_request, json{{"error", e.what()}}.dump(), "application/json");
    }
    return serve_static(path);
  }

  http::response<http::string_body> serve_static(std::string_view path) {
    if (path.find("..") != std::string_view::npos) return reply(http::status::bad_request, "bad path\n", "text/plain");
    std::string rel(path.substr(1));
    if (rel.empty()) rel = "index.html";
    if (bridge.options_.static_root.empty()) {
      if (rel == "index.html") return reply(http::status::ok, kPlaceholderPage, "text/html");
      return reply(http::status::not_found, "not found\n", "text/plain");
    }
    const auto file = bridge.options_.static_root / rel;
    std::ifstream in(file, std::ios::binary);
    if (!in) return reply(http::status::not_found, "not found\n", "text/plain");
    std::stringstream body;
    body << in.rdbuf();
    return reply(http::status::ok, body.str(), mime_type(file));
  }

  beast::tcp_stream stream;
  ConsoleBridge& bridge;
  beast::flat_buffer buffer;
  http::request<http::string_body> req;
};

ConsoleBridge::ConsoleBridge(ConsoleBridgeOptions options, DhTable dh, std::function<TwinState()> twin,
                             std::shared_ptr<ConsoleSource> inbound)
    : options_(std::move(options)),
      dh_(std::move(dh)),
      twin_(std::move(twin)),
      inbound_(std::move(inbound)),
      acceptor_(io_),
      twin_timer_(io_) {
  if (!twin_) throw ParameterError("console bridge needs a twin provider");
  const tcp::endpoint ep(asio::ip::make_address(options_.address), options_.port);
  acceptor_.open(ep.protocol());
  acceptor_.set_option(tcp::acceptor::reuse_address(true));
  acceptor_.bind(ep);
  acceptor_.listen();
  port_ = acceptor_.local_endpoint().port();
}

ConsoleBridge::~ConsoleBridge() { stop(); }

void ConsoleBridge::start() {
  if (running_) return;
  running_ = true;
  do_accept();
  schedule_twin();
  thread_ = std::thread([this] { io_.run(); });
}

void ConsoleBridge::stop() {
  if (!running_) return;
  running_ = false;
  asio::post(io_, [this] {
    beast::error_code ec;
    acceptor_.close(ec);
    twin_timer_.cancel();
    for (const auto& s : sessions_) beast::get_lowest_layer(s->ws).socket().close(ec);
    sessions_.clear();
  });
  io_.stop();
  if (thread_.joinable()) thread_.join();
}

void ConsoleBridge::do_accept() {
  acceptor_.async_accept([this](beast::error_code ec, tcp::socket socket) {
    if (ec) return;
    std::make_shared<HttpSession>(std::move(socket), *this)->read();
    do_accept();
  });
}

void ConsoleBridge::schedule_twin() {
  twin_timer_.expires_after(std::chrono::duration_cast<std::chrono::steady_clock::duration>(
      std::chrono::duration<double>(options_.twin_period)));
  twin_timer_.async_wait([this](beast::error_code ec) {
    if (ec) return;
    std::string text = twin_to_json(twin_()).dump();
    if (text != last_twin_) {
      for (const auto& s : sessions_) s->send(text);
      last_twin_ = std::move(text);
    }
    schedule_twin();
  });
}

void ConsoleBridge::broadcast(const json& event) {
  asio::post(io_, [this, text = event.dump()] {
    for (const auto& s : sessions_) s->send(text);
  });
}

void ConsoleBridge::on_ws_message(const std::string& text, const std::shared_ptr<WsSession>& from) {
  json msg;
  try {
    msg = json::parse(text);
    const std::string type = msg.at("type").get<std::string>();
    if (type == "hand") {
      HandSample s;
      s.frame = ++hand_frame_;
      s.position = {msg.at("x").get<double>(), msg.at("y").get<double>(), msg.at("z").get<double>()};
      s.t = std::chrono::duration<double>(std::chrono::steady_clock::now() - epoch_).count();
      if (!s.position.allFinite()) throw ParameterError("hand position must be finite");
      inbound_->push(s);
      return;
    }
    ControlCommand cmd;
    if (type == "teach_start") {
      cmd.kind = ControlCommand::Kind::TeachStart;
    } else if (type == "teach_stop") {
      cmd.kind = ControlCommand::Kind::TeachStop;
    } else if (type == "execute") {
      cmd.kind = ControlCommand::Kind::Execute;
    } else {
      throw ParameterError("unknown message type '" + type + "'");
    }
    if (msg.contains("object_id") && !msg.at("object_id").is_null()) {
      cmd.object_id = msg.at("object_id").get<std::string>();
    }
    inbound_->push(cmd);
  } catch (const std::exception& e) {
    from->send(json{{"type", "error"}, {"detail", e.what()}}.dump());
  }
}

}  // namespace teleop::gateway
