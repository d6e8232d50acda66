#include "teleop/gateway.hpp"

#include "teleop/dmp_io.hpp"
#include "teleop/errors.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>

namespace teleop::gateway {

namespace {

std::vector<HandSample> read_replay_csv(std::istream& in, const std::string& origin) {
  std::string line;
  if (!std::getline(in, line)) throw DataError(origin + ": empty replay file");
  std::vector<HandSample> out;
  std::size_t lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty() || line == "\r") continue;
    std::replace(line.begin(), line.end(), ',', ' ');
    std::istringstream fields(line);
    HandSample s;
    double frame = 0.0;
    if (!(fields >> frame >> s.t >> s.position.x() >> s.position.y() >> s.position.z())) {
      throw DataError(origin + ":" + std::to_string(lineno) + ": expected frame,t,x,y,z");
    }
    if (frame < 0.0 || frame != std::floor(frame)) {
      throw DataError(origin + ":" + std::to_string(lineno) + ": frame must be a non-negative integer");
    }
    s.frame = static_cast<std::uint64_t>(frame);
    out.push_back(s);
  }
  return out;
}

void check_samples(const std::vector<HandSample>& samples) {
  for (std::size_t i = 0; i < samples.size(); ++i) {
    if (!samples[i].position.allFinite() || !std::isfinite(samples[i].t)) {
      throw DataError("hand sample " + std::to_string(i) + " is not finite");
    }
    if (i > 0 && samples[i].frame <= samples[i - 1].frame) {
      throw DataError("hand sample frames must be strictly increasing");
    }
  }
}

double min_jerk(double s) {
  s = std::clamp(s, 0.0, 1.0);
  return s * s * s * (10.0 - 15.0 * s + 6.0 * s * s);
}

// Appends a min-jerk hand motion from `from` to `to` lasting `duration` (a hold when equal).
void append_motion(std::vector<SourceEvent>& events, std::uint64_t& frame, double& t, double rate_hz,
                   const Eigen::Vector3d& from, const Eigen::Vector3d& to, double duration) {
  const int n = static_cast<int>(std::lround(duration * rate_hz));
  for (int k = 1; k <= n; ++k) {
    t += 1.0 / rate_hz;
    const double s = min_jerk(static_cast<double>(k) / n);
    events.emplace_back(HandSample{++frame, from + s * (to - from), t});
  }
}

std::vector<SourceEvent> build_script(const std::string& name, double rate_hz,
                                      const std::optional<std::string>& object_id) {
  if (!(rate_hz > 0.0)) throw ParameterError("script rate must be positive");
  std::vector<SourceEvent> ev;
  std::uint64_t frame = 0;
  double t = 0.0;
  const Eigen::Vector3d origin(0.0, 0.0, 0.0);
  ev.emplace_back(HandSample{++frame, origin, t});

  if (name == "idle") {
    append_motion(ev, frame, t, rate_hz, origin, origin, 2.0);
  } else if (name == "reach") {
    append_motion(ev, frame, t, rate_hz, origin, Eigen::Vector3d(0.3, 0.0, 0.0), 2.0);
  } else if (name == "teach_reach") {
    const Eigen::Vector3d steered(0.0, 0.0, -0.05);
    const Eigen::Vector3d reached = steered + Eigen::Vector3d(0.15, -0.1, -0.1);
    append_motion(ev, frame, t, rate_hz, origin, steered, 1.0);
    ev.emplace_back(ControlCommand{ControlCommand::Kind::TeachStart, std::nullopt});
    append_motion(ev, frame, t, rate_hz, steered, steered, 0.2);
    append_motion(ev, frame, t, rate_hz, steered, reached, 2.0);
    append_motion(ev, frame, t, rate_hz, reached, reached, 0.2);
    ev.emplace_back(ControlCommand{ControlCommand::Kind::TeachStop, object_id});
    ev.emplace_back(ControlCommand{ControlCommand::Kind::Execute, object_id});
  } else {
    throw ParameterError("unknown script '" + name + "'");
  }
  return ev;
}

}  // namespace

FileReplaySource::FileReplaySource(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open replay file " + path);
  samples_ = read_replay_csv(in, path);
  check_samples(samples_);
}

FileReplaySource::FileReplaySource(std::vector<HandSample> samples) : samples_(std::move(samples)) {
  check_samples(samples_);
}

std::optional<SourceEvent> FileReplaySource::next() {
  if (cursor_ >= samples_.size()) return std::nullopt;
  return samples_[cursor_++];
}

ScriptedSource::ScriptedSource(const std::string& name, double rate_hz, std::optional<std::string> object_id)
    : events_(build_script(name, rate_hz, object_id)) {}

ScriptedSource::ScriptedSource(std::vector<SourceEvent> events) : events_(std::move(events)) {}

std::optional<SourceEvent> ScriptedSource::next() {
  if (cursor_ >= events_.size()) return std::nullopt;
  return events_[cursor_++];
}

std::vector<std::string> ScriptedSource::names() { return {"idle", "reach", "teach_reach"}; }

void ConsoleSource::push(SourceEvent event) {
  {
    std::lock_guard lock(mutex_);
    if (closed_) return;
    // Keep-latest: a newer hand sample replaces one still waiting at the back.
    if (!queue_.empty() && std::holds_alternative<HandSample>(queue_.back()) &&
        std::holds_alternative<HandSample>(event)) {
      queue_.back() = std::move(event);
    } else {
      queue_.push_back(std::move(event));
    }
  }
  cv_.notify_one();
}

void ConsoleSource::close() {
  {
    std::lock_guard lock(mutex_);
    closed_ = true;
  }
  cv_.notify_all();
}

std::optional<SourceEvent> ConsoleSource::next() {
  std::unique_lock lock(mutex_);
  cv_.wait(lock, [this] { return closed_ || !queue_.empty(); });
  if (queue_.empty()) return std::nullopt;
  SourceEvent ev = std::move(queue_.front());
  queue_.pop_front();
  return ev;
}

std::unique_ptr<PoseSource> make_source(const std::string& spec, std::shared_ptr<ConsoleSource> console,
                                        std::optional<std::string> object_id) {
  if (spec.rfind("replay:", 0) == 0) return std::make_unique<FileReplaySource>(spec.substr(7));
  if (spec.rfind("script:", 0) == 0) {
    return std::make_unique<ScriptedSource>(spec.substr(7), 50.0, std::move(object_id));
  }
  if (spec == "console") {
    if (!console) throw ConfigError("console source needs a console listener");
    // Non-owning view; the bridge keeps the queue alive.
    struct View : PoseSource {
      std::shared_ptr<ConsoleSource> inner;
      std::optional<SourceEvent> next() override { return inner->next(); }
    };
    auto view = std::make_unique<View>();
    view->inner = std::move(console);
    return view;
  }
  throw ConfigError("unknown pose source '" + spec + "' (replay:<csv>, script:<name>, console)");
}

DeltaResult sample_to_delta(const HandSample& prev, const HandSample& cur, const CalibrationModel& cal,
                            double gain, double cap) {
  const Eigen::Vector3d raw = gain * (apply(cal, cur.position) - apply(cal, prev.position));
  DeltaResult r;
  r.message.frame = cur.frame;
  for (int i = 0; i < 3; ++i) {
    r.message.delta[i] = std::clamp(raw[i], -cap, cap);
    r.clamped[i] = r.message.delta[i] != raw[i];
  }
  return r;
}

DeltaStream::DeltaStream(CalibrationModel cal, double gain, double min_interval, double cap)
    : cal_(cal), gain_(gain), min_interval_(min_interval), cap_(cap) {
  if (!std::isfinite(gain)) throw ParameterError("steering gain must be finite");
  if (!(cap > 0.0)) throw ParameterError("step cap must be positive");
  if (min_interval < 0.0) throw ParameterError("min_interval must be non-negative");
}

std::optional<wire::HandDelta> DeltaStream::emit(const HandSample& sample) {
  const DeltaResult r = sample_to_delta(*anchor_, sample, cal_, gain_, cap_);
  const Eigen::Vector3d raw = gain_ * (apply(cal_, sample.position) - apply(cal_, anchor_->position));
  for (int i = 0; i < 3; ++i) {
    emitted_sum_[i] += r.message.delta[i];
    if (r.clamped[i]) {
      ++clamp_events_;
      clamp_loss_[i] += raw[i] - r.message.delta[i];
    }
  }
  anchor_ = sample;
  pending_.reset();
  return r.message;
}

std::optional<wire::HandDelta> DeltaStream::offer(const HandSample& sample) {
  if (!anchor_) {
    anchor_ = sample;
    return std::nullopt;
  }
  const HandSample& last = pending_ ? *pending_ : *anchor_;
  if (sample.frame <= last.frame) throw DataError("hand sample frames must be strictly increasing");
  if (sample.t - anchor_->t + 1e-9 >= min_interval_) return emit(sample);
  pending_ = sample;
  return std::nullopt;
}

std::optional<wire::HandDelta> DeltaStream::flush() {
  if (!pending_) return std::nullopt;
  return emit(*pending_);
}

void DeltaStream::reset() {
  anchor_.reset();
  pending_.reset();
}

TwinState twin_update(TwinState state, const wire::Message& msg, std::optional<double> rtt) {
  if (const auto* js = std::get_if<wire::JointState>(&msg)) {
    for (int i = 0; i < kArmDof; ++i) state.q[i] = js->q[i];
  } else if (const auto* snap = std::get_if<wire::SceneSnapshot>(&msg)) {
    state.scene = snap->objects;
  } else if (const auto* ack = std::get_if<wire::Ack>(&msg)) {
    state.last_ack_frame = std::max(state.last_ack_frame, ack->ref_frame);
    if (rtt && std::isfinite(*rtt) && *rtt >= 0.0) {
      state.link_latency_estimate += kLatencySmoothing * (*rtt - state.link_latency_estimate);
    }
  }
  return state;
}

DmpStore::DmpStore(std::filesystem::path dir) : dir_(std::move(dir)) {
  std::filesystem::create_directories(dir_);
}

std::filesystem::path DmpStore::path_for(const std::string& object_id) const {
  if (object_id.empty() || object_id.find_first_of("/\\") != std::string::npos || object_id == "." ||
      object_id == "..") {
    throw ParameterError("object id '" + object_id + "' cannot name a store file");
  }
  return dir_ / (object_id + ".dmp.json");
}

void DmpStore::save(const DmpModel& model) const {
  if (!model.object_id) throw ParameterError("cannot store a model without an object id");
  const auto target = path_for(*model.object_id);
  auto tmp = target;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::trunc);
    if (!out) throw ConfigError("cannot write " + tmp.string());
    out << model_to_json(model) << '\n';
    if (!out) throw ConfigError("write failed for " + tmp.string());
  }
  std::filesystem::rename(tmp, target);
}

DmpModel DmpStore::load(const std::string& object_id) const {
  const auto path = path_for(object_id);
  std::ifstream in(path);
  if (!in) throw ConfigError("no stored model at " + path.string());
  std::stringstream buf;
  buf << in.rdbuf();
  return model_from_json(buf.str());
}

std::vector<std::string> DmpStore::list() const {
  static const std::string suffix = ".dmp.json";
  std::vector<std::string> ids;
  for (const auto& entry : std::filesystem::directory_iterator(dir_)) {
    const std::string name = entry.path().filename().string();
    if (entry.is_regular_file() && name.size() > suffix.size() &&
        name.compare(name.size() - suffix.size(), suffix.size(), suffix) == 0) {
      ids.push_back(name.substr(0, name.size() - suffix.size()));
    }
  }
  std::sort(ids.begin(), ids.end());
  return ids;
}

DmpModel train_model(std::span<const wire::TrajectoryUpload> chunks, const std::string& object_id,
                     const TrainOptions& options) {
  if (object_id.empty()) throw ParameterError("train_model: empty object id");
  const TrajectoryLog log = wire::reassemble_trajectory(chunks);

  Demonstration demo;
  demo.dt = log.dt;
  if (options.fit.space == DmpSpace::CartesianSpace) {
    if (!options.kinematics) throw ParameterError("cartesian training needs the arm kinematics");
    const auto tool = tool_positions(log, *options.kinematics);
    demo.positions.resize(static_cast<Eigen::Index>(tool.size()), 3);
    for (std::size_t k = 0; k < tool.size(); ++k) demo.positions.row(static_cast<Eigen::Index>(k)) = tool[k];
  } else {
    demo.positions.resize(static_cast<Eigen::Index>(log.samples.size()), kArmDof);
    for (std::size_t k = 0; k < log.samples.size(); ++k) {
      demo.positions.row(static_cast<Eigen::Index>(k)) = log.samples[k].q.transpose();
    }
  }
  DmpModel model = fit(demo, options.fit);
  model.object_id = object_id;
  return model;
}

nlohmann::json twin_to_json(const TwinState& twin) {
  nlohmann::json q = nlohmann::json::array();
  for (int i = 0; i < kArmDof; ++i) q.push_back(twin.q[i]);
  return {{"type", "twin"},
          {"q", q},
          {"scene", nlohmann::json::parse(scene_to_json(twin.scene)).at("objects")},
          {"latency_ms", twin.link_latency_estimate * 1000.0},
          {"last_ack_frame", twin.last_ack_frame}};
}

}  // namespace teleop::gateway
