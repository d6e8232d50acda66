#include "teleop/robot_host.hpp"

#include "teleop/dmp_io.hpp"
#include "teleop/errors.hpp"

#include <json.hpp>

#include <algorithm>
#include <cmath>

namespace teleop::host {

using wire::NackCode;

const char* mode_name(Mode mode) {
  switch (mode) {
    case Mode::Idle: return "Idle";
    case Mode::Steering: return "Steering";
    case Mode::Teaching: return "Teaching";
    case Mode::Executing: return "Executing";
  }
  return "?";
}

bool transition_allowed(Mode from, Mode to) {
  switch (from) {
    case Mode::Idle: return to == Mode::Steering || to == Mode::Executing;
    case Mode::Steering: return to == Mode::Idle || to == Mode::Teaching;
    case Mode::Teaching: return to == Mode::Idle;
    case Mode::Executing: return to == Mode::Idle;
  }
  return false;
}

namespace {

class CollisionError : public Error {
public:
  using Error::Error;
};

wire::JointState make_joint_state(std::uint64_t frame, const JointVector& q) {
  wire::JointState js;
  js.frame = frame;
  for (int i = 0; i < kArmDof; ++i) js.q[i] = q[i];
  return js;
}

std::string truncate_detail(std::string detail) {
  if (detail.size() > wire::kMaxDetailBytes) detail.resize(wire::kMaxDetailBytes);
  return detail;
}

}  // namespace

HostCore::HostCore(HostConfig config) : config_(std::move(config)) {
  config_.dh.validate();
  validate_scene(config_.scene);
  if (!(config_.dt > 0.0)) throw ConfigError("host: dt must be positive");
  state_.q_current = config_.dh.home;
  state_.scene = config_.scene;
  if (!collision_free(state_.q_current, state_.scene, config_.dh, config_.safety_margin)) {
    throw ConfigError("host: home configuration collides with the scene");
  }
}

void HostCore::transition(Mode to, const std::string& cause) {
  const Mode from = state_.mode;
  if (!transition_allowed(from, to)) {
    throw std::logic_error(std::string("illegal host transition ") + mode_name(from) + " -> " + mode_name(to));
  }
  state_.mode = to;
  transitions_.push_back({from, to, cause});
  if (sink_) {
    nlohmann::json line = {{"t", sim_time_}, {"event", "transition"}, {"from", mode_name(from)},
                           {"to", mode_name(to)}, {"cause", cause}};
    sink_(line.dump());
  }
}

Outgoing HostCore::joint_state() {
  return {make_joint_state(++out_frame_, state_.q_current), true};
}

Outgoing HostCore::ack() const {
  return {wire::Ack{state_.last_applied_frame}, false};
}

Outgoing HostCore::nack(NackCode code, std::string detail) {
  return {wire::NackError{static_cast<std::uint16_t>(code), truncate_detail(std::move(detail))}, false};
}

Outbox HostCore::on_connect() {
  // Frame numbers restart with every client.
  state_.any_frame_applied = false;
  state_.last_applied_frame = 0;
  return {{scene_snapshot(), false}, joint_state()};
}

wire::SceneSnapshot HostCore::scene_snapshot() const {
  return wire::SceneSnapshot{state_.scene};
}

Outbox HostCore::handle(const wire::Message& msg) {
  return std::visit(
      [this](const auto& m) -> Outbox {
        using T = std::decay_t<decltype(m)>;
        if constexpr (std::is_same_v<T, wire::HandDelta>) {
          return on_hand_delta(m);
        } else if constexpr (std::is_same_v<T, wire::TeachStart>) {
          return on_teach_start();
        } else if constexpr (std::is_same_v<T, wire::TeachStop>) {
          return on_teach_stop();
        } else if constexpr (std::is_same_v<T, wire::ExecuteToObject>) {
          return on_execute_to_object(m.object_id);
        } else if constexpr (std::is_same_v<T, wire::DmpModelUpload>) {
          return on_model_upload(m);
        } else {
          return {nack(NackCode::Protocol,
                       std::string("host does not accept ") + wire::tag_name(wire::tag_of(m)))};
        }
      },
      msg);
}

void HostCore::advance_motion(const TrajectoryLog& log) {
  if (log.samples.size() <= 1) return;
  for (std::size_t k = 1; k < log.samples.size(); ++k) {
    if (state_.mode == Mode::Teaching) {
      auto& active = *state_.active_log;
      active.samples.push_back({static_cast<double>(active.samples.size()) * active.dt, log.samples[k].q});
    }
  }
  sim_time_ += static_cast<double>(log.samples.size() - 1) * config_.dt;
  state_.q_current = log.samples.back().q;
  moved_this_tick_ = true;
}

Outbox HostCore::on_hand_delta(const wire::HandDelta& msg) {
  if (state_.mode == Mode::Executing) {
    return {nack(NackCode::BadState, "hand input rejected while executing")};
  }
  if (state_.any_frame_applied && msg.frame <= state_.last_applied_frame) {
    return {};  // stale
  }
  const Position delta(msg.delta[0], msg.delta[1], msg.delta[2]);
  if (!delta.allFinite()) return {nack(NackCode::Protocol, "non-finite hand delta")};

  JointVector q_target = state_.q_current;
  try {
    const double cap = config_.ik.max_step;
    const int segments = std::max(1, static_cast<int>(std::ceil(delta.norm() / cap - 1e-12)));
    for (int s = 0; s < segments; ++s) {
      q_target = ik_step(q_target, delta / segments, config_.dh, config_.ik);
    }
  } catch (const UnreachableError& e) {
    return {nack(NackCode::Unreachable, e.what())};
  }
  if (!collision_free(q_target, state_.scene, config_.dh, config_.safety_margin)) {
    return {nack(NackCode::Collision, "commanded pose collides with the scene")};
  }

  std::optional<JointPath> path = straight_line_plan(state_.q_current, q_target, state_.scene,
                                                     config_.dh, config_.plan_step, config_.safety_margin);
  if (!path) {
    PlanRequest req;
    req.q_start = state_.q_current;
    req.q_goal = q_target;
    req.scene = state_.scene;
    req.step_size = config_.plan_step;
    req.rng_seed = config_.plan_seed ^ msg.frame;
    req.safety_margin = config_.safety_margin;
    try {
      path = plan(req, config_.dh);
    } catch (const NoPathError& e) {
      return {nack(NackCode::PlanFailed, e.what())};
    }
  }

  if (state_.mode == Mode::Idle) transition(Mode::Steering, "HandDelta");
  advance_motion(execute(*path, config_.dh, config_.dt));
  state_.last_applied_frame = msg.frame;
  state_.any_frame_applied = true;
  return {joint_state(), ack()};
}

Outbox HostCore::on_teach_start() {
  if (state_.mode == Mode::Idle) {
    transition(Mode::Steering, "TeachStart");
  } else if (state_.mode != Mode::Steering) {
    return {nack(NackCode::BadState, std::string("cannot start teaching while ") + mode_name(state_.mode))};
  }
  transition(Mode::Teaching, "TeachStart");
  TrajectoryLog log;
  log.dt = config_.dt;
  log.samples.push_back({0.0, state_.q_current});
  state_.active_log = std::move(log);
  moved_this_tick_ = true;
  return {ack()};
}

Outbox HostCore::on_teach_stop() {
  if (state_.mode != Mode::Teaching) {
    return {nack(NackCode::BadState, std::string("cannot stop teaching while ") + mode_name(state_.mode))};
  }
  if (state_.active_log->samples.size() < 3) {
    return {nack(NackCode::EmptyDemo, "teaching session holds fewer than 3 samples")};
  }
  Outbox out;
  for (auto& chunk : wire::chunk_trajectory(*state_.active_log, config_.max_chunk_bytes)) {
    out.push_back({std::move(chunk), false});
  }
  state_.active_log.reset();
  transition(Mode::Idle, "TeachStop");
  out.push_back(ack());
  return out;
}

JointPath HostCore::reach_path(const DmpModel& model, const Position& pregrasp) {
  const auto& dh = config_.dh;
  JointPath path;
  if (model.space == DmpSpace::JointSpace) {
    if (model.dof_count() != kArmDof) throw DataError("joint-space model must have 6 dofs");
    const JointVector q_goal = solve_ik_to(state_.q_current, pregrasp, dh, config_.ik);
    if (!collision_free(q_goal, state_.scene, dh, config_.safety_margin)) {
      throw CollisionError("pre-grasp configuration collides with the scene");
    }
    std::vector<double> y0(state_.q_current.data(), state_.q_current.data() + kArmDof);
    std::vector<double> g(q_goal.data(), q_goal.data() + kArmDof);
    const Eigen::MatrixXd rows = rollout(model, y0, g, model.tau, config_.dt);
    for (Eigen::Index r = 0; r < rows.rows(); ++r) path.push_back(rows.row(r).transpose());
  } else {
    if (model.dof_count() != 3) throw DataError("cartesian model must have 3 dofs");
    const Position start = forward_kinematics(state_.q_current, dh).position;
    std::vector<double> y0(start.data(), start.data() + 3);
    std::vector<double> g(pregrasp.data(), pregrasp.data() + 3);
    const Eigen::MatrixXd rows = rollout(model, y0, g, model.tau, config_.dt);
    JointVector q = state_.q_current;
    path.push_back(q);
    for (Eigen::Index r = 1; r < rows.rows(); ++r) {
      const Position target = rows.row(r).transpose();
      const Position delta = target - forward_kinematics(q, dh).position;
      const int segments = std::max(1, static_cast<int>(std::ceil(delta.norm() / config_.ik.max_step)));
      for (int s = 0; s < segments; ++s) q = ik_step(q, delta / segments, dh, config_.ik);
      path.push_back(q);
    }
  }
  for (std::size_t i = 0; i < path.size(); ++i) {
    if (!dh.within_limits(path[i])) throw LimitError("reach trajectory leaves the joint limits");
    if (i > 0 && !edge_collision_free(path[i - 1], path[i], state_.scene, dh, config_.plan_step / 4.0,
                                      config_.safety_margin)) {
      throw CollisionError("reach trajectory collides with the scene");
    }
  }
  return path;
}

Outbox HostCore::on_execute_to_object(const std::string& object_id) {
  if (state_.mode == Mode::Teaching || state_.mode == Mode::Executing) {
    return {nack(NackCode::BadState, std::string("cannot execute while ") + mode_name(state_.mode))};
  }
  const SceneObject* object = find_object(state_.scene, object_id);
  if (object == nullptr) return {nack(NackCode::NoObject, "no object " + object_id)};
  const auto model_it = state_.dmp_store.find(object_id);
  if (model_it == state_.dmp_store.end()) return {nack(NackCode::NoModel, "no model for " + object_id)};
  const DmpModel& model = model_it->second;
  const bool model_space_ok = (model.space == DmpSpace::CartesianSpace) == config_.cartesian_dmp;
  if (!model_space_ok) return {nack(NackCode::BadModel, "model space does not match the host DMP mode")};

  const Position pregrasp = object->centroid + Position(0.0, 0.0, config_.pregrasp_offset);
  TrajectoryLog log;
  try {
    log = execute(reach_path(model, pregrasp), config_.dh, config_.dt, config_.dt);
  } catch (const UnreachableError& e) {
    return {nack(NackCode::Unreachable, e.what())};
  } catch (const CollisionError& e) {
    return {nack(NackCode::Collision, e.what())};
  } catch (const LimitError& e) {
    return {nack(NackCode::PlanFailed, e.what())};
  } catch (const DataError& e) {
    return {nack(NackCode::BadModel, e.what())};
  }

  if (state_.mode == Mode::Steering) transition(Mode::Idle, "ExecuteToObject");
  transition(Mode::Executing, "ExecuteToObject");
  pending_execution_.clear();
  for (std::size_t k = 1; k < log.samples.size(); ++k) pending_execution_.push_back(log.samples[k].q);
  execution_cursor_ = 0;
  if (pending_execution_.empty()) {
    transition(Mode::Idle, "ExecutionComplete");
    return {joint_state(), ack()};
  }
  return {};
}

Outbox HostCore::on_model_upload(const wire::DmpModelUpload& chunk) {
  if (!model_chunks_.empty() && model_chunks_.front().chunk_count != chunk.chunk_count) {
    model_chunks_.clear();
  }
  model_chunks_.push_back(chunk);
  if (model_chunks_.size() < chunk.chunk_count) return {};

  std::vector<wire::DmpModelUpload> chunks;
  chunks.swap(model_chunks_);
  DmpModel model;
  try {
    model = model_from_json(wire::reassemble_model(chunks));
  } catch (const Error& e) {
    return {nack(NackCode::BadModel, e.what())};
  }
  if (!model.object_id) return {nack(NackCode::BadModel, "model carries no object id")};
  const std::size_t expected = model.space == DmpSpace::JointSpace ? kArmDof : 3;
  if (model.dof_count() != expected) return {nack(NackCode::BadModel, "model dof count does not match its space")};
  install_model(model);
  return {ack()};
}

void HostCore::install_model(const DmpModel& model) {
  if (!model.object_id) throw ParameterError("install_model: model without object id");
  state_.dmp_store[*model.object_id] = model;
}

Outbox HostCore::tick() {
  Outbox out;
  if (state_.mode == Mode::Executing) {
    state_.q_current = pending_execution_[execution_cursor_++];
    sim_time_ += config_.dt;
    out.push_back(joint_state());
    if (execution_cursor_ == pending_execution_.size()) {
      pending_execution_.clear();
      execution_cursor_ = 0;
      transition(Mode::Idle, "ExecutionComplete");
      out.push_back(ack());
    }
    return out;
  }
  if (!moved_this_tick_) {
    sim_time_ += config_.dt;
    if (state_.mode == Mode::Teaching) {
      auto& active = *state_.active_log;
      active.samples.push_back({static_cast<double>(active.samples.size()) * active.dt, state_.q_current});
    }
  }
  moved_this_tick_ = false;
  return out;
}

Outbox HostCore::add_object(const SceneObject& object) {
  Scene next = state_.scene;
  next.push_back(object);
  validate_scene(next);
  if (!collision_free(state_.q_current, next, config_.dh, config_.safety_margin)) {
    throw ParameterError("object " + object.id + " collides with the arm");
  }
  state_.scene = std::move(next);
  return {{scene_snapshot(), false}};
}

Outbox HostCore::remove_object(const std::string& id) {
  const auto it = std::find_if(state_.scene.begin(), state_.scene.end(),
                               [&](const SceneObject& o) { return o.id == id; });
  if (it == state_.scene.end()) throw ParameterError("no object " + id);
  state_.scene.erase(it);
  return {{scene_snapshot(), false}};
}

}  // namespace teleop::host
