#pragma once

#include "teleop/dmp.hpp"
#include "teleop/kinematics.hpp"
#include "teleop/planner.hpp"
#include "teleop/wire.hpp"

#include <cstdint>
#include <functional>
#include <map>
#include <optional>
#include <string>
#include <vector>

namespace teleop::host {

enum class Mode { Idle, Steering, Teaching, Executing };

const char* mode_name(Mode mode);

/// The only edges the host mode machine may take.
bool transition_allowed(Mode from, Mode to);

struct HostConfig {
  DhTable dh;
  Scene scene;
  double dt = 0.02;
  bool cartesian_dmp = false;
  double pregrasp_offset = 0.10;  // m above the object centroid
  double plan_step = 0.1;
  std::size_t max_chunk_bytes = wire::kMaxFrameBytes;
  double safety_margin = kDefaultSafetyMargin;
  std::uint64_t plan_seed = 1;
  IkOptions ik;
};

struct HostState {
  Mode mode = Mode::Idle;
  JointVector q_current = JointVector::Zero();
  Scene scene;
  std::optional<TrajectoryLog> active_log;
  std::map<std::string, DmpModel> dmp_store;
  std::uint64_t last_applied_frame = 0;
  bool any_frame_applied = false;
};

struct Transition {
  Mode from;
  Mode to;
  std::string cause;
};

/// A message leaving the host. Telemetry may be dropped under backpressure; replies never are.
struct Outgoing {
  wire::Message message;
  bool telemetry = false;
};

using Outbox = std::vector<Outgoing>;

/// The L2 control loop state machine. Single-threaded: the server owns one instance
/// and feeds it messages and ticks in order.
class HostCore {
public:
  explicit HostCore(HostConfig config);

  /// Snapshot plus current joint state, sent when a client connects. Resets stale-frame tracking.
  Outbox on_connect();

  /// Dispatches one inbound message.
  Outbox handle(const wire::Message& msg);

  Outbox on_hand_delta(const wire::HandDelta& msg);
  Outbox on_teach_start();
  Outbox on_teach_stop();
  Outbox on_execute_to_object(const std::string& object_id);
  Outbox on_model_upload(const wire::DmpModelUpload& chunk);

  /// Advances the control clock by one dt: streams execution samples, records hold
  /// samples while teaching.
  Outbox tick();

  wire::SceneSnapshot scene_snapshot() const;

  /// Admin operations. Both push a fresh snapshot; adding rejects ids already present
  /// and objects that would collide with the current configuration.
  Outbox add_object(const SceneObject& object);
  Outbox remove_object(const std::string& id);

  void install_model(const DmpModel& model);

  const HostState& state() const { return state_; }
  const HostConfig& config() const { return config_; }
  const std::vector<Transition>& transitions() const { return transitions_; }
  double sim_time() const { return sim_time_; }
  bool executing() const { return state_.mode == Mode::Executing; }

  /// Receives one structured line per state transition.
  void set_event_sink(std::function<void(const std::string&)> sink) { sink_ = std::move(sink); }

private:
  void transition(Mode to, const std::string& cause);
  Outgoing joint_state();
  Outgoing ack() const;
  static Outgoing nack(wire::NackCode code, std::string detail);
  void advance_motion(const TrajectoryLog& log);
  JointPath reach_path(const DmpModel& model, const Position& pregrasp);

  HostConfig config_;
  HostState state_;
  std::vector<Transition> transitions_;
  std::function<void(const std::string&)> sink_;
  std::uint64_t out_frame_ = 0;
  double sim_time_ = 0.0;
  bool moved_this_tick_ = false;
  std::vector<JointVector> pending_execution_;
  std::size_t execution_cursor_ = 0;
  std::vector<wire::DmpModelUpload> model_chunks_;
};

}  // namespace teleop::host
