#pragma once

#include "teleop/calibration.hpp"
#include "teleop/dmp.hpp"
#include "teleop/kinematics.hpp"
#include "teleop/planner.hpp"
#include "teleop/wire.hpp"

#include <json.hpp>

#include <condition_variable>
#include <cstdint>
#include <deque>
#include <filesystem>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <variant>
#include <vector>

namespace teleop::gateway {

struct HandSample {
  std::uint64_t frame = 0;
  Eigen::Vector3d position = Eigen::Vector3d::Zero();  // tracker frame, m
  double t = 0.0;                                      // s
};

struct ControlCommand {
  enum class Kind { TeachStart, TeachStop, Execute };
  Kind kind = Kind::TeachStart;
  std::optional<std::string> object_id;
};

using SourceEvent = std::variant<HandSample, ControlCommand>;

/// Yields hand samples (ordered by frame) and operator commands until end of stream.
class PoseSource {
public:
  virtual ~PoseSource() = default;
  virtual std::optional<SourceEvent> next() = 0;
};

/// Replays a CSV with header `frame,t,x,y,z`.
class FileReplaySource : public PoseSource {
public:
  explicit FileReplaySource(const std::string& path);
  explicit FileReplaySource(std::vector<HandSample> samples);
  std::optional<SourceEvent> next() override;

private:
  std::vector<HandSample> samples_;
  std::size_t cursor_ = 0;
};

/// Deterministic built-in sessions.
///   "reach"       : straight 0.3 m hand reach, samples only
///   "teach_reach" : steer, teach a straight reach, stop, execute toward the object
///   "idle"        : constant hand position
class ScriptedSource : public PoseSource {
public:
  ScriptedSource(const std::string& name, double rate_hz = 50.0,
                 std::optional<std::string> object_id = std::nullopt);
  explicit ScriptedSource(std::vector<SourceEvent> events);
  std::optional<SourceEvent> next() override;

  static std::vector<std::string> names();

private:
  std::vector<SourceEvent> events_;
  std::size_t cursor_ = 0;
};

/// Thread-safe queue fed by the console bridge. next() blocks until an event arrives
/// or the source is closed. Consecutive hand samples coalesce to the latest one, so a
/// stalled consumer never accumulates a backlog of positions.
class ConsoleSource : public PoseSource {
public:
  void push(SourceEvent event);
  void close();
  std::optional<SourceEvent> next() override;

private:
  std::mutex mutex_;
  std::condition_variable cv_;
  std::deque<SourceEvent> queue_;
  bool closed_ = false;
};

/// Parses `replay:<csv>`, `script:<name>` or `console`.
std::unique_ptr<PoseSource> make_source(const std::string& spec, std::shared_ptr<ConsoleSource> console,
                                        std::optional<std::string> object_id = std::nullopt);

inline constexpr double kDefaultStepCap = 0.05;

struct DeltaResult {
  wire::HandDelta message;
  std::array<bool, 3> clamped{};
};

/// gain * (calibrated cur - calibrated prev), clamped per axis to +/- cap.
DeltaResult sample_to_delta(const HandSample& prev, const HandSample& cur, const CalibrationModel& cal,
                            double gain = 1.0, double cap = kDefaultStepCap);

/// Turns a sample stream into hand deltas at no more than the host cadence. Samples that
/// arrive faster are folded into the next emission (keep-latest), so emitted deltas
/// telescope to the calibrated displacement except for clamp losses.
class DeltaStream {
public:
  DeltaStream(CalibrationModel cal, double gain = 1.0, double min_interval = 0.02,
              double cap = kDefaultStepCap);

  std::optional<wire::HandDelta> offer(const HandSample& sample);
  std::optional<wire::HandDelta> flush();
  /// Forgets the anchor; the next sample starts a fresh displacement.
  void reset();

  std::size_t clamp_events() const { return clamp_events_; }
  const Eigen::Vector3d& clamp_loss() const { return clamp_loss_; }
  const Eigen::Vector3d& emitted_sum() const { return emitted_sum_; }

private:
  std::optional<wire::HandDelta> emit(const HandSample& sample);

  CalibrationModel cal_;
  double gain_;
  double min_interval_;
  double cap_;
  std::optional<HandSample> anchor_;
  std::optional<HandSample> pending_;
  std::size_t clamp_events_ = 0;
  Eigen::Vector3d clamp_loss_ = Eigen::Vector3d::Zero();
  Eigen::Vector3d emitted_sum_ = Eigen::Vector3d::Zero();
};

struct TwinState {
  JointVector q = JointVector::Zero();
  Scene scene;
  std::uint64_t last_ack_frame = 0;
  double link_latency_estimate = 0.0;  // s
};

inline constexpr double kLatencySmoothing = 0.2;

/// Pure fold of one host message into the twin. `rtt` is the measured round trip for an
/// Ack whose frame has a known send timestamp.
TwinState twin_update(TwinState state, const wire::Message& msg, std::optional<double> rtt = std::nullopt);

/// Twin as the console's outbound JSON message:
/// {type:"twin", q, scene, latency_ms, last_ack_frame}.
nlohmann::json twin_to_json(const TwinState& twin);

/// One `<object_id>.dmp.json` document per model.
class DmpStore {
public:
  explicit DmpStore(std::filesystem::path dir);
  std::filesystem::path path_for(const std::string& object_id) const;
  void save(const DmpModel& model) const;
  DmpModel load(const std::string& object_id) const;
  std::vector<std::string> list() const;

private:
  std::filesystem::path dir_;
};

struct TrainOptions {
  FitOptions fit;
  /// Needed for Cartesian fitting: tool positions come from forward kinematics.
  std::optional<DhTable> kinematics;
};

/// Reassembles the upload and fits one DMP per joint (or per tool axis when the fit
/// space is Cartesian), stamped with object_id.
DmpModel train_model(std::span<const wire::TrajectoryUpload> chunks, const std::string& object_id,
                     const TrainOptions& options = {});

}  // namespace teleop::gateway
