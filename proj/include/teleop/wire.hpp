#pragma once

#include "teleop/kinematics.hpp"
#include "teleop/planner.hpp"

#include <array>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <variant>
#include <vector>

namespace teleop::wire {

// Frame layout: u32 LE length (tag + payload) | u8 tag | payload.
// Integers little-endian, reals IEEE-754 binary64 little-endian,
// strings u16 byte count + UTF-8, arrays u16 element count + elements.

enum class Tag : std::uint8_t {
  Version = 0x00,  // reserved for negotiation
  HandDelta = 0x01,
  JointState = 0x02,
  SceneSnapshot = 0x03,
  TeachStart = 0x04,
  TeachStop = 0x05,
  TrajectoryUpload = 0x06,
  DmpModelUpload = 0x07,
  ExecuteToObject = 0x08,
  Ack = 0x09,
  NackError = 0x0A,
};

inline constexpr std::size_t kHeaderBytes = 5;
inline constexpr std::size_t kMaxFrameBytes = 4096;
inline constexpr std::size_t kMaxSceneObjects = 64;
inline constexpr std::size_t kMaxObjectIdBytes = 12;
inline constexpr std::size_t kMaxDetailBytes = 255;
inline constexpr std::size_t kRowBytes = kArmDof * sizeof(double);
// Upper bound accepted by the reader for chunked frames.
inline constexpr std::size_t kMaxChunkedFrameBytes = 1u << 20;

enum class NackCode : std::uint16_t {
  BadState = 1,
  Unreachable = 2,
  EmptyDemo = 3,
  NoObject = 4,
  NoModel = 5,
  Protocol = 6,
  BadModel = 7,
  PlanFailed = 8,
  Collision = 9,
};

const char* nack_code_name(NackCode code);

struct HandDelta {
  std::uint64_t frame = 0;
  std::array<double, 3> delta{};
  bool operator==(const HandDelta&) const = default;
};

struct JointState {
  std::uint64_t frame = 0;
  std::array<double, kArmDof> q{};
  bool operator==(const JointState&) const = default;
};

struct SceneSnapshot {
  Scene objects;
  bool operator==(const SceneSnapshot&) const = default;
};

struct TeachStart {
  bool operator==(const TeachStart&) const = default;
};

struct TeachStop {
  bool operator==(const TeachStop&) const = default;
};

struct TrajectoryUpload {
  double dt = 0.0;
  std::vector<std::array<double, kArmDof>> samples;
  std::uint32_t chunk_index = 0;
  std::uint32_t chunk_count = 1;
  bool operator==(const TrajectoryUpload&) const = default;
};

struct DmpModelUpload {
  std::vector<std::uint8_t> bytes;
  std::uint32_t chunk_index = 0;
  std::uint32_t chunk_count = 1;
  bool operator==(const DmpModelUpload&) const = default;
};

struct ExecuteToObject {
  std::string object_id;
  bool operator==(const ExecuteToObject&) const = default;
};

struct Ack {
  std::uint64_t ref_frame = 0;
  bool operator==(const Ack&) const = default;
};

struct NackError {
  std::uint16_t code = 0;
  std::string detail;
  bool operator==(const NackError&) const = default;
};

using Message = std::variant<HandDelta, JointState, SceneSnapshot, TeachStart, TeachStop,
                             TrajectoryUpload, DmpModelUpload, ExecuteToObject, Ack, NackError>;

Tag tag_of(const Message& msg);
const char* tag_name(Tag tag);
bool is_chunked(const Message& msg);

/// Throws SizeError for oversize frames or fields and ParameterError for invalid content.
std::vector<std::uint8_t> encode(const Message& msg);

struct NeedMoreBytes {
  std::size_t have = 0;
  std::size_t need = 0;
};

struct Decoded {
  Message message;
  std::size_t consumed = 0;
};

using DecodeResult = std::variant<Decoded, NeedMoreBytes>;

/// Decodes the first frame in `bytes`. Incomplete frames yield NeedMoreBytes;
/// unknown tags and malformed payloads throw ProtocolError.
DecodeResult decode(std::span<const std::uint8_t> bytes);

/// Stream reassembly for one connection.
class FrameReader {
public:
  void feed(std::span<const std::uint8_t> bytes);
  /// Next complete message, nullopt if more bytes are needed. Throws ProtocolError.
  std::optional<Message> next();
  /// Called at end of stream; throws ProtocolError if a partial frame is buffered.
  void close() const;
  std::size_t buffered() const { return buffer_.size() - offset_; }

private:
  std::vector<std::uint8_t> buffer_;
  std::size_t offset_ = 0;
};

/// Splits a log into TrajectoryUpload frames each no larger than max_chunk_bytes.
/// Throws ParameterError if the log is empty or a single row does not fit.
std::vector<TrajectoryUpload> chunk_trajectory(const TrajectoryLog& log, std::size_t max_chunk_bytes);

/// Throws IncompleteUploadError on missing, duplicate or inconsistent chunks.
TrajectoryLog reassemble_trajectory(std::span<const TrajectoryUpload> chunks);

std::vector<DmpModelUpload> chunk_model(const std::string& serialized, std::size_t max_chunk_bytes);
std::string reassemble_model(std::span<const DmpModelUpload> chunks);

/// Largest frame over the non-chunked message space: a full snapshot of maximal objects.
SceneSnapshot size_budget_witness();

}  // namespace teleop::wire
