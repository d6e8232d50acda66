#include "teleop/wire.hpp"

#include "teleop/errors.hpp"

#include <algorithm>
#include <bit>
#include <cstring>
#include <limits>

namespace teleop::wire {

const char* nack_code_name(NackCode code) {
  switch (code) {
    case NackCode::BadState: return "BAD_STATE";
    case NackCode::Unreachable: return "UNREACHABLE";
    case NackCode::EmptyDemo: return "EMPTY_DEMO";
    case NackCode::NoObject: return "NO_OBJECT";
    case NackCode::NoModel: return "NO_MODEL";
    case NackCode::Protocol: return "PROTOCOL";
    case NackCode::BadModel: return "BAD_MODEL";
    case NackCode::PlanFailed: return "PLAN_FAILED";
    case NackCode::Collision: return "COLLISION";
  }
  return "UNKNOWN";
}

Tag tag_of(const Message& msg) {
  return static_cast<Tag>(msg.index() + 1);
}

const char* tag_name(Tag tag) {
  switch (tag) {
    case Tag::Version: return "Version";
    case Tag::HandDelta: return "HandDelta";
    case Tag::JointState: return "JointState";
    case Tag::SceneSnapshot: return "SceneSnapshot";
    case Tag::TeachStart: return "TeachStart";
    case Tag::TeachStop: return "TeachStop";
    case Tag::TrajectoryUpload: return "TrajectoryUpload";
    case Tag::DmpModelUpload: return "DmpModelUpload";
    case Tag::ExecuteToObject: return "ExecuteToObject";
    case Tag::Ack: return "Ack";
    case Tag::NackError: return "NackError";
  }
  return "Unknown";
}

bool is_chunked(const Message& msg) {
  return std::holds_alternative<TrajectoryUpload>(msg) || std::holds_alternative<DmpModelUpload>(msg);
}

namespace {

bool is_chunked_tag(std::uint8_t tag) {
  return tag == static_cast<std::uint8_t>(Tag::TrajectoryUpload) ||
         tag == static_cast<std::uint8_t>(Tag::DmpModelUpload);
}

bool is_known_tag(std::uint8_t tag) {
  return tag >= static_cast<std::uint8_t>(Tag::HandDelta) &&
         tag <= static_cast<std::uint8_t>(Tag::NackError);
}

class Writer {
public:
  void u8(std::uint8_t v) { out_.push_back(v); }
  void u16(std::uint16_t v) { uint_le(v, 2); }
  void u32(std::uint32_t v) { uint_le(v, 4); }
  void u64(std::uint64_t v) { uint_le(v, 8); }
  void f64(double v) { u64(std::bit_cast<std::uint64_t>(v)); }

  void count(std::size_t n) {
    if (n > std::numeric_limits<std::uint16_t>::max()) throw SizeError("array exceeds u16 count");
    u16(static_cast<std::uint16_t>(n));
  }

  void str(const std::string& s, std::size_t max_bytes) {
    if (s.size() > max_bytes) throw SizeError("string field exceeds " + std::to_string(max_bytes) + " bytes");
    count(s.size());
    out_.insert(out_.end(), s.begin(), s.end());
  }

  std::vector<std::uint8_t> take() { return std::move(out_); }

private:
  void uint_le(std::uint64_t v, int bytes) {
    for (int i = 0; i < bytes; ++i) out_.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
  }
  std::vector<std::uint8_t> out_;
};

class Reader {
public:
  explicit Reader(std::span<const std::uint8_t> payload) : data_(payload) {}

  std::uint8_t u8() { return static_cast<std::uint8_t>(uint_le(1)); }
  std::uint16_t u16() { return static_cast<std::uint16_t>(uint_le(2)); }
  std::uint32_t u32() { return static_cast<std::uint32_t>(uint_le(4)); }
  std::uint64_t u64() { return uint_le(8); }
  double f64() { return std::bit_cast<double>(u64()); }

  std::string str(std::size_t max_bytes) {
    const std::size_t n = u16();
    if (n > max_bytes) throw ProtocolError("string field longer than allowed");
    require(n);
    std::string s(reinterpret_cast<const char*>(data_.data() + pos_), n);
    pos_ += n;
    return s;
  }

  std::vector<std::uint8_t> bytes() {
    const std::size_t n = u16();
    require(n);
    std::vector<std::uint8_t> v(data_.begin() + static_cast<std::ptrdiff_t>(pos_),
                                data_.begin() + static_cast<std::ptrdiff_t>(pos_ + n));
    pos_ += n;
    return v;
  }

  void require(std::size_t n) const {
    if (data_.size() - pos_ < n) throw ProtocolError("payload shorter than its declared fields");
  }

  void finish() const {
    if (pos_ != data_.size()) throw ProtocolError("payload longer than its declared fields");
  }

private:
  std::uint64_t uint_le(int bytes) {
    require(static_cast<std::size_t>(bytes));
    std::uint64_t v = 0;
    for (int i = 0; i < bytes; ++i) v |= static_cast<std::uint64_t>(data_[pos_ + i]) << (8 * i);
    pos_ += static_cast<std::size_t>(bytes);
    return v;
  }

  std::span<const std::uint8_t> data_;
  std::size_t pos_ = 0;
};

enum class ShapeKind : std::uint8_t { Sphere = 0, Box = 1 };

void write_object(Writer& w, const SceneObject& obj) {
  w.str(obj.id, kMaxObjectIdBytes);
  for (int i = 0; i < 3; ++i) w.f64(obj.centroid[i]);
  if (const auto* s = std::get_if<Sphere>(&obj.shape)) {
    w.u8(static_cast<std::uint8_t>(ShapeKind::Sphere));
    w.f64(s->radius);
  } else {
    w.u8(static_cast<std::uint8_t>(ShapeKind::Box));
    const auto& h = std::get<Box>(obj.shape).half_extents;
    for (int i = 0; i < 3; ++i) w.f64(h[i]);
  }
}

SceneObject read_object(Reader& r) {
  SceneObject obj;
  obj.id = r.str(kMaxObjectIdBytes);
  for (int i = 0; i < 3; ++i) obj.centroid[i] = r.f64();
  const std::uint8_t kind = r.u8();
  if (kind == static_cast<std::uint8_t>(ShapeKind::Sphere)) {
    obj.shape = Sphere{r.f64()};
  } else if (kind == static_cast<std::uint8_t>(ShapeKind::Box)) {
    Box b;
    for (int i = 0; i < 3; ++i) b.half_extents[i] = r.f64();
    obj.shape = b;
  } else {
    throw ProtocolError("unknown shape kind");
  }
  return obj;
}

void check_chunk_fields(std::uint32_t index, std::uint32_t count) {
  if (count == 0 || index >= count) throw ProtocolError("chunk index outside chunk count");
}

struct PayloadWriter {
  Writer& w;

  void operator()(const HandDelta& m) const {
    w.u64(m.frame);
    for (double v : m.delta) w.f64(v);
  }
  void operator()(const JointState& m) const {
    w.u64(m.frame);
    for (double v : m.q) w.f64(v);
  }
  void operator()(const SceneSnapshot& m) const {
    if (m.objects.size() > kMaxSceneObjects) throw SizeError("scene snapshot holds more than 64 objects");
    w.count(m.objects.size());
    for (const auto& obj : m.objects) write_object(w, obj);
  }
  void operator()(const TeachStart&) const {}
  void operator()(const TeachStop&) const {}
  void operator()(const TrajectoryUpload& m) const {
    if (m.chunk_count == 0 || m.chunk_index >= m.chunk_count) {
      throw ParameterError("trajectory chunk index outside chunk count");
    }
    w.f64(m.dt);
    w.count(m.samples.size());
    for (const auto& row : m.samples) {
      for (double v : row) w.f64(v);
    }
    w.u32(m.chunk_index);
    w.u32(m.chunk_count);
  }
  void operator()(const DmpModelUpload& m) const {
    if (m.chunk_count == 0 || m.chunk_index >= m.chunk_count) {
      throw ParameterError("model chunk index outside chunk count");
    }
    w.count(m.bytes.size());
    for (auto b : m.bytes) w.u8(b);
    w.u32(m.chunk_index);
    w.u32(m.chunk_count);
  }
  void operator()(const ExecuteToObject& m) const { w.str(m.object_id, kMaxObjectIdBytes); }
  void operator()(const Ack& m) const { w.u64(m.ref_frame); }
  void operator()(const NackError& m) const {
    w.u16(m.code);
    w.str(m.detail, kMaxDetailBytes);
  }
};

Message read_payload(std::uint8_t tag, Reader& r) {
  switch (static_cast<Tag>(tag)) {
    case Tag::HandDelta: {
      HandDelta m;
      m.frame = r.u64();
      for (auto& v : m.delta) v = r.f64();
      return m;
    }
    case Tag::JointState: {
      JointState m;
      m.frame = r.u64();
      for (auto& v : m.q) v = r.f64();
      return m;
    }
    case Tag::SceneSnapshot: {
      SceneSnapshot m;
      const std::size_t n = r.u16();
      if (n > kMaxSceneObjects) throw ProtocolError("scene snapshot holds more than 64 objects");
      for (std::size_t i = 0; i < n; ++i) m.objects.push_back(read_object(r));
      return m;
    }
    case Tag::TeachStart: return TeachStart{};
    case Tag::TeachStop: return TeachStop{};
    case Tag::TrajectoryUpload: {
      TrajectoryUpload m;
      m.dt = r.f64();
      const std::size_t n = r.u16();
      r.require(n * kRowBytes);
      m.samples.resize(n);
      for (auto& row : m.samples) {
        for (auto& v : row) v = r.f64();
      }
      m.chunk_index = r.u32();
      m.chunk_count = r.u32();
      check_chunk_fields(m.chunk_index, m.chunk_count);
      return m;
    }
    case Tag::DmpModelUpload: {
      DmpModelUpload m;
      m.bytes = r.bytes();
      m.chunk_index = r.u32();
      m.chunk_count = r.u32();
      check_chunk_fields(m.chunk_index, m.chunk_count);
      return m;
    }
    case Tag::ExecuteToObject: return ExecuteToObject{r.str(kMaxObjectIdBytes)};
    case Tag::Ack: return Ack{r.u64()};
    case Tag::NackError: {
      NackError m;
      m.code = r.u16();
      m.detail = r.str(kMaxDetailBytes);
      return m;
    }
    case Tag::Version: break;
  }
  throw ProtocolError("unknown message tag");
}

}  // namespace

std::vector<std::uint8_t> encode(const Message& msg) {
  Writer body;
  std::visit(PayloadWriter{body}, msg);
  std::vector<std::uint8_t> payload = body.take();

  const std::size_t length = 1 + payload.size();
  const std::size_t total = 4 + length;
  if (!is_chunked(msg) && total > kMaxFrameBytes) {
    throw SizeError(std::string(tag_name(tag_of(msg))) + " frame exceeds 4096 bytes");
  }
  if (total > kMaxChunkedFrameBytes) throw SizeError("chunk frame exceeds reader limit");

  Writer frame;
  frame.u32(static_cast<std::uint32_t>(length));
  frame.u8(static_cast<std::uint8_t>(tag_of(msg)));
  std::vector<std::uint8_t> out = frame.take();
  out.insert(out.end(), payload.begin(), payload.end());
  return out;
}

DecodeResult decode(std::span<const std::uint8_t> bytes) {
  if (bytes.size() < 4) return NeedMoreBytes{bytes.size(), 4};
  const std::uint32_t length = static_cast<std::uint32_t>(bytes[0]) |
                               (static_cast<std::uint32_t>(bytes[1]) << 8) |
                               (static_cast<std::uint32_t>(bytes[2]) << 16) |
                               (static_cast<std::uint32_t>(bytes[3]) << 24);
  if (length == 0) throw ProtocolError("frame without a tag");
  if (length + 4ull > kMaxChunkedFrameBytes) throw ProtocolError("declared frame length too large");
  if (bytes.size() >= kHeaderBytes) {
    const std::uint8_t tag = bytes[4];
    if (!is_known_tag(tag)) throw ProtocolError("unknown message tag");
    if (!is_chunked_tag(tag) && length + 4ull > kMaxFrameBytes) {
      throw ProtocolError("declared frame length exceeds 4096 bytes");
    }
  }
  const std::size_t total = 4 + static_cast<std::size_t>(length);
  if (bytes.size() < total) return NeedMoreBytes{bytes.size(), total};

  Reader r(bytes.subspan(kHeaderBytes, length - 1));
  Message msg = read_payload(bytes[4], r);
  r.finish();
  return Decoded{std::move(msg), total};
}

void FrameReader::feed(std::span<const std::uint8_t> bytes) {
  if (offset_ > 0 && offset_ * 2 > buffer_.size()) {
    buffer_.erase(buffer_.begin(), buffer_.begin() + static_cast<std::ptrdiff_t>(offset_));
    offset_ = 0;
  }
  buffer_.insert(buffer_.end(), bytes.begin(), bytes.end());
}

std::optional<Message> FrameReader::next() {
  const std::span<const std::uint8_t> pending(buffer_.data() + offset_, buffer_.size() - offset_);
  auto result = decode(pending);
  if (std::holds_alternative<NeedMoreBytes>(result)) return std::nullopt;
  auto& decoded = std::get<Decoded>(result);
  offset_ += decoded.consumed;
  return std::move(decoded.message);
}

void FrameReader::close() const {
  if (buffered() > 0) throw ProtocolError("stream closed inside a frame");
}

std::vector<TrajectoryUpload> chunk_trajectory(const TrajectoryLog& log, std::size_t max_chunk_bytes) {
  if (log.samples.empty()) throw ParameterError("chunk_trajectory: log has no samples");
  constexpr std::size_t overhead = kHeaderBytes + 8 + 2 + 4 + 4;
  if (max_chunk_bytes < overhead + kRowBytes) {
    throw ParameterError("chunk_trajectory: chunk limit smaller than one sample row");
  }
  const std::size_t rows_per_chunk =
      std::min<std::size_t>((max_chunk_bytes - overhead) / kRowBytes, std::numeric_limits<std::uint16_t>::max());
  const std::size_t count = (log.samples.size() + rows_per_chunk - 1) / rows_per_chunk;

  std::vector<TrajectoryUpload> chunks(count);
  for (std::size_t c = 0; c < count; ++c) {
    auto& chunk = chunks[c];
    chunk.dt = log.dt;
    chunk.chunk_index = static_cast<std::uint32_t>(c);
    chunk.chunk_count = static_cast<std::uint32_t>(count);
    const std::size_t begin = c * rows_per_chunk;
    const std::size_t end = std::min(begin + rows_per_chunk, log.samples.size());
    for (std::size_t k = begin; k < end; ++k) {
      std::array<double, kArmDof> row{};
      for (int j = 0; j < kArmDof; ++j) row[j] = log.samples[k].q[j];
      chunk.samples.push_back(row);
    }
  }
  return chunks;
}

namespace {

template <typename Chunk>
std::vector<const Chunk*> ordered_chunks(std::span<const Chunk> chunks) {
  if (chunks.empty()) throw IncompleteUploadError("upload has no chunks");
  const std::uint32_t count = chunks.front().chunk_count;
  std::vector<const Chunk*> slots(count, nullptr);
  for (const auto& c : chunks) {
    if (c.chunk_count != count) throw IncompleteUploadError("chunks disagree on chunk_count");
    if (c.chunk_index >= count) throw IncompleteUploadError("chunk index outside chunk count");
    if (slots[c.chunk_index] != nullptr) throw IncompleteUploadError("duplicate chunk");
    slots[c.chunk_index] = &c;
  }
  for (std::uint32_t i = 0; i < count; ++i) {
    if (slots[i] == nullptr) {
      throw IncompleteUploadError("missing chunk " + std::to_string(i + 1) + " of " + std::to_string(count));
    }
  }
  return slots;
}

}  // namespace

TrajectoryLog reassemble_trajectory(std::span<const TrajectoryUpload> chunks) {
  const auto slots = ordered_chunks(chunks);
  TrajectoryLog log;
  log.dt = slots.front()->dt;
  for (const auto* c : slots) {
    if (std::bit_cast<std::uint64_t>(c->dt) != std::bit_cast<std::uint64_t>(log.dt)) {
      throw IncompleteUploadError("chunks disagree on dt");
    }
    for (const auto& row : c->samples) {
      TrajectorySample s;
      s.t = static_cast<double>(log.samples.size()) * log.dt;
      for (int j = 0; j < kArmDof; ++j) s.q[j] = row[j];
      log.samples.push_back(s);
    }
  }
  return log;
}

std::vector<DmpModelUpload> chunk_model(const std::string& serialized, std::size_t max_chunk_bytes) {
  constexpr std::size_t overhead = kHeaderBytes + 2 + 4 + 4;
  if (max_chunk_bytes <= overhead) throw ParameterError("chunk_model: chunk limit too small");
  const std::size_t per_chunk =
      std::min<std::size_t>(max_chunk_bytes - overhead, std::numeric_limits<std::uint16_t>::max());
  const std::size_t count = std::max<std::size_t>(1, (serialized.size() + per_chunk - 1) / per_chunk);
  std::vector<DmpModelUpload> chunks(count);
  for (std::size_t c = 0; c < count; ++c) {
    const std::size_t begin = c * per_chunk;
    const std::size_t end = std::min(begin + per_chunk, serialized.size());
    chunks[c].bytes.assign(serialized.begin() + static_cast<std::ptrdiff_t>(begin),
                           serialized.begin() + static_cast<std::ptrdiff_t>(end));
    chunks[c].chunk_index = static_cast<std::uint32_t>(c);
    chunks[c].chunk_count = static_cast<std::uint32_t>(count);
  }
  return chunks;
}

std::string reassemble_model(std::span<const DmpModelUpload> chunks) {
  std::string out;
  for (const auto* c : ordered_chunks(chunks)) out.append(c->bytes.begin(), c->bytes.end());
  return out;
}

SceneSnapshot size_budget_witness() {
  SceneSnapshot snap;
  for (std::size_t i = 0; i < kMaxSceneObjects; ++i) {
    SceneObject obj;
    std::string id = "obj" + std::to_string(i);
    id.resize(kMaxObjectIdBytes, 'x');
    obj.id = id;
    obj.centroid = Position(1.0, 2.0, 3.0);
    obj.shape = Box{Eigen::Vector3d(0.1, 0.1, 0.1)};
    snap.objects.push_back(std::move(obj));
  }
  return snap;
}

}  // namespace teleop::wire
