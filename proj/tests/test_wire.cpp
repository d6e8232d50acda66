#include "teleop/errors.hpp"
#include "teleop/wire.hpp"
#include "wire_gen.hpp"

#include <gtest/gtest.h>

#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <random>
#include <sstream>

using namespace teleop;
using namespace teleop::wire;
using namespace testing_support;

namespace {

using Bytes = std::vector<std::uint8_t>;

void put_le(Bytes& out, std::uint64_t v, int n) {
  for (int i = 0; i < n; ++i) out.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}

void put_f64(Bytes& out, double d) { put_le(out, std::bit_cast<std::uint64_t>(d), 8); }

Message decode_one(const Bytes& bytes) {
  auto r = decode(bytes);
  EXPECT_TRUE(std::holds_alternative<Decoded>(r));
  EXPECT_EQ(std::get<Decoded>(r).consumed, bytes.size());
  return std::get<Decoded>(r).message;
}

}  // namespace

TEST(Encode, HandDeltaIs37Bytes) {
  const auto bytes = encode(HandDelta{0, {0, 0, 0}});
  EXPECT_EQ(bytes.size(), 4u + 1u + 8u + 24u);
  EXPECT_EQ(bytes[0], 33);
  EXPECT_EQ(bytes[4], 0x01);
}

TEST(Encode, TeachStartIs5Bytes) {
  const auto bytes = encode(TeachStart{});
  EXPECT_EQ(bytes, (Bytes{0x01, 0x00, 0x00, 0x00, 0x04}));
}

TEST(Encode, HandDeltaLayoutByHand) {
  const HandDelta m{0x0102030405060708ull, {0.01, -0.02, 0.5}};
  Bytes want;
  put_le(want, 33, 4);
  want.push_back(0x01);
  put_le(want, m.frame, 8);
  for (double d : m.delta) put_f64(want, d);
  EXPECT_EQ(encode(m), want);
}

TEST(Encode, NackAndExecuteLayoutByHand) {
  Bytes want;
  put_le(want, 1 + 2 + 2 + 4, 4);
  want.push_back(0x0A);
  put_le(want, 5, 2);
  put_le(want, 4, 2);
  for (char c : std::string("cube")) want.push_back(static_cast<std::uint8_t>(c));
  EXPECT_EQ(encode(NackError{5, "cube"}), want);

  Bytes exec;
  put_le(exec, 1 + 2 + 4, 4);
  exec.push_back(0x08);
  put_le(exec, 4, 2);
  for (char c : std::string("cube")) exec.push_back(static_cast<std::uint8_t>(c));
  EXPECT_EQ(encode(ExecuteToObject{"cube"}), exec);
}

TEST(Decode, AckRoundTrip) {
  const auto bytes = encode(Ack{42});
  EXPECT_EQ(bytes.size(), 13u);
  EXPECT_EQ(std::get<Ack>(decode_one(bytes)).ref_frame, 42u);
}

TEST(Decode, UnknownTagIsProtocolError) {
  Bytes b{0x01, 0, 0, 0, 0xFF};
  EXPECT_THROW(decode(b), ProtocolError);
  Bytes version{0x01, 0, 0, 0, 0x00};
  EXPECT_THROW(decode(version), ProtocolError);
}

TEST(Decode, LengthMismatchIsProtocolError) {
  auto b = encode(Ack{1});
  b[0] = 8;  // tag + 7 bytes, one short of the ref_frame
  b.pop_back();
  EXPECT_THROW(decode(b), ProtocolError);
  auto c = encode(Ack{1});
  c[0] = 12;
  c.resize(4 + 12);  // three stray bytes after the ref_frame
  EXPECT_THROW(decode(c), ProtocolError);
}

TEST(Decode, OversizeNonChunkedDeclarationRejectedEarly) {
  Bytes b;
  put_le(b, 5000, 4);
  b.push_back(0x03);
  EXPECT_THROW(decode(b), ProtocolError);
}

TEST(FrameReader, TruncatedFrameThenClose) {
  Bytes b;
  put_le(b, 100, 4);
  b.push_back(0x0A);  // tag counts toward the 100
  for (int i = 0; i < 98; ++i) b.push_back(0);
  auto r = decode(b);
  ASSERT_TRUE(std::holds_alternative<NeedMoreBytes>(r));
  EXPECT_EQ(std::get<NeedMoreBytes>(r).need, 104u);

  FrameReader reader;
  reader.feed(b);
  EXPECT_FALSE(reader.next().has_value());
  EXPECT_THROW(reader.close(), ProtocolError);
}

TEST(FrameReader, ByteAtATime) {
  std::mt19937_64 rng(12);
  std::vector<Message> sent;
  Bytes stream;
  for (int i = 0; i < 200; ++i) {
    sent.push_back(random_message(rng));
    const auto b = encode(sent.back());
    stream.insert(stream.end(), b.begin(), b.end());
  }
  FrameReader reader;
  std::vector<Message> got;
  for (auto byte : stream) {
    reader.feed(std::span<const std::uint8_t>(&byte, 1));
    while (auto m = reader.next()) got.push_back(std::move(*m));
  }
  reader.close();
  ASSERT_EQ(got.size(), sent.size());
  for (std::size_t i = 0; i < got.size(); ++i) EXPECT_EQ(encode(got[i]), encode(sent[i]));
}

TEST(SizeBudget, WitnessFitsAndIsMaximal) {
  const auto witness = size_budget_witness();
  ASSERT_EQ(witness.objects.size(), 64u);
  const auto bytes = encode(witness);
  // header + count + 64 * (id length + 12 id bytes + centroid + kind + 3 half extents)
  EXPECT_EQ(bytes.size(), 5u + 2u + 64u * (2u + 12u + 24u + 1u + 24u));
  EXPECT_LE(bytes.size(), kMaxFrameBytes);

  auto more = witness;
  more.objects.push_back(more.objects.front());
  EXPECT_THROW(encode(more), SizeError);
  auto long_id = witness;
  long_id.objects[0].id += "y";
  EXPECT_THROW(encode(long_id), SizeError);
  EXPECT_THROW(encode(ExecuteToObject{std::string(13, 'a')}), SizeError);
  EXPECT_THROW(encode(NackError{1, std::string(256, 'a')}), SizeError);
}

TEST(SizeBudget, EveryNonChunkedMessageFits) {
  EXPECT_LE(encode(NackError{9, std::string(kMaxDetailBytes, 'd')}).size(), kMaxFrameBytes);
  EXPECT_LE(encode(ExecuteToObject{std::string(kMaxObjectIdBytes, 'e')}).size(), kMaxFrameBytes);
  std::mt19937_64 rng(21);
  for (int i = 0; i < 2000; ++i) {
    const auto m = random_message(rng);
    if (!is_chunked(m)) {
      EXPECT_LE(encode(m).size(), kMaxFrameBytes);
    }
  }
}

TEST(Fuzz, TenThousandValidMessagesRoundTrip) {
  std::mt19937_64 rng(2025);
  int lossless = 0;
  for (int i = 0; i < 10000; ++i) {
    const auto m = random_message(rng);
    const auto bytes = encode(m);
    const auto back = decode_one(bytes);
    if (back == m && encode(back) == bytes) ++lossless;
  }
  EXPECT_EQ(lossless, 10000);
}

TEST(Fuzz, TenThousandRandomByteStringsNeverCrash) {
  std::mt19937_64 rng(404);
  int needs = 0, errors = 0, decoded = 0;
  for (int i = 0; i < 10000; ++i) {
    Bytes b(rng() % 64);
    for (auto& x : b) x = static_cast<std::uint8_t>(rng());
    // keep some declared lengths small so payload parsing is exercised
    if (b.size() >= 4 && i % 2) {
      b[1] = b[2] = b[3] = 0;
      b[0] = static_cast<std::uint8_t>(b[0] % 60);
    }
    try {
      const auto r = decode(b);
      if (std::holds_alternative<NeedMoreBytes>(r)) ++needs;
      else ++decoded;
    } catch (const ProtocolError&) {
      ++errors;
    }
  }
  EXPECT_EQ(needs + errors + decoded, 10000);
  EXPECT_GT(errors, 0);
  EXPECT_GT(needs, 0);
}

TEST(Chunking, SmallLogOneChunk) {
  TrajectoryLog log;
  log.dt = 0.02;
  for (int k = 0; k < 10; ++k) log.samples.push_back({k * 0.02, JointVector::Constant(k)});
  const auto chunks = chunk_trajectory(log, 1 << 16);
  ASSERT_EQ(chunks.size(), 1u);
  EXPECT_EQ(chunks[0].chunk_count, 1u);
}

TEST(Chunking, ThousandSamplesAt4096) {
  TrajectoryLog log;
  log.dt = 0.02;
  std::mt19937_64 rng(1);
  for (int k = 0; k < 1000; ++k) {
    JointVector q;
    for (int j = 0; j < 6; ++j) q[j] = random_finite(rng);
    log.samples.push_back({k * 0.02, q});
  }
  const auto chunks = chunk_trajectory(log, 4096);
  // payload budget: whole rows that fit after header, dt, row count, index and count
  const std::size_t rows = (4096 - 5 - 8 - 2 - 4 - 4) / 48;
  const std::size_t budget = rows * 48;
  EXPECT_EQ(chunks.size(), (1000 * 48 + budget - 1) / budget);
  for (const auto& c : chunks) {
    EXPECT_EQ(c.chunk_count, chunks.size());
    EXPECT_LE(encode(c).size(), 4096u);
  }
  const auto back = reassemble_trajectory(chunks);
  ASSERT_EQ(back.samples.size(), 1000u);
  for (std::size_t k = 0; k < 1000; ++k)
    EXPECT_EQ(0, std::memcmp(back.samples[k].q.data(), log.samples[k].q.data(), 48));
}

TEST(Chunking, EmptyLogAndMissingChunks) {
  EXPECT_THROW(chunk_trajectory(TrajectoryLog{}, 4096), ParameterError);
  TrajectoryLog log;
  log.dt = 0.02;
  for (int k = 0; k < 300; ++k) log.samples.push_back({k * 0.02, JointVector::Constant(k)});
  auto chunks = chunk_trajectory(log, 4096);
  ASSERT_EQ(chunks.size(), 4u);
  std::reverse(chunks.begin(), chunks.end());
  EXPECT_EQ(reassemble_trajectory(chunks).samples.size(), 300u);
  chunks.erase(chunks.begin() + 1);
  EXPECT_THROW(reassemble_trajectory(chunks), IncompleteUploadError);
}

TEST(Chunking, ModelBytesRoundTrip) {
  std::string text(10000, '\0');
  std::mt19937_64 rng(6);
  for (auto& c : text) c = static_cast<char>(rng());
  const auto chunks = chunk_model(text, 4096);
  EXPECT_EQ(chunks.size(), 3u);
  for (const auto& c : chunks) EXPECT_LE(encode(c).size(), 4096u);
  EXPECT_EQ(reassemble_model(chunks), text);
  std::vector<DmpModelUpload> partial(chunks.begin(), chunks.begin() + 2);
  EXPECT_THROW(reassemble_model(partial), IncompleteUploadError);
}

// docs/wire-format.md must show what the encoder actually produces.
TEST(WireDocs, HexExamplesMatchEncoder) {
  std::ifstream in(std::string(TELEOP_DOCS_DIR) + "/wire-format.md");
  ASSERT_TRUE(in) << "docs/wire-format.md not found";
  std::vector<Bytes> blocks;
  std::string line;
  bool inside = false;
  while (std::getline(in, line)) {
    if (!inside && line == "```hex") {
      inside = true;
      blocks.emplace_back();
    } else if (inside && line == "```") {
      inside = false;
    } else if (inside) {
      std::istringstream ss(line);
      std::string byte;
      while (ss >> byte) blocks.back().push_back(static_cast<std::uint8_t>(std::stoul(byte, nullptr, 16)));
    }
  }

  SceneSnapshot scene;
  scene.objects.push_back({"cube", Position(0.85, -0.15, 0.3), Box{Eigen::Vector3d(0.05, 0.05, 0.05)}});
  scene.objects.push_back({"ball", Position(0.5, 0.4, 0.25), Sphere{0.06}});
  TrajectoryUpload traj;
  traj.dt = 0.02;
  traj.samples.push_back({0, 0, 0, 0, 0, 1.0});
  traj.chunk_index = 0;
  traj.chunk_count = 1;
  DmpModelUpload model;
  model.bytes = {'{', '}'};
  model.chunk_index = 2;
  model.chunk_count = 3;
  const double pi = EIGEN_PI;
  const std::vector<Message> expected{
      HandDelta{7, {0.01, 0.0, -0.005}},
      JointState{42, {pi, -pi / 2, pi / 2, -pi / 2, -pi / 2, 0.0}},
      TeachStart{},
      TeachStop{},
      scene,
      traj,
      model,
      ExecuteToObject{"cube"},
      Ack{7},
      NackError{4, "no object mug"},
  };
  ASSERT_EQ(blocks.size(), expected.size());
  for (std::size_t i = 0; i < expected.size(); ++i) {
    EXPECT_EQ(blocks[i], encode(expected[i])) << "block " << i;
    EXPECT_EQ(decode_one(blocks[i]), expected[i]) << "block " << i;
  }
}
