#include "test_support.hpp"

#include "teleop/dmp_io.hpp"
#include "teleop/errors.hpp"
#include "teleop/gateway.hpp"

#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <random>
#include <thread>

#include <unistd.h>

using namespace teleop;
using namespace teleop::gateway;
using namespace testing_support;

namespace {

HandSample at(std::uint64_t frame, double t, double x, double y = 0, double z = 0) {
  return HandSample{frame, Eigen::Vector3d(x, y, z), t};
}

std::filesystem::path scratch_dir(const std::string& name) {
  auto p = std::filesystem::temp_directory_path() / ("teleop_gw_" + name + "_" + std::to_string(::getpid()));
  std::filesystem::remove_all(p);
  return p;
}

TrajectoryLog straight_log(const JointVector& a, const JointVector& b, double duration, double dt) {
  TrajectoryLog log;
  log.dt = dt;
  const int n = static_cast<int>(std::lround(duration / dt)) + 1;
  for (int k = 0; k < n; ++k) {
    const double s = static_cast<double>(k) / (n - 1);
    const double p = s * s * s * (10 - 15 * s + 6 * s * s);
    log.samples.push_back({k * dt, a + p * (b - a)});
  }
  return log;
}

}  // namespace

TEST(SampleToDelta, Examples) {
  const auto id = CalibrationModel::identity();
  auto r = sample_to_delta(at(1, 0, 0.1), at(2, 0.02, 0.11), id);
  EXPECT_NEAR(r.message.delta[0], 0.01, 1e-15);
  EXPECT_EQ(r.message.frame, 2u);
  EXPECT_FALSE(r.clamped[0]);

  CalibrationModel twice = id;
  twice.x.scale = twice.y.scale = twice.z.scale = 2.0;
  r = sample_to_delta(at(1, 0, 0.0, 0.0, 0.0), at(2, 0.02, 0.01, -0.02, 0.0), twice, 0.5);
  EXPECT_NEAR(r.message.delta[0], 0.01, 1e-15);
  EXPECT_NEAR(r.message.delta[1], -0.02, 1e-15);

  r = sample_to_delta(at(1, 0, 0.0), at(2, 0.02, 0.2, -0.3), id);
  EXPECT_EQ(r.message.delta[0], kDefaultStepCap);
  EXPECT_EQ(r.message.delta[1], -kDefaultStepCap);
  EXPECT_TRUE(r.clamped[0]);
  EXPECT_TRUE(r.clamped[1]);
  EXPECT_FALSE(r.clamped[2]);
}

TEST(DeltaStream, CoalescesFastSamples) {
  DeltaStream ds(CalibrationModel::identity(), 1.0, 0.02);
  EXPECT_FALSE(ds.offer(at(1, 0.000, 0.0)));
  EXPECT_FALSE(ds.offer(at(2, 0.005, 0.001)));
  EXPECT_FALSE(ds.offer(at(3, 0.010, 0.002)));
  const auto d = ds.offer(at(4, 0.020, 0.004));
  ASSERT_TRUE(d);
  EXPECT_EQ(d->frame, 4u);
  EXPECT_NEAR(d->delta[0], 0.004, 1e-15);
  EXPECT_FALSE(ds.offer(at(5, 0.025, 0.005)));
  const auto f = ds.flush();
  ASSERT_TRUE(f);
  EXPECT_NEAR(f->delta[0], 0.001, 1e-15);
  EXPECT_FALSE(ds.flush());
  EXPECT_THROW(ds.offer(at(5, 0.05, 0.0)), DataError);
}

TEST(DeltaStream, PropertyTelescopesUpToClampLoss) {
  std::mt19937_64 rng(31);
  std::normal_distribution<double> step(0.0, 0.02);
  std::uniform_real_distribution<double> jitter(0.001, 0.03);
  for (int trial = 0; trial < 200; ++trial) {
    CalibrationModel cal = CalibrationModel::identity();
    cal.x.scale = 0.5 + (rng() % 100) / 50.0;
    cal.y.offset = 0.1;
    const double gain = 0.25 + (rng() % 8) * 0.25;
    DeltaStream ds(cal, gain);
    std::vector<HandSample> samples;
    Eigen::Vector3d p = Eigen::Vector3d::Zero();
    double t = 0;
    const int n = 2 + static_cast<int>(rng() % 200);
    for (int k = 0; k < n; ++k) {
      samples.push_back(HandSample{static_cast<std::uint64_t>(k + 1), p, t});
      p += Eigen::Vector3d(step(rng), step(rng), step(rng));
      t += jitter(rng);
    }
    Eigen::Vector3d sum = Eigen::Vector3d::Zero();
    std::uint64_t last = 0;
    for (const auto& s : samples) {
      if (const auto d = ds.offer(s)) {
        ASSERT_GT(d->frame, last);
        last = d->frame;
        for (int i = 0; i < 3; ++i) {
          ASSERT_LE(std::abs(d->delta[i]), kDefaultStepCap);
          sum[i] += d->delta[i];
        }
      }
    }
    if (const auto d = ds.flush())
      for (int i = 0; i < 3; ++i) sum[i] += d->delta[i];
    const Eigen::Vector3d truth = gain * (apply(cal, samples.back().position) - apply(cal, samples.front().position));
    EXPECT_LT((sum + ds.clamp_loss() - truth).cwiseAbs().maxCoeff(), 1e-9) << "trial " << trial;
    EXPECT_LT((sum - ds.emitted_sum()).cwiseAbs().maxCoeff(), 1e-12);
    if (ds.clamp_events() == 0) {
      EXPECT_EQ(ds.clamp_loss(), Eigen::Vector3d::Zero());
    }
  }
}

TEST(DeltaStream, RejectsBadParameters) {
  EXPECT_THROW(DeltaStream(CalibrationModel::identity(), std::nan("")), ParameterError);
  EXPECT_THROW(DeltaStream(CalibrationModel::identity(), 1.0, 0.02, 0.0), ParameterError);
}

TEST(Twin, UpdatesFromHostMessages) {
  TwinState twin;
  wire::JointState js;
  js.frame = 3;
  for (int j = 0; j < 6; ++j) js.q[j] = 0.1 * j;
  twin = twin_update(twin, js);
  for (int j = 0; j < 6; ++j) EXPECT_EQ(twin.q[j], 0.1 * j);

  wire::SceneSnapshot snap;
  snap.objects = shipped_scene();
  twin = twin_update(twin, snap);
  EXPECT_EQ(twin.scene, shipped_scene());
  twin = twin_update(twin, wire::SceneSnapshot{});
  EXPECT_TRUE(twin.scene.empty());

  twin = twin_update(twin, wire::Ack{10}, 0.1);
  EXPECT_NEAR(twin.link_latency_estimate, 0.02, 1e-15);
  twin = twin_update(twin, wire::Ack{11}, 0.1);
  EXPECT_NEAR(twin.link_latency_estimate, 0.02 + 0.2 * 0.08, 1e-15);
  twin = twin_update(twin, wire::Ack{4});
  EXPECT_EQ(twin.last_ack_frame, 11u);
  const double before = twin.link_latency_estimate;
  twin = twin_update(twin, wire::Ack{12}, -1.0);
  EXPECT_EQ(twin.link_latency_estimate, before);
}

TEST(Twin, JsonShape) {
  TwinState twin;
  twin.scene = shipped_scene();
  twin.link_latency_estimate = 0.004;
  twin.last_ack_frame = 9;
  const auto j = twin_to_json(twin);
  EXPECT_EQ(j.at("type"), "twin");
  EXPECT_EQ(j.at("q").size(), 6u);
  EXPECT_EQ(j.at("scene").size(), 3u);
  EXPECT_NEAR(j.at("latency_ms").get<double>(), 4.0, 1e-12);
  EXPECT_EQ(j.at("last_ack_frame"), 9);
}

TEST(DmpStore, RoundTripAndBadIds) {
  const auto dir = scratch_dir("store");
  DmpStore store(dir);
  Demonstration demo;
  demo.dt = 0.01;
  demo.positions.resize(101, 2);
  for (int k = 0; k <= 100; ++k) demo.positions.row(k) << std::sin(0.01 * k), 0.5 * k * 0.01;
  auto model = fit(demo);
  model.object_id = "cube";
  store.save(model);
  EXPECT_EQ(store.load("cube"), model);
  EXPECT_EQ(store.list(), std::vector<std::string>{"cube"});
  EXPECT_THROW(store.path_for("../x"), ParameterError);
  EXPECT_THROW(store.path_for(""), ParameterError);
  EXPECT_THROW(store.load("missing"), ConfigError);
  model.object_id.reset();
  EXPECT_THROW(store.save(model), ParameterError);
  std::filesystem::remove_all(dir);
}

TEST(Train, MissingChunkIsIncomplete) {
  const auto dh = ur10();
  auto log = straight_log(dh.home, dh.home + JointVector::Constant(0.2), 2.0, 0.01);
  auto chunks = wire::chunk_trajectory(log, wire::kMaxFrameBytes);
  ASSERT_GT(chunks.size(), 2u);
  chunks.erase(chunks.begin() + 1);
  EXPECT_THROW(train_model(chunks, "cube"), IncompleteUploadError);
}

TEST(Train, StraightTeachConvergesToNewGoal) {
  const auto dh = ur10();
  const JointVector goal = dh.home + JointVector::Constant(0.3);
  const auto log = straight_log(dh.home, goal, 2.0, 0.01);
  const auto chunks = wire::chunk_trajectory(log, wire::kMaxFrameBytes);
  const auto model = train_model(chunks, "cube");
  EXPECT_EQ(model.object_id, "cube");
  EXPECT_EQ(model.dof_count(), 6u);
  const JointVector g_new = dh.home + JointVector::Constant(0.45);
  const auto y = rollout(model, to_array(dh.home), to_array(g_new), model.tau, model.dt);
  for (int j = 0; j < 6; ++j) EXPECT_NEAR(y(y.rows() - 1, j), g_new[j], 1e-3);
}

TEST(Train, CartesianSpaceUsesForwardKinematics) {
  const auto dh = ur10();
  const auto log = straight_log(dh.home, dh.home + JointVector::Constant(0.2), 1.0, 0.01);
  const auto chunks = wire::chunk_trajectory(log, wire::kMaxFrameBytes);
  TrainOptions opt;
  opt.fit.space = DmpSpace::CartesianSpace;
  EXPECT_THROW(train_model(chunks, "cube", opt), ParameterError);
  opt.kinematics = dh;
  const auto model = train_model(chunks, "cube", opt);
  ASSERT_EQ(model.dof_count(), 3u);
  const Position end = forward_kinematics(log.samples.back().q, dh).position;
  for (int i = 0; i < 3; ++i) EXPECT_NEAR(model.dofs[i].g, end[i], 1e-12);
}

TEST(Sources, ReplayCsv) {
  const auto dir = scratch_dir("replay");
  std::filesystem::create_directories(dir);
  const auto path = (dir / "hand.csv").string();
  {
    std::ofstream out(path);
    out << "frame,t,x,y,z\n1,0,0.1,0.2,0.3\n2,0.02,0.11,0.2,0.3\n";
  }
  FileReplaySource src(path);
  auto a = src.next();
  ASSERT_TRUE(a);
  EXPECT_EQ(std::get<HandSample>(*a).frame, 1u);
  ASSERT_TRUE(src.next());
  EXPECT_FALSE(src.next());
  {
    std::ofstream out(path);
    out << "frame,t,x,y,z\n2,0,0,0,0\n1,0.02,0,0,0\n";
  }
  EXPECT_THROW(FileReplaySource{path}, DataError);
  EXPECT_THROW(FileReplaySource{(dir / "none.csv").string()}, ConfigError);
  std::filesystem::remove_all(dir);
}

TEST(Sources, Scripts) {
  for (const auto& name : ScriptedSource::names()) {
    ScriptedSource src(name, 50.0, std::string("cube"));
    std::uint64_t last = 0;
    int samples = 0, commands = 0;
    while (auto ev = src.next()) {
      if (const auto* s = std::get_if<HandSample>(&*ev)) {
        EXPECT_GT(s->frame, last);
        last = s->frame;
        ++samples;
      } else {
        ++commands;
      }
    }
    EXPECT_GT(samples, 50) << name;
    EXPECT_EQ(commands, name == "teach_reach" ? 3 : 0) << name;
  }
  EXPECT_THROW(ScriptedSource("nope"), ParameterError);
  EXPECT_THROW(make_source("telepathy", nullptr), ConfigError);
  EXPECT_THROW(make_source("console", nullptr), ConfigError);
}

TEST(Sources, ConsoleKeepsLatestSample) {
  auto console = std::make_shared<ConsoleSource>();
  console->push(at(1, 0, 0.1));
  console->push(at(2, 0, 0.2));
  console->push(ControlCommand{ControlCommand::Kind::TeachStart, std::nullopt});
  console->push(at(3, 0, 0.3));
  auto src = make_source("console", console);
  auto a = src->next();
  EXPECT_EQ(std::get<HandSample>(*a).frame, 2u);
  EXPECT_TRUE(std::holds_alternative<ControlCommand>(*src->next()));
  EXPECT_EQ(std::get<HandSample>(*src->next()).frame, 3u);

  std::thread closer([&] {
    std::this_thread::sleep_for(std::chrono::milliseconds(20));
    console->close();
  });
  EXPECT_FALSE(src->next());
  closer.join();
}
