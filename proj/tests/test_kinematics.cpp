#include "test_support.hpp"

#include "teleop/errors.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <sstream>

using namespace teleop;
using namespace testing_support;

namespace {

Position oracle_tool(const DhTable& dh, const JointVector& q) {
  const auto t = oracle::chain(oracle_rows(dh), to_array(q));
  return {t[3], t[7], t[11]};
}

}  // namespace

TEST(ForwardKinematics, ZeroTableIsIdentity) {
  DhTable dh;
  std::mt19937_64 rng(3);
  for (int k = 0; k < 20; ++k) {
    const auto pose = forward_kinematics(random_q(rng), dh);
    EXPECT_LT(pose.position.norm(), 1e-15);
    EXPECT_NEAR(pose.orientation.norm(), 1.0, 1e-12);
  }
  const auto pose = forward_kinematics(JointVector::Zero(), dh);
  EXPECT_TRUE(pose.orientation.toRotationMatrix().isIdentity(1e-15));
}

TEST(ForwardKinematics, SingleUnitLinkQuarterTurn) {
  DhTable dh;
  dh.rows[0].a = 1.0;
  JointVector q = JointVector::Zero();
  q[0] = EIGEN_PI / 2;
  const auto p = forward_kinematics(q, dh).position;
  EXPECT_NEAR(p.x(), 0.0, 1e-15);
  EXPECT_NEAR(p.y(), 1.0, 1e-15);
  EXPECT_NEAR(p.z(), 0.0, 1e-15);
}

TEST(ForwardKinematics, Ur10AtZeroMatchesOracle) {
  const auto dh = ur10();
  const JointVector q = JointVector::Zero();
  const auto t = oracle::chain(oracle_rows(dh), to_array(q));
  const auto pose = forward_kinematics(q, dh);
  const Eigen::Matrix3d r = pose.orientation.toRotationMatrix();
  for (int i = 0; i < 3; ++i) {
    EXPECT_NEAR(pose.position[i], t[i * 4 + 3], 1e-9);
    for (int j = 0; j < 3; ++j) EXPECT_NEAR(r(i, j), t[i * 4 + j], 1e-9);
  }
}

TEST(ForwardKinematics, Ur10HomeToolPosition) {
  const auto dh = ur10();
  const auto p = forward_kinematics(dh.home, dh).position;
  EXPECT_LT((p - oracle_tool(dh, dh.home)).norm(), 1e-12);
  // upper arm straight up, forearm forward: x = |a3| + d5, z = d1 + |a2| - d6
  EXPECT_NEAR(p.x(), 0.5723 + 0.1157, 1e-9);
  EXPECT_NEAR(p.y(), 0.163941, 1e-9);
  EXPECT_NEAR(p.z(), 0.1273 + 0.612 - 0.0922, 1e-9);
}

TEST(ForwardKinematics, PropertyMatchesOracleOnRandomConfigs) {
  const auto dh = ur10();
  std::mt19937_64 rng(2024);
  const auto rows = oracle_rows(dh);
  double worst = 0.0;
  for (int k = 0; k < 1000; ++k) {
    const JointVector q = random_q(rng, -2 * EIGEN_PI, 2 * EIGEN_PI);
    std::array<std::array<double, 3>, 7> origins{};
    const auto t = oracle::chain(rows, to_array(q), &origins);
    const auto pose = forward_kinematics(q, dh);
    const Eigen::Matrix3d r = pose.orientation.toRotationMatrix();
    for (int i = 0; i < 3; ++i) {
      worst = std::max(worst, std::abs(pose.position[i] - t[i * 4 + 3]));
      for (int j = 0; j < 3; ++j) worst = std::max(worst, std::abs(r(i, j) - t[i * 4 + j]));
    }
    const auto lib_origins = frame_origins(q, dh);
    for (int f = 0; f < 7; ++f)
      for (int i = 0; i < 3; ++i) worst = std::max(worst, std::abs(lib_origins[f][i] - origins[f][i]));
    EXPECT_NEAR(pose.orientation.norm(), 1.0, 1e-9);
  }
  EXPECT_LT(worst, 1e-9);
}

TEST(ForwardKinematics, Deterministic) {
  const auto dh = ur10();
  JointVector q;
  q << 0.3, -1.1, 0.7, 2.0, -0.4, 1.3;
  const auto a = forward_kinematics(q, dh);
  const auto b = forward_kinematics(q, dh);
  EXPECT_EQ(a.position, b.position);
  EXPECT_EQ(a.orientation.coeffs(), b.orientation.coeffs());
}

TEST(IkStep, ZeroDeltaLeavesQ) {
  const auto dh = ur10();
  const JointVector q = dh.home;
  EXPECT_EQ(ik_step(q, Position::Zero(), dh), q);
}

TEST(IkStep, SmallDeltaClosesLoop) {
  const auto dh = ur10();
  const JointVector q = dh.home;
  ASSERT_TRUE(generic(q, dh));
  const Position delta(0.01, 0, 0);
  const JointVector q2 = ik_step(q, delta, dh);
  const Position want = forward_kinematics(q, dh).position + delta;
  EXPECT_LT((forward_kinematics(q2, dh).position - want).norm(), 1e-4);
  EXPECT_TRUE(dh.within_limits(q2));
}

TEST(IkStep, PropertyLoopClosureOnRandomCentimetreDeltas) {
  const auto dh = ur10();
  std::mt19937_64 rng(11);
  std::normal_distribution<double> n01(0.0, 1.0);
  std::uniform_real_distribution<double> len(0.0, 0.01);
  int checked = 0;
  double worst = 0.0;
  while (checked < 1000) {
    // configurations near home keep the arm in its working region
    JointVector q = dh.home;
    for (int i = 0; i < 6; ++i) q[i] += 0.6 * n01(rng);
    if (!generic(q, dh)) continue;
    Position d(n01(rng), n01(rng), n01(rng));
    d *= len(rng) / d.norm();
    const JointVector q2 = ik_step(q, d, dh);
    const Position want = forward_kinematics(q, dh).position + d;
    worst = std::max(worst, (forward_kinematics(q2, dh).position - want).norm());
    ++checked;
  }
  EXPECT_LT(worst, 1e-4);
}

TEST(IkStep, OutwardFromStretchedArmIsUnreachable) {
  const auto dh = ur10();
  const Position shoulder(0, 0, dh.rows[0].d);
  auto outward = [&](const JointVector& q, double len) {
    return Position((forward_kinematics(q, dh).position - shoulder).normalized() * len);
  };
  // q = 0 lays the arm flat; keep pulling the tool away from the shoulder until the
  // wrist offsets are used up too and the arm is fully stretched.
  JointVector q = JointVector::Zero();
  bool stretched = false;
  for (int k = 0; k < 500 && !stretched; ++k) {
    try {
      q = ik_step(q, outward(q, 0.01), dh);
    } catch (const UnreachableError&) {
      stretched = true;
    }
  }
  ASSERT_TRUE(stretched);
  try {
    ik_step(q, outward(q, 0.05), dh);
    FAIL() << "expected UnreachableError";
  } catch (const UnreachableError& e) {
    EXPECT_GT(e.residual(), 1e-3);
  }
}

TEST(IkStep, DeltaAboveCapIsRejected) {
  const auto dh = ur10();
  EXPECT_THROW(ik_step(dh.home, Position(0.06, 0, 0), dh), ParameterError);
}

TEST(Execute, SingleWaypoint) {
  const auto dh = ur10();
  const std::vector<JointVector> path{dh.home};
  const auto log = execute(path, dh, 0.02);
  ASSERT_EQ(log.samples.size(), 1u);
  EXPECT_EQ(log.samples[0].t, 0.0);
  EXPECT_EQ(log.samples[0].q, dh.home);
}

TEST(Execute, OneRadianAtOneRadPerSecond) {
  DhTable dh;
  dh.max_joint_speed = JointVector::Ones();
  JointVector b = JointVector::Zero();
  b[2] = 1.0;
  const std::vector<JointVector> path{JointVector::Zero(), b};
  const auto log = execute(path, dh, 0.1);
  ASSERT_EQ(log.samples.size(), 11u);
  EXPECT_NEAR(log.samples.back().t, 1.0, 1e-12);
  for (std::size_t k = 0; k < 11; ++k) {
    EXPECT_NEAR(log.samples[k].t, 0.1 * k, 1e-12);
    EXPECT_NEAR(log.samples[k].q[2], 0.1 * k, 1e-12);
    EXPECT_EQ(log.samples[k].q[0], 0.0);
  }
}

TEST(Execute, LimitViolation) {
  DhTable dh;
  JointVector bad = JointVector::Zero();
  bad[1] = 7.0;
  const std::vector<JointVector> path{JointVector::Zero(), bad};
  EXPECT_THROW(execute(path, dh, 0.1), LimitError);
}

TEST(Execute, PropertyNeverOverspeeds) {
  const auto dh = ur10();
  std::mt19937_64 rng(5);
  for (int trial = 0; trial < 100; ++trial) {
    std::vector<JointVector> path{dh.home};
    std::uniform_int_distribution<int> len(2, 8);
    const int n = len(rng);
    for (int i = 1; i < n; ++i) path.push_back(dh.clamp(path.back() + random_q(rng, -0.8, 0.8)));
    const double dt = trial % 2 ? 0.02 : 0.013;
    const auto log = execute(path, dh, dt);
    EXPECT_EQ(log.samples.front().q, path.front());
    EXPECT_LT((log.samples.back().q - path.back()).norm(), 1e-12);
    for (std::size_t k = 1; k < log.samples.size(); ++k) {
      const double h = log.samples[k].t - log.samples[k - 1].t;
      ASSERT_GT(h, 0.0);
      EXPECT_NEAR(h, dt, 1e-9);
      const JointVector v = (log.samples[k].q - log.samples[k - 1].q) / h;
      for (int j = 0; j < 6; ++j) EXPECT_LE(std::abs(v[j]), dh.max_joint_speed[j] * (1 + 1e-9));
    }
  }
}

TEST(Execute, MinSegmentTimeKeepsRolloutTiming) {
  const auto dh = ur10();
  std::vector<JointVector> path;
  for (int k = 0; k <= 50; ++k) {
    JointVector q = dh.home;
    q[0] += 0.001 * k;
    path.push_back(q);
  }
  EXPECT_EQ(execute(path, dh, 0.02, 0.02).samples.size(), 51u);
  EXPECT_LT(execute(path, dh, 0.02).samples.size(), 51u);
}

TEST(PathLength, Examples) {
  std::vector<CartesianPose> one(1);
  EXPECT_EQ(path_length(one), 0.0);
  std::vector<CartesianPose> two(2);
  two[1].position = Position(0.6, 0.8, 0.0);
  EXPECT_DOUBLE_EQ(path_length(two), 1.0);
  EXPECT_THROW(path_length(std::span<const CartesianPose>{}), ParameterError);
}

TEST(PathLength, CollinearSamplesSumToSegment) {
  const Position a(0.1, -0.2, 0.3);
  const Position dir = Position(1, 2, -2) / 3.0;
  std::vector<Position> pts;
  for (int k = 0; k <= 100; ++k) pts.push_back(a + dir * (0.5 * k / 100.0));
  EXPECT_NEAR(path_length(pts), 0.5, 1e-12);
  EXPECT_NEAR(path_length(pts), (pts.back() - pts.front()).norm(), 1e-9);
}

TEST(KinematicsConfig, RoundTripAndValidation) {
  const auto dh = ur10();
  const auto again = parse_kinematics(kinematics_to_json(dh));
  for (int i = 0; i < 6; ++i) {
    EXPECT_EQ(again.rows[i].a, dh.rows[i].a);
    EXPECT_EQ(again.rows[i].d, dh.rows[i].d);
    EXPECT_EQ(again.rows[i].alpha, dh.rows[i].alpha);
  }
  EXPECT_EQ(again.home, dh.home);
  EXPECT_EQ(again.max_joint_speed, dh.max_joint_speed);
  EXPECT_THROW(parse_kinematics(R"({"dh": []})"), ConfigError);
  DhTable bad = dh;
  bad.max_joint_speed[3] = 0.0;
  EXPECT_THROW(bad.validate(), ConfigError);
}

TEST(TrajectoryCsv, Header) {
  TrajectoryLog log;
  log.dt = 0.1;
  log.samples.push_back({0.0, JointVector::Zero()});
  std::ostringstream out;
  write_trajectory_csv(log, out);
  EXPECT_EQ(out.str().substr(0, out.str().find('\n')), "t,q1,q2,q3,q4,q5,q6");
}
