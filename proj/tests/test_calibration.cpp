#include "teleop/calibration.hpp"
#include "teleop/errors.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <random>
#include <sstream>

using namespace teleop;

namespace {

// Closed-form OLS in long double, written out independently of fit_axis.
std::pair<long double, long double> ols(const std::vector<double>& x, const std::vector<double>& y) {
  long double sx = 0, sy = 0, sxx = 0, sxy = 0;
  const long double n = static_cast<long double>(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) {
    sx += x[i];
    sy += y[i];
    sxx += static_cast<long double>(x[i]) * x[i];
    sxy += static_cast<long double>(x[i]) * y[i];
  }
  const long double b = (n * sxy - sx * sy) / (n * sxx - sx * sx);
  return {b, (sy - b * sx) / n};
}

}  // namespace

TEST(FitAxis, ExactLine) {
  const std::vector<double> t{0.0, 1.0, 2.5, -3.0};
  std::vector<double> r;
  for (double v : t) r.push_back(2 * v + 1);
  const auto reg = fit_axis(t, r);
  EXPECT_NEAR(reg.scale, 2.0, 1e-14);
  EXPECT_NEAR(reg.offset, 1.0, 1e-14);
  EXPECT_NEAR(reg.r_squared, 1.0, 1e-14);
  const auto id = fit_axis(t, t);
  EXPECT_NEAR(id.scale, 1.0, 1e-15);
  EXPECT_NEAR(id.offset, 0.0, 1e-15);
}

TEST(FitAxis, NoisyLineMatchesClosedForm) {
  std::mt19937_64 rng(17);
  std::uniform_real_distribution<double> u(-0.5, 0.5);
  std::normal_distribution<double> noise(0.0, 0.005);
  std::vector<double> t, r;
  for (int i = 0; i < 500; ++i) {
    t.push_back(u(rng));
    r.push_back(1.1 * t.back() + 0.03 + noise(rng));
  }
  const auto reg = fit_axis(t, r);
  const auto [b, a] = ols(t, r);
  EXPECT_NEAR(reg.scale, static_cast<double>(b), 1e-12);
  EXPECT_NEAR(reg.offset, static_cast<double>(a), 1e-12);
  EXPECT_NEAR(reg.scale, 1.1, 0.02);
  EXPECT_GT(reg.r_squared, 0.99);
  EXPECT_LE(reg.r_squared, 1.0);
}

TEST(FitAxis, PropertyResidualsOrthogonalToTracker) {
  std::mt19937_64 rng(23);
  std::normal_distribution<double> n01(0.0, 1.0);
  for (int trial = 0; trial < 200; ++trial) {
    const int k = 2 + static_cast<int>(rng() % 300);
    std::vector<double> t(k), r(k);
    for (int i = 0; i < k; ++i) {
      t[i] = n01(rng);
      r[i] = 3 * n01(rng) * t[i] + n01(rng);
    }
    const auto reg = fit_axis(t, r);
    double dot = 0, sum = 0, norm_t = 0, norm_e = 0;
    for (int i = 0; i < k; ++i) {
      const double e = r[i] - reg.apply(t[i]);
      dot += e * t[i];
      sum += e;
      norm_t += t[i] * t[i];
      norm_e += e * e;
    }
    const double denom = std::sqrt(norm_t * norm_e) + 1e-300;
    EXPECT_LT(std::abs(dot) / denom, 1e-9);
    EXPECT_LT(std::abs(sum) / (std::sqrt(k * norm_e) + 1e-300), 1e-9);
  }
}

TEST(FitAxis, Errors) {
  const std::vector<double> flat{1.0, 1.0, 1.0}, r{0.0, 1.0, 2.0}, one{1.0};
  EXPECT_THROW(fit_axis(flat, r), FitError);
  EXPECT_THROW(fit_axis(one, one), ParameterError);
  EXPECT_THROW(fit_axis(r, one), ParameterError);
  const std::vector<double> constant_ref{5.0, 5.0, 5.0};
  EXPECT_THROW(fit_axis(r, constant_ref), FitError);  // zero scale is rejected
}

TEST(Apply, Examples) {
  const Eigen::Vector3d p(0.3, -0.2, 1.5);
  EXPECT_EQ(apply(CalibrationModel::identity(), p), p);
  CalibrationModel two;
  two.x.scale = two.y.scale = two.z.scale = 2.0;
  two.x.offset = two.y.offset = two.z.offset = 0.0;
  EXPECT_EQ(apply(two, Eigen::Vector3d(1, 1, 1)), Eigen::Vector3d(2, 2, 2));
}

TEST(Apply, PropertyExactDistortionInverted) {
  std::mt19937_64 rng(29);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  for (int trial = 0; trial < 100; ++trial) {
    const Eigen::Vector3d s(0.5 + u(rng) + 1.0, 0.5 + u(rng) + 1.0, -(0.5 + u(rng) + 1.0));
    const Eigen::Vector3d o(u(rng), u(rng), u(rng));
    PairedSamples ps;
    for (int i = 0; i < 30; ++i) {
      const Eigen::Vector3d ref(u(rng), u(rng), u(rng));
      ps.reference.push_back(ref);
      ps.tracker.push_back(s.cwiseProduct(ref) + o);
    }
    const auto model = fit_calibration(ps);
    for (std::size_t i = 0; i < ps.tracker.size(); ++i)
      EXPECT_LT((apply(model, ps.tracker[i]) - ps.reference[i]).cwiseAbs().maxCoeff(), 1e-12);
    const Eigen::Vector3d held(u(rng), u(rng), u(rng));
    EXPECT_LT((apply(model, s.cwiseProduct(held) + o) - held).cwiseAbs().maxCoeff(), 1e-12);
  }
}

TEST(Mad, Examples) {
  const std::vector<double> a{0.01, -0.01};
  EXPECT_DOUBLE_EQ(mad(a), 0.01);
  const std::vector<double> z(7, 0.0);
  EXPECT_EQ(mad(z), 0.0);
  EXPECT_THROW(mad(std::vector<double>{}), ParameterError);
}

TEST(Mad, GaussianMatchesHalfNormalMean) {
  std::mt19937_64 rng(7);
  std::normal_distribution<double> n(0.0, 0.01);
  std::vector<double> e(10000);
  for (auto& v : e) v = n(rng);
  const double expected = 0.01 * std::sqrt(2.0 / EIGEN_PI);
  EXPECT_NEAR(expected, 0.00798, 1e-5);
  EXPECT_NEAR(mad(e), expected, 0.05 * expected);
}

TEST(Mad, PropertyScaleEquivariant) {
  std::mt19937_64 rng(8);
  std::normal_distribution<double> n(0.0, 1.0);
  for (int trial = 0; trial < 100; ++trial) {
    std::vector<double> e(1 + rng() % 50);
    for (auto& v : e) v = n(rng);
    const double c = 4 * n(rng);
    std::vector<double> scaled;
    for (double v : e) scaled.push_back(c * v);
    EXPECT_NEAR(mad(scaled), std::abs(c) * mad(e), 1e-12 * (1 + std::abs(c) * mad(e)));
  }
}

TEST(Mape, Examples) {
  const std::vector<double> ref{0.2, 0.5, 1.3};
  EXPECT_EQ(mape(ref, ref).percent, 0.0);
  std::vector<double> pred;
  for (double v : ref) pred.push_back(1.1 * v);
  EXPECT_NEAR(mape(pred, ref).percent, 10.0, 1e-12);

  const std::vector<double> mixed_ref{0.5, 1e-9, -0.25};
  const std::vector<double> mixed_pred{0.55, 3.0, -0.2};
  const auto r = mape(mixed_pred, mixed_ref);
  EXPECT_EQ(r.excluded, 1u);
  EXPECT_EQ(r.used, 2u);
  // (0.05/0.5 + 0.05/0.25) / 2 * 100
  EXPECT_NEAR(r.percent, 15.0, 1e-12);
}

TEST(PairedCsv, ParsesAndRejects) {
  std::istringstream ok("tx,ty,tz,rx,ry,rz\n1,2,3,4,5,6\n0.1,0.2,0.3,0.4,0.5,0.6\n");
  const auto ps = read_paired_csv(ok);
  ASSERT_EQ(ps.tracker.size(), 2u);
  EXPECT_EQ(ps.reference[1], Eigen::Vector3d(0.4, 0.5, 0.6));
  std::istringstream bad("tx,ty,tz,rx,ry,rz\n1,2,3\n");
  EXPECT_THROW(read_paired_csv(bad), DataError);
  std::istringstream nan("tx,ty,tz,rx,ry,rz\n1,2,3,4,nan,6\n");
  EXPECT_THROW(read_paired_csv(nan), DataError);
}

TEST(CalibrationDocument, RoundTrip) {
  CalibrationModel m;
  m.x = {1.8123456789012345, -0.0245, 0.99};
  m.y = {0.9, 0.12, 0.5};
  m.z = {-1.25, 0.3, 1.0};
  const auto back = calibration_from_json(calibration_to_json(m));
  for (int i = 0; i < 3; ++i) {
    EXPECT_EQ(back.axis(i).scale, m.axis(i).scale);
    EXPECT_EQ(back.axis(i).offset, m.axis(i).offset);
    EXPECT_EQ(back.axis(i).r_squared, m.axis(i).r_squared);
  }
  EXPECT_THROW(calibration_from_json("{}"), DataError);
}
