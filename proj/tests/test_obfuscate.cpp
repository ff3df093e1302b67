#include <gtest/gtest.h>

#include <cmath>
#include <numbers>

#include <motionprint/features.hpp>
#include <motionprint/obfuscate.hpp>

using namespace motionprint;

namespace {

SensorTrace tone_trace(std::size_t n, std::string session = "s0") {
  SensorTrace t{"dev", std::move(session), AudioMode::none, Placement::desk, {}};
  for (std::size_t i = 0; i < n; ++i) {
    const double time = static_cast<double>(i) * 10.0;
    const double w = std::sin(2 * std::numbers::pi * 7 * time * 1e-3);
    t.samples.push_back({time, 0.1 * w, 0.2, 9.81 + 0.05 * w, 0.3 * w, -0.01, 0.02 * w});
  }
  return t;
}

ObfuscationPolicy policy(double scale = 1, double prob = 0, std::uint64_t seed = 5) {
  ObfuscationPolicy p;
  p.range_scale = scale;
  p.injection_prob = prob;
  p.seed = seed;
  return p;
}

}  // namespace

TEST(Obfuscate, RangeScaling) {
  const auto g = scale_range({0.95, 1.05}, 10);
  EXPECT_NEAR(g.lo, 0.5, 1e-12);
  EXPECT_NEAR(g.hi, 1.5, 1e-12);
  const auto o = scale_range({-0.5, 0.5}, 10);
  EXPECT_NEAR(o.lo, -5, 1e-12);
  EXPECT_NEAR(o.hi, 5, 1e-12);
  EXPECT_EQ(scale_range({0.95, 1.05}, 1), (Interval{0.95, 1.05}));
  EXPECT_THROW(scale_range({0, 1}, 0), ValidationError);
  EXPECT_THROW(scale_range({0, 1}, -2), ValidationError);
}

TEST(Obfuscate, GainClampedPositive) {
  const auto g = policy(50).effective_gain();
  EXPECT_EQ(g.lo, kMinObfuscationGain);
  EXPECT_NEAR(g.hi, 3.5, 1e-12);
}

TEST(Obfuscate, AffineExample) {
  ObfuscationPolicy p;
  p.gain = {1, 1};
  p.accel_offset = {0.5, 0.5};
  p.gyro_offset = {0, 0};
  const auto out = session_affine(tone_trace(20), p);
  EXPECT_DOUBLE_EQ(out.samples[0].az, 9.81 + 0.5);
  EXPECT_DOUBLE_EQ(out.samples[3].gx, tone_trace(20).samples[3].gx);
}

TEST(Obfuscate, ZeroWidthRangesAreIdentity) {
  ObfuscationPolicy p;
  p.gain = {1, 1};
  p.accel_offset = {0, 0};
  p.gyro_offset = {0, 0};
  const auto t = tone_trace(50);
  EXPECT_EQ(session_affine(t, p), t);
}

TEST(Obfuscate, OneDrawPerSessionDeterministic) {
  const auto t = tone_trace(100);
  const auto p = policy();
  const auto a = session_affine(t, p), b = session_affine(t, p);
  EXPECT_EQ(a, b);
  const auto d = session_draw(t, p);
  for (std::size_t i = 0; i < t.samples.size(); ++i) {
    EXPECT_DOUBLE_EQ(a.samples[i].ax, t.samples[i].ax * d.gain[0] + d.offset[0]);
    EXPECT_DOUBLE_EQ(a.samples[i].gz, t.samples[i].gz * d.gain[5] + d.offset[5]);
    EXPECT_EQ(a.samples[i].t, t.samples[i].t);
  }
  // Another session of the same device gets an independent draw.
  const auto other = session_draw(tone_trace(100, "s1"), p);
  EXPECT_NE(other.gain, d.gain);
  EXPECT_NE(session_draw(t, policy(1, 0, 6)).gain, d.gain);
  for (std::size_t i = 0; i < 6; ++i) {
    EXPECT_GE(d.gain[i], 0.95);
    EXPECT_LE(d.gain[i], 1.05);
  }
}

TEST(Obfuscate, ZeroProbabilityInjectionEqualsAffine) {
  const auto t = tone_trace(200);
  EXPECT_EQ(inject(t, policy(3, 0)), session_affine(t, policy(3, 0)));
  EXPECT_EQ(obfuscate(t, policy(3, 0)), session_affine(t, policy(3, 0)));
}

TEST(Obfuscate, FullInjectionDoublesSamples) {
  const auto t = tone_trace(300);
  const auto out = inject(t, policy(10, 1.0));
  ASSERT_EQ(out.samples.size(), 2 * t.samples.size() - 1);
  for (std::size_t i = 1; i < out.samples.size(); ++i) EXPECT_GT(out.samples[i].t, out.samples[i - 1].t);
  // Originals sit at odd positions, injected copies strictly between.
  for (std::size_t i = 1; i < t.samples.size(); ++i) EXPECT_EQ(out.samples[2 * i].t, t.samples[i].t);
  EXPECT_NO_THROW(validate_trace(out));
}

TEST(Obfuscate, InjectionCountIsBinomial) {
  const auto t = tone_trace(1001);
  double total = 0;
  for (std::uint64_t seed = 0; seed < 100; ++seed) {
    const auto extra = static_cast<double>(inject(t, policy(10, 0.5, seed)).samples.size() - t.samples.size());
    EXPECT_LT(std::abs(extra - 500), 5 * std::sqrt(250.0)) << seed;
    total += extra;
  }
  EXPECT_LT(std::abs(total / 100 - 500), 5 * std::sqrt(250.0) / 10);
}

TEST(Obfuscate, ConstantStreamMeanLaw) {
  // For a constant reading v, the obfuscated value g v + o has mean v and
  // variance v^2 Var(g) + Var(o) across sessions.
  const double v = 9.81;
  SensorTrace base{"dev", "", AudioMode::none, Placement::desk, {}};
  for (int i = 0; i < 3; ++i) base.samples.push_back({i * 10.0, 0, 0, v, 0, 0, 0});
  const int sessions = 4000;
  double sum = 0, sq = 0;
  for (int s = 0; s < sessions; ++s) {
    base.session_id = "s" + std::to_string(s);
    const double x = session_affine(base, policy(10)).samples[0].az;
    sum += x;
    sq += x * x;
  }
  const double mean = sum / sessions, var = sq / sessions - mean * mean;
  const double expected_var = v * v * 1.0 / 12 + 100.0 / 12;
  EXPECT_NEAR(mean, v, 5 * std::sqrt(expected_var / sessions));
  EXPECT_NEAR(var, expected_var, 0.1 * expected_var);
}

TEST(Obfuscate, AffineShiftsFeaturesPredictably) {
  const auto t = tone_trace(500);
  auto p = policy();
  p.gain = {1.5, 1.5};
  p.gyro_offset = {0.2, 0.2};
  const auto out = session_affine(t, p);
  const std::vector<StreamKind> gx{StreamKind::gyro_x};
  const auto a = extract(t, gx, 1000), b = extract(out, gx, 1000);
  auto at = [](const FeatureVector& f, std::string_view name) {
    for (std::size_t i = 0; i < f.size(); ++i)
      if (kFeatureNames[f.ids[i].index] == name) return f.values[i];
    return std::nan("");
  };
  EXPECT_NEAR(at(b, "mean"), 1.5 * at(a, "mean") + 0.2, 1e-9);
  EXPECT_NEAR(at(b, "std_dev"), 1.5 * at(a, "std_dev"), 1e-9);
  EXPECT_NEAR(at(b, "entropy"), at(a, "entropy"), 1e-9);
  EXPECT_NEAR(at(b, "flux"), 2.25 * at(a, "flux"), 1e-9 * std::max(1.0, at(a, "flux")));
}

TEST(Obfuscate, PolicyValidationAndJson) {
  auto p = policy(2, 0.4, 9);
  const auto back = ObfuscationPolicy::from_json(nlohmann::json::parse(p.to_json().dump()));
  EXPECT_EQ(back.to_json(), p.to_json());
  p.injection_prob = 1.5;
  EXPECT_THROW(p.validate(), ValidationError);
  p.injection_prob = 0;
  p.gain = {-1, 1};
  EXPECT_THROW(session_affine(tone_trace(5), p), ValidationError);
}
