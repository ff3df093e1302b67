#include <gtest/gtest.h>

#include <numbers>

#include <motionprint/calibrate.hpp>
#include <motionprint/synth.hpp>

using namespace motionprint;

namespace {

DeviceProfile planted() {
  DeviceProfile p;
  p.device_id = "planted";
  p.accel_offset = {0.12, -0.4, 0.35};
  p.accel_gain = {0.97, 1.03, 1.004};
  p.gyro_offset = {0.01, -0.07, 0.03};
  p.gyro_gain = {1.02, 0.96, 1.01};
  return p;
}

SensorTrace static_trace(std::vector<double> az, double ax = 0) {
  SensorTrace t{"d", "s", AudioMode::none, Placement::desk, {}};
  for (std::size_t i = 0; i < az.size(); ++i) t.samples.push_back({10.0 * static_cast<double>(i), ax, 0, az[i]});
  return t;
}

}  // namespace

TEST(Calibrate, AccelClosedForm) {
  const auto e = accel_axis_from_readings(10.2, -9.5);
  EXPECT_NEAR(e.gain, 19.7 / 19.62, 1e-12);
  EXPECT_NEAR(e.gain, 1.00407, 1e-5);
  EXPECT_NEAR(e.offset, 0.35, 1e-12);
  const auto perfect = accel_axis_from_readings(kGravity, -kGravity);
  EXPECT_EQ(perfect.offset, 0.0);
  EXPECT_EQ(perfect.gain, 1.0);
}

TEST(Calibrate, GyroClosedForm) {
  const double pi = std::numbers::pi;
  const auto e = gyro_axis_from_angles(1.02 * pi + 0.02, -1.02 * pi + 0.03, 2, 3, pi);
  EXPECT_NEAR(e.offset, 0.01, 1e-9);
  EXPECT_NEAR(e.gain, 1.02, 1e-9);
  EXPECT_THROW(gyro_axis_from_angles(1, 1, 0, 0), ValidationError);
}

TEST(Calibrate, GyroClosedFormRoundTrip) {
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> o(-0.1, 0.1), s(0.9, 1.1), t(0.5, 4), th(0.5, 6);
  for (int i = 0; i < 200; ++i) {
    const double O = o(rng), S = s(rng), t1 = t(rng), t2 = t(rng), theta = th(rng);
    const auto e = gyro_axis_from_angles(O * t1 + S * theta, O * t2 - S * theta, t1, t2, theta);
    EXPECT_NEAR(e.offset, O, 1e-9);
    EXPECT_NEAR(e.gain, S, 1e-9);
  }
}

TEST(Calibrate, TrapezoidMatchesAnalyticIntegral) {
  const RotationProfile rot{0.5, 2.3, std::numbers::pi};
  SensorTrace t{"d", "s", AudioMode::none, Placement::desk, {}};
  for (int i = 0; i <= 350; ++i) t.samples.push_back({i * 10.0, 0, 0, 9.81, 0, 0, rot.rate(i * 0.01)});
  EXPECT_NEAR(integrate_rate(t, 2, 0, 3.5), rot.integral(0, 3.5), 1e-3);
  EXPECT_NEAR(rot.integral(0, 3.5), std::numbers::pi, 1e-12);
  const auto w = detect_rotation(t, 2);
  EXPECT_GT(w.begin, 0.35);
  EXPECT_LT(w.end, 3.0);
}

TEST(Calibrate, ApplyCorrection) {
  EXPECT_NEAR(correct(10.16, 0.35, 1.004), 9.7709, 5e-5);
  const CalibrationModel identity{Sensor::accel, {0, 0, 0}, {1, 1, 1}};
  const auto t = static_trace({9.8, 9.9, 10.0}, 0.3);
  EXPECT_EQ(apply_calibration(t, identity, std::nullopt), t);
  const CalibrationModel m{Sensor::accel, {0, 0, 0.35}, {1, 1, 1.004}};
  const auto c = apply_calibration(static_trace({10.16, 10.16}), m, std::nullopt);
  EXPECT_NEAR(c.samples[0].az, 9.7709, 5e-5);
  EXPECT_THROW(apply_calibration(t, CalibrationModel{Sensor::gyro, {0, 0, 0}, {1, 0, 1}}, std::nullopt), ValidationError);
}

TEST(Calibrate, ForwardModelInverse) {
  const auto p = planted();
  Scenario sc;
  sc.placement = Placement::hand;
  sc.noise = false;
  const auto measured = simulate_trace(p, sc, 5);
  const auto corrected = apply_calibration(measured, p.accel_model(), p.gyro_model());
  // Re-applying the forward model reproduces the measurements.
  for (std::size_t i = 0; i < measured.samples.size(); ++i) {
    const auto& m = measured.samples[i];
    const auto& c = corrected.samples[i];
    EXPECT_NEAR(c.az * p.accel_gain[2] + p.accel_offset[2], m.az, 1e-9);
    EXPECT_NEAR(c.gx * p.gyro_gain[0] + p.gyro_offset[0], m.gx, 1e-9);
  }
}

TEST(Calibrate, NoiselessAccelSessionRecoversModel) {
  const auto p = planted();
  const auto m = accel_offset_gain(simulate_accel_session(p, 2, 9, false));
  for (std::size_t a = 0; a < 3; ++a) {
    EXPECT_NEAR(m.offset[a], p.accel_offset[a], 1e-9);
    EXPECT_NEAR(m.gain[a], p.accel_gain[a], 1e-9);
  }
}

TEST(Calibrate, NoisyAccelSessionCloseToModel) {
  auto p = planted();
  p.accel_sigma = {0.05, 0.05, 0.05};
  const auto m = accel_offset_gain(simulate_accel_session(p, 3, 9, true));
  for (std::size_t a = 0; a < 3; ++a) {
    EXPECT_NEAR(m.offset[a], p.accel_offset[a], 5e-3);
    EXPECT_NEAR(m.gain[a], p.accel_gain[a], 1e-3);
  }
}

TEST(Calibrate, NoiselessGyroSessionRecoversModel) {
  const auto p = planted();
  GyroSessionOptions opt;
  opt.noise = false;
  const auto m = gyro_offset_gain(simulate_gyro_session(p, 2, 4, opt));
  for (std::size_t a = 0; a < 3; ++a) {
    EXPECT_NEAR(m.offset[a], p.gyro_offset[a], 1e-3);
    EXPECT_NEAR(m.gain[a], p.gyro_gain[a], 1e-3);
  }
}

TEST(Calibrate, NonStaticTraceRejected) {
  const auto p = planted();
  auto session = simulate_accel_session(p, 1, 1, false);
  auto& t = session.at(Direction::pz).front();
  for (std::size_t i = 0; i < t.samples.size(); ++i) t.samples[i].az += (i % 2 ? 2.0 : -2.0);
  EXPECT_THROW(accel_offset_gain(session), ValidationError);
  session.at(Direction::pz).clear();
  EXPECT_THROW(accel_offset_gain(session), ValidationError);
}

TEST(Calibrate, RotationRequired) {
  const auto p = planted();
  auto session = simulate_gyro_session(p, 1, 1, {.theta = std::numbers::pi, .angle_error_sd = 0, .noise = false});
  for (auto& s : session.at(Direction::nx).front().samples) s.gx = 0;
  EXPECT_THROW(gyro_offset_gain(session), ValidationError);
}

TEST(Calibrate, ModelJsonRoundTrip) {
  const CalibrationModel m{Sensor::gyro, {0.1, -0.2, 0.3}, {0.99, 1.01, 1.5}};
  const auto back = CalibrationModel::from_json(nlohmann::json::parse(m.to_json().dump()));
  EXPECT_EQ(back.offset, m.offset);
  EXPECT_EQ(back.gain, m.gain);
  EXPECT_EQ(back.sensor, Sensor::gyro);
}
