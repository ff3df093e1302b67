#pragma once

// Synthetic device fleets with known per-axis offset/gain/noise, and trace
// simulation for desk/hand placement, audio stimulation and calibration
// sessions.

#include <array>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <numbers>
#include <random>
#include <string>
#include <vector>

#include <json.hpp>

#include "calibrate.hpp"
#include "common.hpp"
#include "trace.hpp"

namespace motionprint {

using Vec3 = std::array<double, 3>;

struct DeviceProfile {
  std::string device_id;
  Vec3 accel_offset{0, 0, 0};
  Vec3 accel_gain{1, 1, 1};
  Vec3 gyro_offset{0, 0, 0};
  Vec3 gyro_gain{1, 1, 1};
  Vec3 accel_sigma{0.005, 0.005, 0.005};
  Vec3 gyro_sigma{0.0005, 0.0005, 0.0005};
  // Narrowband response under audio stimulation.
  double stim_amplitude = 0;
  double stim_freq = 30;
  double stim_phase = 0;

  CalibrationModel accel_model() const { return {Sensor::accel, accel_offset, accel_gain}; }
  CalibrationModel gyro_model() const { return {Sensor::gyro, gyro_offset, gyro_gain}; }

  nlohmann::json to_json() const {
    return {{"device_id", device_id},       {"accel_offset", accel_offset}, {"accel_gain", accel_gain},
            {"gyro_offset", gyro_offset},   {"gyro_gain", gyro_gain},       {"accel_sigma", accel_sigma},
            {"gyro_sigma", gyro_sigma},     {"stim_amplitude", stim_amplitude},
            {"stim_freq", stim_freq},       {"stim_phase", stim_phase}};
  }

  static DeviceProfile from_json(const nlohmann::json& j) {
    DeviceProfile p;
    p.device_id = j.at("device_id").get<std::string>();
    p.accel_offset = j.at("accel_offset").get<Vec3>();
    p.accel_gain = j.at("accel_gain").get<Vec3>();
    p.gyro_offset = j.at("gyro_offset").get<Vec3>();
    p.gyro_gain = j.at("gyro_gain").get<Vec3>();
    p.accel_sigma = j.at("accel_sigma").get<Vec3>();
    p.gyro_sigma = j.at("gyro_sigma").get<Vec3>();
    p.stim_amplitude = j.at("stim_amplitude").get<double>();
    p.stim_freq = j.at("stim_freq").get<double>();
    p.stim_phase = j.at("stim_phase").get<double>();
    return p;
  }
};

/// Parameter ranges for generated fleets.
struct FleetSpec {
  Interval accel_offset{-0.5, 0.5};
  Interval gyro_offset{-0.1, 0.1};
  Interval gain{0.95, 1.05};
  Interval accel_sigma{0.005, 0.05};
  Interval gyro_sigma{0.0005, 0.005};
  Interval stim_amplitude{0.0, 0.02};
  Interval stim_freq{20.0, 45.0};

  /// Every device gets the lowest noise level; offset/gain are the only
  /// differences between devices.
  static FleetSpec noise_floor() {
    FleetSpec s;
    s.accel_sigma = {s.accel_sigma.lo, s.accel_sigma.lo};
    s.gyro_sigma = {s.gyro_sigma.lo, s.gyro_sigma.lo};
    return s;
  }
};

inline std::string device_label(std::size_t i) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "dev%03zu", i);
  return buf;
}

inline std::vector<DeviceProfile> generate_fleet(std::size_t n_devices, std::uint64_t seed,
                                                 const FleetSpec& spec = {}) {
  if (n_devices < 2) throw ValidationError("a fleet needs at least 2 devices");
  std::vector<DeviceProfile> fleet;
  fleet.reserve(n_devices);
  for (std::size_t i = 0; i < n_devices; ++i) {
    std::mt19937_64 rng(derive_seed(seed, static_cast<std::uint64_t>(i)));
    auto u = [&](Interval r) { return r.lo == r.hi ? r.lo : std::uniform_real_distribution<double>(r.lo, r.hi)(rng); };
    DeviceProfile p;
    p.device_id = device_label(i);
    for (int a = 0; a < 3; ++a) {
      p.accel_offset[a] = u(spec.accel_offset);
      p.accel_gain[a] = u(spec.gain);
      p.gyro_offset[a] = u(spec.gyro_offset);
      p.gyro_gain[a] = u(spec.gain);
      p.accel_sigma[a] = u(spec.accel_sigma);
      p.gyro_sigma[a] = u(spec.gyro_sigma);
    }
    p.stim_amplitude = u(spec.stim_amplitude);
    p.stim_freq = u(spec.stim_freq);
    p.stim_phase = u({0.0, 2 * std::numbers::pi});
    fleet.push_back(std::move(p));
  }
  return fleet;
}

struct Scenario {
  Placement placement = Placement::desk;
  AudioMode audio_mode = AudioMode::none;
  double duration_s = 5.0;
  double rate_hz = 100.0;
  double jitter_ms = 2.0;  // uniform +- perturbation of each timestamp
  bool noise = true;
};

/// True (error-free) specific force and rotation rate at time t seconds.
struct TrueMotion {
  Vec3 accel;
  Vec3 gyro;
};

namespace detail {

struct Tone {
  double amplitude, freq, phase;
  double at(double t) const { return amplitude * std::sin(2 * std::numbers::pi * freq * t + phase); }
};

inline std::vector<double> jittered_times_ms(const Scenario& sc, std::mt19937_64& rng) {
  if (!(sc.duration_s > 0) || !(sc.rate_hz > 0)) throw ValidationError("scenario duration and rate must be positive");
  const double dt = 1000.0 / sc.rate_hz;
  if (!(sc.jitter_ms >= 0 && sc.jitter_ms < dt / 2))
    throw ValidationError("jitter must be below half the sampling interval");
  const auto n = static_cast<std::size_t>(std::floor(sc.duration_s * sc.rate_hz + 1e-9)) + 1;
  std::uniform_real_distribution<double> jit(-sc.jitter_ms, sc.jitter_ms);
  std::vector<double> t(n);
  for (std::size_t k = 0; k < n; ++k) {
    const double j = sc.jitter_ms > 0 ? jit(rng) : 0.0;
    t[k] = std::max(0.0, static_cast<double>(k) * dt + j);
  }
  return t;
}

// Applies measured = gain * true + offset + N(0, sigma) per axis.
template <typename MotionFn>
std::vector<Sample> measure(const DeviceProfile& p, std::span<const double> times_ms, MotionFn&& truth,
                            bool noise, std::mt19937_64& rng) {
  std::normal_distribution<double> gauss(0.0, 1.0);
  std::vector<Sample> out;
  out.reserve(times_ms.size());
  for (double t_ms : times_ms) {
    const TrueMotion m = truth(t_ms * 1e-3);
    Sample s{t_ms};
    std::array<double*, 3> acc{&s.ax, &s.ay, &s.az};
    std::array<double*, 3> gyr{&s.gx, &s.gy, &s.gz};
    for (std::size_t a = 0; a < 3; ++a) {
      *acc[a] = p.accel_gain[a] * m.accel[a] + p.accel_offset[a] + (noise ? p.accel_sigma[a] * gauss(rng) : 0.0);
      *gyr[a] = p.gyro_gain[a] * m.gyro[a] + p.gyro_offset[a] + (noise ? p.gyro_sigma[a] * gauss(rng) : 0.0);
    }
    out.push_back(s);
  }
  return out;
}

}  // namespace detail

/// One capture session: device at rest with gravity on +z, optional hand
/// tremor and audio-stimulation response, measured through the device's
/// error model at a jittered sampling grid.
inline SensorTrace simulate_trace(const DeviceProfile& profile, const Scenario& scenario, std::uint64_t seed,
                                  std::string session_id = {}) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  const double two_pi = 2 * std::numbers::pi;

  // Hand tremor: 3 tones per channel, 0.5-4 Hz, total amplitude <= 0.3 m/s^2
  // (accel) or 0.05 rad/s (gyro).
  std::array<std::vector<detail::Tone>, 6> tremor;
  if (scenario.placement == Placement::hand) {
    for (std::size_t ch = 0; ch < 6; ++ch)
      for (int k = 0; k < 3; ++k)
        tremor[ch].push_back({(ch < 3 ? 0.3 : 0.05) / 3.0 * unit(rng), 0.5 + 3.5 * unit(rng), two_pi * unit(rng)});
  }
  std::vector<detail::Tone> song;
  double stim_scale = 0;
  if (scenario.audio_mode == AudioMode::sine20k) stim_scale = 1.0;
  if (scenario.audio_mode == AudioMode::song) {
    stim_scale = 0.5;
    for (int k = 0; k < 3; ++k) song.push_back({0.01 * unit(rng), 1.0 + 44.0 * unit(rng), two_pi * unit(rng)});
  }
  const detail::Tone stim{profile.stim_amplitude * stim_scale, profile.stim_freq, profile.stim_phase};

  auto truth = [&](double t) {
    TrueMotion m{{0, 0, kGravity}, {0, 0, 0}};
    for (std::size_t ch = 0; ch < 6; ++ch) {
      double v = 0;
      for (const auto& tone : tremor[ch]) v += tone.at(t);
      (ch < 3 ? m.accel[ch] : m.gyro[ch - 3]) += v;
    }
    if (stim_scale > 0) {
      const double s = stim.at(t);
      m.accel[2] += s;
      m.accel[0] += 0.5 * s;
      for (std::size_t a = 0; a < 3; ++a)
        m.gyro[a] += 0.25 * stim.amplitude * std::sin(two_pi * stim.freq * t + stim.phase + static_cast<double>(a));
    }
    for (const auto& tone : song) m.accel[2] += tone.at(t);
    return m;
  };

  const auto times = detail::jittered_times_ms(scenario, rng);
  SensorTrace trace;
  trace.device_id = profile.device_id;
  trace.session_id = session_id.empty() ? profile.device_id + "-seed" + std::to_string(seed) : std::move(session_id);
  trace.audio_mode = scenario.audio_mode;
  trace.placement = scenario.placement;
  trace.samples = detail::measure(profile, times, truth, scenario.noise, rng);
  normalize_trace(trace);
  return trace;
}

inline std::string session_label(const std::string& device_id, std::size_t s) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "-s%02zu", s);
  return device_id + buf;
}

/// sessions_per_device traces per profile, device-major order.
inline std::vector<SensorTrace> simulate_fleet(std::span<const DeviceProfile> fleet, std::size_t sessions_per_device,
                                               const Scenario& scenario, std::uint64_t seed, unsigned workers = 0) {
  std::vector<SensorTrace> out(fleet.size() * sessions_per_device);
  parallel_for(out.size(), [&](std::size_t i) {
    const auto& p = fleet[i / sessions_per_device];
    const auto sid = session_label(p.device_id, i % sessions_per_device);
    out[i] = simulate_trace(p, scenario, derive_seed(seed, sid), sid);
  }, workers);
  return out;
}

// ---- calibration sessions --------------------------------------------------

/// Static traces with gravity along each of +-x, +-y, +-z.
inline CalibrationSession simulate_accel_session(const DeviceProfile& profile, std::size_t per_direction,
                                                 std::uint64_t seed, bool noise = true, double duration_s = 2.0) {
  CalibrationSession session;
  session.sensor = Sensor::accel;
  Scenario sc;
  sc.duration_s = duration_s;
  for (std::size_t d = 0; d < 6; ++d) {
    Vec3 g{0, 0, 0};
    g[d / 2] = (d % 2 == 0 ? 1.0 : -1.0) * kGravity;
    for (std::size_t k = 0; k < per_direction; ++k) {
      const auto sid = profile.device_id + "-cal-" + std::string(kDirectionNames[d]) + "-" + std::to_string(k);
      std::mt19937_64 rng(derive_seed(seed, sid));
      const auto times = detail::jittered_times_ms(sc, rng);
      SensorTrace t{profile.device_id, sid, AudioMode::none, Placement::desk,
                    detail::measure(profile, times, [&](double) { return TrueMotion{g, {0, 0, 0}}; }, noise, rng)};
      normalize_trace(t);
      session.traces[d].push_back(std::move(t));
    }
  }
  return session;
}

struct GyroSessionOptions {
  double theta = std::numbers::pi;
  double angle_error_sd = 0.0;     // rad; spread of the actually performed rotation
  Interval rotation_seconds{1.5, 3.0};
  double pre_roll_s = 0.5;
  double post_roll_s = 0.5;
  double rate_hz = 100.0;
  double jitter_ms = 2.0;
  bool noise = true;
};

/// Smooth single rotation about `axis`: omega(t) = (angle/T)(1 - cos(2 pi t/T))
/// on [start, start + T], zero elsewhere. Integrates to `angle`.
struct RotationProfile {
  double start = 0, span = 1, angle = std::numbers::pi;

  double rate(double t) const {
    if (t < start || t > start + span) return 0.0;
    return angle / span * (1 - std::cos(2 * std::numbers::pi * (t - start) / span));
  }
  /// Integral of rate over [a, b].
  double integral(double a, double b) const {
    auto prim = [&](double t) {
      t = std::clamp(t, start, start + span);
      const double x = t - start;
      return angle / span * (x - span / (2 * std::numbers::pi) * std::sin(2 * std::numbers::pi * x / span));
    };
    return prim(b) - prim(a);
  }
};

inline CalibrationSession simulate_gyro_session(const DeviceProfile& profile, std::size_t per_direction,
                                                std::uint64_t seed, const GyroSessionOptions& opt = {}) {
  CalibrationSession session;
  session.sensor = Sensor::gyro;
  session.theta = opt.theta;
  for (std::size_t d = 0; d < 6; ++d) {
    const std::size_t axis = d / 2;
    const double sign = d % 2 == 0 ? 1.0 : -1.0;
    for (std::size_t k = 0; k < per_direction; ++k) {
      const auto sid = profile.device_id + "-rot-" + std::string(kDirectionNames[d]) + "-" + std::to_string(k);
      std::mt19937_64 rng(derive_seed(seed, sid));
      std::uniform_real_distribution<double> span(opt.rotation_seconds.lo, opt.rotation_seconds.hi);
      std::normal_distribution<double> angle_err(0.0, 1.0);
      RotationProfile rot{opt.pre_roll_s, span(rng), opt.theta + opt.angle_error_sd * angle_err(rng)};
      Scenario sc;
      sc.duration_s = opt.pre_roll_s + rot.span + opt.post_roll_s;
      sc.rate_hz = opt.rate_hz;
      sc.jitter_ms = opt.jitter_ms;
      const auto times = detail::jittered_times_ms(sc, rng);
      auto truth = [&](double t) {
        TrueMotion m{{0, 0, kGravity}, {0, 0, 0}};
        m.gyro[axis] = sign * rot.rate(t);
        return m;
      };
      SensorTrace t{profile.device_id, sid, AudioMode::none, Placement::desk,
                    detail::measure(profile, times, truth, opt.noise, rng)};
      normalize_trace(t);
      session.traces[d].push_back(std::move(t));
    }
  }
  return session;
}

inline nlohmann::json fleet_to_json(std::span<const DeviceProfile> fleet) {
  nlohmann::json j = nlohmann::json::array();
  for (const auto& p : fleet) j.push_back(p.to_json());
  return j;
}

}  // namespace motionprint
