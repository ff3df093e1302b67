#pragma once

// Six-position accelerometer calibration, six-rotation gyroscope calibration
// and correction of traces with the estimated per-axis offset/gain model
//   measured = O + S * true.

#include <array>
#include <cmath>
#include <numbers>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "trace.hpp"

namespace motionprint {

inline constexpr double kGravity = 9.81;
inline constexpr double kStaticVarianceLimit = 0.05;   // variance of |a| over a static trace
inline constexpr double kRotationThreshold = 0.05;     // rad/s
inline constexpr double kRotationPaddingSeconds = 0.1;

enum class Sensor { accel, gyro };

inline std::string_view to_string(Sensor s) { return s == Sensor::accel ? "accel" : "gyro"; }
inline Sensor sensor_from_string(std::string_view s) {
  if (s == "accel") return Sensor::accel;
  if (s == "gyro") return Sensor::gyro;
  throw ValidationError("unknown sensor '" + std::string(s) + "'");
}

struct CalibrationModel {
  Sensor sensor = Sensor::accel;
  std::array<double, 3> offset{0, 0, 0};
  std::array<double, 3> gain{1, 1, 1};

  void validate() const {
    for (int i = 0; i < 3; ++i) {
      if (!std::isfinite(offset[i]) || !std::isfinite(gain[i]))
        throw ValidationError("calibration model has non-finite values");
      if (!(gain[i] > 0)) throw ValidationError("calibration gains must be positive");
    }
  }

  nlohmann::json to_json() const {
    return {{"sensor", to_string(sensor)}, {"O", offset}, {"S", gain}};
  }

  static CalibrationModel from_json(const nlohmann::json& j) {
    CalibrationModel m;
    m.sensor = sensor_from_string(j.at("sensor").get<std::string>());
    m.offset = j.at("O").get<std::array<double, 3>>();
    m.gain = j.at("S").get<std::array<double, 3>>();
    m.validate();
    return m;
  }
};

/// Orientation index: +x, -x, +y, -y, +z, -z.
enum class Direction { px = 0, nx, py, ny, pz, nz };

inline constexpr std::array<std::string_view, 6> kDirectionNames{"px", "nx", "py", "ny", "pz", "nz"};

struct CalibrationSession {
  Sensor sensor = Sensor::accel;
  std::array<std::vector<SensorTrace>, 6> traces;  // indexed by Direction
  double theta = std::numbers::pi;                  // gyro rotation angle, rad

  std::vector<SensorTrace>& at(Direction d) { return traces[static_cast<std::size_t>(d)]; }
  const std::vector<SensorTrace>& at(Direction d) const { return traces[static_cast<std::size_t>(d)]; }
};

// ---- closed forms ----------------------------------------------------------

struct AxisEstimate {
  double offset = 0;
  double gain = 1;
};

/// From mean readings with the axis along +g and -g.
inline AxisEstimate accel_axis_from_readings(double a_pos, double a_neg, double g = kGravity) {
  return {(a_pos + a_neg) / 2.0, (a_pos - a_neg) / (2.0 * g)};
}

/// From integrated angles of a +theta rotation taking t_pos seconds and a
/// -theta rotation taking t_neg seconds:
///   theta_pos = O t_pos + S theta,  theta_neg = O t_neg - S theta.
inline AxisEstimate gyro_axis_from_angles(double theta_pos, double theta_neg, double t_pos, double t_neg,
                                          double theta = std::numbers::pi) {
  if (!(t_pos + t_neg > 0)) throw ValidationError("rotation timespans must be positive");
  const double o = (theta_pos + theta_neg) / (t_pos + t_neg);
  const double s = (theta_pos - theta_neg - o * (t_pos - t_neg)) / (2.0 * theta);
  return {o, s};
}

/// Trapezoidal integral of one gyro axis over [t_begin, t_end] seconds,
/// using the samples inside the window.
inline double integrate_rate(const SensorTrace& trace, int axis, double t_begin, double t_end) {
  double area = 0;
  const Sample* prev = nullptr;
  for (const auto& s : trace.samples) {
    const double t = s.t * 1e-3;
    if (t < t_begin || t > t_end) continue;
    if (prev) {
      const double dt = t - prev->t * 1e-3;
      area += 0.5 * dt * (prev->gyro()[static_cast<std::size_t>(axis)] + s.gyro()[static_cast<std::size_t>(axis)]);
    }
    prev = &s;
  }
  return area;
}

struct RotationWindow {
  double begin = 0, end = 0;  // seconds
  double span() const { return end - begin; }
};

/// Interval where |rate| on the axis exceeds the threshold, padded 100 ms on
/// each side and clipped to the trace.
inline RotationWindow detect_rotation(const SensorTrace& trace, int axis) {
  const double t_first = trace.samples.front().t * 1e-3;
  const double t_last = trace.samples.back().t * 1e-3;
  std::optional<double> lo, hi;
  for (const auto& s : trace.samples) {
    if (std::abs(s.gyro()[static_cast<std::size_t>(axis)]) > kRotationThreshold) {
      if (!lo) lo = s.t * 1e-3;
      hi = s.t * 1e-3;
    }
  }
  if (!lo) throw ValidationError("no rotation detected in gyro calibration trace " + trace.session_id);
  return {std::max(t_first, *lo - kRotationPaddingSeconds), std::min(t_last, *hi + kRotationPaddingSeconds)};
}

// ---- session estimators ----------------------------------------------------

inline double axis_mean(const SensorTrace& t, int axis, bool gyro) {
  double sum = 0;
  for (const auto& s : t.samples) sum += gyro ? s.gyro()[static_cast<std::size_t>(axis)] : s.accel()[static_cast<std::size_t>(axis)];
  return sum / static_cast<double>(t.samples.size());
}

inline double magnitude_variance(const SensorTrace& t) {
  double mean = 0, m2 = 0;
  std::size_t n = 0;
  for (const auto& s : t.samples) {
    const double m = std::sqrt(s.ax * s.ax + s.ay * s.ay + s.az * s.az);
    ++n;
    const double d = m - mean;
    mean += d / static_cast<double>(n);
    m2 += d * (m - mean);
  }
  return n > 0 ? m2 / static_cast<double>(n) : 0.0;
}

/// Averages each direction's static traces, then applies the closed form
/// per axis. Throws ValidationError for missing or non-static traces.
inline CalibrationModel accel_offset_gain(const CalibrationSession& session, double g = kGravity) {
  CalibrationModel model{Sensor::accel, {}, {}};
  for (int axis = 0; axis < 3; ++axis) {
    std::array<double, 2> reading{};
    for (int sign = 0; sign < 2; ++sign) {
      const auto dir = static_cast<std::size_t>(2 * axis + sign);
      const auto& traces = session.traces[dir];
      if (traces.empty())
        throw ValidationError("accelerometer session has no traces for direction " + std::string(kDirectionNames[dir]));
      double sum = 0;
      for (const auto& t : traces) {
        validate_trace(t);
        const double var = magnitude_variance(t);
        if (!(var < kStaticVarianceLimit))
          throw ValidationError("trace " + t.session_id + " (" + std::string(kDirectionNames[dir]) +
                                ") is not static: magnitude variance " + format_double(var) + " >= " +
                                format_double(kStaticVarianceLimit));
        sum += axis_mean(t, axis, false);
      }
      reading[static_cast<std::size_t>(sign)] = sum / static_cast<double>(traces.size());
    }
    const auto est = accel_axis_from_readings(reading[0], reading[1], g);
    model.offset[static_cast<std::size_t>(axis)] = est.offset;
    model.gain[static_cast<std::size_t>(axis)] = est.gain;
  }
  model.validate();
  return model;
}

/// Per trace: detect the rotation window, integrate the axis rate with the
/// trapezoidal rule. Positive and negative traces are paired in order and the
/// per-pair estimates averaged.
inline CalibrationModel gyro_offset_gain(const CalibrationSession& session) {
  CalibrationModel model{Sensor::gyro, {}, {}};
  for (int axis = 0; axis < 3; ++axis) {
    const auto& pos = session.traces[static_cast<std::size_t>(2 * axis)];
    const auto& neg = session.traces[static_cast<std::size_t>(2 * axis + 1)];
    if (pos.empty() || neg.empty())
      throw ValidationError("gyroscope session needs traces in both directions of axis " + std::to_string(axis));
    const std::size_t pairs = std::min(pos.size(), neg.size());
    double o = 0, s = 0;
    for (std::size_t p = 0; p < pairs; ++p) {
      validate_trace(pos[p]);
      validate_trace(neg[p]);
      const auto wp = detect_rotation(pos[p], axis);
      const auto wn = detect_rotation(neg[p], axis);
      const double th_p = integrate_rate(pos[p], axis, wp.begin, wp.end);
      const double th_n = integrate_rate(neg[p], axis, wn.begin, wn.end);
      const auto est = gyro_axis_from_angles(th_p, th_n, wp.span(), wn.span(), session.theta);
      o += est.offset;
      s += est.gain;
    }
    model.offset[static_cast<std::size_t>(axis)] = o / static_cast<double>(pairs);
    model.gain[static_cast<std::size_t>(axis)] = s / static_cast<double>(pairs);
  }
  model.validate();
  return model;
}

// ---- correction ------------------------------------------------------------

inline double correct(double measured, double offset, double gain) { return (measured - offset) / gain; }

/// Applies (measured - O) / S per axis for each model supplied; metadata kept.
inline SensorTrace apply_calibration(SensorTrace trace, const std::optional<CalibrationModel>& accel,
                                     const std::optional<CalibrationModel>& gyro) {
  if (accel) accel->validate();
  if (gyro) gyro->validate();
  for (auto& s : trace.samples) {
    if (accel) {
      s.ax = correct(s.ax, accel->offset[0], accel->gain[0]);
      s.ay = correct(s.ay, accel->offset[1], accel->gain[1]);
      s.az = correct(s.az, accel->offset[2], accel->gain[2]);
    }
    if (gyro) {
      s.gx = correct(s.gx, gyro->offset[0], gyro->gain[0]);
      s.gy = correct(s.gy, gyro->offset[1], gyro->gain[1]);
      s.gz = correct(s.gz, gyro->offset[2], gyro->gain[2]);
    }
  }
  return trace;
}

inline SensorTrace apply_calibration(const SensorTrace& trace, std::span<const CalibrationModel> models) {
  std::optional<CalibrationModel> a, g;
  for (const auto& m : models) (m.sensor == Sensor::accel ? a : g) = m;
  return apply_calibration(trace, a, g);
}

}  // namespace motionprint
