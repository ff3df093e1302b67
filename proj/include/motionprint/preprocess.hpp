#pragma once

// Trace -> scalar streams, and natural cubic-spline resampling onto a
// uniform grid.

#include <array>
#include <cmath>
#include <span>
#include <stdexcept>
#include <vector>

#include "trace.hpp"

namespace motionprint {

inline constexpr double kDefaultResampleRate = 8000.0;

/// Irregularly sampled scalar series; times in seconds.
struct IrregularSeries {
  std::vector<double> times;
  std::vector<double> values;

  std::size_t size() const { return values.size(); }
};

struct UniformStream {
  StreamKind kind = StreamKind::accel_magnitude;
  double rate = kDefaultResampleRate;  // Hz
  std::vector<double> values;
  double origin_duration = 0;  // seconds
};

inline std::vector<double> trace_times_seconds(const SensorTrace& trace) {
  std::vector<double> t;
  t.reserve(trace.samples.size());
  for (const auto& s : trace.samples) t.push_back(s.t * 1e-3);
  return t;
}

inline IrregularSeries magnitude_stream(const SensorTrace& trace) {
  IrregularSeries out{trace_times_seconds(trace), {}};
  out.values.reserve(trace.samples.size());
  for (const auto& s : trace.samples) out.values.push_back(std::sqrt(s.ax * s.ax + s.ay * s.ay + s.az * s.az));
  return out;
}

inline std::array<IrregularSeries, 3> gyro_streams(const SensorTrace& trace) {
  const auto t = trace_times_seconds(trace);
  std::array<IrregularSeries, 3> out{IrregularSeries{t, {}}, IrregularSeries{t, {}},
                                     IrregularSeries{t, {}}};
  for (auto& s : out) s.values.reserve(t.size());
  for (const auto& s : trace.samples) {
    out[0].values.push_back(s.gx);
    out[1].values.push_back(s.gy);
    out[2].values.push_back(s.gz);
  }
  return out;
}

inline IrregularSeries stream_series(const SensorTrace& trace, StreamKind kind) {
  if (kind == StreamKind::accel_magnitude) return magnitude_stream(trace);
  auto g = gyro_streams(trace);
  return std::move(g[static_cast<int>(kind) - 1]);
}

/// Natural cubic spline (zero second derivative at both ends).
class NaturalCubicSpline {
public:
  NaturalCubicSpline(std::span<const double> x, std::span<const double> y)
      : x_(x.begin(), x.end()), y_(y.begin(), y.end()), m_(x.size(), 0.0) {
    const std::size_t n = x_.size();
    if (n != y_.size()) throw std::invalid_argument("spline: x and y lengths differ");
    if (n < 2) throw std::invalid_argument("spline: need at least 2 knots");
    for (std::size_t i = 1; i < n; ++i)
      if (!(x_[i] > x_[i - 1])) throw std::invalid_argument("spline: knots must strictly increase");
    if (n == 2) return;

    // Tridiagonal system for interior second derivatives (Thomas algorithm).
    const std::size_t k = n - 2;
    std::vector<double> diag(k), upper(k), rhs(k);
    for (std::size_t i = 1; i + 1 < n; ++i) {
      const double h0 = x_[i] - x_[i - 1];
      const double h1 = x_[i + 1] - x_[i];
      diag[i - 1] = 2.0 * (h0 + h1);
      upper[i - 1] = h1;
      rhs[i - 1] = 6.0 * ((y_[i + 1] - y_[i]) / h1 - (y_[i] - y_[i - 1]) / h0);
    }
    for (std::size_t i = 1; i < k; ++i) {
      const double lower = x_[i + 1] - x_[i];  // h_i couples row i to row i-1
      const double w = lower / diag[i - 1];
      diag[i] -= w * upper[i - 1];
      rhs[i] -= w * rhs[i - 1];
    }
    m_[k] = rhs[k - 1] / diag[k - 1];
    for (std::size_t i = k - 1; i-- > 0;) m_[i + 1] = (rhs[i] - upper[i] * m_[i + 2]) / diag[i];
  }

  double operator()(double x) const { return eval_segment(segment_for(x), x); }

  /// Evaluates at ascending query points with a single forward scan.
  std::vector<double> evaluate_sorted(std::span<const double> xs) const {
    std::vector<double> out;
    out.reserve(xs.size());
    std::size_t seg = 0;
    for (double x : xs) {
      while (seg + 2 < x_.size() && x >= x_[seg + 1]) ++seg;
      out.push_back(eval_segment(seg, x));
    }
    return out;
  }

  std::span<const double> second_derivatives() const { return m_; }

private:
  std::size_t segment_for(double x) const {
    auto it = std::upper_bound(x_.begin(), x_.end(), x);
    std::size_t idx = it == x_.begin() ? 0 : static_cast<std::size_t>(it - x_.begin()) - 1;
    return std::min(idx, x_.size() - 2);
  }

  double eval_segment(std::size_t i, double x) const {
    const double h = x_[i + 1] - x_[i];
    const double a = x_[i + 1] - x;
    const double b = x - x_[i];
    if (b == 0.0) return y_[i];
    if (a == 0.0) return y_[i + 1];
    return (m_[i] * a * a * a + m_[i + 1] * b * b * b) / (6.0 * h) +
           (y_[i] / h - m_[i] * h / 6.0) * a + (y_[i + 1] / h - m_[i + 1] * h / 6.0) * b;
  }

  std::vector<double> x_, y_, m_;
};

/// Resamples onto t0, t0 + 1/rate, ... up to the last knot; the final partial
/// interval is dropped.
inline UniformStream cubic_spline_resample(const IrregularSeries& series, double rate,
                                           StreamKind kind = StreamKind::accel_magnitude) {
  if (!(rate > 0) || !std::isfinite(rate)) throw std::invalid_argument("resample rate must be > 0");
  if (series.times.size() != series.values.size())
    throw std::invalid_argument("series times and values differ in length");
  if (series.size() < 2) throw std::invalid_argument("resample needs at least 2 points");
  for (std::size_t i = 1; i < series.size(); ++i)
    if (!(series.times[i] > series.times[i - 1]))
      throw std::invalid_argument("resample needs strictly increasing times");

  NaturalCubicSpline spline(series.times, series.values);
  const double t0 = series.times.front();
  const double duration = series.times.back() - t0;
  const auto n = static_cast<std::size_t>(std::floor(duration * rate + 1e-9)) + 1;
  std::vector<double> grid(n);
  for (std::size_t i = 0; i < n; ++i) grid[i] = t0 + static_cast<double>(i) / rate;

  return {kind, rate, spline.evaluate_sorted(grid), duration};
}

}  // namespace motionprint
