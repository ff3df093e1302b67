#pragma once

// Countermeasures applied to traces before they reach any consumer:
// per-session affine noise with (optionally scaled) ranges, and probabilistic
// injection of modified samples between existing timestamps.

#include <array>
#include <cmath>
#include <cstdint>
#include <random>
#include <string>

#include <json.hpp>

#include "common.hpp"
#include "trace.hpp"

namespace motionprint {

/// Keeps the midpoint and multiplies the half-width by `factor`.
inline Interval scale_range(Interval r, double factor) {
  if (!(factor > 0) || !std::isfinite(factor)) throw ValidationError("range scale factor must be positive");
  if (factor == 1.0) return r;
  const double m = r.mid();
  const double h = r.half_width() * factor;
  return {m - h, m + h};
}

// Lower clamp for scaled gain ranges so gains stay positive.
inline constexpr double kMinObfuscationGain = 0.01;

struct ObfuscationPolicy {
  Interval accel_offset{-0.5, 0.5};
  Interval gyro_offset{-0.1, 0.1};
  Interval gain{0.95, 1.05};
  double range_scale = 1.0;
  double injection_prob = 0.0;
  std::uint64_t seed = 0;

  void validate() const {
    for (const auto& r : {accel_offset, gyro_offset, gain})
      if (!(r.lo <= r.hi) || !std::isfinite(r.lo) || !std::isfinite(r.hi))
        throw ValidationError("obfuscation interval must satisfy lo <= hi");
    if (!(gain.lo > 0)) throw ValidationError("obfuscation gain range must be positive");
    if (!(range_scale > 0)) throw ValidationError("range scale must be positive");
    if (!(injection_prob >= 0 && injection_prob <= 1)) throw ValidationError("injection probability must be in [0,1]");
  }

  Interval effective_accel_offset() const { return scale_range(accel_offset, range_scale); }
  Interval effective_gyro_offset() const { return scale_range(gyro_offset, range_scale); }
  Interval effective_gain() const {
    auto g = scale_range(gain, range_scale);
    g.lo = std::max(g.lo, kMinObfuscationGain);
    g.hi = std::max(g.hi, g.lo);
    return g;
  }

  nlohmann::json to_json() const {
    auto iv = [](const Interval& r) { return nlohmann::json::array({r.lo, r.hi}); };
    return {{"accel_offset_range", iv(accel_offset)}, {"gyro_offset_range", iv(gyro_offset)},
            {"gain_range", iv(gain)},                 {"range_scale", range_scale},
            {"injection_prob", injection_prob},       {"seed", seed}};
  }

  static ObfuscationPolicy from_json(const nlohmann::json& j) {
    ObfuscationPolicy p;
    auto iv = [&](const char* key, Interval def) {
      if (!j.contains(key)) return def;
      const auto& a = j.at(key);
      return Interval{a.at(0).get<double>(), a.at(1).get<double>()};
    };
    p.accel_offset = iv("accel_offset_range", p.accel_offset);
    p.gyro_offset = iv("gyro_offset_range", p.gyro_offset);
    p.gain = iv("gain_range", p.gain);
    p.range_scale = j.value("range_scale", 1.0);
    p.injection_prob = j.value("injection_prob", 0.0);
    p.seed = j.value("seed", std::uint64_t{0});
    p.validate();
    return p;
  }
};

/// Per-channel gain/offset in the order ax, ay, az, gx, gy, gz.
struct AffineDraw {
  std::array<double, 6> gain{1, 1, 1, 1, 1, 1};
  std::array<double, 6> offset{0, 0, 0, 0, 0, 0};

  Sample apply(Sample s) const {
    std::array<double*, 6> ch{&s.ax, &s.ay, &s.az, &s.gx, &s.gy, &s.gz};
    for (std::size_t i = 0; i < 6; ++i) *ch[i] = *ch[i] * gain[i] + offset[i];
    return s;
  }
};

namespace detail {

inline double draw(std::mt19937_64& rng, Interval r) {
  if (r.lo == r.hi) return r.lo;
  return std::uniform_real_distribution<double>(r.lo, r.hi)(rng);
}

inline AffineDraw draw_affine(std::mt19937_64& rng, const ObfuscationPolicy& p) {
  AffineDraw d;
  const auto g = p.effective_gain();
  const auto ao = p.effective_accel_offset();
  const auto go = p.effective_gyro_offset();
  for (std::size_t i = 0; i < 6; ++i) {
    d.gain[i] = draw(rng, g);
    d.offset[i] = draw(rng, i < 3 ? ao : go);
  }
  return d;
}

inline std::mt19937_64 session_rng(const SensorTrace& t, const ObfuscationPolicy& p) {
  return std::mt19937_64(derive_seed(derive_seed(p.seed, t.device_id), t.session_id));
}

}  // namespace detail

/// The (gain, offset) pair this policy assigns to the trace's session.
inline AffineDraw session_draw(const SensorTrace& trace, const ObfuscationPolicy& policy) {
  policy.validate();
  auto rng = detail::session_rng(trace, policy);
  return detail::draw_affine(rng, policy);
}

/// value * gain + offset on every channel, one draw per channel per session.
inline SensorTrace session_affine(SensorTrace trace, const ObfuscationPolicy& policy) {
  const auto d = session_draw(trace, policy);
  for (auto& s : trace.samples) s = d.apply(s);
  return trace;
}

/// For every sample after the first, with probability injection_prob insert a
/// copy of it transformed by a fresh draw at a uniformly random time strictly
/// between the previous and current timestamps. Original samples get the
/// session draw, so injection_prob = 0 reproduces session_affine.
inline SensorTrace inject(const SensorTrace& trace, const ObfuscationPolicy& policy) {
  policy.validate();
  validate_trace(trace);
  auto rng = detail::session_rng(trace, policy);
  const auto session = detail::draw_affine(rng, policy);
  std::uniform_real_distribution<double> unit(0.0, 1.0);

  SensorTrace out = trace;
  out.samples.clear();
  out.samples.reserve(trace.samples.size() * 2);
  for (std::size_t i = 0; i < trace.samples.size(); ++i) {
    const auto& cur = trace.samples[i];
    if (i > 0 && unit(rng) < policy.injection_prob) {
      const auto fresh = detail::draw_affine(rng, policy);
      const double t_prev = trace.samples[i - 1].t;
      double t = t_prev;
      std::uniform_real_distribution<double> when(t_prev, cur.t);
      for (int tries = 0; !(t > t_prev && t < cur.t); ++tries) {
        if (tries > 64) throw ValidationError("cannot place injected sample between adjacent timestamps");
        t = when(rng);
      }
      Sample injected = fresh.apply(cur);
      injected.t = t;
      out.samples.push_back(injected);
    }
    out.samples.push_back(session.apply(cur));
  }
  return out;
}

/// Full countermeasure: injection when injection_prob > 0, otherwise the
/// per-session affine transform.
inline SensorTrace obfuscate(const SensorTrace& trace, const ObfuscationPolicy& policy) {
  return policy.injection_prob > 0 ? inject(trace, policy) : session_affine(trace, policy);
}

}  // namespace motionprint
