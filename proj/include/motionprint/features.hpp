#pragma once

// The 25 per-stream features: 10 temporal features computed on the raw
// irregular series and 15 spectral features computed on the resampled stream.
// Feature order within a stream follows the enums below and is stable.

#include <algorithm>
#include <array>
#include <cmath>
#include <numeric>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "fft.hpp"
#include "preprocess.hpp"
#include "trace.hpp"

namespace motionprint {

enum class TemporalFeature : std::size_t {
  mean, std_dev, avg_dev, skewness, kurtosis, rms, max, min, zcr, nonneg_count
};

enum class SpectralFeature : std::size_t {
  centroid, spread, spec_skewness, spec_kurtosis, entropy, flatness, brightness, rolloff,
  roughness, irregularity, spec_rms, low_energy_rate, flux, attack_time, attack_slope
};

inline constexpr std::size_t kTemporalCount = 10;
inline constexpr std::size_t kSpectralCount = 15;
inline constexpr std::size_t kFeaturesPerStream = kTemporalCount + kSpectralCount;

inline constexpr std::array<std::string_view, kFeaturesPerStream> kFeatureNames{
    "mean",          "std_dev",     "avg_dev",     "skewness",        "kurtosis",
    "rms",           "max",         "min",         "zcr",             "nonneg_count",
    "centroid",      "spread",      "spec_skewness", "spec_kurtosis", "entropy",
    "flatness",      "brightness",  "rolloff",     "roughness",       "irregularity",
    "spec_rms",      "low_energy_rate", "flux",    "attack_time",     "attack_slope"};

inline constexpr double kBrightnessCutoffHz = 1500.0;
inline constexpr double kRolloffFraction = 0.85;
inline constexpr double kPeakThreshold = 0.05;  // fraction of the global max magnitude
inline constexpr double kFrameSeconds = 0.05;

using TemporalValues = std::array<double, kTemporalCount>;
using SpectralValues = std::array<double, kSpectralCount>;

constexpr double get(const TemporalValues& v, TemporalFeature f) { return v[static_cast<std::size_t>(f)]; }
constexpr double get(const SpectralValues& v, SpectralFeature f) { return v[static_cast<std::size_t>(f)]; }

// ---- temporal --------------------------------------------------------------

/// Population moments; skewness/kurtosis are standardized central moments
/// (kurtosis is not excess) and both read 0 for a constant series.
inline TemporalValues temporal_features(std::span<const double> x) {
  if (x.size() < 2) throw std::invalid_argument("temporal features need at least 2 values");
  const double n = static_cast<double>(x.size());
  const double mean = std::accumulate(x.begin(), x.end(), 0.0) / n;
  double m2 = 0, m3 = 0, m4 = 0, abs_dev = 0, sq = 0, nonneg = 0;
  double lo = x[0], hi = x[0];
  for (double v : x) {
    const double d = v - mean;
    abs_dev += std::abs(d);
    m2 += d * d;
    m3 += d * d * d;
    m4 += d * d * d * d;
    sq += v * v;
    lo = std::min(lo, v);
    hi = std::max(hi, v);
    if (v >= 0) nonneg += 1;
  }
  m2 /= n;
  m3 /= n;
  m4 /= n;
  const double sd = std::sqrt(m2);
  const bool constant = !(sd > 0) || hi == lo;

  double crossings = 0;
  for (std::size_t i = 1; i < x.size(); ++i) {
    const int prev = x[i - 1] > 0 ? 1 : 0;
    const int cur = x[i] > 0 ? 1 : 0;
    crossings += std::abs(cur - prev);
  }

  TemporalValues out{};
  auto set = [&](TemporalFeature f, double v) { out[static_cast<std::size_t>(f)] = v; };
  set(TemporalFeature::mean, mean);
  set(TemporalFeature::std_dev, constant ? 0.0 : sd);
  set(TemporalFeature::avg_dev, constant ? 0.0 : abs_dev / n);
  set(TemporalFeature::skewness, constant ? 0.0 : m3 / (sd * sd * sd));
  set(TemporalFeature::kurtosis, constant ? 0.0 : m4 / (m2 * m2));
  set(TemporalFeature::rms, std::sqrt(sq / n));
  set(TemporalFeature::max, hi);
  set(TemporalFeature::min, lo);
  set(TemporalFeature::zcr, crossings / n);
  set(TemporalFeature::nonneg_count, nonneg);
  return out;
}

// ---- spectrum --------------------------------------------------------------

struct Spectrum {
  std::vector<double> bin_freqs;   // Hz
  std::vector<double> magnitudes;  // non-negative
  std::vector<double> pmf;         // magnitudes normalized to sum 1; uniform if all zero

  double total_magnitude() const { return std::accumulate(magnitudes.begin(), magnitudes.end(), 0.0); }
};

inline Spectrum make_spectrum(std::vector<double> bin_freqs, std::vector<double> magnitudes) {
  if (bin_freqs.size() != magnitudes.size())
    throw std::invalid_argument("spectrum: frequency and magnitude lengths differ");
  if (magnitudes.empty()) throw std::invalid_argument("spectrum: no bins");
  Spectrum s{std::move(bin_freqs), std::move(magnitudes), {}};
  const double total = s.total_magnitude();
  s.pmf.resize(s.magnitudes.size());
  if (total > 0) {
    for (std::size_t i = 0; i < s.pmf.size(); ++i) s.pmf[i] = s.magnitudes[i] / total;
  } else {
    std::fill(s.pmf.begin(), s.pmf.end(), 1.0 / static_cast<double>(s.pmf.size()));
  }
  return s;
}

/// One-sided magnitude spectrum (|X_k| / N) of the mean-removed stream,
/// rectangular window, bins 1..N/2. The DC bin is dropped: after mean removal
/// it holds only rounding residue, which would otherwise dominate flatness.
inline Spectrum fft_spectrum(const UniformStream& stream) {
  const auto n = stream.values.size();
  if (n < 8) throw std::invalid_argument("fft_spectrum needs at least 8 samples");
  const double mean = std::accumulate(stream.values.begin(), stream.values.end(), 0.0) / static_cast<double>(n);
  std::vector<double> centered(n);
  for (std::size_t i = 0; i < n; ++i) centered[i] = stream.values[i] - mean;
  const auto all = real_dft_magnitudes(centered);
  std::vector<double> freqs(all.size() - 1), mags(all.size() - 1);
  for (std::size_t k = 1; k < all.size(); ++k) {
    freqs[k - 1] = static_cast<double>(k) * stream.rate / static_cast<double>(n);
    mags[k - 1] = all[k] / static_cast<double>(n);
  }
  return make_spectrum(std::move(freqs), std::move(mags));
}

/// Per-frame RMS and power spectra of the mean-removed stream, 50 ms
/// non-overlapping frames (the trailing partial frame is dropped).
struct FrameSeries {
  std::vector<double> rms;
  std::vector<std::vector<double>> power;
};

inline FrameSeries frame_series(const UniformStream& stream, double frame_seconds = kFrameSeconds) {
  const auto n = stream.values.size();
  FrameSeries out;
  if (n == 0) return out;
  auto len = static_cast<std::size_t>(std::llround(frame_seconds * stream.rate));
  len = std::clamp<std::size_t>(len, 1, n);
  const double mean = std::accumulate(stream.values.begin(), stream.values.end(), 0.0) / static_cast<double>(n);
  std::vector<double> frame(len);
  for (std::size_t start = 0; start + len <= n; start += len) {
    double sq = 0;
    for (std::size_t i = 0; i < len; ++i) {
      frame[i] = stream.values[start + i] - mean;
      sq += frame[i] * frame[i];
    }
    out.rms.push_back(std::sqrt(sq / static_cast<double>(len)));
    auto mags = real_dft_magnitudes(frame);
    for (auto& m : mags) {
      m /= static_cast<double>(len);
      m *= m;
    }
    out.power.push_back(std::move(mags));
  }
  return out;
}

/// Interior local maxima strictly above both neighbours and above 5% of the
/// global maximum.
inline std::vector<std::size_t> spectral_peaks(std::span<const double> mags) {
  std::vector<std::size_t> peaks;
  if (mags.size() < 3) return peaks;
  const double top = *std::max_element(mags.begin(), mags.end());
  if (!(top > 0)) return peaks;
  const double floor = kPeakThreshold * top;
  for (std::size_t i = 1; i + 1 < mags.size(); ++i)
    if (mags[i] > mags[i - 1] && mags[i] > mags[i + 1] && mags[i] > floor) peaks.push_back(i);
  return peaks;
}

// Plomp-Levelt dissonance of two partials (Sethares parameterization).
inline double pair_dissonance(double f1, double a1, double f2, double a2) {
  if (f2 < f1) {
    std::swap(f1, f2);
    std::swap(a1, a2);
  }
  const double s = 0.24 / (0.0207 * f1 + 18.96);
  const double df = f2 - f1;
  return a1 * a2 * (std::exp(-3.5 * s * df) - std::exp(-5.75 * s * df));
}

/// Sentinels for a zero spectrum: every feature 0 except flatness = 1.
inline SpectralValues spectral_features(const Spectrum& spec, const FrameSeries& frames) {
  SpectralValues out{};
  auto set = [&](SpectralFeature f, double v) { out[static_cast<std::size_t>(f)] = v; };
  const auto& f = spec.bin_freqs;
  const auto& m = spec.magnitudes;
  const auto& w = spec.pmf;
  const std::size_t n = m.size();
  const double total = spec.total_magnitude();
  if (!(total > 0)) {
    set(SpectralFeature::flatness, 1.0);
    return out;
  }

  double centroid = 0;
  for (std::size_t i = 0; i < n; ++i) centroid += f[i] * w[i];
  double v2 = 0, v3 = 0, v4 = 0;
  for (std::size_t i = 0; i < n; ++i) {
    const double d = f[i] - centroid;
    v2 += d * d * w[i];
    v3 += d * d * d * w[i];
    v4 += d * d * d * d * w[i];
  }
  const double spread = std::sqrt(v2);
  set(SpectralFeature::centroid, centroid);
  set(SpectralFeature::spread, spread);
  set(SpectralFeature::spec_skewness, spread > 0 ? v3 / (spread * spread * spread) : 0.0);
  set(SpectralFeature::spec_kurtosis, spread > 0 ? v4 / (v2 * v2) : 0.0);

  double entropy = 0;
  for (double p : w)
    if (p > 0) entropy -= p * std::log2(p);
  set(SpectralFeature::entropy, entropy);

  // Geometric / arithmetic mean, in log space relative to the arithmetic mean
  // so a flat spectrum gives exactly 1; any zero bin gives 0.
  const double arith = total / static_cast<double>(n);
  double log_ratio = 0;
  bool has_zero = false;
  for (double v : m) {
    if (v > 0) log_ratio += std::log(v / arith);
    else has_zero = true;
  }
  set(SpectralFeature::flatness, has_zero ? 0.0 : std::min(1.0, std::exp(log_ratio / static_cast<double>(n))));

  double bright = 0;
  for (std::size_t i = 0; i < n; ++i)
    if (f[i] >= kBrightnessCutoffHz) bright += m[i];
  set(SpectralFeature::brightness, bright);

  double cumulative = 0;
  for (std::size_t i = 0; i < n; ++i) {
    cumulative += m[i];
    if (cumulative >= kRolloffFraction * total) {
      set(SpectralFeature::rolloff, f[i]);
      break;
    }
  }

  const auto peaks = spectral_peaks(m);
  if (peaks.size() >= 2) {
    double diss = 0;
    std::size_t pairs = 0;
    for (std::size_t a = 0; a < peaks.size(); ++a)
      for (std::size_t b = a + 1; b < peaks.size(); ++b) {
        diss += pair_dissonance(f[peaks[a]], m[peaks[a]], f[peaks[b]], m[peaks[b]]);
        ++pairs;
      }
    set(SpectralFeature::roughness, diss / static_cast<double>(pairs));
  }
  if (!peaks.empty()) {
    double num = 0, den = 0;
    for (std::size_t j = 0; j < peaks.size(); ++j) {
      const double a = m[peaks[j]];
      const double next = j + 1 < peaks.size() ? m[peaks[j + 1]] : 0.0;
      num += (a - next) * (a - next);
      den += a * a;
    }
    set(SpectralFeature::irregularity, num / den);

    // Rise from the preceding local minimum to each peak.
    double rise_time = 0, rise_slope = 0;
    for (std::size_t p : peaks) {
      std::size_t j = p;
      while (j > 0 && m[j - 1] < m[j]) --j;
      const double df = f[p] - f[j];
      rise_time += df;
      rise_slope += df > 0 ? (m[p] - m[j]) / df : 0.0;
    }
    set(SpectralFeature::attack_time, rise_time / static_cast<double>(peaks.size()));
    set(SpectralFeature::attack_slope, rise_slope / static_cast<double>(peaks.size()));
  }

  double sq = 0;
  for (double v : m) sq += v * v;
  set(SpectralFeature::spec_rms, std::sqrt(sq / static_cast<double>(n)));

  if (!frames.rms.empty()) {
    const double avg = std::accumulate(frames.rms.begin(), frames.rms.end(), 0.0) /
                       static_cast<double>(frames.rms.size());
    const auto low = std::count_if(frames.rms.begin(), frames.rms.end(), [&](double r) { return r < avg; });
    set(SpectralFeature::low_energy_rate, static_cast<double>(low) / static_cast<double>(frames.rms.size()));
  }
  if (frames.power.size() >= 2) {
    double flux = 0;
    for (std::size_t k = 1; k < frames.power.size(); ++k) {
      const auto& a = frames.power[k - 1];
      const auto& b = frames.power[k];
      double d2 = 0;
      for (std::size_t i = 0; i < a.size(); ++i) d2 += (b[i] - a[i]) * (b[i] - a[i]);
      flux += std::sqrt(d2) / static_cast<double>(a.size());
    }
    set(SpectralFeature::flux, flux / static_cast<double>(frames.power.size() - 1));
  }
  return out;
}

// ---- assembly --------------------------------------------------------------

struct FeatureId {
  StreamKind stream = StreamKind::accel_magnitude;
  std::size_t index = 0;  // position within kFeatureNames

  std::string str() const { return std::string(to_string(stream)) + "." + std::string(kFeatureNames[index]); }
  friend bool operator==(const FeatureId&, const FeatureId&) = default;
};

struct FeatureVector {
  std::string device_id;
  std::string session_id;
  std::vector<FeatureId> ids;
  std::vector<double> values;

  std::size_t size() const { return values.size(); }
};

/// Requested streams in canonical order, duplicates removed.
inline std::vector<StreamKind> canonical_streams(std::span<const StreamKind> streams) {
  std::vector<StreamKind> out;
  for (auto k : kAllStreams)
    if (std::find(streams.begin(), streams.end(), k) != streams.end()) out.push_back(k);
  return out;
}

inline std::vector<FeatureId> feature_ids(std::span<const StreamKind> streams) {
  std::vector<FeatureId> ids;
  for (auto k : canonical_streams(streams))
    for (std::size_t i = 0; i < kFeaturesPerStream; ++i) ids.push_back({k, i});
  return ids;
}

inline std::array<double, kFeaturesPerStream> stream_features(const IrregularSeries& series, StreamKind kind,
                                                              double rate) {
  const auto temporal = temporal_features(series.values);
  const auto uniform = cubic_spline_resample(series, rate, kind);
  const auto spectral = spectral_features(fft_spectrum(uniform), frame_series(uniform));
  std::array<double, kFeaturesPerStream> out{};
  std::copy(temporal.begin(), temporal.end(), out.begin());
  std::copy(spectral.begin(), spectral.end(), out.begin() + kTemporalCount);
  return out;
}

inline FeatureVector extract(const SensorTrace& trace, std::span<const StreamKind> streams,
                             double rate = kDefaultResampleRate) {
  validate_trace(trace);
  FeatureVector fv{trace.device_id, trace.session_id, feature_ids(streams), {}};
  fv.values.reserve(fv.ids.size());
  for (auto k : canonical_streams(streams)) {
    const auto block = stream_features(stream_series(trace, k), k, rate);
    for (double v : block) {
      if (!std::isfinite(v))
        throw ValidationError("non-finite feature on stream " + std::string(to_string(k)) + " of " +
                              trace.device_id + "/" + trace.session_id);
      fv.values.push_back(v);
    }
  }
  return fv;
}

inline FeatureVector extract(const SensorTrace& trace, double rate = kDefaultResampleRate) {
  return extract(trace, kAllStreams, rate);
}

/// Feature extraction over many traces on the work pool.
inline std::vector<FeatureVector> extract_all(std::span<const SensorTrace> traces,
                                              std::span<const StreamKind> streams,
                                              double rate = kDefaultResampleRate, unsigned workers = 0) {
  std::vector<FeatureVector> out(traces.size());
  parallel_for(traces.size(), [&](std::size_t i) { out[i] = extract(traces[i], streams, rate); }, workers);
  return out;
}

}  // namespace motionprint
