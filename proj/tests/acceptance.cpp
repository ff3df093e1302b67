// Acceptance suite: one PASS/FAIL line per criterion, nonzero exit if any
// criterion fails. Synthetic conditions share one fleet and one set of
// featurized datasets.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <numbers>
#include <random>
#include <string>

#include <motionprint/motionprint.hpp>

#include "oracles.hpp"

using namespace motionprint;

namespace {

int failures = 0;

void report(int id, bool ok, const std::string& detail) {
  std::printf("criterion %2d: %s  %s\n", id, ok ? "PASS" : "FAIL", detail.c_str());
  std::fflush(stdout);
  if (!ok) ++failures;
}

std::string fmt(const char* f, double a, double b = 0, double c = 0, double d = 0) {
  char buf[256];
  std::snprintf(buf, sizeof buf, f, a, b, c, d);
  return buf;
}

// Counts failed checks inside an analytic criterion and remembers the first.
struct Checks {
  int total = 0, failed = 0;
  std::string first;

  void expect(bool ok, const std::string& what) {
    ++total;
    if (!ok && failed++ == 0) first = what;
  }
  void near(double got, double want, double tol, const std::string& what) {
    expect(std::abs(got - want) <= tol, what + fmt(" got %.12g want %.12g", got, want));
  }
  std::string summary() const {
    return std::to_string(total - failed) + "/" + std::to_string(total) + " checks" +
           (failed ? "; first failure: " + first : "");
  }
};

double timed(const char* label, const std::function<double()>& fn) {
  const auto t0 = std::chrono::steady_clock::now();
  const double v = fn();
  const double s = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  std::printf("  [%s: %.1f s]\n", label, s);
  return v;
}

UniformStream stream_of(std::vector<double> v, double rate) { return {StreamKind::accel_magnitude, rate, std::move(v), 0}; }

// ---- analytic criteria ------------------------------------------------------

void metrics_exactness() {
  std::mt19937_64 rng(20240607);
  Checks c;
  for (int fixture = 0; fixture < 20; ++fixture) {
    const int classes = 2 + fixture % 10;
    const auto pairs = oracle::random_predictions(rng, classes, 15 + 11 * fixture);
    ConfusionCounts cc(static_cast<std::size_t>(classes));
    for (const auto& [t, p] : pairs) cc.add(t, p);
    const auto got = compute_metrics(cc);
    const auto ref = oracle::brute_force_metrics(pairs, classes);
    const auto tag = "fixture " + std::to_string(fixture);
    for (std::size_t k = 0; k < static_cast<std::size_t>(classes); ++k) {
      c.expect(got.per_class[k].precision == ref.precision[k], tag + " precision");
      c.expect(got.per_class[k].recall == ref.recall[k], tag + " recall");
      c.expect(got.per_class[k].f_score == ref.f[k], tag + " F");
    }
    c.expect(got.avg_precision == ref.avg_precision, tag + " AvgPr");
    c.expect(got.avg_recall == ref.avg_recall, tag + " AvgRe");
    c.expect(got.avg_f == ref.avg_f, tag + " AvgF");
  }
  report(7, c.failed == 0, "20 randomized fixtures vs brute force, zero tolerance: " + c.summary());
}

void feature_suite() {
  using TF = TemporalFeature;
  using SF = SpectralFeature;
  Checks c;

  const auto k = temporal_features(std::vector<double>(4, 9.81));
  c.near(get(k, TF::mean), 9.81, 1e-12, "constant mean");
  for (auto f : {TF::std_dev, TF::avg_dev, TF::skewness, TF::kurtosis, TF::zcr})
    c.expect(get(k, f) == 0.0, "constant-signal moment " + std::string(kFeatureNames[static_cast<std::size_t>(f)]));
  c.near(get(k, TF::rms), 9.81, 1e-12, "constant rms");
  c.expect(get(k, TF::max) == 9.81 && get(k, TF::min) == 9.81, "constant max/min");
  c.expect(get(temporal_features(std::vector<double>{1, -1, 1, -1}), TF::zcr) == 0.75, "zcr [1,-1,1,-1]");
  c.expect(get(temporal_features(std::vector<double>{-1, -2, -3}), TF::zcr) == 0.0, "zcr all negative");
  c.near(get(temporal_features(std::vector<double>{3, 4}), TF::rms), std::sqrt(12.5), 1e-15, "rms [3,4]");

  std::vector<double> f(64), m(64, 0.0);
  for (std::size_t i = 0; i < 64; ++i) f[i] = 10.0 * static_cast<double>(i);
  m[10] = 1.7;
  const auto pm = spectral_features(make_spectrum(f, m), {});
  c.expect(get(pm, SF::centroid) == 100.0, "point-mass centroid");
  c.expect(get(pm, SF::spread) == 0.0, "point-mass spread");
  c.expect(get(pm, SF::entropy) == 0.0, "point-mass entropy");
  c.expect(get(pm, SF::rolloff) == 100.0, "point-mass rolloff");
  const auto uni = spectral_features(make_spectrum({0, 1, 2, 3, 4, 5, 6, 7}, std::vector<double>(8, 0.2)), {});
  c.near(get(uni, SF::entropy), 3.0, 1e-12, "uniform entropy");
  c.expect(get(uni, SF::flatness) == 1.0, "flat-spectrum flatness");

  // Spline reconstruction of a 5 Hz sinusoid from jittered 100 Hz knots.
  std::mt19937_64 rng(4);
  std::uniform_real_distribution<double> jit(-0.002, 0.002);
  IrregularSeries s;
  for (int i = 0; i <= 100; ++i) {
    const double t = i == 0 || i == 100 ? i * 0.01 : i * 0.01 + jit(rng);
    s.times.push_back(t);
    s.values.push_back(std::sin(2 * std::numbers::pi * 5 * t));
  }
  const auto up = cubic_spline_resample(s, 8000);
  double worst = 0;
  for (std::size_t i = 0; i < up.values.size(); ++i)
    worst = std::max(worst, std::abs(up.values[i] - std::sin(2 * std::numbers::pi * 5 * static_cast<double>(i) / 8000)));
  c.expect(up.values.size() == 8001, "resampled length");
  c.expect(worst < 1e-3, fmt("spline sinusoid max error %.3g", worst));

  // Scale awareness: amplitude features scale, shape features do not.
  std::normal_distribution<double> g;
  IrregularSeries noise;
  for (int i = 0; i <= 200; ++i) {
    noise.times.push_back(i * 0.01);
    noise.values.push_back(0.3 + g(rng));
  }
  const auto base = stream_features(noise, StreamKind::gyro_x, 1000);
  auto scaled = noise;
  for (auto& v : scaled.values) v *= 4;
  const auto sc = stream_features(scaled, StreamKind::gyro_x, 1000);
  for (auto ft : {TF::mean, TF::std_dev, TF::rms, TF::max, TF::min}) {
    const auto i = static_cast<std::size_t>(ft);
    c.near(sc[i], 4 * base[i], 1e-12 * std::max(1.0, std::abs(4 * base[i])), "scaled " + std::string(kFeatureNames[i]));
  }
  for (auto ft : {SF::centroid, SF::entropy, SF::flatness, SF::spread}) {
    const auto i = kTemporalCount + static_cast<std::size_t>(ft);
    c.near(sc[i], base[i], 1e-9 * std::max(1.0, base[i]), "scale-invariant " + std::string(kFeatureNames[i]));
  }

  // Moments and rolloff against a naive recomputation, FFT against a naive DFT.
  std::uniform_real_distribution<double> u(0, 1);
  for (int rep = 0; rep < 10; ++rep) {
    std::vector<double> ff, mm;
    for (int i = 0; i < 20 + rep; ++i) {
      ff.push_back(5.0 * i);
      mm.push_back(u(rng));
    }
    const auto sp = spectral_features(make_spectrum(ff, mm), {});
    const auto ref = oracle::weighted_moments(ff, mm);
    c.near(get(sp, SF::centroid), ref.centroid, 1e-9, "centroid vs oracle");
    c.near(get(sp, SF::spread), ref.spread, 1e-9, "spread vs oracle");
    c.expect(get(sp, SF::rolloff) == oracle::rolloff(ff, mm), "rolloff vs oracle");
  }
  std::vector<double> x(64);
  for (auto& v : x) v = g(rng);
  const auto spec = fft_spectrum(stream_of(x, 64));
  double mean = 0;
  for (double v : x) mean += v / 64;
  for (auto& v : x) v -= mean;
  const auto dft = oracle::dft_magnitudes(x);
  for (std::size_t i = 1; i < dft.size(); ++i) c.near(spec.magnitudes[i - 1], dft[i] / 64, 1e-12, "fft vs naive dft");

  report(8, c.failed == 0, "feature analytic suite: " + c.summary());
}

void calibration_algebra() {
  Checks c;
  std::mt19937_64 rng(99);
  std::uniform_real_distribution<double> off(-0.5, 0.5), gain(0.9, 1.1), span(0.5, 4.0), ang(0.5, 2 * std::numbers::pi);
  double worst_closed = 0;
  for (int i = 0; i < 1000; ++i) {
    const double o = off(rng), s = gain(rng);
    const auto a = accel_axis_from_readings(s * kGravity + o, -s * kGravity + o);
    const double t1 = span(rng), t2 = span(rng), th = ang(rng), go = off(rng) / 5;
    const auto gy = gyro_axis_from_angles(go * t1 + s * th, go * t2 - s * th, t1, t2, th);
    worst_closed = std::max({worst_closed, std::abs(a.offset - o), std::abs(a.gain - s), std::abs(gy.offset - go),
                             std::abs(gy.gain - s)});
  }
  c.expect(worst_closed <= 1e-9, fmt("closed-form round trip error %.3g", worst_closed));
  const auto ex = gyro_axis_from_angles(1.02 * std::numbers::pi + 0.02, -1.02 * std::numbers::pi + 0.03, 2, 3);
  c.near(ex.offset, 0.01, 1e-9, "gyro example O");
  c.near(ex.gain, 1.02, 1e-9, "gyro example S");

  double worst_accel = 0, worst_gyro = 0;
  for (const auto& p : generate_fleet(10, 5)) {
    const auto am = accel_offset_gain(simulate_accel_session(p, 1, 3, false));
    GyroSessionOptions opt;
    opt.noise = false;
    const auto gm = gyro_offset_gain(simulate_gyro_session(p, 1, 3, opt));
    for (std::size_t a = 0; a < 3; ++a) {
      worst_accel = std::max({worst_accel, std::abs(am.offset[a] - p.accel_offset[a]), std::abs(am.gain[a] - p.accel_gain[a])});
      worst_gyro = std::max({worst_gyro, std::abs(gm.offset[a] - p.gyro_offset[a]), std::abs(gm.gain[a] - p.gyro_gain[a])});
    }
  }
  c.expect(worst_accel <= 1e-9, fmt("noiseless accel session error %.3g", worst_accel));
  c.expect(worst_gyro <= 1e-3, fmt("100 Hz trapezoidal gyro session error %.3g", worst_gyro));
  report(9, c.failed == 0,
         "calibration round trips: " + c.summary() +
             fmt(" (closed form %.2g, accel %.2g, gyro trapezoid %.2g)", worst_closed, worst_accel, worst_gyro));
}

void jmi_oracle() {
  std::mt19937_64 rng(31337);
  int datasets = 0, mismatches = 0;
  for (int d = 2; d <= 4; ++d)
    for (int bins = 1; bins <= 4; ++bins)
      for (int rows : {2, 3, 5, 8, 13, 21, 30})
        for (int rep = 0; rep < 12; ++rep) {
          std::uniform_int_distribution<int> bin(0, bins - 1), cls(0, 2);
          std::vector<int> y(static_cast<std::size_t>(rows));
          for (int r = 0; r < rows; ++r) y[static_cast<std::size_t>(r)] = r < 2 ? r : cls(rng);
          std::vector<std::vector<int>> cols(static_cast<std::size_t>(d));
          for (int f = 0; f < d; ++f)
            for (int r = 0; r < rows; ++r)
              cols[static_cast<std::size_t>(f)].push_back(f == 0 && rep % 2 ? y[static_cast<std::size_t>(r)] % bins : bin(rng));
          ++datasets;
          if (jmi_rank(BinnedMatrix{cols, bins}, y, cols.size()).order != oracle::jmi_ranking(cols, y)) ++mismatches;
        }
  report(10, mismatches == 0,
         std::to_string(datasets) + " datasets (<=4 features, <=30 rows, <=4 bins): " + std::to_string(mismatches) +
             " ranking mismatches");
}

}  // namespace

int main() {
  const auto start = std::chrono::steady_clock::now();

  // ---- shared synthetic conditions ----------------------------------------
  ExperimentConfig cfg;  // 30 devices x 10 desk sessions, bagged trees, 10 repetitions
  Experiment base(cfg);

  double both = 0, accel = 0, gyro = 0;
  timed("baseline", [&] {
    const auto& ds = base.raw_dataset();
    both = base.evaluate_set(ds, StreamSet::both).avg_f;
    accel = base.evaluate_set(ds, StreamSet::accel).avg_f;
    gyro = base.evaluate_set(ds, StreamSet::gyro).avg_f;
    return both;
  });
  report(1, both >= 0.95, fmt("baseline AvgF(both) = %.4f (need >= 0.95)", both));
  report(2, both >= gyro && gyro >= accel - 0.02,
         fmt("AvgF both %.4f >= gyro %.4f >= accel %.4f - 0.02", both, gyro, accel));

  {
    auto c3 = cfg;
    c3.noise_floor = true;
    Experiment exp(c3);
    double a0 = 0, a1 = 0, g0 = 0, g1 = 0;
    timed("calibration", [&] {
      const auto& raw = exp.raw_dataset();
      const auto cal = exp.dataset(exp.calibrated_traces());
      a0 = exp.evaluate_set(raw, StreamSet::accel).avg_f;
      a1 = exp.evaluate_set(cal, StreamSet::accel).avg_f;
      g0 = exp.evaluate_set(raw, StreamSet::gyro).avg_f;
      g1 = exp.evaluate_set(cal, StreamSet::gyro).avg_f;
      return a1;
    });
    const double da = a0 - a1, dg = g0 - g1;
    report(3, da >= 0.30 && dg < da,
           fmt("noise-floor fleet: accel %.4f -> %.4f (drop %.4f >= 0.30); ", a0, a1, da) +
               fmt("gyro %.4f -> %.4f (drop %.4f < accel drop)", g0, g1, dg));
  }

  double f1 = 0, f10 = 0, f50 = 0;
  timed("obfuscation 1x/10x/50x", [&] {
    f1 = base.evaluate_set(base.obfuscated_dataset(1, 0), StreamSet::both).avg_f;
    f10 = base.evaluate_set(base.obfuscated_dataset(10, 0), StreamSet::both).avg_f;
    f50 = base.evaluate_set(base.obfuscated_dataset(50, 0), StreamSet::both).avg_f;
    return f1;
  });
  report(4, both - f1 >= 0.10, fmt("obfuscated AvgF %.4f, drop %.4f vs baseline %.4f (need >= 0.10)", f1, both - f1, both));
  report(5, f10 < f1 && f10 - f50 <= 0.10,
         fmt("AvgF 1x %.4f > 10x %.4f; 10x - 50x = %.4f (need <= 0.10)", f1, f10, f10 - f50));

  double fi = 0;
  timed("injection", [&] { return fi = base.evaluate_set(base.obfuscated_dataset(10, 0.4), StreamSet::both).avg_f; });
  report(6, fi <= 0.5 * both, fmt("10x range, Pr=0.4: AvgF %.4f (need <= 0.5 * %.4f = %.4f)", fi, both, 0.5 * both));

  metrics_exactness();
  feature_suite();
  calibration_algebra();
  jmi_oracle();

  {
    auto c11 = cfg;
    c11.devices = 60;
    c11.device_counts = {10, 20, 30, 40, 50, 60};
    Experiment big(c11);
    std::vector<std::pair<double, EvalReport>> curve;
    timed("device-count curve", [&] {
      curve = big.vary_devices(big.raw_dataset());
      return 0.0;
    });
    bool monotone = true;
    std::string pts;
    for (std::size_t i = 0; i < curve.size(); ++i) {
      pts += fmt(i ? ", %g:%.4f" : "%g:%.4f", curve[i].first, curve[i].second.avg_f);
      for (std::size_t j = 0; j < i; ++j)
        if (curve[i].second.avg_f > curve[j].second.avg_f + 0.03) monotone = false;
    }
    double two = 0;
    timed("two training samples", [&] {
      return two = base.evaluate_set(base.raw_dataset(), StreamSet::both, {SplitPolicy::Mode::fixed_count, 2}).avg_f;
    });
    report(11, monotone && two >= 0.90,
           "AvgF by device count {" + pts + "} non-increasing within 0.03: " + (monotone ? "yes" : "no") +
               fmt("; 2 training samples/device AvgF %.4f (need >= 0.90)", two));
  }

  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  std::printf("%d of 11 criteria failed (%.0f s)\n", failures, secs);
  return failures == 0 ? 0 : 1;
}
