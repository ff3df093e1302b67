#pragma once

// End-to-end experiment recipes: synthesize or load traces, apply a
// countermeasure, featurize, evaluate, and write JSON/CSV reports plus a
// manifest of every seed and the config hash.

#include <algorithm>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <map>
#include <numeric>
#include <optional>
#include <random>
#include <span>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "calibrate.hpp"
#include "classify.hpp"
#include "features.hpp"
#include "obfuscate.hpp"
#include "selection.hpp"
#include "synth.hpp"
#include "trace.hpp"

namespace motionprint {

enum class StreamSet { accel, gyro, both };

inline constexpr std::array<StreamSet, 3> kStreamSets{StreamSet::accel, StreamSet::gyro, StreamSet::both};

inline std::string_view to_string(StreamSet s) {
  switch (s) {
    case StreamSet::accel: return "accel";
    case StreamSet::gyro: return "gyro";
    case StreamSet::both: return "both";
  }
  return "?";
}

inline StreamSet stream_set_from_string(std::string_view s) {
  for (auto k : kStreamSets)
    if (to_string(k) == s) return k;
  throw ValidationError("unknown stream set '" + std::string(s) + "' (expected accel|gyro|both)");
}

inline std::vector<StreamKind> streams_of(StreamSet s) {
  switch (s) {
    case StreamSet::accel: return {StreamKind::accel_magnitude};
    case StreamSet::gyro: return {StreamKind::gyro_x, StreamKind::gyro_y, StreamKind::gyro_z};
    case StreamSet::both: return {kAllStreams.begin(), kAllStreams.end()};
  }
  return {};
}

/// Columns of a full 4-stream dataset that belong to the stream set.
inline LabeledDataset restrict_streams(const LabeledDataset& ds, StreamSet set) {
  std::vector<std::size_t> cols;
  const auto streams = streams_of(set);
  for (std::size_t c = 0; c < ds.feature_names.size(); ++c) {
    const auto& name = ds.feature_names[c];
    const auto prefix = name.substr(0, name.find('.'));
    for (auto k : streams)
      if (to_string(k) == prefix) cols.push_back(c);
  }
  return ds.select_features(std::span<const std::size_t>(cols));
}

struct ExperimentConfig {
  std::string recipe = "baseline";
  std::string input_dir;        // real traces; empty means synthesize
  std::string calibration_dir;  // <device>_accel.json / <device>_gyro.json models for real traces
  std::string output_dir = "out";

  // synthetic fleet
  std::size_t devices = 30;
  std::size_t sessions = 10;
  Scenario scenario;
  bool noise_floor = false;
  std::uint64_t fleet_seed = 7;
  std::uint64_t trace_seed = 11;

  // pipeline
  double rate = kDefaultResampleRate;
  StreamSet streams = StreamSet::both;
  ClassifierConfig classifier;
  int repetitions = 10;
  std::uint64_t eval_seed = 1;

  // recipe parameters
  std::vector<std::size_t> device_counts{5, 10, 15, 20, 25, 30};
  std::size_t subsets = 10;
  std::vector<std::size_t> train_counts{1, 2, 3, 4, 5, 6, 7, 8, 9};
  std::vector<double> range_scales{1, 2, 5, 10, 20, 50};
  std::vector<double> injection_probs{0, 0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9, 1.0};
  double injection_scale = 10;
  ObfuscationPolicy policy;
  std::uint64_t obfuscation_seed = 13;
  std::size_t calibration_measurements = 10;
  double gyro_angle_error_sd = 0.05;
  std::uint64_t calibration_seed = 17;
  std::vector<std::size_t> top_ks{1, 2, 3, 5, 10, 15, 20, 25, 30, 40, 50, 75, 100};
  int bins = kDefaultBins;

  nlohmann::json to_json() const {
    return {{"recipe", recipe},
            {"input_dir", input_dir},
            {"calibration_dir", calibration_dir},
            {"output_dir", output_dir},
            {"devices", devices},
            {"sessions", sessions},
            {"placement", to_string(scenario.placement)},
            {"audio_mode", to_string(scenario.audio_mode)},
            {"duration_s", scenario.duration_s},
            {"capture_rate_hz", scenario.rate_hz},
            {"jitter_ms", scenario.jitter_ms},
            {"noise_floor", noise_floor},
            {"fleet_seed", fleet_seed},
            {"trace_seed", trace_seed},
            {"rate", rate},
            {"streams", to_string(streams)},
            {"classifier", to_string(classifier.kind)},
            {"n_trees", classifier.n_trees},
            {"max_depth", classifier.max_depth},
            {"min_leaf", classifier.min_leaf},
            {"knn_k", classifier.knn_k},
            {"reps", repetitions},
            {"seed", eval_seed},
            {"device_counts", device_counts},
            {"subsets", subsets},
            {"train_counts", train_counts},
            {"range_scales", range_scales},
            {"injection_probs", injection_probs},
            {"injection_scale", injection_scale},
            {"policy", policy.to_json()},
            {"obfuscation_seed", obfuscation_seed},
            {"calibration_measurements", calibration_measurements},
            {"gyro_angle_error_sd", gyro_angle_error_sd},
            {"calibration_seed", calibration_seed},
            {"top_ks", top_ks},
            {"bins", bins}};
  }

  /// Keys absent from `j` keep their current values.
  void merge_json(const nlohmann::json& j) {
    auto take = [&](const char* key, auto& field) {
      if (j.contains(key)) field = j.at(key).get<std::decay_t<decltype(field)>>();
    };
    take("recipe", recipe);
    take("input_dir", input_dir);
    take("calibration_dir", calibration_dir);
    take("output_dir", output_dir);
    take("devices", devices);
    take("sessions", sessions);
    if (j.contains("placement")) scenario.placement = placement_from_string(j.at("placement").get<std::string>());
    if (j.contains("audio_mode")) scenario.audio_mode = audio_mode_from_string(j.at("audio_mode").get<std::string>());
    take("duration_s", scenario.duration_s);
    take("capture_rate_hz", scenario.rate_hz);
    take("jitter_ms", scenario.jitter_ms);
    take("noise_floor", noise_floor);
    take("fleet_seed", fleet_seed);
    take("trace_seed", trace_seed);
    take("rate", rate);
    if (j.contains("streams")) streams = stream_set_from_string(j.at("streams").get<std::string>());
    if (j.contains("classifier")) classifier.kind = classifier_from_string(j.at("classifier").get<std::string>());
    take("n_trees", classifier.n_trees);
    take("max_depth", classifier.max_depth);
    take("min_leaf", classifier.min_leaf);
    take("knn_k", classifier.knn_k);
    take("reps", repetitions);
    take("seed", eval_seed);
    take("device_counts", device_counts);
    take("subsets", subsets);
    take("train_counts", train_counts);
    take("range_scales", range_scales);
    take("injection_probs", injection_probs);
    take("injection_scale", injection_scale);
    if (j.contains("policy")) policy = ObfuscationPolicy::from_json(j.at("policy"));
    take("obfuscation_seed", obfuscation_seed);
    take("calibration_measurements", calibration_measurements);
    take("gyro_angle_error_sd", gyro_angle_error_sd);
    take("calibration_seed", calibration_seed);
    take("top_ks", top_ks);
    take("bins", bins);
  }

  FleetSpec fleet_spec() const { return noise_floor ? FleetSpec::noise_floor() : FleetSpec{}; }
};

inline const std::vector<std::string>& recipe_names() {
  static const std::vector<std::string> names{"baseline",     "vary-devices",    "vary-train",
                                              "calibrated",   "obfuscated",      "range-sweep",
                                              "injection-sweep", "feature-sweep"};
  return names;
}

// ---- building blocks -------------------------------------------------------

inline LabeledDataset featurize(std::span<const SensorTrace> traces, double rate = kDefaultResampleRate,
                                unsigned workers = 0) {
  const auto vectors = extract_all(traces, kAllStreams, rate, workers);
  return make_dataset(vectors);
}

inline std::vector<SensorTrace> load_trace_dir(const std::filesystem::path& dir) {
  std::vector<SensorTrace> traces;
  for (const auto& f : list_trace_files(dir)) traces.push_back(load_trace(f));
  if (traces.empty()) throw ValidationError("no trace files in " + dir.string());
  return traces;
}

inline std::vector<SensorTrace> obfuscate_all(std::span<const SensorTrace> traces, const ObfuscationPolicy& policy,
                                              unsigned workers = 0) {
  policy.validate();
  std::vector<SensorTrace> out(traces.size());
  parallel_for(traces.size(), [&](std::size_t i) { out[i] = obfuscate(traces[i], policy); }, workers);
  return out;
}

/// Estimated per-device calibration models from simulated calibration
/// sessions (static six-position accel, noisy hand rotations for gyro).
struct DeviceCalibration {
  CalibrationModel accel;
  CalibrationModel gyro;
};

inline std::vector<DeviceCalibration> estimate_fleet_calibration(std::span<const DeviceProfile> fleet,
                                                                 std::size_t measurements, double angle_error_sd,
                                                                 std::uint64_t seed, unsigned workers = 0) {
  std::vector<DeviceCalibration> out(fleet.size());
  parallel_for(fleet.size(), [&](std::size_t i) {
    const auto accel_session = simulate_accel_session(fleet[i], measurements, derive_seed(seed, 0));
    GyroSessionOptions opt;
    opt.angle_error_sd = angle_error_sd;
    const auto gyro_session = simulate_gyro_session(fleet[i], measurements, derive_seed(seed, 1), opt);
    out[i] = {accel_offset_gain(accel_session), gyro_offset_gain(gyro_session)};
  }, workers);
  return out;
}

inline std::string curve_csv(const std::string& x_name, const std::vector<std::pair<double, EvalReport>>& rows) {
  std::string out = x_name + ",avg_f,avg_f_ci95,avg_precision,avg_recall\n";
  for (const auto& [x, r] : rows)
    out += format_double(x) + "," + format_double(r.avg_f) + "," + format_double(r.avg_f_ci95) + "," +
           format_double(r.avg_precision) + "," + format_double(r.avg_recall) + "\n";
  return out;
}

struct RecipeResult {
  nlohmann::json report;
  std::map<std::string, std::string> csv;  // file name -> content
};

class Experiment {
public:
  explicit Experiment(ExperimentConfig cfg) : cfg_(std::move(cfg)) {}

  const ExperimentConfig& config() const { return cfg_; }

  const std::vector<DeviceProfile>& fleet() {
    if (fleet_.empty()) fleet_ = generate_fleet(cfg_.devices, cfg_.fleet_seed, cfg_.fleet_spec());
    return fleet_;
  }

  /// Raw traces: loaded from input_dir or simulated from the fleet.
  const std::vector<SensorTrace>& traces() {
    if (traces_.empty()) {
      if (!cfg_.input_dir.empty()) {
        traces_ = load_trace_dir(cfg_.input_dir);
      } else {
        traces_ = simulate_fleet(fleet(), cfg_.sessions, cfg_.scenario, cfg_.trace_seed, cfg_.classifier.workers);
      }
    }
    return traces_;
  }

  LabeledDataset dataset(std::span<const SensorTrace> traces) const {
    return featurize(traces, cfg_.rate, cfg_.classifier.workers);
  }

  const LabeledDataset& raw_dataset() {
    if (!raw_ds_) raw_ds_ = dataset(traces());
    return *raw_ds_;
  }

  EvalReport evaluate_set(const LabeledDataset& full, StreamSet set, SplitPolicy policy = {}) const {
    return evaluate(restrict_streams(full, set), cfg_.classifier, cfg_.repetitions, cfg_.eval_seed, policy);
  }

  ObfuscationPolicy policy_with(double scale, double prob) const {
    auto p = cfg_.policy;
    p.range_scale = scale;
    p.injection_prob = prob;
    p.seed = cfg_.obfuscation_seed;
    return p;
  }

  LabeledDataset obfuscated_dataset(double scale, double prob) {
    const auto obf = obfuscate_all(traces(), policy_with(scale, prob), cfg_.classifier.workers);
    return dataset(obf);
  }

  /// Traces corrected with per-device models (estimated from simulated
  /// sessions, or loaded from calibration_dir for real traces).
  std::vector<SensorTrace> calibrated_traces() {
    const auto& raw = traces();
    std::map<std::string, DeviceCalibration> models;
    if (!cfg_.calibration_dir.empty()) {
      for (const auto& t : raw) {
        if (models.contains(t.device_id)) continue;
        const std::filesystem::path dir = cfg_.calibration_dir;
        models[t.device_id] = {
            CalibrationModel::from_json(nlohmann::json::parse(read_file(dir / (t.device_id + "_accel.json")))),
            CalibrationModel::from_json(nlohmann::json::parse(read_file(dir / (t.device_id + "_gyro.json"))))};
      }
    } else {
      if (!cfg_.input_dir.empty())
        throw ValidationError("calibrating real traces requires calibration_dir");
      const auto est = estimate_fleet_calibration(fleet(), cfg_.calibration_measurements, cfg_.gyro_angle_error_sd,
                                                  cfg_.calibration_seed, cfg_.classifier.workers);
      for (std::size_t i = 0; i < fleet().size(); ++i) models[fleet()[i].device_id] = est[i];
    }
    std::vector<SensorTrace> out(raw.size());
    parallel_for(raw.size(), [&](std::size_t i) {
      const auto& m = models.at(raw[i].device_id);
      out[i] = apply_calibration(raw[i], m.accel, m.gyro);
    }, cfg_.classifier.workers);
    calibration_models_ = std::move(models);
    return out;
  }

  const std::map<std::string, DeviceCalibration>& calibration_models() const { return calibration_models_; }

  /// Random device subsets of each size; one randomized split per subset.
  std::vector<std::pair<double, EvalReport>> vary_devices(const LabeledDataset& full) const {
    std::vector<std::pair<double, EvalReport>> rows;
    const auto ds = restrict_streams(full, cfg_.streams);
    const auto by_class = ds.rows_by_class();
    for (auto n : cfg_.device_counts) {
      if (n < 2 || n > ds.num_classes())
        throw ValidationError("device count " + std::to_string(n) + " outside [2, " +
                              std::to_string(ds.num_classes()) + "]");
      std::vector<RepetitionMetrics> runs;
      for (std::size_t s = 0; s < cfg_.subsets; ++s) {
        std::mt19937_64 rng(derive_seed(cfg_.eval_seed, n * 1000 + s));
        std::vector<std::size_t> classes(ds.num_classes());
        std::iota(classes.begin(), classes.end(), 0);
        std::shuffle(classes.begin(), classes.end(), rng);
        classes.resize(n);
        std::sort(classes.begin(), classes.end());
        std::vector<std::size_t> idx;
        for (auto c : classes) idx.insert(idx.end(), by_class[c].begin(), by_class[c].end());
        std::sort(idx.begin(), idx.end());
        const auto sub = ds.select_rows(idx);
        auto cfg = cfg_.classifier;
        cfg.seed = derive_seed(cfg_.eval_seed, n * 1000 + s + 500);
        runs.push_back(run_split(sub, split_50_50(sub, derive_seed(cfg_.eval_seed, n * 1000 + s + 700)), cfg));
      }
      rows.emplace_back(static_cast<double>(n), summarize(std::move(runs), {}));
    }
    return rows;
  }

  std::vector<std::pair<double, EvalReport>> vary_train(const LabeledDataset& full) const {
    std::vector<std::pair<double, EvalReport>> rows;
    for (auto k : cfg_.train_counts)
      rows.emplace_back(static_cast<double>(k),
                        evaluate_set(full, cfg_.streams, {SplitPolicy::Mode::fixed_count, k}));
    return rows;
  }

  RecipeResult run() {
    const auto& r = cfg_.recipe;
    if (r == "baseline") return run_baseline(raw_dataset());
    if (r == "obfuscated") return run_baseline(obfuscated_dataset(1.0, 0.0));
    if (r == "calibrated") return run_calibrated();
    if (r == "vary-devices") return {{{"curve", "vary-devices"}}, {{"vary_devices.csv", curve_csv("devices", vary_devices(raw_dataset()))}}};
    if (r == "vary-train") return {{{"curve", "vary-train"}}, {{"vary_train.csv", curve_csv("train_per_device", vary_train(raw_dataset()))}}};
    if (r == "range-sweep") {
      std::vector<std::pair<double, EvalReport>> rows;
      for (double s : cfg_.range_scales) rows.emplace_back(s, evaluate_set(obfuscated_dataset(s, 0.0), cfg_.streams));
      return finish_curve("range_scale", "range_sweep.csv", rows);
    }
    if (r == "injection-sweep") {
      std::vector<std::pair<double, EvalReport>> rows;
      for (double p : cfg_.injection_probs)
        rows.emplace_back(p, evaluate_set(obfuscated_dataset(cfg_.injection_scale, p), cfg_.streams));
      return finish_curve("injection_prob", "injection_sweep.csv", rows);
    }
    if (r == "feature-sweep") return run_feature_sweep();
    throw ValidationError("unknown recipe '" + r + "'");
  }

private:
  RecipeResult run_baseline(const LabeledDataset& ds) const {
    RecipeResult out;
    std::string csv = "stream_set,avg_f,avg_f_ci95,avg_precision,avg_recall\n";
    for (auto set : kStreamSets) {
      const auto rep = evaluate_set(ds, set);
      out.report[std::string(to_string(set))] = rep.to_json();
      csv += std::string(to_string(set)) + "," + format_double(rep.avg_f) + "," + format_double(rep.avg_f_ci95) +
             "," + format_double(rep.avg_precision) + "," + format_double(rep.avg_recall) + "\n";
    }
    out.csv["stream_sets.csv"] = csv;
    return out;
  }

  RecipeResult run_calibrated() {
    RecipeResult out;
    const auto cal = dataset(calibrated_traces());
    std::string csv = "stream_set,condition,avg_f,avg_f_ci95\n";
    for (auto set : kStreamSets) {
      for (const auto& [cond, ds] : {std::pair<std::string, const LabeledDataset*>{"uncalibrated", &raw_dataset()},
                                     std::pair<std::string, const LabeledDataset*>{"calibrated", &cal}}) {
        const auto rep = evaluate_set(*ds, set);
        out.report[cond][std::string(to_string(set))] = rep.to_json();
        csv += std::string(to_string(set)) + "," + cond + "," + format_double(rep.avg_f) + "," +
               format_double(rep.avg_f_ci95) + "\n";
      }
    }
    nlohmann::json models = nlohmann::json::object();
    for (const auto& [dev, m] : calibration_models_) models[dev] = {{"accel", m.accel.to_json()}, {"gyro", m.gyro.to_json()}};
    out.report["models"] = models;
    out.csv["calibrated.csv"] = csv;
    return out;
  }

  RecipeResult run_feature_sweep() {
    RecipeResult out;
    std::string csv = "stream_set,k,avg_f,avg_f_ci95\n";
    for (auto set : kStreamSets) {
      const auto ds = restrict_streams(raw_dataset(), set);
      const auto ranking = jmi_rank(ds, ds.num_features(), cfg_.bins, cfg_.classifier.workers);
      std::vector<std::size_t> ks;
      for (auto k : cfg_.top_ks)
        if (k <= ds.num_features()) ks.push_back(k);
      const auto curve = sweep_topk(ranking, ds, cfg_.classifier, ks, cfg_.repetitions, cfg_.eval_seed);
      out.report[std::string(to_string(set))] = ranking.to_json();
      for (const auto& p : curve)
        csv += std::string(to_string(set)) + "," + std::to_string(p.k) + "," + format_double(p.avg_f) + "," +
               format_double(p.ci95) + "\n";
    }
    out.csv["feature_sweep.csv"] = csv;
    return out;
  }

  static RecipeResult finish_curve(const std::string& x, const std::string& file,
                                   const std::vector<std::pair<double, EvalReport>>& rows) {
    RecipeResult out;
    nlohmann::json pts = nlohmann::json::array();
    for (const auto& [v, r] : rows) pts.push_back({{x, v}, {"report", r.to_json()}});
    out.report["curve"] = pts;
    out.csv[file] = curve_csv(x, rows);
    return out;
  }

  ExperimentConfig cfg_;
  std::vector<DeviceProfile> fleet_;
  std::vector<SensorTrace> traces_;
  std::optional<LabeledDataset> raw_ds_;
  std::map<std::string, DeviceCalibration> calibration_models_;
};

inline std::string config_hash(const ExperimentConfig& cfg) {
  auto j = cfg.to_json();
  j.erase("output_dir");
  char buf[20];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(fnv1a(j.dump())));
  return buf;
}

/// Runs the recipe and writes report.json, CSVs and manifest.json into the
/// output directory. Only the manifest carries a wall-clock timestamp.
inline RecipeResult run_recipe(const ExperimentConfig& cfg, const std::string& timestamp = {}) {
  Experiment exp(cfg);
  auto result = exp.run();
  result.report["recipe"] = cfg.recipe;
  result.report["config_hash"] = config_hash(cfg);
  const std::filesystem::path out = cfg.output_dir;
  std::filesystem::create_directories(out);
  write_file(out / "report.json", result.report.dump(2) + "\n");
  nlohmann::json files = nlohmann::json::array({"report.json"});
  for (const auto& [name, content] : result.csv) {
    write_file(out / name, content);
    files.push_back(name);
  }
  nlohmann::json manifest{{"config", cfg.to_json()}, {"config_hash", config_hash(cfg)}, {"files", files}};
  if (!timestamp.empty()) manifest["timestamp"] = timestamp;
  write_file(out / "manifest.json", manifest.dump(2) + "\n");
  return result;
}

}  // namespace motionprint
