// motionprint: command-line front end for trace synthesis, ingestion,
// featurization, selection, classification, calibration, obfuscation and
// the experiment recipes.
//
// Exit codes: 0 success, 2 validation/usage error, 3 runtime error.

#include <chrono>
#include <cstdio>
#include <ctime>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include <motionprint/motionprint.hpp>

namespace fs = std::filesystem;
using namespace motionprint;
using nlohmann::json;

namespace {

constexpr int kExitValidation = 2;
constexpr int kExitRuntime = 3;

void require_file(const fs::path& p) {
  if (!fs::is_regular_file(p)) throw ValidationError("input file '" + p.string() + "' does not exist");
}

json read_json(const fs::path& p) {
  require_file(p);
  try {
    return json::parse(read_file(p));
  } catch (const json::parse_error& e) {
    throw ParseError(p.string() + ": " + e.what());
  }
}

void require_dir(const std::string& d, const char* what) {
  if (!fs::is_directory(d)) throw ValidationError(std::string(what) + " '" + d + "' is not a directory");
}

std::string utc_timestamp() {
  const auto now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&now, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

/// `ranking.json:k` -> first k ranked feature names.
std::vector<std::string> ranked_features(const std::string& spec) {
  const auto colon = spec.rfind(':');
  if (colon == std::string::npos) throw ValidationError("--features expects <ranking.json>:<k>");
  std::size_t k = 0;
  try {
    k = std::stoul(spec.substr(colon + 1));
  } catch (const std::exception&) {
    throw ValidationError("--features: cannot parse k in '" + spec + "'");
  }
  const auto ranking = FeatureRanking::from_json(read_json(spec.substr(0, colon)));
  if (k == 0 || k > ranking.order.size())
    throw ValidationError("--features: k must be in [1, " + std::to_string(ranking.order.size()) + "]");
  if (ranking.names.size() < k) throw ValidationError("--features: ranking has no feature ids");
  return {ranking.names.begin(), ranking.names.begin() + static_cast<std::ptrdiff_t>(k)};
}

LabeledDataset load_table(const std::string& path, const std::string& features) {
  require_file(path);
  auto ds = dataset_from_csv(read_file(path));
  if (!features.empty()) {
    const auto names = ranked_features(features);
    ds = ds.select_features(std::span<const std::string>(names));
  }
  return ds;
}

std::vector<std::pair<fs::path, SensorTrace>> load_dir(const std::string& dir) {
  require_dir(dir, "input");
  std::vector<std::pair<fs::path, SensorTrace>> out;
  for (const auto& f : list_trace_files(dir)) {
    try {
      out.emplace_back(f, load_trace(f));
    } catch (const ParseError& e) {
      throw ParseError(f.string() + ": " + e.what());
    } catch (const ValidationError& e) {
      throw ValidationError(f.string() + ": " + e.what());
    }
  }
  if (out.empty()) throw ValidationError("no trace files in " + dir);
  return out;
}

CalibrationSession load_session(const std::string& dir, Sensor sensor, double theta) {
  require_dir(dir, "session");
  CalibrationSession s;
  s.sensor = sensor;
  s.theta = theta;
  for (std::size_t d = 0; d < 6; ++d) {
    const fs::path sub = fs::path(dir) / std::string(kDirectionNames[d]);
    if (!fs::is_directory(sub)) throw ValidationError("session is missing direction directory " + sub.string());
    for (const auto& f : list_trace_files(sub)) s.traces[d].push_back(load_trace(f));
  }
  return s;
}

void write_session(const CalibrationSession& s, const fs::path& dir) {
  for (std::size_t d = 0; d < 6; ++d) {
    const auto sub = dir / std::string(kDirectionNames[d]);
    fs::create_directories(sub);
    for (const auto& t : s.traces[d]) save_trace(t, sub / (t.session_id + ".json"));
  }
}

std::string report_csv_row(const std::string& label, const EvalReport& r, bool header) {
  std::string out = header ? "label,avg_f,avg_f_ci95,avg_precision,avg_recall,repetitions\n" : "";
  out += label + "," + format_double(r.avg_f) + "," + format_double(r.avg_f_ci95) + "," +
         format_double(r.avg_precision) + "," + format_double(r.avg_recall) + "," + std::to_string(r.repetitions) +
         "\n";
  return out;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Device fingerprinting from motion sensors: synthesis, features, classification, countermeasures"};
  app.require_subcommand(1);
  unsigned parallel = 0;
  app.add_option("--parallel", parallel, "worker threads (0 = all cores)");

  // synth
  auto* synth = app.add_subcommand("synth", "generate a synthetic fleet and its traces");
  std::size_t n_devices = 30, n_sessions = 10, n_cal = 0;
  std::string scenario = "desk", audio = "none", out_dir;
  std::uint64_t seed = 1;
  double duration = 5, capture_rate = 100, jitter = 2;
  bool noise_floor = false;
  synth->add_option("--devices", n_devices, "number of devices")->capture_default_str();
  synth->add_option("--sessions-per-device", n_sessions, "sessions per device")->capture_default_str();
  synth->add_option("--scenario", scenario, "desk|hand")->capture_default_str();
  synth->add_option("--audio", audio, "none|sine20k|song")->capture_default_str();
  synth->add_option("--seed", seed, "fleet and trace seed")->capture_default_str();
  synth->add_option("--duration", duration, "seconds per trace")->capture_default_str();
  synth->add_option("--capture-rate", capture_rate, "sampling rate, Hz")->capture_default_str();
  synth->add_option("--jitter", jitter, "timestamp jitter, +- ms")->capture_default_str();
  synth->add_flag("--noise-floor", noise_floor, "give every device the lowest noise level");
  synth->add_option("--calibration-sessions", n_cal, "also write K calibration traces per direction")
      ->capture_default_str();
  synth->add_option("--out", out_dir, "output directory")->required();

  // ingest
  auto* ingest = app.add_subcommand("ingest", "validate and normalize trace files into canonical JSON");
  std::string in_dir;
  ingest->add_option("--in", in_dir, "directory of .json / .csv traces")->required();
  ingest->add_option("--out", out_dir, "output directory (omit to only validate)");

  // featurize
  auto* featurize_cmd = app.add_subcommand("featurize", "extract the feature table from a trace directory");
  double rate = kDefaultResampleRate;
  std::string streams = "both", out_file;
  featurize_cmd->add_option("--in", in_dir, "trace directory")->required();
  featurize_cmd->add_option("--out", out_file, "feature CSV")->required();
  featurize_cmd->add_option("--rate", rate, "resample rate, Hz")->capture_default_str();
  featurize_cmd->add_option("--streams", streams, "accel|gyro|both")->capture_default_str();

  // select
  auto* select = app.add_subcommand("select", "rank features by joint mutual information");
  std::string table;
  std::size_t top_k = 20;
  int bins = kDefaultBins;
  select->add_option("--in", table, "feature CSV")->required();
  select->add_option("--top-k", top_k, "number of features to rank")->capture_default_str();
  select->add_option("--bins", bins, "equal-frequency bins per feature")->capture_default_str();
  select->add_option("--out", out_file, "ranking JSON")->required();

  // train / evaluate
  std::string classifier = "bagged", feature_spec;
  int reps = 10, n_trees = 100, knn_k = 1;
  std::size_t train_per_class = 0;
  std::string csv_out;
  auto* train = app.add_subcommand("train", "fit a classifier on the whole feature table");
  auto* evaluate_cmd = app.add_subcommand("evaluate", "repeated randomized split evaluation");
  for (auto* c : {train, evaluate_cmd}) {
    c->add_option("--in", table, "feature CSV")->required();
    c->add_option("--classifier", classifier, "bagged|knn|gnb")->capture_default_str();
    c->add_option("--features", feature_spec, "restrict to <ranking.json>:<k>");
    c->add_option("--seed", seed, "seed")->capture_default_str();
    c->add_option("--trees", n_trees, "trees in the bagged ensemble")->capture_default_str();
    c->add_option("--k", knn_k, "neighbours for knn")->capture_default_str();
    c->add_option("--out", out_file, "output JSON")->required();
  }
  evaluate_cmd->add_option("--reps", reps, "split repetitions")->capture_default_str();
  evaluate_cmd->add_option("--train-per-class", train_per_class, "fixed training rows per class (0 = half)")
      ->capture_default_str();
  evaluate_cmd->add_option("--csv", csv_out, "also write a one-row CSV summary");

  // calibrate
  auto* calibrate = app.add_subcommand("calibrate", "estimate or apply offset/gain models");
  calibrate->require_subcommand(1);
  auto* estimate = calibrate->add_subcommand("estimate", "estimate a model from a six-direction session");
  std::string session_dir, sensor = "accel";
  double theta = std::numbers::pi;
  estimate->add_option("--session", session_dir, "directory with px/nx/py/ny/pz/nz subdirectories")->required();
  estimate->add_option("--sensor", sensor, "accel|gyro")->capture_default_str();
  estimate->add_option("--theta", theta, "gyro rotation angle, rad")->capture_default_str();
  estimate->add_option("--out", out_file, "model JSON (stdout if omitted)");
  auto* apply = calibrate->add_subcommand("apply", "correct a trace with one or two models");
  std::vector<std::string> model_files;
  std::string in_file;
  apply->add_option("--model", model_files, "model JSON (repeat for accel and gyro)")->required();
  apply->add_option("--in", in_file, "trace file")->required();
  apply->add_option("--out", out_file, "corrected trace file")->required();

  // obfuscate
  auto* obf = app.add_subcommand("obfuscate", "apply the obfuscation countermeasure to a trace directory");
  double scale = 1, inject_prob = 0;
  std::string policy_file;
  obf->add_option("--scale", scale, "range scale factor")->capture_default_str();
  obf->add_option("--inject-prob", inject_prob, "injection probability")->capture_default_str();
  obf->add_option("--seed", seed, "seed")->capture_default_str();
  obf->add_option("--policy", policy_file, "base policy JSON (flags override)");
  obf->add_option("--in", in_dir, "trace directory")->required();
  obf->add_option("--out", out_dir, "output directory")->required();

  // recipe
  auto* recipe = app.add_subcommand("recipe", "run an experiment recipe end to end");
  std::string recipe_name, config_file, input, calib_dir;
  std::size_t r_devices = 0, r_sessions = 0;
  recipe->add_option("name", recipe_name, "recipe")->required()->check(CLI::IsMember(recipe_names()));
  recipe->add_option("--config", config_file, "JSON config; flags override its keys");
  recipe->add_option("--out", out_dir, "output directory");
  recipe->add_option("--input", input, "real trace directory instead of a synthetic fleet");
  recipe->add_option("--calibration-dir", calib_dir, "per-device <id>_accel.json / <id>_gyro.json models");
  auto* o_dev = recipe->add_option("--devices", r_devices, "synthetic devices");
  auto* o_ses = recipe->add_option("--sessions", r_sessions, "sessions per device");
  auto* o_reps = recipe->add_option("--reps", reps, "split repetitions");
  auto* o_seed = recipe->add_option("--seed", seed, "evaluation seed");
  auto* o_streams = recipe->add_option("--streams", streams, "accel|gyro|both");
  auto* o_clf = recipe->add_option("--classifier", classifier, "bagged|knn|gnb");
  auto* o_trees = recipe->add_option("--trees", n_trees, "trees in the bagged ensemble");
  auto* o_rate = recipe->add_option("--rate", rate, "resample rate, Hz");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : kExitValidation;
  }

  try {
    default_workers() = parallel;

    if (*synth) {
      Scenario sc;
      sc.placement = placement_from_string(scenario);
      sc.audio_mode = audio_mode_from_string(audio);
      sc.duration_s = duration;
      sc.rate_hz = capture_rate;
      sc.jitter_ms = jitter;
      const auto fleet = generate_fleet(n_devices, seed, noise_floor ? FleetSpec::noise_floor() : FleetSpec{});
      const auto traces = simulate_fleet(fleet, n_sessions, sc, derive_seed(seed, "traces"));
      fs::create_directories(out_dir);
      for (const auto& t : traces) save_trace(t, fs::path(out_dir) / (t.session_id + ".json"));
      write_file(fs::path(out_dir) / "fleet.json", fleet_to_json(fleet).dump(2) + "\n");
      if (n_cal > 0) {
        for (const auto& p : fleet) {
          const auto base = fs::path(out_dir) / "calibration" / p.device_id;
          write_session(simulate_accel_session(p, n_cal, derive_seed(seed, p.device_id + "/accel")), base / "accel");
          GyroSessionOptions opt;
          opt.angle_error_sd = 0.05;
          write_session(simulate_gyro_session(p, n_cal, derive_seed(seed, p.device_id + "/gyro"), opt), base / "gyro");
        }
      }
      std::cout << "wrote " << traces.size() << " traces for " << fleet.size() << " devices to " << out_dir << "\n";
      return 0;
    }

    if (*ingest) {
      const auto traces = load_dir(in_dir);
      if (!out_dir.empty()) {
        fs::create_directories(out_dir);
        for (const auto& [path, t] : traces) save_trace(t, fs::path(out_dir) / (path.stem().string() + ".json"));
      }
      std::size_t samples = 0;
      for (const auto& [path, t] : traces) samples += t.samples.size();
      std::cout << traces.size() << " valid traces, " << samples << " samples\n";
      return 0;
    }

    if (*featurize_cmd) {
      std::vector<SensorTrace> traces;
      for (auto& [path, t] : load_dir(in_dir)) traces.push_back(std::move(t));
      const auto kinds = streams_of(stream_set_from_string(streams));
      const auto ds = make_dataset(extract_all(traces, kinds, rate, parallel));
      write_file(out_file, dataset_to_csv(ds));
      std::cout << ds.size() << " rows x " << ds.num_features() << " features -> " << out_file << "\n";
      return 0;
    }

    if (*select) {
      const auto ds = load_table(table, {});
      if (bins < 2) throw ValidationError("--bins must be >= 2");
      const auto ranking = jmi_rank(ds, top_k, bins, parallel);
      write_file(out_file, ranking.to_json().dump(2) + "\n");
      for (std::size_t i = 0; i < ranking.order.size(); ++i)
        std::cout << i + 1 << "\t" << ranking.names[i] << "\t" << format_double(ranking.scores[i]) << "\n";
      return 0;
    }

    auto classifier_config = [&] {
      ClassifierConfig cfg;
      cfg.kind = classifier_from_string(classifier);
      cfg.n_trees = n_trees;
      cfg.knn_k = knn_k;
      cfg.seed = seed;
      cfg.workers = parallel;
      return cfg;
    };

    if (*train) {
      const auto ds = load_table(table, feature_spec);
      const auto model = train_classifier(ds, classifier_config());
      write_file(out_file, classifier_to_json(model, ds.feature_names, ds.class_names).dump() + "\n");
      std::cout << "trained " << classifier << " on " << ds.size() << " rows, " << ds.num_classes() << " classes\n";
      return 0;
    }

    if (*evaluate_cmd) {
      const auto ds = load_table(table, feature_spec);
      SplitPolicy policy;
      if (train_per_class > 0) policy = {SplitPolicy::Mode::fixed_count, train_per_class};
      const auto rep = evaluate(ds, classifier_config(), reps, seed, policy);
      write_file(out_file, rep.to_json().dump(2) + "\n");
      if (!csv_out.empty()) write_file(csv_out, report_csv_row(classifier, rep, true));
      std::cout << "AvgF " << format_double(rep.avg_f) << " +- " << format_double(rep.avg_f_ci95) << " (AvgPr "
                << format_double(rep.avg_precision) << ", AvgRe " << format_double(rep.avg_recall) << ")\n";
      return 0;
    }

    if (*estimate) {
      const auto s = sensor_from_string(sensor);
      const auto session = load_session(session_dir, s, theta);
      const auto model = s == Sensor::accel ? accel_offset_gain(session) : gyro_offset_gain(session);
      const auto text = model.to_json().dump(2) + "\n";
      if (out_file.empty())
        std::cout << text;
      else
        write_file(out_file, text);
      return 0;
    }

    if (*apply) {
      std::vector<CalibrationModel> models;
      for (const auto& f : model_files) models.push_back(CalibrationModel::from_json(read_json(f)));
      require_file(in_file);
      save_trace(apply_calibration(load_trace(in_file), models), out_file);
      return 0;
    }

    if (*obf) {
      ObfuscationPolicy policy;
      if (!policy_file.empty()) policy = ObfuscationPolicy::from_json(read_json(policy_file));
      policy.range_scale = scale;
      policy.injection_prob = inject_prob;
      policy.seed = seed;
      policy.validate();
      const auto traces = load_dir(in_dir);
      fs::create_directories(out_dir);
      parallel_for(traces.size(), [&](std::size_t i) {
        save_trace(obfuscate(traces[i].second, policy), fs::path(out_dir) / traces[i].first.filename());
      }, parallel);
      write_file(fs::path(out_dir) / "policy.json", policy.to_json().dump(2) + "\n");
      std::cout << "obfuscated " << traces.size() << " traces -> " << out_dir << "\n";
      return 0;
    }

    if (*recipe) {
      ExperimentConfig cfg;
      if (!config_file.empty()) cfg.merge_json(read_json(config_file));
      cfg.recipe = recipe_name;
      if (!out_dir.empty()) cfg.output_dir = out_dir;
      if (!input.empty()) cfg.input_dir = input;
      if (!calib_dir.empty()) cfg.calibration_dir = calib_dir;
      if (*o_dev) cfg.devices = r_devices;
      if (*o_ses) cfg.sessions = r_sessions;
      if (*o_reps) cfg.repetitions = reps;
      if (*o_seed) cfg.eval_seed = seed;
      if (*o_streams) cfg.streams = stream_set_from_string(streams);
      if (*o_clf) cfg.classifier.kind = classifier_from_string(classifier);
      if (*o_trees) cfg.classifier.n_trees = n_trees;
      if (*o_rate) cfg.rate = rate;
      cfg.classifier.workers = parallel;
      if (!cfg.input_dir.empty()) require_dir(cfg.input_dir, "input");
      if (!cfg.calibration_dir.empty()) require_dir(cfg.calibration_dir, "calibration");
      const auto result = run_recipe(cfg, utc_timestamp());
      std::cout << "recipe " << cfg.recipe << " -> " << cfg.output_dir << " (config " << config_hash(cfg) << ")\n";
      for (const auto& [name, content] : result.csv) std::cout << "\n" << name << ":\n" << content;
      return 0;
    }
  } catch (const ParseError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitValidation;
  } catch (const ValidationError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitValidation;
  } catch (const std::invalid_argument& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitValidation;
  } catch (const json::exception& e) {
    std::cerr << "error: malformed JSON input: " << e.what() << "\n";
    return kExitValidation;
  } catch (const std::exception& e) {
    std::cerr << "runtime error: " << e.what() << "\n";
    return kExitRuntime;
  }
  return 0;
}
