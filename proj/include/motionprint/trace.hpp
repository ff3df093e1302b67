#pragma once

// Sensor trace data model and the JSON / CSV trace file formats.
//
// JSON (one trace per file):
//   {"device_id": str, "session_id": str, "audio_mode": "none"|"sine20k"|"song",
//    "placement": "desk"|"hand", "samples": [[t_ms, ax, ay, az, gx, gy, gz], ...]}
// CSV: header `t_ms,ax,ay,az,gx,gy,gz`, metadata in a `<name>.meta.json` sidecar
// holding the four metadata fields.

#include <algorithm>
#include <array>
#include <charconv>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <optional>
#include <sstream>
#include <string>
#include <string_view>
#include <system_error>
#include <vector>

#include <json.hpp>

#include "common.hpp"

namespace motionprint {

enum class AudioMode { none, sine20k, song };
enum class Placement { desk, hand };
enum class TraceFormat { json, csv };

/// The four scalar streams fed to feature extraction.
enum class StreamKind { accel_magnitude = 0, gyro_x = 1, gyro_y = 2, gyro_z = 3 };

inline constexpr std::array<StreamKind, 4> kAllStreams{
    StreamKind::accel_magnitude, StreamKind::gyro_x, StreamKind::gyro_y, StreamKind::gyro_z};

inline constexpr std::string_view to_string(StreamKind k) {
  switch (k) {
    case StreamKind::accel_magnitude: return "accel_magnitude";
    case StreamKind::gyro_x: return "gyro_x";
    case StreamKind::gyro_y: return "gyro_y";
    case StreamKind::gyro_z: return "gyro_z";
  }
  return "?";
}

inline constexpr std::string_view to_string(AudioMode m) {
  switch (m) {
    case AudioMode::none: return "none";
    case AudioMode::sine20k: return "sine20k";
    case AudioMode::song: return "song";
  }
  return "?";
}

inline constexpr std::string_view to_string(Placement p) {
  return p == Placement::desk ? "desk" : "hand";
}

inline AudioMode audio_mode_from_string(std::string_view s) {
  if (s == "none") return AudioMode::none;
  if (s == "sine20k") return AudioMode::sine20k;
  if (s == "song") return AudioMode::song;
  throw ValidationError("unknown audio_mode '" + std::string(s) + "'");
}

inline Placement placement_from_string(std::string_view s) {
  if (s == "desk") return Placement::desk;
  if (s == "hand") return Placement::hand;
  throw ValidationError("unknown placement '" + std::string(s) + "'");
}

inline StreamKind stream_from_string(std::string_view s) {
  for (auto k : kAllStreams)
    if (to_string(k) == s) return k;
  throw ValidationError("unknown stream '" + std::string(s) + "'");
}

/// One timestamped 6-axis reading. t in ms, acceleration in m/s^2 including
/// gravity, rotation rate in rad/s.
struct Sample {
  double t = 0, ax = 0, ay = 0, az = 0, gx = 0, gy = 0, gz = 0;

  std::array<double, 3> accel() const { return {ax, ay, az}; }
  std::array<double, 3> gyro() const { return {gx, gy, gz}; }
  friend bool operator==(const Sample&, const Sample&) = default;
};

struct SensorTrace {
  std::string device_id;
  std::string session_id;
  AudioMode audio_mode = AudioMode::none;
  Placement placement = Placement::desk;
  std::vector<Sample> samples;

  double duration_ms() const { return samples.empty() ? 0.0 : samples.back().t - samples.front().t; }
  friend bool operator==(const SensorTrace&, const SensorTrace&) = default;
};

/// Sorts by t, drops repeated timestamps (first occurrence in input order
/// wins), and enforces the trace invariants. Throws ValidationError.
inline void normalize_trace(SensorTrace& trace) {
  for (std::size_t i = 0; i < trace.samples.size(); ++i) {
    const auto& s = trace.samples[i];
    for (double v : {s.t, s.ax, s.ay, s.az, s.gx, s.gy, s.gz}) {
      if (!std::isfinite(v))
        throw ValidationError("sample " + std::to_string(i) + " has a non-finite value");
    }
    if (s.t < 0) throw ValidationError("sample " + std::to_string(i) + " has negative timestamp");
  }
  std::stable_sort(trace.samples.begin(), trace.samples.end(),
                   [](const Sample& a, const Sample& b) { return a.t < b.t; });
  auto last = std::unique(trace.samples.begin(), trace.samples.end(),
                          [](const Sample& a, const Sample& b) { return a.t == b.t; });
  trace.samples.erase(last, trace.samples.end());
  if (trace.samples.size() < 2)
    throw ValidationError("trace needs at least 2 distinct samples, got " +
                          std::to_string(trace.samples.size()));
  if (!(trace.duration_ms() > 0)) throw ValidationError("trace duration must be positive");
}

/// Checks invariants without modifying the trace.
inline void validate_trace(const SensorTrace& trace) {
  if (trace.samples.size() < 2)
    throw ValidationError("trace needs at least 2 samples, got " +
                          std::to_string(trace.samples.size()));
  for (std::size_t i = 0; i < trace.samples.size(); ++i) {
    const auto& s = trace.samples[i];
    for (double v : {s.t, s.ax, s.ay, s.az, s.gx, s.gy, s.gz})
      if (!std::isfinite(v))
        throw ValidationError("sample " + std::to_string(i) + " has a non-finite value");
    if (s.t < 0) throw ValidationError("sample " + std::to_string(i) + " has negative timestamp");
    if (i > 0 && !(s.t > trace.samples[i - 1].t))
      throw ValidationError("timestamps not strictly increasing at sample " + std::to_string(i));
  }
}

// Shortest decimal that round-trips to the same double.
inline std::string format_double(double v) {
  std::array<char, 32> buf{};
  auto [end, ec] = std::to_chars(buf.data(), buf.data() + buf.size(), v);
  if (ec != std::errc{}) throw std::runtime_error("cannot format double");
  return std::string(buf.data(), end);
}

namespace detail {

inline double parse_double_field(std::string_view field, std::size_t line, std::size_t column) {
  while (!field.empty() && (field.front() == ' ' || field.front() == '\t')) field.remove_prefix(1);
  while (!field.empty() && (field.back() == ' ' || field.back() == '\t' || field.back() == '\r'))
    field.remove_suffix(1);
  double v = 0;
  auto [ptr, ec] = std::from_chars(field.data(), field.data() + field.size(), v);
  if (ec == std::errc::result_out_of_range)
    throw ValidationError("line " + std::to_string(line) + ": value out of range in column " +
                          std::to_string(column));
  if (ec != std::errc{} || ptr != field.data() + field.size())
    throw ParseError("line " + std::to_string(line) + ", column " + std::to_string(column) +
                     ": cannot parse number '" + std::string(field) + "'");
  return v;
}

inline void read_metadata(const nlohmann::json& j, SensorTrace& trace) {
  if (!j.is_object()) throw ValidationError("trace metadata must be a JSON object");
  auto str_field = [&](const char* key) -> std::string {
    auto it = j.find(key);
    if (it == j.end() || !it->is_string())
      throw ValidationError(std::string("missing or non-string field '") + key + "'");
    return it->get<std::string>();
  };
  trace.device_id = str_field("device_id");
  trace.session_id = str_field("session_id");
  trace.audio_mode = audio_mode_from_string(str_field("audio_mode"));
  trace.placement = placement_from_string(str_field("placement"));
}

inline nlohmann::json parse_json_text(std::string_view content) {
  try {
    return nlohmann::json::parse(content);
  } catch (const nlohmann::json::parse_error& e) {
    throw ParseError("JSON syntax error at byte " + std::to_string(e.byte) + ": " + e.what());
  }
}

}  // namespace detail

inline SensorTrace parse_trace_json(std::string_view content) {
  const auto j = detail::parse_json_text(content);
  SensorTrace trace;
  detail::read_metadata(j, trace);
  auto it = j.find("samples");
  if (it == j.end() || !it->is_array()) throw ValidationError("missing 'samples' array");
  trace.samples.reserve(it->size());
  std::size_t row = 0;
  for (const auto& s : *it) {
    if (!s.is_array() || s.size() != 7)
      throw ValidationError("samples[" + std::to_string(row) + "] must hold 7 numbers");
    std::array<double, 7> v{};
    for (std::size_t c = 0; c < 7; ++c) {
      if (!s[c].is_number())
        throw ValidationError("samples[" + std::to_string(row) + "][" + std::to_string(c) +
                              "] is not a finite number");
      v[c] = s[c].get<double>();
    }
    trace.samples.push_back({v[0], v[1], v[2], v[3], v[4], v[5], v[6]});
    ++row;
  }
  normalize_trace(trace);
  return trace;
}

/// CSV body plus the sidecar metadata JSON.
inline SensorTrace parse_trace_csv(std::string_view csv, std::string_view metadata_json) {
  SensorTrace trace;
  detail::read_metadata(detail::parse_json_text(metadata_json), trace);
  std::size_t line_no = 0;
  bool header_seen = false;
  std::size_t pos = 0;
  while (pos <= csv.size()) {
    auto eol = csv.find('\n', pos);
    if (eol == std::string_view::npos) eol = csv.size();
    std::string_view line = csv.substr(pos, eol - pos);
    pos = eol + 1;
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    if (line.empty()) {
      if (pos > csv.size()) break;
      continue;
    }
    if (!header_seen) {
      if (line != "t_ms,ax,ay,az,gx,gy,gz")
        throw ParseError("line " + std::to_string(line_no) +
                         ": expected header 't_ms,ax,ay,az,gx,gy,gz'");
      header_seen = true;
      continue;
    }
    std::array<double, 7> v{};
    std::size_t col = 0, start = 0;
    for (;;) {
      auto comma = line.find(',', start);
      auto field = line.substr(start, comma == std::string_view::npos ? line.size() - start
                                                                       : comma - start);
      if (col >= 7)
        throw ParseError("line " + std::to_string(line_no) + ": too many columns");
      v[col] = detail::parse_double_field(field, line_no, col + 1);
      ++col;
      if (comma == std::string_view::npos) break;
      start = comma + 1;
    }
    if (col != 7)
      throw ParseError("line " + std::to_string(line_no) + ": expected 7 columns, got " +
                       std::to_string(col));
    trace.samples.push_back({v[0], v[1], v[2], v[3], v[4], v[5], v[6]});
  }
  if (!header_seen) throw ParseError("line 1: missing CSV header");
  normalize_trace(trace);
  return trace;
}

inline SensorTrace parse_trace(std::string_view content, TraceFormat format,
                               std::string_view csv_metadata = {}) {
  if (format == TraceFormat::json) return parse_trace_json(content);
  return parse_trace_csv(content, csv_metadata);
}

inline nlohmann::json trace_metadata_json(const SensorTrace& trace) {
  return {{"device_id", trace.device_id},
          {"session_id", trace.session_id},
          {"audio_mode", to_string(trace.audio_mode)},
          {"placement", to_string(trace.placement)}};
}

/// Serializes a valid trace. For CSV the returned string is the body; the
/// sidecar comes from trace_metadata_json().
inline std::string write_trace(const SensorTrace& trace, TraceFormat format) {
  validate_trace(trace);
  if (format == TraceFormat::json) {
    // Hand-rolled so numbers use the shortest round-trip form and the key
    // order is stable.
    std::string out = "{\"device_id\":" + nlohmann::json(trace.device_id).dump() +
                      ",\"session_id\":" + nlohmann::json(trace.session_id).dump() +
                      ",\"audio_mode\":\"" + std::string(to_string(trace.audio_mode)) +
                      "\",\"placement\":\"" + std::string(to_string(trace.placement)) +
                      "\",\"samples\":[";
    bool first = true;
    for (const auto& s : trace.samples) {
      out += first ? "[" : ",[";
      first = false;
      bool first_v = true;
      for (double v : {s.t, s.ax, s.ay, s.az, s.gx, s.gy, s.gz}) {
        if (!first_v) out += ',';
        first_v = false;
        out += format_double(v);
      }
      out += ']';
    }
    out += "]}\n";
    return out;
  }
  std::string out = "t_ms,ax,ay,az,gx,gy,gz\n";
  for (const auto& s : trace.samples) {
    bool first_v = true;
    for (double v : {s.t, s.ax, s.ay, s.az, s.gx, s.gy, s.gz}) {
      if (!first_v) out += ',';
      first_v = false;
      out += format_double(v);
    }
    out += '\n';
  }
  return out;
}

// ---- file helpers ---------------------------------------------------------

inline std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

inline void write_file(const std::filesystem::path& path, std::string_view content) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << content;
}

inline std::filesystem::path csv_sidecar_path(const std::filesystem::path& csv_path) {
  auto p = csv_path;
  p.replace_extension(".meta.json");
  return p;
}

/// Loads a .json trace, or a .csv trace plus its sidecar.
inline SensorTrace load_trace(const std::filesystem::path& path) {
  if (path.extension() == ".csv") {
    auto meta = csv_sidecar_path(path);
    if (!std::filesystem::exists(meta))
      throw ValidationError("missing metadata sidecar " + meta.string());
    return parse_trace_csv(read_file(path), read_file(meta));
  }
  return parse_trace_json(read_file(path));
}

inline void save_trace(const SensorTrace& trace, const std::filesystem::path& path) {
  if (path.extension() == ".csv") {
    write_file(path, write_trace(trace, TraceFormat::csv));
    write_file(csv_sidecar_path(path), trace_metadata_json(trace).dump(2) + "\n");
  } else {
    write_file(path, write_trace(trace, TraceFormat::json));
  }
}

/// Trace files in a directory, sorted by name (sidecars excluded).
inline std::vector<std::filesystem::path> list_trace_files(const std::filesystem::path& dir) {
  std::vector<std::filesystem::path> files;
  for (const auto& e : std::filesystem::directory_iterator(dir)) {
    if (!e.is_regular_file()) continue;
    const auto name = e.path().filename().string();
    if (name.ends_with(".meta.json") || name == "fleet.json" || name == "policy.json") continue;
    if (e.path().extension() == ".json" || e.path().extension() == ".csv") files.push_back(e.path());
  }
  std::sort(files.begin(), files.end());
  return files;
}

}  // namespace motionprint
