#include <gtest/gtest.h>

#include <filesystem>
#include <random>

#include <motionprint/trace.hpp>

using namespace motionprint;

namespace {

SensorTrace three_samples() {
  SensorTrace t{"devA", "s1", AudioMode::none, Placement::desk,
                {{0, 0.1, 0.2, 9.81, 0.01, 0.02, 0.03},
                 {10, 0.11, 0.19, 9.8, 0.0, 0.01, 0.02},
                 {20, 0.12, 0.18, 9.79, -0.01, 0.0, 0.01}}};
  return t;
}

SensorTrace random_trace(std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> g(0, 3);
  SensorTrace t{"dev-" + std::to_string(seed), "sess \"q\"", AudioMode::sine20k, Placement::hand, {}};
  double time = 0;
  for (int i = 0; i < 50; ++i) {
    time += 10 + std::abs(g(rng)) / 7;
    t.samples.push_back({time, g(rng), g(rng), g(rng) + 9.81, g(rng) * 1e-7, g(rng) * 1e300, g(rng)});
  }
  return t;
}

}  // namespace

TEST(Trace, JsonThreeSamples) {
  const auto t = parse_trace_json(
      R"({"device_id":"a","session_id":"b","audio_mode":"none","placement":"desk",
          "samples":[[0,0,0,9.81,0,0,0],[10,0,0,9.81,0,0,0],[20,0,0,9.81,0,0,0]]})");
  EXPECT_EQ(t.samples.size(), 3u);
  EXPECT_DOUBLE_EQ(t.duration_ms(), 20.0);
}

TEST(Trace, CsvDuplicateKeepsFirst) {
  const auto t = parse_trace_csv("t_ms,ax,ay,az,gx,gy,gz\n0,1,0,0,0,0,0\n10,2,0,0,0,0,0\n10,3,0,0,0,0,0\n20,4,0,0,0,0,0\n",
                                 R"({"device_id":"a","session_id":"b","audio_mode":"song","placement":"hand"})");
  ASSERT_EQ(t.samples.size(), 3u);
  EXPECT_EQ(t.samples[1].ax, 2.0);
  EXPECT_EQ(t.audio_mode, AudioMode::song);
}

TEST(Trace, UnsortedInputIsSorted) {
  const auto t = parse_trace_json(
      R"({"device_id":"a","session_id":"b","audio_mode":"none","placement":"desk",
          "samples":[[20,3,0,0,0,0,0],[0,1,0,0,0,0,0],[10,2,0,0,0,0,0]]})");
  EXPECT_EQ(t.samples[0].ax, 1.0);
  EXPECT_EQ(t.samples[2].ax, 3.0);
}

TEST(Trace, NanStringRejected) {
  EXPECT_THROW(parse_trace_json(R"({"device_id":"a","session_id":"b","audio_mode":"none","placement":"desk",
                                    "samples":[[0,0,0,"NaN",0,0,0],[10,0,0,1,0,0,0]]})"),
               ValidationError);
}

TEST(Trace, CsvNanRejected) {
  EXPECT_THROW(parse_trace_csv("t_ms,ax,ay,az,gx,gy,gz\n0,0,0,nan,0,0,0\n10,0,0,1,0,0,0\n",
                               R"({"device_id":"a","session_id":"b","audio_mode":"none","placement":"desk"})"),
               ValidationError);
}

TEST(Trace, TooFewSamples) {
  EXPECT_THROW(parse_trace_json(R"({"device_id":"a","session_id":"b","audio_mode":"none","placement":"desk",
                                    "samples":[[0,0,0,1,0,0,0],[0,0,0,2,0,0,0]]})"),
               ValidationError);
}

TEST(Trace, MalformedSyntaxNamesOffset) {
  try {
    parse_trace_json(R"({"device_id": "a", "samples": [[0,1,)");
    FAIL() << "expected ParseError";
  } catch (const ParseError& e) {
    EXPECT_NE(std::string(e.what()).find("byte"), std::string::npos);
  }
}

TEST(Trace, CsvBadNumberNamesLine) {
  try {
    parse_trace_csv("t_ms,ax,ay,az,gx,gy,gz\n0,0,0,1,0,0,0\n10,0,x,1,0,0,0\n",
                    R"({"device_id":"a","session_id":"b","audio_mode":"none","placement":"desk"})");
    FAIL() << "expected ParseError";
  } catch (const ParseError& e) {
    EXPECT_NE(std::string(e.what()).find("line 3"), std::string::npos);
  }
}

TEST(Trace, UnknownEnumRejected) {
  EXPECT_THROW(parse_trace_json(R"({"device_id":"a","session_id":"b","audio_mode":"loud","placement":"desk",
                                    "samples":[[0,0,0,1,0,0,0],[1,0,0,1,0,0,0]]})"),
               ValidationError);
}

TEST(Trace, JsonRoundTripIsIdentity) {
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    const auto t = random_trace(seed);
    EXPECT_EQ(parse_trace(write_trace(t, TraceFormat::json), TraceFormat::json), t);
  }
}

TEST(Trace, CsvRoundTripIsIdentity) {
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    const auto t = random_trace(seed);
    const auto meta = trace_metadata_json(t).dump();
    EXPECT_EQ(parse_trace(write_trace(t, TraceFormat::csv), TraceFormat::csv, meta), t);
  }
}

TEST(Trace, Sine20kField) {
  auto t = three_samples();
  t.audio_mode = AudioMode::sine20k;
  EXPECT_NE(write_trace(t, TraceFormat::json).find(R"("audio_mode":"sine20k")"), std::string::npos);
}

TEST(Trace, EmptyTraceNotWritten) {
  SensorTrace t{"a", "b", AudioMode::none, Placement::desk, {}};
  EXPECT_THROW(write_trace(t, TraceFormat::json), ValidationError);
}

// The capture page serializes DeviceMotion events: fractional millisecond
// timestamps from performance.now(), gyro already converted to rad/s, an
// opaque random device id, and occasionally two events in the same tick.
TEST(Trace, CapturePageExport) {
  const auto t = parse_trace_json(R"({
    "device_id": "c0ffee12-3456-4abc-8def-0123456789ab",
    "session_id": "2026-10-19T09:15:02.117Z",
    "audio_mode": "sine20k",
    "placement": "hand",
    "samples": [
      [0, -0.0479, 0.1676, 9.7906, 0.00122, -0.00087, 0.00035],
      [16.7, -0.0503, 0.1652, 9.8043, 0.00140, -0.00052, 0.00017],
      [16.7, -0.0511, 0.1640, 9.8011, 0.00139, -0.00050, 0.00019],
      [33.400000000000006, -0.0455, 0.1701, 9.7969, 0.00105, -0.00105, 0.00052],
      [50.1, -0.0468, 0.1688, 9.8120, 0.00157, -0.00070, 0.00000]
    ]
  })");
  EXPECT_EQ(t.device_id, "c0ffee12-3456-4abc-8def-0123456789ab");
  EXPECT_EQ(t.placement, Placement::hand);
  ASSERT_EQ(t.samples.size(), 4u);
  EXPECT_DOUBLE_EQ(t.samples[1].ax, -0.0503);
  EXPECT_DOUBLE_EQ(t.duration_ms(), 50.1);
}

TEST(Trace, FileHelpersSkipSidecars) {
  const auto dir = std::filesystem::temp_directory_path() / "motionprint_trace_files";
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  const auto t = three_samples();
  save_trace(t, dir / "a.csv");
  save_trace(t, dir / "b.json");
  write_file(dir / "fleet.json", "[]");
  const auto files = list_trace_files(dir);
  ASSERT_EQ(files.size(), 2u);
  EXPECT_EQ(load_trace(files[0]), t);
  EXPECT_EQ(load_trace(files[1]), t);
  std::filesystem::remove_all(dir);
}
