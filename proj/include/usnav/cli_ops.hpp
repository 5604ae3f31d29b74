#pragma once

#include <cstdint>
#include <optional>
#include <string>

#include "usnav/config.hpp"

namespace usnav {

// Shared state of one harness invocation. Outputs go to `out_dir` (created on
// demand); an empty out_dir writes nothing and only returns the summary.
struct OpContext {
  AppConfig config;
  std::uint64_t seed = 1;
  std::string out_dir;
};

// Empty config_path means built-in defaults.
OpContext make_op_context(const std::string& config_path, std::uint64_t seed,
                          const std::string& out_dir);

struct CalibrateArgs {
  std::string mask_path;   // P5 PGM, valid = 255
  std::string image_path;  // optional P5 PGM to package against the mask
  std::string kind = "convex";
  double sensor_width = 0.0;  // 0 = take L from the configured probe
  std::string probe_tag;
};
// Writes probe_geometry.json (and frame.bin when an image is given).
Json op_calibrate(const OpContext& ctx, const CalibrateArgs& args);

// Observation file: JSON lines {"timestamp_us": t, "points": [[x,y,z], ...]}.
// Writes poses.jsonl.
Json op_track(const OpContext& ctx, const std::string& observations_path);

// Writes accuracy_samples.csv and accuracy_summary.json.
Json op_accuracy(const OpContext& ctx, std::optional<int> frames_per_target);

struct LatencyOverrides {
  std::optional<double> duration_s;
  std::optional<double> fps;
  std::optional<double> host_delay_ms;
};
// Writes latency.csv and latency_summary.json.
Json op_latency(const OpContext& ctx, const LatencyOverrides& overrides);

// Puncture file: JSON lines {"mode", "tip": [..], "direction": [..],
// "length_mm", "target": [..], "elapsed_s"}. Without a file a synthetic trace
// in the given regime is scored. Writes usecase_metrics.json.
Json op_metrics(const OpContext& ctx, const std::string& punctures_path,
                std::size_t synthetic_count = 1000);

// Trace file as documented by parse_trace. Without a file a synthetic 10 s,
// 45 Hz trace is replayed (and written to trace.jsonl). Writes cue_log.jsonl.
Json op_replay(const OpContext& ctx, const std::string& trace_path, const std::string& mode);

}  // namespace usnav
