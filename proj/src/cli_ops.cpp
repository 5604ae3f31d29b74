#include "usnav/cli_ops.hpp"

#include <filesystem>
#include <map>
#include <sstream>

#include "usnav/codec.hpp"
#include "usnav/image_io.hpp"
#include "usnav/session.hpp"

namespace usnav {

namespace {

std::string out_path(const OpContext& ctx, const std::string& name) {
  std::filesystem::create_directories(ctx.out_dir);
  return (std::filesystem::path(ctx.out_dir) / name).string();
}

void maybe_write(const OpContext& ctx, const std::string& name, const std::string& text) {
  if (ctx.out_dir.empty()) return;
  try {
    write_text_file(out_path(ctx, name), text);
  } catch (const std::filesystem::filesystem_error& e) {
    throw Error(ErrorCode::kIo, e.what());
  }
}

std::vector<std::string> json_lines(const std::string& text) {
  std::vector<std::string> lines;
  std::istringstream in(text);
  std::string line;
  while (std::getline(in, line)) {
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    lines.push_back(line);
  }
  return lines;
}

Json parse_line(const std::string& line, std::size_t number, const std::string& path) {
  try {
    return Json::parse(line);
  } catch (const Json::parse_error& e) {
    throw Error(ErrorCode::kConfig,
                path + ":" + std::to_string(number) + ": " + e.what());
  }
}

const ToolDefinition& tool_by_id(const AppConfig& c, int id) {
  for (const ToolDefinition& t : c.tools) {
    if (t.tool_id() == id) return t;
  }
  throw Error(ErrorCode::kUnknownTool, "no tool with id " + std::to_string(id));
}

// Probe and needle tool ids used by the offline harnesses.
std::pair<int, int> bound_tools(const AppConfig& c) {
  if (c.service.sessions.empty()) return {1, 2};
  return {c.service.sessions.front().probe_tool_id, c.service.sessions.front().needle_tool_id};
}

bool same_geometry(const ProbeGeometry& a, const ProbeGeometry& b) {
  return a.kind == b.kind && a.pixel_width == b.pixel_width && a.origin_u == b.origin_u &&
         a.origin_v == b.origin_v && a.sensor_width == b.sensor_width &&
         a.u_left == b.u_left && a.u_right == b.u_right && a.bounds == b.bounds;
}

ImageMask accuracy_mask(const AppConfig& c) {
  if (!c.probe_mask_path.empty()) return mask_from_gray(read_pgm(c.probe_mask_path));
  SimulatedProbe sim = default_simulated_probe();
  if (!same_geometry(sim.geometry, c.probe)) {
    throw Error(ErrorCode::kConfig,
                "the accuracy grid needs the probe mask; add a 'probe_mask' section");
  }
  return std::move(sim.mask);
}

}  // namespace

OpContext make_op_context(const std::string& config_path, std::uint64_t seed,
                          const std::string& out_dir) {
  OpContext ctx;
  ctx.config = config_path.empty() ? default_app_config() : load_app_config(config_path);
  ctx.seed = seed;
  ctx.out_dir = out_dir;
  return ctx;
}

Json op_calibrate(const OpContext& ctx, const CalibrateArgs& args) {
  const ImageMask mask = mask_from_gray(read_pgm(args.mask_path));
  const double width = args.sensor_width > 0.0 ? args.sensor_width : ctx.config.probe.sensor_width;
  if (!(width > 0.0)) throw Error(ErrorCode::kInvalidArgument, "sensor width must be positive");
  const std::string tag = args.probe_tag.empty() ? ctx.config.probe.probe_tag : args.probe_tag;
  const ProbeGeometry geom =
      compute_probe_geometry(mask, parse_probe_kind(args.kind), width, tag);

  Json out = {{"geometry", probe_geometry_to_json(geom)},
              {"valid_pixels", mask.valid_count()},
              {"single_component", mask.is_single_component()}};
  maybe_write(ctx, "probe_geometry.json", out["geometry"].dump(2) + "\n");

  if (!args.image_path.empty()) {
    const GrayImage image = read_pgm(args.image_path);
    const PackagedFrame frame = package_frame(image, mask, geom);
    const std::vector<std::uint8_t> bytes = encode_frame(make_frame_packet(frame, 0, 0));
    out["frame"] = {{"crop_width", frame.bounds.width()},
                    {"crop_height", frame.bounds.height()},
                    {"transparent_pixels", frame.transparent_count()},
                    {"encoded_bytes", bytes.size()}};
    maybe_write(ctx, "frame.bin", std::string(bytes.begin(), bytes.end()));
  }
  return out;
}

Json op_track(const OpContext& ctx, const std::string& observations_path) {
  const MarkerTracker tracker(ctx.config.tools, ctx.config.match_tolerance);
  std::map<int, std::size_t> found;
  std::size_t frames = 0;
  std::size_t budget_hits = 0;
  std::string log;
  const std::vector<std::string> lines = json_lines(read_text_file(observations_path));
  for (std::size_t i = 0; i < lines.size(); ++i) {
    const Json j = parse_line(lines[i], i + 1, observations_path);
    MarkerObservation obs;
    try {
      obs.timestamp_us = j.value("timestamp_us", std::uint64_t{0});
      for (const Json& p : j.at("points")) obs.points.push_back(vec3_from_json(p));
    } catch (const Json::exception& e) {
      throw Error(ErrorCode::kConfig,
                  observations_path + ":" + std::to_string(i + 1) + ": " + e.what());
    }
    const FrameTracking ft = tracker.track(obs);
    Json poses = Json::array();
    for (const ToolPose& p : ft.poses) {
      poses.push_back(tool_pose_to_json(p));
      ++found[p.tool_id];
    }
    budget_hits += ft.budget_exceeded_tools.size();
    log += Json{{"timestamp_us", obs.timestamp_us}, {"poses", poses}}.dump() + "\n";
    ++frames;
  }
  maybe_write(ctx, "poses.jsonl", log);

  Json per_tool = Json::object();
  for (const ToolDefinition& t : tracker.tools()) {
    per_tool[std::to_string(t.tool_id())] = found[t.tool_id()];
  }
  return {{"frames", frames}, {"poses_per_tool", per_tool}, {"budget_exceeded", budget_hits}};
}

Json op_accuracy(const OpContext& ctx, std::optional<int> frames_per_target) {
  const AppConfig& c = ctx.config;
  const AccuracyGrid grid =
      AccuracyGrid::from_probe(c.probe, accuracy_mask(c), c.grid_spacing, c.grid_max_depth,
                               frames_per_target.value_or(c.grid_frames));
  AccuracySetup setup = default_accuracy_setup();
  const auto [probe_id, needle_id] = bound_tools(c);
  setup.probe_tool = tool_by_id(c, probe_id);
  setup.needle_tool = tool_by_id(c, needle_id);
  setup.needle = c.needle;
  setup.camera = c.camera;
  setup.match_tolerance = c.match_tolerance;

  const ExperimentReport report = run_accuracy_experiment(grid, setup, ctx.seed);
  const Json summary = experiment_summary_to_json(report, grid);
  maybe_write(ctx, "accuracy_samples.csv", report.samples_csv());
  maybe_write(ctx, "accuracy_summary.json", summary.dump(2) + "\n");
  return summary;
}

Json op_latency(const OpContext& ctx, const LatencyOverrides& overrides) {
  LatencyConfig cfg = ctx.config.latency;
  if (overrides.duration_s) cfg.duration_s = *overrides.duration_s;
  if (overrides.fps) cfg.fps = *overrides.fps;
  if (overrides.host_delay_ms) cfg.host_delay_ms = *overrides.host_delay_ms;
  cfg.seed = ctx.seed;
  const LatencyRun run = run_latency_probe(cfg);
  const Json summary = latency_summary_to_json(run.summary);
  maybe_write(ctx, "latency.csv", format_latency_csv(run.records));
  maybe_write(ctx, "latency_summary.json", summary.dump(2) + "\n");
  return summary;
}

Json op_metrics(const OpContext& ctx, const std::string& punctures_path,
                std::size_t synthetic_count) {
  std::vector<Puncture> trace;
  if (!punctures_path.empty()) {
    const std::vector<std::string> lines = json_lines(read_text_file(punctures_path));
    for (std::size_t i = 0; i < lines.size(); ++i) {
      const Json j = parse_line(lines[i], i + 1, punctures_path);
      try {
        Puncture p;
        p.mode = j.at("mode").get<std::string>();
        p.needle.tip = vec3_from_json(j.at("tip"));
        const Vec3 dir = vec3_from_json(j.at("direction"));
        if (!(dir.norm() > 0.0)) throw Error(ErrorCode::kConfig, "zero direction");
        p.needle.direction = dir.normalized();
        p.needle.length = j.at("length_mm").get<double>();
        p.target = vec3_from_json(j.at("target"));
        p.elapsed_s = j.value("elapsed_s", 0.0);
        trace.push_back(std::move(p));
      } catch (const std::exception& e) {
        throw Error(ErrorCode::kConfig,
                    punctures_path + ":" + std::to_string(i + 1) + ": " + e.what());
      }
    }
  } else {
    const std::vector<NamedRegime> regimes = reported_regimes();
    for (std::size_t i = 0; i < regimes.size(); ++i) {
      const std::vector<Puncture> part = synthesize_usecase_trace(
          regimes[i].regime, synthetic_count, derive_seed(ctx.seed, i), regimes[i].mode);
      trace.insert(trace.end(), part.begin(), part.end());
    }
  }

  const double r = ctx.config.target_radius;
  const UsecaseReport report = run_usecase_metrics(trace, r, SuccessRule::kConjunctive);
  Json out = usecase_report_to_json(report);
  out["source"] = punctures_path.empty() ? "synthetic" : punctures_path;

  // Success under the single-criterion rules, for comparison.
  Json alt = Json::object();
  for (const auto& [name, rule] : {std::pair{"depth_only", SuccessRule::kDepthOnly},
                                   std::pair{"direction_only", SuccessRule::kDirectionOnly}}) {
    Json modes = Json::object();
    for (const ModeMetrics& m : run_usecase_metrics(trace, r, rule).modes) {
      modes[m.mode] = m.success_rate;
    }
    alt[name] = modes;
  }
  out["success_rate_by_rule"] = alt;
  maybe_write(ctx, "usecase_metrics.json", out.dump(2) + "\n");
  out.erase("punctures");
  return out;
}

Json op_replay(const OpContext& ctx, const std::string& trace_path, const std::string& mode) {
  const AppConfig& c = ctx.config;
  const auto [probe_id, needle_id] = bound_tools(c);
  std::vector<TrackingPacket> packets;
  if (trace_path.empty()) {
    packets = synthetic_trace(10.0, 45.0, ctx.seed, probe_id, needle_id);
    maybe_write(ctx, "trace.jsonl", format_trace(packets));
  } else {
    packets = parse_trace(read_text_file(trace_path));
  }

  SessionSpec spec{"replay", probe_id, needle_id, parse_guidance_mode(mode)};
  if (!c.service.sessions.empty()) spec.session_id = c.service.sessions.front().session_id;
  const SessionConfig sc = session_config_for(c, spec);

  const std::vector<ServerMessage> msgs = replay_trace(sc, packets);
  maybe_write(ctx, "cue_log.jsonl", format_message_log(msgs));

  std::map<std::string, std::size_t> by_type;
  std::optional<std::uint64_t> first_cue, last_cue;
  std::size_t cues = 0;
  for (const ServerMessage& m : msgs) {
    ++by_type[m.type];
    if (m.type != "cue_state") continue;
    const std::uint64_t ts = m.body.value("timestamp_us", std::uint64_t{0});
    if (!first_cue) first_cue = ts;
    last_cue = ts;
    ++cues;
  }
  Json out = {{"packets", packets.size()}, {"messages", msgs.size()}, {"by_type", by_type}};
  if (cues >= 2 && *last_cue > *first_cue) {
    out["cue_rate_hz"] = static_cast<double>(cues - 1) /
                         (static_cast<double>(*last_cue - *first_cue) * 1e-6);
  }
  return out;
}

}  // namespace usnav
