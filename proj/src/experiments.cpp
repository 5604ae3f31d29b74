#include "usnav/experiments.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <iomanip>
#include <map>
#include <random>
#include <sstream>
#include <thread>

#include "usnav/stats.hpp"

namespace usnav {

namespace {

constexpr double kPi = 3.14159265358979323846;

// Rotation taking local +y onto +z (needle axis onto the image normal).
const Mat3& y_to_z() {
  static const Mat3 r = Eigen::AngleAxisd(kPi / 2.0, Vec3::UnitX()).toRotationMatrix();
  return r;
}

struct TargetRun {
  std::vector<AccuracySample> samples;
  int failures = 0;
};

TargetRun run_target(int index, const Eigen::Vector2d& target, int frames,
                     const AccuracySetup& setup, const MarkerTracker& tracker,
                     std::uint64_t target_seed) {
  const Vec3 target_cam = setup.probe_pose.apply(Vec3(target.x(), target.y(), 0.0));
  // The wire enters from the camera side, perpendicular to the image, and its
  // tip rests on the target.
  const Mat3 needle_rot = setup.probe_pose.rotation() * y_to_z();
  const Vec3 axis = setup.needle.axis_local.normalized();
  const Vec3 needle_origin = target_cam - setup.needle.tip_offset * (needle_rot * axis);
  const RigidTransform needle_pose(needle_rot, needle_origin);

  const std::vector<PlacedTool> scene{{&setup.probe_tool, setup.probe_pose},
                                      {&setup.needle_tool, needle_pose}};
  TargetRun run;
  run.samples.reserve(static_cast<std::size_t>(frames));
  for (int p = 0; p < frames; ++p) {
    const MarkerObservation obs =
        synthesize_observation(scene, setup.camera, derive_seed(target_seed, p));
    const FrameTracking tracked = tracker.track(obs);
    const ToolPose* probe = nullptr;
    const ToolPose* needle = nullptr;
    for (const ToolPose& tp : tracked.poses) {
      if (tp.tool_id == setup.probe_tool.tool_id()) probe = &tp;
      if (tp.tool_id == setup.needle_tool.tool_id()) needle = &tp;
    }
    if (!probe || !needle) {
      ++run.failures;
      continue;
    }
    try {
      const NeedleState wire = setup.needle.needle_from_pose(needle->transform);
      const ImageIntersection hit =
          solve_image_intersection(probe->transform, wire, setup.needle.tip_offset);
      AccuracySample s;
      s.target = index;
      s.frame = p;
      s.x_measure = hit.x;
      s.y_measure = hit.y;
      s.delta_x = std::hypot(hit.x - target.x(), hit.y - target.y());
      s.delta_l = hit.delta_length;
      run.samples.push_back(s);
    } catch (const Error&) {
      ++run.failures;
    }
  }
  return run;
}

std::string fmt(double v) {
  std::ostringstream o;
  o << std::setprecision(17) << v;
  return o.str();
}

}  // namespace

void AccuracyGrid::validate() const {
  if (!(spacing > 0.0)) throw Error(ErrorCode::kConfig, "grid spacing must be positive");
  if (!(max_depth > 0.0)) throw Error(ErrorCode::kConfig, "grid depth must be positive");
  if (frames_per_target < 1) throw Error(ErrorCode::kConfig, "frames per target must be >= 1");
  if (targets.empty()) throw Error(ErrorCode::kConfig, "grid has no targets");
}

AccuracyGrid AccuracyGrid::from_probe(const ProbeGeometry& geom, const ImageMask& mask,
                                      double spacing, double max_depth,
                                      int frames_per_target) {
  AccuracyGrid grid;
  grid.spacing = spacing;
  grid.max_depth = max_depth;
  grid.frames_per_target = frames_per_target;
  if (!(spacing > 0.0) || !(max_depth > 0.0)) {
    throw Error(ErrorCode::kConfig, "grid spacing and depth must be positive");
  }
  // Columns are anchored half a spacing inside the left top corner.
  const double x0 = (geom.u_left - geom.origin_u) * geom.pixel_width + spacing / 2.0;
  const double half_width_mm = mask.width() * geom.pixel_width;
  const int k_lo = static_cast<int>(std::floor((-half_width_mm - x0) / spacing));
  const int k_hi = static_cast<int>(std::ceil((half_width_mm - x0) / spacing));
  for (double y = spacing / 2.0; y < max_depth; y += spacing) {
    for (int k = k_lo; k <= k_hi; ++k) {
      const double x = x0 + k * spacing;
      const Eigen::Vector2d px = geom.tool_to_pixel(Vec3(x, y, 0.0));
      const long u = std::lround(px.x());
      const long v = std::lround(px.y());
      if (u < 0 || v < 0 || u >= mask.width() || v >= mask.height()) continue;
      if (mask.at(static_cast<int>(u), static_cast<int>(v))) grid.targets.emplace_back(x, y);
    }
  }
  return grid;
}

ToolDefinition default_probe_tool(int tool_id) {
  // Coplanar with the image, above its top edge.
  return ToolDefinition(tool_id,
                        {Vec3(116, -50, 0), Vec3(-70, -246, 0), Vec3(52, -106, 0),
                         Vec3(46, -260, 0)},
                        1);
}

ToolDefinition default_needle_tool(int tool_id) {
  // Plane perpendicular to the needle axis (local y) through the tool centre.
  return ToolDefinition(tool_id,
                        {Vec3(-48, 0, -60), Vec3(78, 0, 24), Vec3(54, 0, -54),
                         Vec3(-106, 0, 110)},
                        1);
}

AccuracySetup default_accuracy_setup() {
  return AccuracySetup{default_probe_tool(), default_needle_tool(),
                       RigidTransform(Mat3::Identity(), Vec3(0.0, -100.0, 500.0)),
                       NeedleGeometry{}, DepthCameraModel{}, kDefaultMatchTolerance};
}

SimulatedProbe default_simulated_probe() {
  FanSpec fan;
  fan.width = 1053;
  fan.height = 604;
  fan.apex_u = 526;
  fan.top_v = 20;
  fan.top_half_span = 140;
  fan.half_angle = 20.0 * kPi / 180.0;
  fan.radius = 948.0;
  SimulatedProbe out{fan.rasterize(), {}};
  out.geometry = compute_probe_geometry(out.mask, ProbeKind::kConvex, 105.0, "SC5-1U");
  return out;
}

std::vector<BandSummary> stratify(const std::vector<AccuracySample>& samples,
                                  const std::vector<Eigen::Vector2d>& targets,
                                  double band_width, int band_count) {
  std::vector<BandSummary> bands(static_cast<std::size_t>(band_count));
  std::vector<std::vector<double>> in_plane(bands.size()), out_plane(bands.size());
  auto band_of = [&](double y) -> int {
    const int b = static_cast<int>(std::floor(y / band_width));
    return (b >= 0 && b < band_count) ? b : -1;
  };
  for (int b = 0; b < band_count; ++b) {
    bands[b].depth_lo = b * band_width;
    bands[b].depth_hi = (b + 1) * band_width;
  }
  for (const Eigen::Vector2d& t : targets) {
    const int b = band_of(t.y());
    if (b >= 0) ++bands[b].targets;
  }
  for (const AccuracySample& s : samples) {
    const int b = band_of(targets.at(static_cast<std::size_t>(s.target)).y());
    if (b < 0) continue;
    in_plane[b].push_back(s.delta_x);
    out_plane[b].push_back(std::abs(s.delta_l));
  }
  for (std::size_t b = 0; b < bands.size(); ++b) {
    bands[b].samples = in_plane[b].size();
    bands[b].in_plane_mean = stats::mean(in_plane[b]);
    bands[b].in_plane_std = stats::stddev(in_plane[b]);
    bands[b].out_of_plane_mean = stats::mean(out_plane[b]);
    bands[b].out_of_plane_std = stats::stddev(out_plane[b]);
  }
  return bands;
}

ExperimentReport run_accuracy_experiment(const AccuracyGrid& grid,
                                         const AccuracySetup& setup,
                                         std::uint64_t seed, unsigned workers) {
  grid.validate();
  setup.camera.validate();
  const MarkerTracker tracker({setup.probe_tool, setup.needle_tool}, setup.match_tolerance);

  const std::size_t n = grid.targets.size();
  std::vector<TargetRun> runs(n);
  std::atomic<std::size_t> next{0};
  auto work = [&] {
    for (std::size_t i = next++; i < n; i = next++) {
      runs[i] = run_target(static_cast<int>(i), grid.targets[i], grid.frames_per_target,
                           setup, tracker, derive_seed(seed, i));
    }
  };
  if (workers == 0) workers = std::max(1u, std::thread::hardware_concurrency());
  workers = static_cast<unsigned>(std::min<std::size_t>(workers, n));
  std::vector<std::thread> pool;
  for (unsigned w = 1; w < workers; ++w) pool.emplace_back(work);
  work();
  for (std::thread& t : pool) t.join();

  ExperimentReport report;
  report.seed = seed;
  for (std::size_t i = 0; i < n; ++i) {
    const TargetRun& run = runs[i];
    TargetSummary ts;
    ts.target = static_cast<int>(i);
    ts.x = grid.targets[i].x();
    ts.y = grid.targets[i].y();
    ts.frames_used = static_cast<int>(run.samples.size());
    ts.frames_failed = run.failures;
    std::vector<double> xs, ys, dx, dl;
    for (const AccuracySample& s : run.samples) {
      xs.push_back(s.x_measure);
      ys.push_back(s.y_measure);
      dx.push_back(s.delta_x);
      dl.push_back(std::abs(s.delta_l));
    }
    ts.mean_x = stats::mean(xs);
    ts.mean_y = stats::mean(ys);
    ts.offset = run.samples.empty() ? 0.0 : std::hypot(ts.mean_x - ts.x, ts.mean_y - ts.y);
    ts.delta_x_mean = stats::mean(dx);
    ts.delta_x_std = stats::stddev(dx);
    ts.abs_delta_l_mean = stats::mean(dl);
    ts.abs_delta_l_std = stats::stddev(dl);
    report.targets.push_back(ts);
    report.tracking_failures += static_cast<std::size_t>(run.failures);
    report.samples.insert(report.samples.end(), run.samples.begin(), run.samples.end());
  }

  std::vector<double> all_dx, all_dl;
  all_dx.reserve(report.samples.size());
  all_dl.reserve(report.samples.size());
  for (const AccuracySample& s : report.samples) {
    all_dx.push_back(s.delta_x);
    all_dl.push_back(std::abs(s.delta_l));
  }
  report.in_plane_mean = stats::mean(all_dx);
  report.in_plane_std = stats::stddev(all_dx);
  report.out_of_plane_mean = stats::mean(all_dl);
  report.out_of_plane_std = stats::stddev(all_dl);
  report.bands = stratify(report.samples, grid.targets);
  return report;
}

std::string ExperimentReport::samples_csv() const {
  std::ostringstream out;
  out << "target,frame,x_target,y_target,x_measure,y_measure,delta_x,delta_l\n";
  for (const AccuracySample& s : samples) {
    const TargetSummary& t = targets.at(static_cast<std::size_t>(s.target));
    out << s.target << ',' << s.frame << ',' << fmt(t.x) << ',' << fmt(t.y) << ','
        << fmt(s.x_measure) << ',' << fmt(s.y_measure) << ',' << fmt(s.delta_x) << ','
        << fmt(s.delta_l) << '\n';
  }
  return out.str();
}

// ---------------------------------------------------------------------------

UsecaseReport run_usecase_metrics(const std::vector<Puncture>& trace,
                                  double target_radius, SuccessRule rule) {
  if (!(target_radius > 0.0)) {
    throw Error(ErrorCode::kInvalidArgument, "target radius must be positive");
  }
  UsecaseReport report;
  report.target_radius = target_radius;
  report.rule = rule;

  struct Group {
    std::vector<double> directional, depth, elapsed;
    std::size_t successes = 0;
  };
  std::map<std::string, Group> groups;
  for (const Puncture& p : trace) {
    p.needle.validate();
    PunctureOutcome o;
    o.error = biopsy_error(p.needle, p.target);
    o.success = biopsy_success(o.error, target_radius, rule);
    report.outcomes.push_back(o);
    Group& g = groups[p.mode];
    g.directional.push_back(o.error.directional);
    g.depth.push_back(o.error.depth);
    g.elapsed.push_back(p.elapsed_s);
    if (o.success) ++g.successes;
  }
  for (const auto& [mode, g] : groups) {
    ModeMetrics m;
    m.mode = mode;
    m.count = g.directional.size();
    m.success_rate = static_cast<double>(g.successes) / static_cast<double>(m.count);
    m.directional_median = stats::median(g.directional);
    m.directional_iqr = stats::iqr(g.directional);
    m.depth_median = stats::median(g.depth);
    m.depth_iqr = stats::iqr(g.depth);
    m.elapsed_median = stats::median(g.elapsed);
    m.elapsed_iqr = stats::iqr(g.elapsed);
    report.modes.push_back(m);
  }
  return report;
}

NeedleState needle_with_error(const Vec3& target, const Vec3& direction,
                              double directional, double depth, double length,
                              double azimuth_rad) {
  const Vec3 d = direction.normalized();
  const ImagePlane basis = ImagePlane::from_origin_normal(Vec3::Zero(), d);
  const Vec3 side = std::cos(azimuth_rad) * basis.axis_x + std::sin(azimuth_rad) * basis.axis_y;
  // Origin chosen so that M - O = (l - depth) d + directional * side.
  const Vec3 origin = target - (length - depth) * d - directional * side;
  return NeedleState{origin + length * d, d, length};
}

std::vector<NamedRegime> reported_regimes() {
  return {
      {"no_ar_out_of_plane", {9.02, 7.64, 4.49, 7.66, 20.00, 20.02}},
      {"ar_out_of_plane", {2.58, 1.60, 1.85, 2.67, 10.06, 8.55}},
      {"no_ar_in_plane", {5.76, 4.48, 2.53, 3.07, 15.98, 12.35}},
      {"ar_in_plane", {3.04, 2.30, 3.01, 1.71, 15.49, 10.35}},
  };
}

std::vector<Puncture> synthesize_usecase_trace(const ErrorRegime& regime,
                                               std::size_t count, std::uint64_t seed,
                                               const std::string& mode) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> unit_normal(0.0, 1.0);
  std::uniform_real_distribution<double> unit(-1.0, 1.0);
  std::uniform_real_distribution<double> angle(0.0, 2.0 * kPi);
  // For a normal distribution IQR = 1.349 sigma.
  auto draw = [&](double median, double iqr) {
    return median + iqr / 1.3489795003921634 * unit_normal(rng);
  };

  std::vector<Puncture> trace;
  trace.reserve(count);
  for (std::size_t i = 0; i < count; ++i) {
    const Vec3 target(40.0 * unit(rng), 40.0 * unit(rng), 60.0 + 20.0 * unit(rng));
    Vec3 d(0.3 * unit(rng), 0.3 * unit(rng), 1.0);
    d.normalize();
    const double e_dir = std::abs(draw(regime.directional_median, regime.directional_iqr));
    const double e_dep = draw(regime.depth_median, regime.depth_iqr);
    const double elapsed = std::abs(draw(regime.elapsed_median_s, regime.elapsed_iqr_s));
    Puncture p;
    p.mode = mode;
    p.target = target;
    p.needle = needle_with_error(target, d, e_dir, e_dep, 80.0, angle(rng));
    p.elapsed_s = elapsed;
    trace.push_back(p);
  }
  return trace;
}

}  // namespace usnav
