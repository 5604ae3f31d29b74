#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "usnav/calibration.hpp"
#include "usnav/cues.hpp"
#include "usnav/geometry.hpp"
#include "usnav/sim.hpp"
#include "usnav/tracking.hpp"

namespace usnav {

// ---------------------------------------------------------------------------
// Accuracy experiment: a k-wire touching known targets on the image plane.

struct AccuracyGrid {
  std::vector<Eigen::Vector2d> targets;  // image frame (x, y) in mm, z = 0
  double spacing = 10.0;
  double max_depth = 200.0;
  int frames_per_target = 200;

  // Throws kConfig.
  void validate() const;

  // Lattice x = k * spacing, y = spacing / 2 + j * spacing below max_depth,
  // kept where the target pixel lies inside the valid fan.
  static AccuracyGrid from_probe(const ProbeGeometry& geom, const ImageMask& mask,
                                 double spacing = 10.0, double max_depth = 200.0,
                                 int frames_per_target = 200);
};

// Physical layout of the experiment in camera space.
struct AccuracySetup {
  ToolDefinition probe_tool;
  ToolDefinition needle_tool;
  RigidTransform probe_pose;  // probe tool (== image frame, mm) -> camera
  NeedleGeometry needle;
  DepthCameraModel camera;
  double match_tolerance = kDefaultMatchTolerance;
};

ToolDefinition default_probe_tool(int tool_id = 1);
ToolDefinition default_needle_tool(int tool_id = 2);
AccuracySetup default_accuracy_setup();

// Probe geometry and mask of the simulated convex probe used by the default
// accuracy experiment.
struct SimulatedProbe {
  ImageMask mask;
  ProbeGeometry geometry;
};
SimulatedProbe default_simulated_probe();

struct AccuracySample {
  int target = 0;
  int frame = 0;
  double x_measure = 0.0;
  double y_measure = 0.0;
  double delta_x = 0.0;  // in-plane, ||(x, y) - target||
  double delta_l = 0.0;  // signed, along the wire
};

struct TargetSummary {
  int target = 0;
  double x = 0.0, y = 0.0;
  double mean_x = 0.0, mean_y = 0.0;  // P_i
  double offset = 0.0;                // ||P_i - target||
  double delta_x_mean = 0.0, delta_x_std = 0.0;
  double abs_delta_l_mean = 0.0, abs_delta_l_std = 0.0;
  int frames_used = 0;
  int frames_failed = 0;
};

struct BandSummary {
  double depth_lo = 0.0;
  double depth_hi = 0.0;
  int targets = 0;
  std::size_t samples = 0;
  double in_plane_mean = 0.0, in_plane_std = 0.0;          // delta_x
  double out_of_plane_mean = 0.0, out_of_plane_std = 0.0;  // |delta_l|
};

struct ExperimentReport {
  std::uint64_t seed = 0;
  std::vector<AccuracySample> samples;
  std::vector<TargetSummary> targets;
  std::vector<BandSummary> bands;  // [0,50) [50,100) [100,150) [150,200)
  double in_plane_mean = 0.0, in_plane_std = 0.0;
  double out_of_plane_mean = 0.0, out_of_plane_std = 0.0;
  std::size_t tracking_failures = 0;

  // target,frame,x_target,y_target,x_measure,y_measure,delta_x,delta_l
  std::string samples_csv() const;
};

// Band statistics over per-sample values; shared by the report builder and
// anything that re-derives them from a CSV.
std::vector<BandSummary> stratify(const std::vector<AccuracySample>& samples,
                                  const std::vector<Eigen::Vector2d>& targets,
                                  double band_width = 50.0, int band_count = 4);

// `workers` = 0 uses the hardware concurrency. Results do not depend on it.
ExperimentReport run_accuracy_experiment(const AccuracyGrid& grid,
                                         const AccuracySetup& setup,
                                         std::uint64_t seed, unsigned workers = 0);

// ---------------------------------------------------------------------------
// Use-case metrics over recorded punctures.

struct Puncture {
  std::string mode;   // free-form group label, e.g. "ar_out_of_plane"
  NeedleState needle; // final needle pose; length = inserted length l
  Vec3 target;
  double elapsed_s = 0.0;
};

struct PunctureOutcome {
  BiopsyError error;
  bool success = false;
};

struct ModeMetrics {
  std::string mode;
  std::size_t count = 0;
  double success_rate = 0.0;  // fraction in [0, 1]
  double directional_median = 0.0, directional_iqr = 0.0;
  double depth_median = 0.0, depth_iqr = 0.0;  // signed depth error
  double elapsed_median = 0.0, elapsed_iqr = 0.0;
};

struct UsecaseReport {
  double target_radius = 0.0;
  SuccessRule rule = SuccessRule::kConjunctive;
  std::vector<PunctureOutcome> outcomes;  // parallel to the input trace
  std::vector<ModeMetrics> modes;         // sorted by mode label
};

UsecaseReport run_usecase_metrics(const std::vector<Puncture>& trace,
                                  double target_radius,
                                  SuccessRule rule = SuccessRule::kConjunctive);

// Error distribution used to synthesize punctures: directional ~ |N|, depth
// ~ N, elapsed ~ |N|, each with the given median and an IQR-matched spread.
struct ErrorRegime {
  double directional_median = 0.0;
  double directional_iqr = 0.0;
  double depth_median = 0.0;
  double depth_iqr = 0.0;
  double elapsed_median_s = 0.0;
  double elapsed_iqr_s = 0.0;
};

struct NamedRegime {
  std::string mode;
  ErrorRegime regime;
};
// Median/IQR of directional error, depth error and time reported for the
// human study, with and without AR guidance, per puncture mode.
std::vector<NamedRegime> reported_regimes();

// Builds punctures whose biopsy errors follow the regime.
std::vector<Puncture> synthesize_usecase_trace(const ErrorRegime& regime,
                                               std::size_t count,
                                               std::uint64_t seed,
                                               const std::string& mode);

// Builds one needle with prescribed directional and signed depth error
// relative to `target` along unit `direction`.
NeedleState needle_with_error(const Vec3& target, const Vec3& direction,
                              double directional, double depth, double length,
                              double azimuth_rad);

}  // namespace usnav
