#pragma once

#include <cstdint>
#include <optional>
#include <vector>

#include "usnav/geometry.hpp"

namespace usnav {

inline constexpr double kDefaultMatchTolerance = 3.0;  // mm
inline constexpr std::size_t kDefaultNodeBudget = 10000;
inline constexpr int kOccluded = -1;

// Rigid marker constellation in its own frame. Immutable once built.
class ToolDefinition {
 public:
  // Throws kInvalidTool when the geometry cannot be matched unambiguously at
  // `match_tolerance`: fewer than 4 markers, collinear markers, two pairwise
  // distances within 2 * match_tolerance, or max_occlusion > markers - 3.
  ToolDefinition(int tool_id, std::vector<Vec3> markers, int max_occlusion,
                 double match_tolerance = kDefaultMatchTolerance);

  int tool_id() const { return tool_id_; }
  const std::vector<Vec3>& markers() const { return markers_; }
  std::size_t marker_count() const { return markers_.size(); }
  int max_occlusion() const { return max_occlusion_; }
  double distance(std::size_t m, std::size_t n) const {
    return distances_[m * markers_.size() + n];
  }
  // Marker visiting order for the search (most distinctive first).
  const std::vector<std::size_t>& search_order() const { return order_; }

  ToolDefinition with_max_occlusion(int max_occlusion) const;

 private:
  int tool_id_;
  std::vector<Vec3> markers_;
  int max_occlusion_;
  double match_tolerance_;
  std::vector<double> distances_;
  std::vector<std::size_t> order_;
};

struct MarkerObservation {
  std::vector<Vec3> points;  // camera frame, unordered
  std::uint64_t timestamp_us = 0;
};

// Observed pair (obs_a, obs_b) mapped onto model pair (model_m, model_n) with
// model_m < model_n; both orientations of an observed pair are reported.
struct CandidatePair {
  int obs_a;
  int obs_b;
  int model_m;
  int model_n;

  friend bool operator==(const CandidatePair&, const CandidatePair&) = default;
  friend auto operator<=>(const CandidatePair&, const CandidatePair&) = default;
};

std::vector<CandidatePair> candidate_pairs(const MarkerObservation& obs,
                                           const ToolDefinition& tool,
                                           double match_tolerance);

struct MatchResult {
  int tool_id = 0;
  // assignment[k] = observation index for tool marker k, or kOccluded.
  std::vector<int> assignment;
  int occluded_count = 0;
  double rms_error = 0.0;  // rigid-fit residual over assigned markers, mm

  int matched_count() const {
    return static_cast<int>(assignment.size()) - occluded_count;
  }
  friend bool operator==(const MatchResult&, const MatchResult&) = default;
};

struct SearchDiagnostics {
  std::size_t nodes_expanded = 0;
  bool budget_exceeded = false;
};

struct MatchSearch {
  std::vector<MatchResult> results;
  SearchDiagnostics diagnostics;
};

// Depth-first correspondence search with occlusion branches. Returns every
// maximal assignment consistent with all pairwise distance constraints that
// achieves the least occlusion found (never more than the tool allows), each
// covering at least 3 markers. Results are sorted by (rms_error, assignment).
MatchSearch dfs_match(const MarkerObservation& obs, const ToolDefinition& tool,
                      double match_tolerance = kDefaultMatchTolerance,
                      std::size_t node_budget = kDefaultNodeBudget);

// Picks at most one result per tool so that no observation is shared,
// maximizing matched markers, then minimizing summed rms, then by
// (tool_id, assignment). Output sorted by tool_id.
std::vector<MatchResult> resolve_conflicts(
    const std::vector<MatchResult>& candidates);

struct ToolPose {
  int tool_id = 0;
  RigidTransform transform;  // tool-local -> camera
  double rms_error = 0.0;
  int occluded_count = 0;
};

ToolPose estimate_pose(const ToolDefinition& tool, const MatchResult& match,
                       const MarkerObservation& obs);

// Least-squares rigid fit (dst ~ R src + t) with reflection rejection.
// Throws kInsufficientMarkers (< 3 pairs) or kDegenerateConfiguration.
RigidTransform fit_rigid(const std::vector<Vec3>& src,
                         const std::vector<Vec3>& dst);

double rms_residual(const RigidTransform& t, const std::vector<Vec3>& src,
                    const std::vector<Vec3>& dst);

struct FrameTracking {
  std::vector<ToolPose> poses;  // sorted by tool_id
  std::vector<int> budget_exceeded_tools;
};

// Full per-frame pipeline: search each tool, resolve conflicts, fit poses.
class MarkerTracker {
 public:
  explicit MarkerTracker(std::vector<ToolDefinition> tools,
                         double match_tolerance = kDefaultMatchTolerance);

  FrameTracking track(const MarkerObservation& obs) const;

  const std::vector<ToolDefinition>& tools() const { return tools_; }
  const ToolDefinition* find(int tool_id) const;
  double match_tolerance() const { return match_tolerance_; }

 private:
  std::vector<ToolDefinition> tools_;
  double match_tolerance_;
};

}  // namespace usnav
