#include "usnav/tracking.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <string>

#include <Eigen/SVD>

namespace usnav {

// ---------------------------------------------------------------------------
// ToolDefinition

ToolDefinition::ToolDefinition(int tool_id, std::vector<Vec3> markers,
                               int max_occlusion, double match_tolerance)
    : tool_id_(tool_id),
      markers_(std::move(markers)),
      max_occlusion_(max_occlusion),
      match_tolerance_(match_tolerance) {
  const std::string name = "tool " + std::to_string(tool_id_);
  const std::size_t k = markers_.size();
  if (k < 4) {
    throw Error(ErrorCode::kInvalidTool, name + ": needs at least 4 markers");
  }
  if (!(match_tolerance_ > 0.0)) {
    throw Error(ErrorCode::kInvalidTool, name + ": match tolerance must be > 0");
  }
  if (max_occlusion_ < 0 || static_cast<std::size_t>(max_occlusion_) + 3 > k) {
    throw Error(ErrorCode::kInvalidTool,
                name + ": max_occlusion must leave at least 3 visible markers");
  }
  for (const Vec3& m : markers_) {
    if (!m.allFinite()) {
      throw Error(ErrorCode::kInvalidTool, name + ": non-finite marker");
    }
  }

  distances_.assign(k * k, 0.0);
  for (std::size_t m = 0; m < k; ++m) {
    for (std::size_t n = m + 1; n < k; ++n) {
      const double d = (markers_[m] - markers_[n]).norm();
      distances_[m * k + n] = d;
      distances_[n * k + m] = d;
    }
  }

  // Self-ambiguity guard and per-pair uniqueness margin.
  std::vector<double> uniqueness(k * k, std::numeric_limits<double>::infinity());
  for (std::size_t a = 0; a < k; ++a) {
    for (std::size_t b = a + 1; b < k; ++b) {
      for (std::size_t c = 0; c < k; ++c) {
        for (std::size_t e = c + 1; e < k; ++e) {
          if (a == c && b == e) continue;
          const double gap = std::abs(distance(a, b) - distance(c, e));
          if (gap < 2.0 * match_tolerance_) {
            throw Error(ErrorCode::kInvalidTool,
                        name + ": pairwise distances (" + std::to_string(a) +
                            "," + std::to_string(b) + ") and (" +
                            std::to_string(c) + "," + std::to_string(e) +
                            ") are ambiguous at this tolerance");
          }
          uniqueness[a * k + b] = std::min(uniqueness[a * k + b], gap);
        }
      }
      uniqueness[b * k + a] = uniqueness[a * k + b];
    }
  }

  Eigen::MatrixXd centered(3, static_cast<Eigen::Index>(k));
  Vec3 centroid = Vec3::Zero();
  for (const Vec3& m : markers_) centroid += m;
  centroid /= static_cast<double>(k);
  for (std::size_t i = 0; i < k; ++i) {
    centered.col(static_cast<Eigen::Index>(i)) = markers_[i] - centroid;
  }
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(centered);
  const auto sv = svd.singularValues();
  if (!(sv[0] > 0.0) || sv[1] / sv[0] < 1e-6) {
    throw Error(ErrorCode::kInvalidTool, name + ": markers are collinear");
  }

  std::vector<double> score(k, 0.0);
  for (std::size_t m = 0; m < k; ++m) {
    for (std::size_t n = 0; n < k; ++n) {
      if (m != n) score[m] += uniqueness[m * k + n];
    }
  }
  order_.resize(k);
  std::iota(order_.begin(), order_.end(), std::size_t{0});
  std::stable_sort(order_.begin(), order_.end(),
                   [&](std::size_t a, std::size_t b) { return score[a] > score[b]; });
}

ToolDefinition ToolDefinition::with_max_occlusion(int max_occlusion) const {
  return ToolDefinition(tool_id_, markers_, max_occlusion, match_tolerance_);
}

// ---------------------------------------------------------------------------
// Candidate pairs

std::vector<CandidatePair> candidate_pairs(const MarkerObservation& obs,
                                           const ToolDefinition& tool,
                                           double match_tolerance) {
  if (!(match_tolerance > 0.0)) {
    throw Error(ErrorCode::kInvalidArgument, "match tolerance must be > 0");
  }
  struct ModelPair {
    double distance;
    int m;
    int n;
  };
  const int k = static_cast<int>(tool.marker_count());
  std::vector<ModelPair> model;
  for (int m = 0; m < k; ++m) {
    for (int n = m + 1; n < k; ++n) model.push_back({tool.distance(m, n), m, n});
  }
  std::sort(model.begin(), model.end(),
            [](const ModelPair& a, const ModelPair& b) { return a.distance < b.distance; });

  std::vector<CandidatePair> out;
  const int count = static_cast<int>(obs.points.size());
  for (int a = 0; a < count; ++a) {
    for (int b = a + 1; b < count; ++b) {
      const double d = (obs.points[a] - obs.points[b]).norm();
      auto it = std::upper_bound(
          model.begin(), model.end(), d - match_tolerance,
          [](double v, const ModelPair& p) { return v < p.distance; });
      for (; it != model.end() && it->distance < d + match_tolerance; ++it) {
        if (std::abs(d - it->distance) < match_tolerance) {
          out.push_back({a, b, it->m, it->n});
          out.push_back({b, a, it->m, it->n});
        }
      }
    }
  }
  std::sort(out.begin(), out.end());
  return out;
}

// ---------------------------------------------------------------------------
// Pose fitting

RigidTransform fit_rigid(const std::vector<Vec3>& src,
                         const std::vector<Vec3>& dst) {
  if (src.size() != dst.size()) {
    throw Error(ErrorCode::kInvalidArgument, "fit_rigid: size mismatch");
  }
  const std::size_t n = src.size();
  if (n < 3) {
    throw Error(ErrorCode::kInsufficientMarkers,
                "pose estimation needs at least 3 matched markers");
  }
  Vec3 cs = Vec3::Zero();
  Vec3 cd = Vec3::Zero();
  for (std::size_t i = 0; i < n; ++i) {
    cs += src[i];
    cd += dst[i];
  }
  cs /= static_cast<double>(n);
  cd /= static_cast<double>(n);

  Eigen::MatrixXd centered(3, static_cast<Eigen::Index>(n));
  Mat3 h = Mat3::Zero();
  for (std::size_t i = 0; i < n; ++i) {
    const Vec3 a = src[i] - cs;
    centered.col(static_cast<Eigen::Index>(i)) = a;
    h += a * (dst[i] - cd).transpose();
  }
  Eigen::JacobiSVD<Eigen::MatrixXd> shape(centered);
  const auto sv = shape.singularValues();
  if (!(sv[0] > 0.0) || sv[1] / sv[0] < 1e-6) {
    throw Error(ErrorCode::kDegenerateConfiguration,
                "matched markers are collinear");
  }

  Eigen::JacobiSVD<Mat3> svd(h, Eigen::ComputeFullU | Eigen::ComputeFullV);
  const Mat3 u = svd.matrixU();
  const Mat3 v = svd.matrixV();
  Mat3 flip = Mat3::Identity();
  // Reject reflections by flipping the weakest singular direction.
  if ((v * u.transpose()).determinant() < 0.0) flip(2, 2) = -1.0;
  Mat3 r = v * flip * u.transpose();

  // Re-orthonormalize to absorb rounding before validation.
  Eigen::JacobiSVD<Mat3> polish(r, Eigen::ComputeFullU | Eigen::ComputeFullV);
  r = polish.matrixU() * polish.matrixV().transpose();
  return RigidTransform(r, cd - r * cs);
}

double rms_residual(const RigidTransform& t, const std::vector<Vec3>& src,
                    const std::vector<Vec3>& dst) {
  if (src.empty()) return 0.0;
  double sum = 0.0;
  for (std::size_t i = 0; i < src.size(); ++i) {
    sum += (t.apply(src[i]) - dst[i]).squaredNorm();
  }
  return std::sqrt(sum / static_cast<double>(src.size()));
}

namespace {

void gather(const ToolDefinition& tool, const MatchResult& match,
            const MarkerObservation& obs, std::vector<Vec3>& src,
            std::vector<Vec3>& dst) {
  src.clear();
  dst.clear();
  for (std::size_t k = 0; k < match.assignment.size(); ++k) {
    const int o = match.assignment[k];
    if (o == kOccluded) continue;
    if (o < 0 || static_cast<std::size_t>(o) >= obs.points.size()) {
      throw Error(ErrorCode::kInvalidArgument, "assignment index out of range");
    }
    src.push_back(tool.markers()[k]);
    dst.push_back(obs.points[static_cast<std::size_t>(o)]);
  }
}

}  // namespace

ToolPose estimate_pose(const ToolDefinition& tool, const MatchResult& match,
                       const MarkerObservation& obs) {
  if (match.assignment.size() != tool.marker_count()) {
    throw Error(ErrorCode::kInvalidArgument, "assignment size mismatch");
  }
  std::vector<Vec3> src;
  std::vector<Vec3> dst;
  gather(tool, match, obs, src, dst);
  ToolPose pose;
  pose.tool_id = tool.tool_id();
  pose.transform = fit_rigid(src, dst);
  pose.rms_error = rms_residual(pose.transform, src, dst);
  pose.occluded_count = match.occluded_count;
  return pose;
}

// ---------------------------------------------------------------------------
// DFS matching

namespace {

class MatchSearcher {
 public:
  MatchSearcher(const MarkerObservation& obs, const ToolDefinition& tool,
                double tolerance, std::size_t budget)
      : obs_(obs),
        tool_(tool),
        budget_(budget),
        k_(static_cast<int>(tool.marker_count())),
        n_(static_cast<int>(obs.points.size())),
        compat_(static_cast<std::size_t>(k_ * k_ * n_ * n_), 0),
        assignment_(static_cast<std::size_t>(k_), kOccluded),
        used_(static_cast<std::size_t>(n_), 0),
        best_occ_(tool.max_occlusion()) {
    for (const CandidatePair& c : candidate_pairs(obs, tool, tolerance)) {
      set_compat(c.model_m, c.obs_a, c.model_n, c.obs_b);
      set_compat(c.model_n, c.obs_b, c.model_m, c.obs_a);
    }
  }

  MatchSearch run() {
    if (k_ - tool_.max_occlusion() <= n_) descend(0, 0, 0);
    MatchSearch out;
    for (MatchResult& r : found_) {
      if (r.occluded_count == best_occ_) out.results.push_back(std::move(r));
    }
    std::sort(out.results.begin(), out.results.end(),
              [](const MatchResult& a, const MatchResult& b) {
                if (a.rms_error != b.rms_error) return a.rms_error < b.rms_error;
                return a.assignment < b.assignment;
              });
    out.diagnostics = diag_;
    return out;
  }

 private:
  void set_compat(int m, int a, int n, int b) {
    compat_[index(m, a, n, b)] = 1;
  }
  std::size_t index(int m, int a, int n, int b) const {
    return ((static_cast<std::size_t>(m) * k_ + n) * n_ + a) * n_ + b;
  }
  bool compatible(int m, int a, int n, int b) const {
    return compat_[index(m, a, n, b)] != 0;
  }

  // Observation o may be given to marker k alongside every current assignment.
  bool consistent(int k, int o) const {
    for (int j = 0; j < k_; ++j) {
      const int oj = assignment_[static_cast<std::size_t>(j)];
      if (j == k || oj == kOccluded) continue;
      if (!compatible(j, oj, k, o)) return false;
    }
    return true;
  }

  void descend(std::size_t depth, int occ, int anchor_marker_plus1) {
    if (diag_.budget_exceeded) return;
    if (++diag_.nodes_expanded > budget_) {
      diag_.budget_exceeded = true;
      return;
    }
    const auto& order = tool_.search_order();
    if (depth == order.size()) {
      record(occ);
      return;
    }
    const int k = static_cast<int>(order[depth]);

    // Candidates come from the pair table of the first matched marker, then
    // are checked against every other matched marker.
    for (int o = 0; o < n_; ++o) {
      if (used_[static_cast<std::size_t>(o)]) continue;
      if (anchor_marker_plus1 > 0) {
        const int anchor = anchor_marker_plus1 - 1;
        if (!compatible(anchor, assignment_[static_cast<std::size_t>(anchor)], k, o)) {
          continue;
        }
      }
      if (!consistent(k, o)) continue;
      assignment_[static_cast<std::size_t>(k)] = o;
      used_[static_cast<std::size_t>(o)] = 1;
      descend(depth + 1, occ, anchor_marker_plus1 > 0 ? anchor_marker_plus1 : k + 1);
      used_[static_cast<std::size_t>(o)] = 0;
      assignment_[static_cast<std::size_t>(k)] = kOccluded;
    }

    // Occlusion branch, pruned by the best (least) occlusion found so far.
    if (occ + 1 <= best_occ_ && k_ - (occ + 1) >= 3) {
      descend(depth + 1, occ + 1, anchor_marker_plus1);
    }
  }

  void record(int occ) {
    if (occ > best_occ_) return;
    // Maximality: an occluded marker that could take a free observation
    // means a strictly better assignment exists.
    for (int k = 0; k < k_; ++k) {
      if (assignment_[static_cast<std::size_t>(k)] != kOccluded) continue;
      for (int o = 0; o < n_; ++o) {
        if (!used_[static_cast<std::size_t>(o)] && consistent(k, o)) return;
      }
    }
    MatchResult r;
    r.tool_id = tool_.tool_id();
    r.assignment = assignment_;
    r.occluded_count = occ;
    std::vector<Vec3> src;
    std::vector<Vec3> dst;
    gather(tool_, r, obs_, src, dst);
    try {
      r.rms_error = rms_residual(fit_rigid(src, dst), src, dst);
    } catch (const Error&) {
      return;  // collinear subset: not usable for pose
    }
    best_occ_ = std::min(best_occ_, occ);
    found_.push_back(std::move(r));
  }

  const MarkerObservation& obs_;
  const ToolDefinition& tool_;
  std::size_t budget_;
  int k_;
  int n_;
  std::vector<char> compat_;
  std::vector<int> assignment_;
  std::vector<char> used_;
  int best_occ_;
  std::vector<MatchResult> found_;
  SearchDiagnostics diag_;
};

}  // namespace

MatchSearch dfs_match(const MarkerObservation& obs, const ToolDefinition& tool,
                      double match_tolerance, std::size_t node_budget) {
  if (!(match_tolerance > 0.0)) {
    throw Error(ErrorCode::kInvalidArgument, "match tolerance must be > 0");
  }
  MatchSearcher searcher(obs, tool, match_tolerance, node_budget);
  return searcher.run();
}

// ---------------------------------------------------------------------------
// Conflict resolution

namespace {

struct Selection {
  std::vector<const MatchResult*> chosen;  // in tool_id order
  int matched = 0;
  double rms_sum = 0.0;
};

bool lex_less(const Selection& a, const Selection& b) {
  const std::size_t n = std::min(a.chosen.size(), b.chosen.size());
  for (std::size_t i = 0; i < n; ++i) {
    const MatchResult& x = *a.chosen[i];
    const MatchResult& y = *b.chosen[i];
    if (x.tool_id != y.tool_id) return x.tool_id < y.tool_id;
    if (x.assignment != y.assignment) return x.assignment < y.assignment;
  }
  return a.chosen.size() < b.chosen.size();
}

bool better(const Selection& a, const Selection& b) {
  if (a.matched != b.matched) return a.matched > b.matched;
  if (a.rms_sum != b.rms_sum) return a.rms_sum < b.rms_sum;
  return lex_less(a, b);
}

class ConflictSolver {
 public:
  explicit ConflictSolver(const std::vector<MatchResult>& candidates) {
    std::vector<const MatchResult*> sorted;
    for (const MatchResult& r : candidates) sorted.push_back(&r);
    std::stable_sort(sorted.begin(), sorted.end(),
                     [](const MatchResult* a, const MatchResult* b) {
                       return a->tool_id < b->tool_id;
                     });
    for (const MatchResult* r : sorted) {
      if (groups_.empty() || groups_.back().front()->tool_id != r->tool_id) {
        groups_.emplace_back();
      }
      groups_.back().push_back(r);
      for (int o : r->assignment) max_obs_ = std::max(max_obs_, o + 1);
    }
    used_.assign(static_cast<std::size_t>(max_obs_), 0);
  }

  std::vector<MatchResult> solve() {
    visit(0);
    std::vector<MatchResult> out;
    for (const MatchResult* r : best_.chosen) out.push_back(*r);
    return out;
  }

 private:
  bool fits(const MatchResult& r) const {
    for (int o : r.assignment) {
      if (o != kOccluded && used_[static_cast<std::size_t>(o)]) return false;
    }
    return true;
  }
  void mark(const MatchResult& r, char v) {
    for (int o : r.assignment) {
      if (o != kOccluded) used_[static_cast<std::size_t>(o)] = v;
    }
  }

  void visit(std::size_t g) {
    if (g == groups_.size()) {
      if (!have_best_ || better(current_, best_)) {
        best_ = current_;
        have_best_ = true;
      }
      return;
    }
    for (const MatchResult* r : groups_[g]) {
      if (!fits(*r)) continue;
      mark(*r, 1);
      current_.chosen.push_back(r);
      current_.matched += r->matched_count();
      const double prev_sum = current_.rms_sum;
      current_.rms_sum += r->rms_error;
      visit(g + 1);
      current_.rms_sum = prev_sum;
      current_.matched -= r->matched_count();
      current_.chosen.pop_back();
      mark(*r, 0);
    }
    visit(g + 1);  // tool not detected
  }

  std::vector<std::vector<const MatchResult*>> groups_;
  std::vector<char> used_;
  int max_obs_ = 0;
  Selection current_;
  Selection best_;
  bool have_best_ = false;
};

}  // namespace

std::vector<MatchResult> resolve_conflicts(
    const std::vector<MatchResult>& candidates) {
  if (candidates.empty()) return {};
  return ConflictSolver(candidates).solve();
}

// ---------------------------------------------------------------------------
// MarkerTracker

MarkerTracker::MarkerTracker(std::vector<ToolDefinition> tools,
                             double match_tolerance)
    : tools_(std::move(tools)), match_tolerance_(match_tolerance) {
  std::sort(tools_.begin(), tools_.end(),
            [](const ToolDefinition& a, const ToolDefinition& b) {
              return a.tool_id() < b.tool_id();
            });
  for (std::size_t i = 1; i < tools_.size(); ++i) {
    if (tools_[i].tool_id() == tools_[i - 1].tool_id()) {
      throw Error(ErrorCode::kInvalidTool,
                  "duplicate tool id " + std::to_string(tools_[i].tool_id()));
    }
  }
}

const ToolDefinition* MarkerTracker::find(int tool_id) const {
  for (const ToolDefinition& t : tools_) {
    if (t.tool_id() == tool_id) return &t;
  }
  return nullptr;
}

FrameTracking MarkerTracker::track(const MarkerObservation& obs) const {
  FrameTracking out;
  std::vector<MatchResult> candidates;
  for (const ToolDefinition& tool : tools_) {
    MatchSearch s = dfs_match(obs, tool, match_tolerance_);
    if (s.diagnostics.budget_exceeded) {
      out.budget_exceeded_tools.push_back(tool.tool_id());
    }
    for (MatchResult& r : s.results) candidates.push_back(std::move(r));
  }
  for (const MatchResult& m : resolve_conflicts(candidates)) {
    const ToolDefinition* tool = find(m.tool_id);
    out.poses.push_back(estimate_pose(*tool, m, obs));
  }
  return out;
}

}  // namespace usnav
