#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <sstream>

#include "support.hpp"
#include "usnav/experiments.hpp"

using namespace usnav;
using namespace usnav::testing;

namespace {

AccuracyGrid default_grid(int frames) {
  const SimulatedProbe probe = default_simulated_probe();
  return AccuracyGrid::from_probe(probe.geometry, probe.mask, 10.0, 200.0, frames);
}

AccuracySetup noiseless_setup() {
  AccuracySetup s = default_accuracy_setup();
  s.camera = DepthCameraModel::noiseless();
  return s;
}

std::vector<AccuracySample> parse_csv(const std::string& csv, std::vector<Eigen::Vector2d>& targets) {
  std::istringstream in(csv);
  std::string line;
  std::getline(in, line);
  std::vector<AccuracySample> out;
  while (std::getline(in, line)) {
    std::vector<std::string> f;
    std::stringstream ls(line);
    for (std::string cell; std::getline(ls, cell, ',');) f.push_back(cell);
    AccuracySample s;
    s.target = std::stoi(f[0]);
    s.frame = std::stoi(f[1]);
    s.x_measure = std::stod(f[4]);
    s.y_measure = std::stod(f[5]);
    s.delta_x = std::stod(f[6]);
    s.delta_l = std::stod(f[7]);
    if (targets.size() <= static_cast<std::size_t>(s.target)) targets.resize(s.target + 1);
    targets[s.target] = {std::stod(f[2]), std::stod(f[3])};
    out.push_back(s);
  }
  return out;
}

double sorted_quantile(std::vector<double> xs, double p) {
  std::sort(xs.begin(), xs.end());
  const double h = p * static_cast<double>(xs.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(h));
  if (lo + 1 >= xs.size()) return xs.back();
  return xs[lo] + (h - static_cast<double>(lo)) * (xs[lo + 1] - xs[lo]);
}

}  // namespace

TEST(AccuracyGrid, DefaultProbeYields353Targets) {
  const AccuracyGrid grid = default_grid(200);
  EXPECT_EQ(grid.targets.size(), 353u);
  const SimulatedProbe probe = default_simulated_probe();
  const double x0 = (probe.geometry.u_left - probe.geometry.origin_u) * probe.geometry.pixel_width;
  for (const Eigen::Vector2d& t : grid.targets) {
    EXPECT_NEAR(std::remainder(t.x() - x0 - 5.0, 10.0), 0.0, 1e-9);
    EXPECT_NEAR(std::remainder(t.y() - 5.0, 10.0), 0.0, 1e-9);
    EXPECT_LT(t.y(), 200.0);
  }
}

TEST(AccuracyGrid, ValidateRejectsBadValues) {
  AccuracyGrid g = default_grid(1);
  g.spacing = 0.0;
  EXPECT_THROW(g.validate(), Error);
  g = default_grid(1);
  g.frames_per_target = 0;
  EXPECT_THROW(g.validate(), Error);
}

TEST(AccuracyExperiment, NoiselessChainIsExact) {
  const AccuracyGrid grid = default_grid(2);
  const ExperimentReport r = run_accuracy_experiment(grid, noiseless_setup(), 5);
  EXPECT_EQ(r.tracking_failures, 0u);
  ASSERT_EQ(r.samples.size(), grid.targets.size() * 2);
  for (const AccuracySample& s : r.samples) {
    ASSERT_LT(s.delta_x, 1e-6);
    ASSERT_LT(std::abs(s.delta_l), 1e-6);
  }
}

TEST(AccuracyExperiment, NoisyRunShowsDepthTrend) {
  const ExperimentReport r = run_accuracy_experiment(default_grid(40), default_accuracy_setup(), 1);
  ASSERT_EQ(r.bands.size(), 4u);
  EXPECT_LT(r.bands[0].in_plane_mean, r.bands[3].in_plane_mean);
  EXPECT_LT(r.bands[0].out_of_plane_mean, r.bands[3].out_of_plane_mean);
  for (int b = 0; b + 1 < 4; ++b) {
    EXPECT_LE(r.bands[b].out_of_plane_mean, r.bands[b + 1].out_of_plane_mean) << "band " << b;
  }
  EXPECT_GT(r.in_plane_mean, 0.3);
  EXPECT_LT(r.in_plane_mean, 3.0);
  EXPECT_GT(r.out_of_plane_mean, 0.3);
  EXPECT_LT(r.out_of_plane_mean, 3.0);
}

TEST(AccuracyExperiment, ResultsIndependentOfWorkerCount) {
  const AccuracyGrid grid = default_grid(3);
  const AccuracySetup setup = default_accuracy_setup();
  const std::string one = run_accuracy_experiment(grid, setup, 9, 1).samples_csv();
  EXPECT_EQ(run_accuracy_experiment(grid, setup, 9, 4).samples_csv(), one);
  EXPECT_EQ(run_accuracy_experiment(grid, setup, 9, 3).samples_csv(), one);
  EXPECT_NE(run_accuracy_experiment(grid, setup, 10, 1).samples_csv(), one);
}

TEST(AccuracyExperiment, BandsRecomputeFromCsv) {
  const ExperimentReport r = run_accuracy_experiment(default_grid(5), default_accuracy_setup(), 2);
  std::vector<Eigen::Vector2d> targets;
  const std::vector<AccuracySample> samples = parse_csv(r.samples_csv(), targets);
  ASSERT_EQ(samples.size(), r.samples.size());
  const std::vector<BandSummary> again = stratify(samples, targets);
  for (std::size_t b = 0; b < again.size(); ++b) {
    EXPECT_EQ(again[b].samples, r.bands[b].samples);
    EXPECT_NEAR(again[b].in_plane_mean, r.bands[b].in_plane_mean, 1e-12);
    EXPECT_NEAR(again[b].in_plane_std, r.bands[b].in_plane_std, 1e-12);
    EXPECT_NEAR(again[b].out_of_plane_mean, r.bands[b].out_of_plane_mean, 1e-12);
    EXPECT_NEAR(again[b].out_of_plane_std, r.bands[b].out_of_plane_std, 1e-12);
  }
}

TEST(UsecaseMetrics, NeedleWithErrorHitsPrescribedError) {
  Rng rng(31);
  for (int i = 0; i < 2000; ++i) {
    const Vec3 target = random_vec(rng, 100.0);
    const Vec3 dir = random_unit(rng);
    const double e_dir = uniform(rng, 0, 10), e_dep = uniform(rng, -10, 10);
    const NeedleState n = needle_with_error(target, dir, e_dir, e_dep, 80.0, uniform(rng, 0, 6.3));
    const BiopsyError e = biopsy_error(n, target);
    ASSERT_NEAR(e.directional, e_dir, 1e-9);
    ASSERT_NEAR(e.depth, e_dep, 1e-9);
  }
}

TEST(UsecaseMetrics, PerfectPuncturesAllSucceed) {
  std::vector<Puncture> trace;
  Rng rng(32);
  for (int i = 0; i < 50; ++i) {
    const Vec3 target = random_vec(rng, 50.0);
    const Vec3 dir = random_unit(rng);
    trace.push_back({"perfect", NeedleState{target, dir, 60.0}, target, 0.0});
  }
  const UsecaseReport r = run_usecase_metrics(trace, 5.0);
  ASSERT_EQ(r.modes.size(), 1u);
  EXPECT_DOUBLE_EQ(r.modes[0].success_rate, 1.0);
  EXPECT_NEAR(r.modes[0].directional_median, 0.0, 1e-12);
  EXPECT_NEAR(r.modes[0].depth_median, 0.0, 1e-12);
}

TEST(UsecaseMetrics, MediansAndIqrMatchSortOracle) {
  std::vector<Puncture> trace;
  for (const NamedRegime& nr : reported_regimes()) {
    const auto part = synthesize_usecase_trace(nr.regime, 301, 7, nr.mode);
    trace.insert(trace.end(), part.begin(), part.end());
  }
  const UsecaseReport r = run_usecase_metrics(trace, 5.0);
  ASSERT_EQ(r.modes.size(), 4u);
  for (const ModeMetrics& m : r.modes) {
    std::vector<double> dir, dep, el;
    for (const Puncture& p : trace) {
      if (p.mode != m.mode) continue;
      // Distance from the target to the needle line, depth along the needle.
      const Vec3 origin = p.needle.tip - p.needle.length * p.needle.direction;
      dir.push_back((p.target - origin).cross(p.needle.direction).norm());
      dep.push_back(p.needle.direction.dot(p.needle.tip - p.target));
      el.push_back(p.elapsed_s);
    }
    EXPECT_EQ(m.count, dir.size());
    EXPECT_NEAR(m.directional_median, sorted_quantile(dir, 0.5), 1e-9);
    EXPECT_NEAR(m.directional_iqr, sorted_quantile(dir, 0.75) - sorted_quantile(dir, 0.25), 1e-9);
    EXPECT_NEAR(m.depth_median, sorted_quantile(dep, 0.5), 1e-9);
    EXPECT_NEAR(m.depth_iqr, sorted_quantile(dep, 0.75) - sorted_quantile(dep, 0.25), 1e-9);
    EXPECT_DOUBLE_EQ(m.elapsed_median, sorted_quantile(el, 0.5));
  }
}

TEST(UsecaseMetrics, ArOutOfPlaneRegimeMostlySucceeds) {
  const auto regimes = reported_regimes();
  const auto it = std::find_if(regimes.begin(), regimes.end(),
                               [](const NamedRegime& r) { return r.mode == "ar_out_of_plane"; });
  ASSERT_NE(it, regimes.end());
  EXPECT_DOUBLE_EQ(it->regime.directional_median, 2.58);
  EXPECT_DOUBLE_EQ(it->regime.depth_median, 1.85);
  const auto trace = synthesize_usecase_trace(it->regime, 10000, 1, it->mode);
  const UsecaseReport r = run_usecase_metrics(trace, 5.0);
  EXPECT_GE(r.modes[0].success_rate, 0.90);
  EXPECT_LE(r.modes[0].success_rate, 1.0);
  EXPECT_NEAR(r.modes[0].directional_median, 2.58, 0.15);
  EXPECT_NEAR(r.modes[0].depth_median, 1.85, 0.15);
  EXPECT_THROW(run_usecase_metrics(trace, 0.0), Error);
}
