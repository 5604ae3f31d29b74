#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <set>
#include <vector>

#include "usnav/tracking.hpp"

namespace usnav::testing {

inline bool pair_ok(const MarkerObservation& obs, const ToolDefinition& t, double tol, int m,
                    int a, int n, int b) {
  return std::abs((obs.points[a] - obs.points[b]).norm() - t.distance(m, n)) < tol;
}

// Every assignment of markers to observations (or occlusion) that satisfies
// all pairwise constraints, is maximal, and admits a pose; only those with the
// least occlusion survive. Plain enumeration, no pruning.
inline std::set<std::vector<int>> oracle_matches(const MarkerObservation& obs,
                                                 const ToolDefinition& t, double tol) {
  const int k = static_cast<int>(t.marker_count());
  const int n = static_cast<int>(obs.points.size());
  std::vector<std::pair<int, std::vector<int>>> valid;
  std::vector<int> a(k, kOccluded);
  std::function<void(int)> rec = [&](int i) {
    if (i == k) {
      int occ = 0;
      std::vector<char> used(n, 0);
      for (int x : a) {
        if (x == kOccluded) ++occ;
        else used[x] = 1;
      }
      if (occ > t.max_occlusion() || k - occ < 3) return;
      for (int p = 0; p < k; ++p)
        for (int q = p + 1; q < k; ++q)
          if (a[p] != kOccluded && a[q] != kOccluded && !pair_ok(obs, t, tol, p, a[p], q, a[q]))
            return;
      for (int p = 0; p < k; ++p) {
        if (a[p] != kOccluded) continue;
        for (int o = 0; o < n; ++o) {
          if (used[o]) continue;
          bool fits = true;
          for (int q = 0; q < k; ++q)
            if (q != p && a[q] != kOccluded && !pair_ok(obs, t, tol, p, o, q, a[q])) fits = false;
          if (fits) return;  // not maximal
        }
      }
      std::vector<Vec3> src, dst;
      for (int p = 0; p < k; ++p) {
        if (a[p] == kOccluded) continue;
        src.push_back(t.markers()[p]);
        dst.push_back(obs.points[a[p]]);
      }
      try {
        fit_rigid(src, dst);
      } catch (const Error&) {
        return;
      }
      valid.push_back({occ, a});
      return;
    }
    for (int o = -1; o < n; ++o) {
      if (o >= 0 && std::find(a.begin(), a.begin() + i, o) != a.begin() + i) continue;
      a[i] = o;
      rec(i + 1);
    }
    a[i] = kOccluded;
  };
  rec(0);
  std::set<std::vector<int>> out;
  if (valid.empty()) return out;
  int best = k;
  for (const auto& v : valid) best = std::min(best, v.first);
  for (const auto& v : valid)
    if (v.first == best) out.insert(v.second);
  return out;
}

}  // namespace usnav::testing
