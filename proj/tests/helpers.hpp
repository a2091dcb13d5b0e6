#pragma once

// shared test-only utilities: noisy line-map perturbations and an exhaustive
// matching oracle, independent of the greedy implementation under test

#include <algorithm>
#include <map>

#include "core/data.hpp"
#include "core/eval.hpp"

namespace lc::testing {

// all pairwise IoU scores between gt and det regions
inline std::map<std::pair<int32_t, int32_t>, double> pair_scores(const LineMap& gt,
                                                                 const LineMap& det) {
  std::map<int32_t, int64_t> gt_sz, det_sz;
  std::map<std::pair<int32_t, int32_t>, int64_t> inter;
  for (size_t i = 0; i < gt.labels.size(); ++i) {
    int32_t g = gt.labels[i], d = det.labels[i];
    if (g > 0) gt_sz[g]++;
    if (d > 0) det_sz[d]++;
    if (g > 0 && d > 0) inter[{g, d}]++;
  }
  std::map<std::pair<int32_t, int32_t>, double> out;
  for (auto& [key, cnt] : inter) {
    int64_t uni = gt_sz[key.first] + det_sz[key.second] - cnt;
    out[key] = uni ? static_cast<double>(cnt) / static_cast<double>(uni) : 0.0;
  }
  return out;
}

// exhaustive optimal one-to-one matching count (oracle for the greedy matcher)
inline int brute_force_o2o(const LineMap& gt, const LineMap& det, double threshold) {
  auto scores = pair_scores(gt, det);
  std::vector<int32_t> gt_ids;
  std::map<int32_t, std::vector<int32_t>> cand;  // gt -> dets above threshold
  for (auto& [key, s] : scores)
    if (s > threshold) cand[key.first].push_back(key.second);
  for (auto& [g, v] : cand) gt_ids.push_back(g);

  std::vector<int32_t> used;
  std::function<int(size_t)> best = [&](size_t i) -> int {
    if (i == gt_ids.size()) return 0;
    int skip = best(i + 1);
    int take = 0;
    for (int32_t d : cand[gt_ids[i]]) {
      if (std::find(used.begin(), used.end(), d) != used.end()) continue;
      used.push_back(d);
      take = std::max(take, 1 + best(i + 1));
      used.pop_back();
    }
    return std::max(skip, take);
  };
  return best(0);
}

// noisy detection derived from a ground-truth map: label shuffles, line
// merges/splits and pixel dropout produce a spread of IoU scores
inline LineMap perturb_linemap(const LineMap& gt, Rng& rng) {
  LineMap det = gt;
  int k = 0;
  for (int32_t v : det.labels) k = std::max(k, v);
  // drop some pixels per line
  for (auto& v : det.labels)
    if (v > 0 && rng.uniform() < 0.05) v = 0;
  if (k >= 2 && rng.uniform() < 0.3) {
    // merge two adjacent lines
    int32_t a = static_cast<int32_t>(rng.uniform_int(1, k - 1));
    for (auto& v : det.labels)
      if (v == a + 1) v = a;
  }
  if (rng.uniform() < 0.3) {
    // split one line at a column
    int32_t a = static_cast<int32_t>(rng.uniform_int(1, k));
    int cut = rng.uniform_int(0, det.width - 1);
    for (int y = 0; y < det.height; ++y)
      for (int x = cut; x < det.width; ++x)
        if (det.at(x, y) == a) det.at(x, y) = static_cast<int32_t>(k + 1);
  }
  if (rng.uniform() < 0.25) {
    // heavy corruption of one line
    int32_t a = static_cast<int32_t>(rng.uniform_int(1, k));
    for (auto& v : det.labels)
      if (v == a && rng.uniform() < 0.5) v = 0;
  }
  return det;
}

}  // namespace lc::testing
