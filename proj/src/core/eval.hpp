#pragma once

#include "core/data.hpp"

namespace lc {

// pixel IoU between one GT line region and one detected line region
double match_score(const std::vector<int64_t>& gt_region, const std::vector<int64_t>& det_region);

struct MatchPair {
  int gt_id, det_id;
  double score;
};

struct PageEval {
  int n = 0, m = 0, o2o = 0;
  double dr = 0, ra = 0, fm = 0;
  bool flagged = false;  // N or M was zero
  std::vector<MatchPair> matches;
};

double f_measure(double dr, double ra);

// One-to-one greedy matching by descending IoU; a pair counts when its score
// strictly exceeds the threshold; ties break on (lower gt id, lower det id).
PageEval one_to_one(const LineMap& gt, const LineMap& det, double threshold = 0.9);

struct EvalReport {
  std::vector<PageEval> pages;
  int64_t total_n = 0, total_m = 0, total_o2o = 0;
  double dr = 0, ra = 0, fm = 0;

  std::string to_json() const;
  std::string to_table() const;
};

EvalReport evaluate_corpus(const std::vector<std::pair<const LineMap*, const LineMap*>>& pairs);

}  // namespace lc
