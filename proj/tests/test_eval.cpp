#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include "helpers.hpp"

using namespace lc;

namespace {

LineMap grid(int w, int h, std::vector<int32_t> labels) {
  LineMap m;
  m.width = w;
  m.height = h;
  m.labels = std::move(labels);
  return m;
}

// two-line page with geometry controlled per test
LineMap bands(int w, int h, int split) {
  LineMap m = grid(w, h, std::vector<int32_t>(static_cast<size_t>(w) * h, 0));
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) m.at(x, y) = y < split ? 1 : 2;
  return m;
}

}  // namespace

TEST_CASE("match_score basics") {
  std::vector<int64_t> a = {1, 2, 3}, b = {1, 2, 3}, c = {7, 8};
  CHECK(match_score(a, b) == 1.0);
  CHECK(match_score(a, c) == 0.0);
  CHECK(match_score({}, {}) == 0.0);

  std::vector<int64_t> g, r;
  for (int i = 0; i < 10; ++i) g.push_back(i);
  for (int i = 0; i < 9; ++i) r.push_back(i);
  CHECK(match_score(g, r) == doctest::Approx(0.9));  // |G|=10,|R|=9,overlap 9
}

TEST_CASE("identical maps match perfectly") {
  auto m = bands(10, 10, 5);
  PageEval ev = one_to_one(m, m);
  CHECK(ev.n == 2);
  CHECK(ev.m == 2);
  CHECK(ev.o2o == 2);
  CHECK(ev.dr == 1.0);
  CHECK(ev.ra == 1.0);
  CHECK(ev.fm == 1.0);
}

TEST_CASE("one good pair and one bad pair -> half scores") {
  // line 1 overlaps 0.95-ish, line 2 only 0.4
  int w = 20, h = 10;
  auto gt = bands(w, h, 5);
  auto det = gt;
  // degrade det line 2: keep 40% of its pixels as label 2, rest becomes 0
  int kept = 0, total = 0;
  for (int y = 5; y < h; ++y)
    for (int x = 0; x < w; ++x) {
      ++total;
      if (kept * 10 < total * 4) {
        ++kept;
      } else {
        det.at(x, y) = 0;
      }
    }
  PageEval ev = one_to_one(gt, det, 0.9);
  CHECK(ev.n == 2);
  CHECK(ev.m == 2);
  CHECK(ev.o2o == 1);
  CHECK(ev.dr == 0.5);
  CHECK(ev.ra == 0.5);
  CHECK(ev.fm == doctest::Approx(0.5));
}

TEST_CASE("strictly-greater threshold semantics") {
  // construct IoU exactly 0.9: |G|=10, |R|=9, inter=9 -> 9/10
  auto gt = grid(10, 1, {1, 1, 1, 1, 1, 1, 1, 1, 1, 1});
  auto det = grid(10, 1, {1, 1, 1, 1, 1, 1, 1, 1, 1, 0});
  PageEval at_09 = one_to_one(gt, det, 0.9);
  CHECK(at_09.o2o == 0);  // 0.9 > 0.9 is false
  PageEval at_089 = one_to_one(gt, det, 0.89);
  CHECK(at_089.o2o == 1);
}

TEST_CASE("empty sides are flagged with zero rates") {
  auto gt = bands(4, 4, 2);
  auto blank = grid(4, 4, std::vector<int32_t>(16, 0));
  PageEval ev = one_to_one(gt, blank);
  CHECK(ev.flagged);
  CHECK(ev.o2o == 0);
  CHECK(ev.dr == 0.0);
  CHECK(ev.ra == 0.0);
  CHECK(ev.fm == 0.0);
}

TEST_CASE("swapping gt/det swaps DR and RA and keeps FM") {
  SynthSpec spec;
  Rng rng(5);
  for (uint64_t seed = 0; seed < 25; ++seed) {
    auto [img, gt] = synth_page(spec, seed);
    LineMap det = lc::testing::perturb_linemap(gt, rng);
    PageEval a = one_to_one(gt, det);
    PageEval b = one_to_one(det, gt);
    CHECK(a.dr == doctest::Approx(b.ra));
    CHECK(a.ra == doctest::Approx(b.dr));
    CHECK(a.fm == doctest::Approx(b.fm));
  }
}

TEST_CASE("raising the threshold never increases o2o") {
  SynthSpec spec;
  Rng rng(6);
  for (uint64_t seed = 0; seed < 20; ++seed) {
    auto [img, gt] = synth_page(spec, seed);
    LineMap det = lc::testing::perturb_linemap(gt, rng);
    int prev = one_to_one(gt, det, 0.1).o2o;
    for (double thr : {0.3, 0.5, 0.7, 0.9}) {
      int cur = one_to_one(gt, det, thr).o2o;
      CHECK(cur <= prev);
      prev = cur;
    }
  }
}

TEST_CASE("greedy matcher equals the exhaustive oracle at threshold 0.9") {
  SynthSpec spec;
  spec.lines_min = 2;
  spec.lines_max = 6;
  Rng rng(7);
  for (uint64_t seed = 0; seed < 200; ++seed) {
    auto [img, gt] = synth_page(spec, seed);
    LineMap det = lc::testing::perturb_linemap(gt, rng);
    int greedy = one_to_one(gt, det, 0.9).o2o;
    int oracle = lc::testing::brute_force_o2o(gt, det, 0.9);
    CHECK(greedy == oracle);
  }
}

TEST_CASE("corpus aggregation is pixel-line weighted") {
  auto perfect = bands(6, 6, 3);
  EvalReport rep1 = evaluate_corpus({{&perfect, &perfect}});
  CHECK(rep1.fm == 1.0);

  // page A: 1 of 2 matched; page B: 2 of 2 matched
  auto gt_a = bands(20, 10, 5);
  auto det_a = gt_a;
  for (int y = 5; y < 10; ++y)
    for (int x = 0; x < 20; ++x)
      if ((y * 20 + x) % 10 < 6) det_a.at(x, y) = 0;  // line 2 falls below 0.9
  auto gt_b = bands(20, 10, 5);
  EvalReport rep = evaluate_corpus({{&gt_a, &det_a}, {&gt_b, &gt_b}});
  CHECK(rep.total_n == 4);
  CHECK(rep.total_m == 4);
  CHECK(rep.total_o2o == 3);
  CHECK(rep.dr == doctest::Approx(0.75));
  CHECK(rep.ra == doctest::Approx(0.75));
  CHECK(rep.fm == doctest::Approx(0.75));
}

TEST_CASE("empty corpus is an error") {
  CHECK_THROWS_WITH_AS(evaluate_corpus({}), doctest::Contains("empty"), Error);
}

TEST_CASE("fm formula") {
  CHECK(f_measure(0, 0) == 0.0);
  CHECK(f_measure(0.5, 0.5) == doctest::Approx(0.5));
  CHECK(f_measure(1.0, 0.5) == doctest::Approx(2.0 * 1.0 * 0.5 / 1.5));
}

TEST_CASE("report serialization carries corpus numbers") {
  auto m = bands(6, 6, 3);
  EvalReport rep = evaluate_corpus({{&m, &m}});
  auto js = rep.to_json();
  CHECK(js.find("\"fm\": 1.0") != std::string::npos);
  auto table = rep.to_table();
  CHECK(table.find("corpus") != std::string::npos);
}
