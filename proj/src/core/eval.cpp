#include "core/eval.hpp"

#include <algorithm>
#include <iomanip>
#include <map>
#include <sstream>

#include "json.hpp"

using nlohmann::json;

namespace lc {

double match_score(const std::vector<int64_t>& gt_region, const std::vector<int64_t>& det_region) {
  if (gt_region.empty() && det_region.empty()) return 0.0;
  // regions are sorted pixel indices
  size_t i = 0, j = 0;
  int64_t inter = 0;
  while (i < gt_region.size() && j < det_region.size()) {
    if (gt_region[i] == det_region[j]) {
      ++inter;
      ++i;
      ++j;
    } else if (gt_region[i] < det_region[j]) {
      ++i;
    } else {
      ++j;
    }
  }
  int64_t uni = static_cast<int64_t>(gt_region.size()) + static_cast<int64_t>(det_region.size()) - inter;
  return uni == 0 ? 0.0 : static_cast<double>(inter) / static_cast<double>(uni);
}

double f_measure(double dr, double ra) { return dr + ra > 0 ? 2.0 * dr * ra / (dr + ra) : 0.0; }

PageEval one_to_one(const LineMap& gt, const LineMap& det, double threshold) {
  if (gt.width != det.width || gt.height != det.height)
    fail(ErrCode::shape_mismatch, "one_to_one: page extents differ");

  int gt_max = gt.max_label();
  int det_max = det.max_label();

  // joint histogram over text pixels; labels need not be contiguous (a
  // predicted count map may skip integers)
  std::vector<int64_t> gt_sz(static_cast<size_t>(gt_max) + 1, 0), det_sz(static_cast<size_t>(det_max) + 1, 0);
  std::map<std::pair<int32_t, int32_t>, int64_t> inter;
  for (size_t i = 0; i < gt.labels.size(); ++i) {
    int32_t g = gt.labels[i], d = det.labels[i];
    if (g > 0) gt_sz[static_cast<size_t>(g)]++;
    if (d > 0) det_sz[static_cast<size_t>(d)]++;
    if (g > 0 && d > 0) inter[{g, d}]++;
  }
  int n = 0, m = 0;
  for (int64_t s : gt_sz) n += s > 0;
  for (int64_t s : det_sz) m += s > 0;
  PageEval ev;
  ev.n = n;
  ev.m = m;
  if (n == 0 || m == 0) {
    ev.flagged = true;
    return ev;  // DR and/or RA defined as 0
  }

  std::vector<MatchPair> cand;
  for (const auto& [key, cnt] : inter) {
    int64_t uni = gt_sz[static_cast<size_t>(key.first)] + det_sz[static_cast<size_t>(key.second)] - cnt;
    double s = uni > 0 ? static_cast<double>(cnt) / static_cast<double>(uni) : 0.0;
    if (s > threshold) cand.push_back({key.first, key.second, s});
  }
  std::sort(cand.begin(), cand.end(), [](const MatchPair& a, const MatchPair& b) {
    if (a.score != b.score) return a.score > b.score;
    if (a.gt_id != b.gt_id) return a.gt_id < b.gt_id;
    return a.det_id < b.det_id;
  });
  std::vector<uint8_t> gt_used(static_cast<size_t>(gt_max) + 1, 0), det_used(static_cast<size_t>(det_max) + 1, 0);
  for (const auto& c : cand) {
    if (gt_used[static_cast<size_t>(c.gt_id)] || det_used[static_cast<size_t>(c.det_id)]) continue;
    gt_used[static_cast<size_t>(c.gt_id)] = 1;
    det_used[static_cast<size_t>(c.det_id)] = 1;
    ev.matches.push_back(c);
  }
  ev.o2o = static_cast<int>(ev.matches.size());
  ev.dr = static_cast<double>(ev.o2o) / n;
  ev.ra = static_cast<double>(ev.o2o) / m;
  ev.fm = f_measure(ev.dr, ev.ra);
  return ev;
}

EvalReport evaluate_corpus(const std::vector<std::pair<const LineMap*, const LineMap*>>& pairs) {
  if (pairs.empty()) fail(ErrCode::invalid_argument, "evaluate_corpus: empty corpus");
  EvalReport rep;
  for (const auto& [gt, det] : pairs) {
    PageEval ev = one_to_one(*gt, *det);
    rep.total_n += ev.n;
    rep.total_m += ev.m;
    rep.total_o2o += ev.o2o;
    rep.pages.push_back(std::move(ev));
  }
  rep.dr = rep.total_n > 0 ? static_cast<double>(rep.total_o2o) / static_cast<double>(rep.total_n) : 0.0;
  rep.ra = rep.total_m > 0 ? static_cast<double>(rep.total_o2o) / static_cast<double>(rep.total_m) : 0.0;
  rep.fm = f_measure(rep.dr, rep.ra);
  return rep;
}

std::string EvalReport::to_json() const {
  json j;
  j["pages"] = json::array();
  for (const auto& p : pages) {
    json jp;
    jp["n"] = p.n;
    jp["m"] = p.m;
    jp["o2o"] = p.o2o;
    jp["dr"] = p.dr;
    jp["ra"] = p.ra;
    jp["fm"] = p.fm;
    jp["flagged"] = p.flagged;
    json matches = json::array();
    for (const auto& mt : p.matches) matches.push_back({{"gt_id", mt.gt_id}, {"det_id", mt.det_id}, {"score", mt.score}});
    jp["matches"] = matches;
    j["pages"].push_back(jp);
  }
  j["corpus"] = {{"pages", pages.size()}, {"n", total_n},   {"m", total_m},
                 {"o2o", total_o2o},      {"dr", dr},       {"ra", ra},
                 {"fm", fm}};
  return j.dump(2);
}

std::string EvalReport::to_table() const {
  std::ostringstream os;
  os << std::fixed << std::setprecision(3);
  os << "page     N     M   o2o     DR     RA     FM\n";
  for (size_t i = 0; i < pages.size(); ++i) {
    const auto& p = pages[i];
    os << std::setw(4) << i << std::setw(6) << p.n << std::setw(6) << p.m << std::setw(6) << p.o2o
       << std::setw(7) << p.dr << std::setw(7) << p.ra << std::setw(7) << p.fm
       << (p.flagged ? "  (flagged)" : "") << "\n";
  }
  os << "corpus" << std::setw(4) << total_n << std::setw(6) << total_m << std::setw(6) << total_o2o
     << std::setw(7) << dr << std::setw(7) << ra << std::setw(7) << fm << "\n";
  return os.str();
}

}  // namespace lc
