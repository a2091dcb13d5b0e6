#include "core/data.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>

#include "json.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace lc {

int LineMap::max_label() const {
  int32_t m = 0;
  for (int32_t v : labels) m = std::max(m, v);
  return m;
}

LineCountMap linecount_from_linemap(const LineMap& m) {
  LineCountMap c;
  c.width = m.width;
  c.height = m.height;
  c.values.assign(m.labels.size(), 0.f);
  c.mask.assign(m.labels.size(), 0);
  for (size_t i = 0; i < m.labels.size(); ++i)
    if (m.labels[i] > 0) {
      c.values[i] = static_cast<float>(m.labels[i]);
      c.mask[i] = 1;
    }
  return c;
}

int renumber_labels(LineMap& m) {
  std::map<int32_t, int32_t> remap;
  for (int32_t v : m.labels)
    if (v > 0) remap[v] = 0;
  int32_t next = 1;
  for (auto& [old_label, fresh] : remap) fresh = next++;
  for (auto& v : m.labels)
    if (v > 0) v = remap[v];
  return next - 1;
}

void SynthSpec::validate() const {
  if (page_h < 16 || page_w < 16) fail(ErrCode::invalid_argument, "synth: page too small");
  if (lines_min < 1 || lines_max < lines_min) fail(ErrCode::invalid_argument, "synth: bad line count range");
  if (glyph_h_min < 2 || glyph_h_max < glyph_h_min) fail(ErrCode::invalid_argument, "synth: bad glyph height range");
  if (gap_max < gap_min) fail(ErrCode::invalid_argument, "synth: bad gap range");
  int margin = std::max(2, page_h / 32);
  int usable = page_h - 2 * margin;
  int need = lines_min * glyph_h_min + (lines_min - 1) * std::max(gap_min, 0);
  if (need > usable)
    fail(ErrCode::invalid_argument, "synth: cannot fit " + std::to_string(lines_min) +
                                        " lines of height >= " + std::to_string(glyph_h_min) +
                                        " on a " + std::to_string(page_h) + "px page");
}

std::string SynthSpec::to_json() const {
  json j;
  j["page_h"] = page_h;
  j["page_w"] = page_w;
  j["lines_min"] = lines_min;
  j["lines_max"] = lines_max;
  j["glyph_h_min"] = glyph_h_min;
  j["glyph_h_max"] = glyph_h_max;
  j["gap_min"] = gap_min;
  j["gap_max"] = gap_max;
  j["skew_deg"] = skew_deg;
  j["curve_amp"] = curve_amp;
  return j.dump();
}

SynthSpec SynthSpec::from_json(const std::string& text) {
  SynthSpec s;
  json j;
  try {
    j = json::parse(text);
  } catch (const std::exception& e) {
    fail(ErrCode::format, std::string("synth spec json: ") + e.what());
  }
  s.page_h = j.value("page_h", s.page_h);
  s.page_w = j.value("page_w", s.page_w);
  s.lines_min = j.value("lines_min", s.lines_min);
  s.lines_max = j.value("lines_max", s.lines_max);
  s.glyph_h_min = j.value("glyph_h_min", s.glyph_h_min);
  s.glyph_h_max = j.value("glyph_h_max", s.glyph_h_max);
  s.gap_min = j.value("gap_min", s.gap_min);
  s.gap_max = j.value("gap_max", s.gap_max);
  s.skew_deg = j.value("skew_deg", s.skew_deg);
  s.curve_amp = j.value("curve_amp", s.curve_amp);
  return s;
}

namespace {

struct Canvas {
  DocumentImage* img;
  LineMap* map;

  void stamp(double cx, double cy, int radius, int32_t label) {
    int w = img->width, h = img->height;
    int x0 = std::max(0, static_cast<int>(std::floor(cx)) - radius);
    int x1 = std::min(w - 1, static_cast<int>(std::ceil(cx)) + radius);
    int y0 = std::max(0, static_cast<int>(std::floor(cy)) - radius);
    int y1 = std::min(h - 1, static_cast<int>(std::ceil(cy)) + radius);
    double r2 = static_cast<double>(radius) * radius + 0.25;
    for (int y = y0; y <= y1; ++y)
      for (int x = x0; x <= x1; ++x) {
        double dx = x - cx, dy = y - cy;
        if (dx * dx + dy * dy > r2) continue;
        img->at(x, y) = 0.f;
        auto& lab = map->at(x, y);
        if (lab == 0) lab = label;  // first writer keeps the pixel
      }
  }

  void segment(double x0, double y0, double x1, double y1, int radius, int32_t label) {
    double len = std::hypot(x1 - x0, y1 - y0);
    int steps = std::max(1, static_cast<int>(std::ceil(len * 2)));
    for (int i = 0; i <= steps; ++i) {
      double t = static_cast<double>(i) / steps;
      stamp(x0 + t * (x1 - x0), y0 + t * (y1 - y0), radius, label);
    }
  }
};

}  // namespace

std::pair<DocumentImage, LineMap> synth_page(const SynthSpec& spec, uint64_t seed) {
  spec.validate();
  Rng rng = Rng::seeded(seed);

  int h = spec.page_h, w = spec.page_w;
  DocumentImage img;
  img.width = w;
  img.height = h;
  img.pixels.assign(static_cast<size_t>(w) * h, 1.f);
  LineMap map;
  map.width = w;
  map.height = h;
  map.labels.assign(static_cast<size_t>(w) * h, 0);
  Canvas canvas{&img, &map};

  int margin_y = std::max(2, h / 32);
  int margin_x = std::max(2, w / 32);
  int usable = h - 2 * margin_y;

  int n = rng.uniform_int(spec.lines_min, spec.lines_max);
  std::vector<int> glyph_h(static_cast<size_t>(n)), gap(static_cast<size_t>(n));
  for (int i = 0; i < n; ++i) {
    glyph_h[static_cast<size_t>(i)] = rng.uniform_int(spec.glyph_h_min, spec.glyph_h_max);
    int g = rng.uniform_int(spec.gap_min, spec.gap_max);
    // gaps may be negative (touching lines) but never invert the layout
    gap[static_cast<size_t>(i)] = std::max(g, -glyph_h[static_cast<size_t>(i)] / 2);
  }
  auto extent = [&]() {
    int e = 0;
    for (int i = 0; i < n; ++i) e += glyph_h[static_cast<size_t>(i)] + (i + 1 < n ? gap[static_cast<size_t>(i)] : 0);
    return e;
  };
  // deterministic shrink passes if the sampled layout overflows
  while (extent() > usable) {
    bool changed = false;
    for (int i = 0; i + 1 < n && extent() > usable; ++i)
      if (gap[static_cast<size_t>(i)] > spec.gap_min) {
        --gap[static_cast<size_t>(i)];
        changed = true;
      }
    for (int i = 0; i < n && extent() > usable; ++i)
      if (glyph_h[static_cast<size_t>(i)] > spec.glyph_h_min) {
        --glyph_h[static_cast<size_t>(i)];
        changed = true;
      }
    if (!changed) {
      if (n > spec.lines_min) {
        --n;  // drop a line rather than fail: spec minimum was validated to fit
      } else {
        fail(ErrCode::invalid_argument, "synth: layout does not fit page");
      }
    }
  }

  int slack = usable - extent();
  int y = margin_y + (slack > 0 ? rng.uniform_int(0, slack) : 0);
  for (int li = 0; li < n; ++li) {
    int g = glyph_h[static_cast<size_t>(li)];
    double baseline = y + g;
    double slope = std::tan(rng.uniform(-spec.skew_deg, spec.skew_deg) * M_PI / 180.0);
    double amp = rng.uniform(0.0, spec.curve_amp);
    double freq = rng.uniform(0.5, 1.5);
    double phase = rng.uniform(0.0, 2.0 * M_PI);
    auto base_at = [&](double x) {
      return baseline + slope * (x - w / 2.0) + amp * std::sin(2.0 * M_PI * freq * x / w + phase);
    };
    int radius = std::max(1, g / 10);
    int32_t label = li + 1;

    double x = margin_x;
    while (x < w - margin_x - g * 0.5) {
      int word_len = rng.uniform_int(2, 5);
      for (int gi = 0; gi < word_len && x < w - margin_x - g * 0.5; ++gi) {
        double gw = rng.uniform(0.5, 0.9) * g;
        double yb = base_at(x + gw / 2);
        int strokes = rng.uniform_int(2, 4);
        for (int s = 0; s < strokes; ++s) {
          int pts = rng.uniform_int(3, 5);
          double px = x + rng.uniform(0.0, gw);
          double py = yb - rng.uniform(0.0, static_cast<double>(g));
          for (int p = 1; p < pts; ++p) {
            double nx = x + rng.uniform(0.0, gw);
            double ny = yb - rng.uniform(0.0, static_cast<double>(g));
            canvas.segment(px, py, nx, ny, radius, label);
            px = nx;
            py = ny;
          }
        }
        x += gw + 1 + rng.uniform(0.0, 0.15 * g);
      }
      x += rng.uniform(0.4, 0.8) * g;  // word gap
    }
    y += g + (li + 1 < n ? gap[static_cast<size_t>(li)] : 0);
  }

  // labels must be ordered by mean y; the layout already is, but renumber by
  // mean y if a wild skew/curvature draw reordered two touching lines
  int k = renumber_labels(map);
  if (k >= 2) {
    std::vector<double> sum_y(static_cast<size_t>(k) + 1, 0.0);
    std::vector<int64_t> cnt(static_cast<size_t>(k) + 1, 0);
    for (int yy = 0; yy < h; ++yy)
      for (int xx = 0; xx < w; ++xx) {
        int32_t lab = map.at(xx, yy);
        if (lab > 0) {
          sum_y[static_cast<size_t>(lab)] += yy;
          cnt[static_cast<size_t>(lab)]++;
        }
      }
    std::vector<int> order;
    for (int i = 1; i <= k; ++i)
      if (cnt[static_cast<size_t>(i)] > 0) order.push_back(i);
    std::stable_sort(order.begin(), order.end(), [&](int a, int b) {
      return sum_y[static_cast<size_t>(a)] / cnt[static_cast<size_t>(a)] <
             sum_y[static_cast<size_t>(b)] / cnt[static_cast<size_t>(b)];
    });
    std::vector<int32_t> remap(static_cast<size_t>(k) + 1, 0);
    for (size_t i = 0; i < order.size(); ++i) remap[static_cast<size_t>(order[i])] = static_cast<int32_t>(i) + 1;
    for (auto& v : map.labels)
      if (v > 0) v = remap[static_cast<size_t>(v)];
  }
  return {std::move(img), std::move(map)};
}

namespace {

// solve a small dense system in place (partial pivoting); a is n x (n+1)
void solve_augmented(std::vector<double>& a, int n, std::vector<double>& out) {
  int cols = n + 1;
  for (int i = 0; i < n; ++i) {
    int piv = i;
    for (int r = i + 1; r < n; ++r)
      if (std::abs(a[static_cast<size_t>(r) * cols + i]) > std::abs(a[static_cast<size_t>(piv) * cols + i])) piv = r;
    if (std::abs(a[static_cast<size_t>(piv) * cols + i]) < 1e-12)
      fail(ErrCode::numeric, "augment: singular warp system");
    if (piv != i)
      for (int cidx = 0; cidx < cols; ++cidx)
        std::swap(a[static_cast<size_t>(i) * cols + cidx], a[static_cast<size_t>(piv) * cols + cidx]);
    double d = a[static_cast<size_t>(i) * cols + i];
    for (int cidx = i; cidx < cols; ++cidx) a[static_cast<size_t>(i) * cols + cidx] /= d;
    for (int r = 0; r < n; ++r) {
      if (r == i) continue;
      double f = a[static_cast<size_t>(r) * cols + i];
      if (f == 0) continue;
      for (int cidx = i; cidx < cols; ++cidx)
        a[static_cast<size_t>(r) * cols + cidx] -= f * a[static_cast<size_t>(i) * cols + cidx];
    }
  }
  out.resize(static_cast<size_t>(n));
  for (int i = 0; i < n; ++i) out[static_cast<size_t>(i)] = a[static_cast<size_t>(i) * cols + n];
}

struct Pt {
  double x, y;
};

// homography h mapping src points to dst points (h[8] fixed at 1)
std::array<double, 9> fit_homography(const std::array<Pt, 4>& src, const std::array<Pt, 4>& dst) {
  std::vector<double> a(8 * 9, 0.0);
  for (int i = 0; i < 4; ++i) {
    double x = src[static_cast<size_t>(i)].x, y = src[static_cast<size_t>(i)].y;
    double u = dst[static_cast<size_t>(i)].x, v = dst[static_cast<size_t>(i)].y;
    double* r0 = a.data() + static_cast<size_t>(2 * i) * 9;
    double* r1 = a.data() + static_cast<size_t>(2 * i + 1) * 9;
    r0[0] = x; r0[1] = y; r0[2] = 1; r0[6] = -u * x; r0[7] = -u * y; r0[8] = u;
    r1[3] = x; r1[4] = y; r1[5] = 1; r1[6] = -v * x; r1[7] = -v * y; r1[8] = v;
  }
  std::vector<double> sol;
  solve_augmented(a, 8, sol);
  return {sol[0], sol[1], sol[2], sol[3], sol[4], sol[5], sol[6], sol[7], 1.0};
}

inline Pt apply_homography(const std::array<double, 9>& h, double x, double y) {
  double d = h[6] * x + h[7] * y + h[8];
  return {(h[0] * x + h[1] * y + h[2]) / d, (h[3] * x + h[4] * y + h[5]) / d};
}

double cross_z(const Pt& o, const Pt& a, const Pt& b) {
  return (a.x - o.x) * (b.y - o.y) - (a.y - o.y) * (b.x - o.x);
}

bool convex_quad(const std::array<Pt, 4>& q) {
  double s0 = cross_z(q[0], q[1], q[2]);
  double s1 = cross_z(q[1], q[2], q[3]);
  double s2 = cross_z(q[2], q[3], q[0]);
  double s3 = cross_z(q[3], q[0], q[1]);
  return (s0 > 0 && s1 > 0 && s2 > 0 && s3 > 0) || (s0 < 0 && s1 < 0 && s2 < 0 && s3 < 0);
}

// thin plate spline interpolant fitted on control pairs, U(r) = r^2 log r
struct Tps {
  std::vector<Pt> centers;
  std::vector<double> wx, wy;  // per-center weights + 3 affine terms each

  static double kernel(double r2) {
    if (r2 < 1e-24) return 0.0;
    return 0.5 * r2 * std::log(r2);  // r^2 log r
  }

  static Tps fit(const std::vector<Pt>& from, const std::vector<Pt>& to) {
    int k = static_cast<int>(from.size());
    int n = k + 3;
    Tps t;
    t.centers = from;
    for (int pass = 0; pass < 2; ++pass) {
      std::vector<double> a(static_cast<size_t>(n) * (n + 1), 0.0);
      for (int i = 0; i < k; ++i) {
        for (int j = 0; j < k; ++j) {
          double dx = from[static_cast<size_t>(i)].x - from[static_cast<size_t>(j)].x;
          double dy = from[static_cast<size_t>(i)].y - from[static_cast<size_t>(j)].y;
          a[static_cast<size_t>(i) * (n + 1) + j] = kernel(dx * dx + dy * dy);
        }
        a[static_cast<size_t>(i) * (n + 1) + k] = 1;
        a[static_cast<size_t>(i) * (n + 1) + k + 1] = from[static_cast<size_t>(i)].x;
        a[static_cast<size_t>(i) * (n + 1) + k + 2] = from[static_cast<size_t>(i)].y;
        a[static_cast<size_t>(i) * (n + 1) + n] =
            pass == 0 ? to[static_cast<size_t>(i)].x : to[static_cast<size_t>(i)].y;
      }
      for (int j = 0; j < k; ++j) {
        a[static_cast<size_t>(k) * (n + 1) + j] = 1;
        a[static_cast<size_t>(k + 1) * (n + 1) + j] = from[static_cast<size_t>(j)].x;
        a[static_cast<size_t>(k + 2) * (n + 1) + j] = from[static_cast<size_t>(j)].y;
      }
      std::vector<double> sol;
      solve_augmented(a, n, sol);
      (pass == 0 ? t.wx : t.wy) = sol;
    }
    return t;
  }

  Pt operator()(double x, double y) const {
    int k = static_cast<int>(centers.size());
    double ox = wx[static_cast<size_t>(k)] + wx[static_cast<size_t>(k) + 1] * x + wx[static_cast<size_t>(k) + 2] * y;
    double oy = wy[static_cast<size_t>(k)] + wy[static_cast<size_t>(k) + 1] * x + wy[static_cast<size_t>(k) + 2] * y;
    for (int i = 0; i < k; ++i) {
      double dx = x - centers[static_cast<size_t>(i)].x;
      double dy = y - centers[static_cast<size_t>(i)].y;
      double u = kernel(dx * dx + dy * dy);
      ox += wx[static_cast<size_t>(i)] * u;
      oy += wy[static_cast<size_t>(i)] * u;
    }
    return {ox, oy};
  }
};

// warps via an output->input coordinate map
template <typename MapFn>
std::pair<DocumentImage, LineMap> warp_with(const DocumentImage& img, const LineMap& map, MapFn fn) {
  int w = img.width, h = img.height;
  DocumentImage out_img;
  out_img.width = w;
  out_img.height = h;
  out_img.pixels.assign(static_cast<size_t>(w) * h, 1.f);
  LineMap out_map;
  out_map.width = w;
  out_map.height = h;
  out_map.labels.assign(static_cast<size_t>(w) * h, 0);

  auto snap = [](double v) {
    double r = std::round(v);
    return std::abs(v - r) < 1e-6 ? r : v;
  };
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) {
      Pt s = fn(static_cast<double>(x), static_cast<double>(y));
      double sx = snap(s.x), sy = snap(s.y);
      // nearest for labels
      int nx = static_cast<int>(std::lround(sx));
      int ny = static_cast<int>(std::lround(sy));
      if (nx >= 0 && nx < w && ny >= 0 && ny < h) out_map.at(x, y) = map.at(nx, ny);
      // bilinear for the image, white outside
      if (sx < 0 || sy < 0 || sx > w - 1 || sy > h - 1) continue;
      int x0 = static_cast<int>(std::floor(sx)), y0 = static_cast<int>(std::floor(sy));
      int x1 = std::min(x0 + 1, w - 1), y1 = std::min(y0 + 1, h - 1);
      double fx = sx - x0, fy = sy - y0;
      double v = img.at(x0, y0) * (1 - fx) * (1 - fy) + img.at(x1, y0) * fx * (1 - fy) +
                 img.at(x0, y1) * (1 - fx) * fy + img.at(x1, y1) * fx * fy;
      out_img.at(x, y) = static_cast<float>(v);
    }
  renumber_labels(out_map);
  return {std::move(out_img), std::move(out_map)};
}

}  // namespace

std::pair<DocumentImage, LineMap> augment(const DocumentImage& img, const LineMap& map,
                                          WarpKind kind, double magnitude, uint64_t seed) {
  if (img.width != map.width || img.height != map.height)
    fail(ErrCode::shape_mismatch, "augment: image/linemap size mismatch");
  Rng rng = Rng::seeded(seed);
  int w = img.width, h = img.height;
  double m = magnitude * std::min(w, h);

  if (kind == WarpKind::perspective) {
    std::array<Pt, 4> src = {Pt{0, 0}, Pt{static_cast<double>(w - 1), 0},
                             Pt{static_cast<double>(w - 1), static_cast<double>(h - 1)},
                             Pt{0, static_cast<double>(h - 1)}};
    std::array<Pt, 4> dst;
    for (int attempt = 0; attempt < 64; ++attempt) {
      for (int i = 0; i < 4; ++i)
        dst[static_cast<size_t>(i)] = {src[static_cast<size_t>(i)].x + rng.uniform(-m, m),
                                       src[static_cast<size_t>(i)].y + rng.uniform(-m, m)};
      if (convex_quad(dst)) break;
      if (attempt == 63) fail(ErrCode::numeric, "augment: could not sample a convex quad");
    }
    // output corner quad (dst) pulls pixels from the source corners
    auto hmat = fit_homography(dst, src);
    return warp_with(img, map, [hmat](double x, double y) { return apply_homography(hmat, x, y); });
  }

  // TPS on a 3x3 control grid; jittered targets are the fit centers so the
  // output->input map interpolates exactly at the controls
  const int grid = 3;
  std::vector<Pt> orig, jit;
  for (int gy = 0; gy < grid; ++gy)
    for (int gx = 0; gx < grid; ++gx) {
      Pt p{gx * (w - 1.0) / (grid - 1), gy * (h - 1.0) / (grid - 1)};
      orig.push_back(p);
      jit.push_back({p.x + rng.normal() * m * 0.5, p.y + rng.normal() * m * 0.5});
    }
  Tps tps = Tps::fit(jit, orig);
  return warp_with(img, map, [tps](double x, double y) { return tps(x, y); });
}

ScaleRecord resize_pad(const DocumentImage& in, DocumentImage& out, int target_h, int target_w) {
  ScaleRecord rec;
  rec.orig_w = in.width;
  rec.orig_h = in.height;
  rec.scale = std::min(static_cast<double>(target_h) / in.height,
                       static_cast<double>(target_w) / in.width);
  rec.content_h = std::min(target_h, static_cast<int>(std::lround(in.height * rec.scale)));
  rec.content_w = std::min(target_w, static_cast<int>(std::lround(in.width * rec.scale)));

  out.width = target_w;
  out.height = target_h;
  out.pixels.assign(static_cast<size_t>(target_w) * target_h, 1.f);
  for (int y = 0; y < rec.content_h; ++y) {
    double sy = (y + 0.5) / rec.scale - 0.5;
    sy = std::min(std::max(sy, 0.0), in.height - 1.0);
    int y0 = static_cast<int>(std::floor(sy)), y1 = std::min(y0 + 1, in.height - 1);
    double fy = sy - y0;
    for (int x = 0; x < rec.content_w; ++x) {
      double sx = (x + 0.5) / rec.scale - 0.5;
      sx = std::min(std::max(sx, 0.0), in.width - 1.0);
      int x0 = static_cast<int>(std::floor(sx)), x1 = std::min(x0 + 1, in.width - 1);
      double fx = sx - x0;
      double v = in.at(x0, y0) * (1 - fx) * (1 - fy) + in.at(x1, y0) * fx * (1 - fy) +
                 in.at(x0, y1) * (1 - fx) * fy + in.at(x1, y1) * fx * fy;
      out.at(x, y) = static_cast<float>(v);
    }
  }
  return rec;
}

void resize_pad_linemap(const LineMap& in, LineMap& out, const ScaleRecord& rec, int target_h,
                        int target_w) {
  out.width = target_w;
  out.height = target_h;
  out.labels.assign(static_cast<size_t>(target_w) * target_h, 0);
  for (int y = 0; y < rec.content_h; ++y) {
    int sy = std::min(in.height - 1, static_cast<int>((y + 0.5) / rec.scale));
    for (int x = 0; x < rec.content_w; ++x) {
      int sx = std::min(in.width - 1, static_cast<int>((x + 0.5) / rec.scale));
      out.at(x, y) = in.at(sx, sy);
    }
  }
}

LineMap unresize_linemap(const LineMap& resized, const ScaleRecord& rec) {
  LineMap out;
  out.width = rec.orig_w;
  out.height = rec.orig_h;
  out.labels.assign(static_cast<size_t>(rec.orig_w) * rec.orig_h, 0);
  for (int y = 0; y < rec.orig_h; ++y) {
    int sy = std::min(resized.height - 1, static_cast<int>((y + 0.5) * rec.scale));
    for (int x = 0; x < rec.orig_w; ++x) {
      int sx = std::min(resized.width - 1, static_cast<int>((x + 0.5) * rec.scale));
      out.at(x, y) = resized.at(sx, sy);
    }
  }
  return out;
}

namespace {

void pgm_expect(std::istream& is, bool ok, const std::string& field, const std::string& path) {
  if (!ok || !is)
    fail(ErrCode::format, "pgm parse error in '" + path + "': bad or missing " + field);
}

int pgm_read_int(std::istream& is, const std::string& field, const std::string& path) {
  // skip whitespace and '#' comments
  int c;
  while ((c = is.peek()) != EOF) {
    if (c == '#') {
      std::string line;
      std::getline(is, line);
    } else if (std::isspace(c)) {
      is.get();
    } else {
      break;
    }
  }
  int v = -1;
  is >> v;
  pgm_expect(is, v >= 0, field, path);
  return v;
}

}  // namespace

void write_pgm8(const std::string& path, const DocumentImage& img) {
  std::ofstream os(path, std::ios::binary);
  if (!os) fail(ErrCode::io, "cannot write " + path);
  os << "P5\n" << img.width << " " << img.height << "\n255\n";
  std::vector<uint8_t> row(static_cast<size_t>(img.width));
  for (int y = 0; y < img.height; ++y) {
    for (int x = 0; x < img.width; ++x) {
      float v = std::min(1.f, std::max(0.f, img.at(x, y)));
      row[static_cast<size_t>(x)] = static_cast<uint8_t>(std::lround(v * 255.f));
    }
    os.write(reinterpret_cast<const char*>(row.data()), img.width);
  }
  if (!os) fail(ErrCode::io, "short write to " + path);
}

DocumentImage read_pgm8(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) fail(ErrCode::io, "cannot read " + path);
  std::string magic;
  is >> magic;
  pgm_expect(is, magic == "P5", "magic (want P5)", path);
  int w = pgm_read_int(is, "width", path);
  int h = pgm_read_int(is, "height", path);
  int maxval = pgm_read_int(is, "maxval", path);
  pgm_expect(is, maxval == 255, "maxval (want 255)", path);
  is.get();  // single whitespace after maxval
  DocumentImage img;
  img.width = w;
  img.height = h;
  img.pixels.resize(static_cast<size_t>(w) * h);
  std::vector<uint8_t> raw(static_cast<size_t>(w) * h);
  is.read(reinterpret_cast<char*>(raw.data()), static_cast<std::streamsize>(raw.size()));
  pgm_expect(is, static_cast<size_t>(is.gcount()) == raw.size(), "pixel data", path);
  for (size_t i = 0; i < raw.size(); ++i) img.pixels[i] = static_cast<float>(raw[i]) / 255.f;
  return img;
}

void write_pgm16(const std::string& path, const LineMap& map) {
  for (int32_t v : map.labels)
    if (v < 0 || v > 65535)
      fail(ErrCode::format, "linemap label " + std::to_string(v) + " out of 16-bit range");
  std::ofstream os(path, std::ios::binary);
  if (!os) fail(ErrCode::io, "cannot write " + path);
  os << "P5\n" << map.width << " " << map.height << "\n65535\n";
  std::vector<uint8_t> row(static_cast<size_t>(map.width) * 2);
  for (int y = 0; y < map.height; ++y) {
    for (int x = 0; x < map.width; ++x) {
      uint16_t v = static_cast<uint16_t>(map.at(x, y));
      row[static_cast<size_t>(x) * 2] = static_cast<uint8_t>(v >> 8);  // big-endian per netpbm
      row[static_cast<size_t>(x) * 2 + 1] = static_cast<uint8_t>(v & 0xff);
    }
    os.write(reinterpret_cast<const char*>(row.data()), static_cast<std::streamsize>(row.size()));
  }
  if (!os) fail(ErrCode::io, "short write to " + path);
}

LineMap read_pgm16(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) fail(ErrCode::io, "cannot read " + path);
  std::string magic;
  is >> magic;
  pgm_expect(is, magic == "P5", "magic (want P5)", path);
  int w = pgm_read_int(is, "width", path);
  int h = pgm_read_int(is, "height", path);
  int maxval = pgm_read_int(is, "maxval", path);
  pgm_expect(is, maxval == 65535, "maxval (want 65535)", path);
  is.get();
  LineMap map;
  map.width = w;
  map.height = h;
  map.labels.resize(static_cast<size_t>(w) * h);
  std::vector<uint8_t> raw(static_cast<size_t>(w) * h * 2);
  is.read(reinterpret_cast<char*>(raw.data()), static_cast<std::streamsize>(raw.size()));
  pgm_expect(is, static_cast<size_t>(is.gcount()) == raw.size(), "pixel data", path);
  for (size_t i = 0; i < map.labels.size(); ++i)
    map.labels[i] = (static_cast<int32_t>(raw[i * 2]) << 8) | raw[i * 2 + 1];
  return map;
}

const uint8_t kLabelPalette[12][3] = {
    {255, 255, 255},  // 0: background
    {230, 25, 75},    {60, 180, 75},   {255, 225, 25}, {0, 130, 200},
    {245, 130, 48},   {145, 30, 180},  {70, 240, 240}, {240, 50, 230},
    {210, 245, 60},   {170, 110, 40},  {128, 0, 0},
};

void write_label_ppm(const std::string& path, const LineMap& map) {
  std::ofstream os(path, std::ios::binary);
  if (!os) fail(ErrCode::io, "cannot write " + path);
  os << "P6\n" << map.width << " " << map.height << "\n255\n";
  std::vector<uint8_t> row(static_cast<size_t>(map.width) * 3);
  for (int y = 0; y < map.height; ++y) {
    for (int x = 0; x < map.width; ++x) {
      const uint8_t* c = kLabelPalette[map.at(x, y) % 12];
      row[static_cast<size_t>(x) * 3] = c[0];
      row[static_cast<size_t>(x) * 3 + 1] = c[1];
      row[static_cast<size_t>(x) * 3 + 2] = c[2];
    }
    os.write(reinterpret_cast<const char*>(row.data()), static_cast<std::streamsize>(row.size()));
  }
}

void write_manifest(const std::string& path, const std::vector<ManifestEntry>& entries) {
  json j = json::array();
  for (const auto& e : entries) j.push_back({{"image_path", e.image_path}, {"linemap_path", e.linemap_path}});
  std::ofstream os(path);
  if (!os) fail(ErrCode::io, "cannot write " + path);
  os << j.dump(2) << "\n";
}

std::vector<ManifestEntry> read_manifest(const std::string& path) {
  std::ifstream is(path);
  if (!is) fail(ErrCode::io, "cannot read manifest " + path);
  json j;
  try {
    is >> j;
  } catch (const std::exception& e) {
    fail(ErrCode::format, "manifest '" + path + "': " + e.what());
  }
  if (!j.is_array()) fail(ErrCode::format, "manifest '" + path + "': expected a JSON array");
  std::vector<ManifestEntry> out;
  for (const auto& e : j) {
    if (!e.contains("image_path") || !e.contains("linemap_path"))
      fail(ErrCode::format, "manifest '" + path + "': entry missing image_path/linemap_path");
    out.push_back({e["image_path"].get<std::string>(), e["linemap_path"].get<std::string>()});
  }
  return out;
}

std::vector<Sample> load_dataset(const std::string& manifest_path) {
  auto entries = read_manifest(manifest_path);
  fs::path base = fs::path(manifest_path).parent_path();
  auto resolve = [&](const std::string& p) {
    fs::path q(p);
    return q.is_absolute() ? q.string() : (base / q).string();
  };
  std::vector<Sample> out;
  out.reserve(entries.size());
  for (const auto& e : entries) {
    Sample s;
    s.image = read_pgm8(resolve(e.image_path));
    s.gt = read_pgm16(resolve(e.linemap_path));
    if (s.image.width != s.gt.width || s.image.height != s.gt.height)
      fail(ErrCode::format, "manifest '" + manifest_path + "': size mismatch between " +
                                e.image_path + " and " + e.linemap_path);
    renumber_labels(s.gt);
    out.push_back(std::move(s));
  }
  return out;
}

}  // namespace lc
