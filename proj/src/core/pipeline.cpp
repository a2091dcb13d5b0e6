#include "core/pipeline.hpp"

#include <array>

namespace lc {

LineMap rounded_counts_to_linemap(const std::vector<float>& counts, int net_h, int net_w,
                                  const DocumentImage& original, const ScaleRecord& rec,
                                  float fg_threshold) {
  LineMap out;
  out.width = original.width;
  out.height = original.height;
  out.labels.assign(static_cast<size_t>(out.width) * out.height, 0);
  for (int y = 0; y < out.height; ++y) {
    int sy = std::min(net_h - 1, static_cast<int>((y + 0.5) * rec.scale));
    for (int x = 0; x < out.width; ++x) {
      if (original.at(x, y) >= fg_threshold) continue;  // background
      int sx = std::min(net_w - 1, static_cast<int>((x + 0.5) * rec.scale));
      long r = std::lround(counts[static_cast<size_t>(sy) * net_w + sx]);
      if (r >= 1) out.at(x, y) = static_cast<int32_t>(r);  // counts < 1 are non-text noise
    }
  }
  return out;
}

LineMap predict_line_map(LineCounterNet<float>& net, const DocumentImage& image,
                         float fg_threshold) {
  const auto& cfg = net.config();
  DocumentImage resized;
  ScaleRecord rec = resize_pad(image, resized, cfg.input_h, cfg.input_w);
  NoGradGuard ng;
  auto x = Tensor<float>::from_data({1, 1, cfg.input_h, cfg.input_w}, resized.pixels);
  auto c = net.forward(x, /*train=*/false);
  return rounded_counts_to_linemap(c.value(), cfg.input_h, cfg.input_w, image, rec, fg_threshold);
}

EvalReport evaluate_model(LineCounterNet<float>& net, const std::vector<Sample>& samples,
                          float fg_threshold, double match_threshold, int batch_size) {
  const auto& cfg = net.config();
  std::vector<LineMap> dets(samples.size());

  // batch the common case of pages already at the network input size
  std::vector<size_t> batched, singles;
  for (size_t i = 0; i < samples.size(); ++i) {
    if (samples[i].image.height == cfg.input_h && samples[i].image.width == cfg.input_w)
      batched.push_back(i);
    else
      singles.push_back(i);
  }
  NoGradGuard ng;
  for (size_t at = 0; at < batched.size(); at += static_cast<size_t>(batch_size)) {
    size_t bs = std::min(static_cast<size_t>(batch_size), batched.size() - at);
    std::vector<float> buf(bs * static_cast<size_t>(cfg.input_h) * cfg.input_w);
    for (size_t bi = 0; bi < bs; ++bi)
      std::copy(samples[batched[at + bi]].image.pixels.begin(),
                samples[batched[at + bi]].image.pixels.end(),
                buf.begin() + static_cast<ptrdiff_t>(bi * static_cast<size_t>(cfg.input_h) * cfg.input_w));
    auto x = Tensor<float>::from_data({static_cast<int>(bs), 1, cfg.input_h, cfg.input_w}, std::move(buf));
    auto c = net.forward(x, /*train=*/false);
    ScaleRecord unit{1.0, cfg.input_w, cfg.input_h, cfg.input_w, cfg.input_h};
    for (size_t bi = 0; bi < bs; ++bi) {
      const float* page = c.value().data() + bi * static_cast<size_t>(cfg.input_h) * cfg.input_w;
      std::vector<float> counts(page, page + static_cast<size_t>(cfg.input_h) * cfg.input_w);
      dets[batched[at + bi]] = rounded_counts_to_linemap(counts, cfg.input_h, cfg.input_w,
                                                 samples[batched[at + bi]].image, unit, fg_threshold);
    }
  }
  for (size_t i : singles) dets[i] = predict_line_map(net, samples[i].image, fg_threshold);

  EvalReport rep;
  for (size_t i = 0; i < samples.size(); ++i) {
    PageEval ev = one_to_one(samples[i].gt, dets[i], match_threshold);
    rep.total_n += ev.n;
    rep.total_m += ev.m;
    rep.total_o2o += ev.o2o;
    rep.pages.push_back(std::move(ev));
  }
  rep.dr = rep.total_n ? static_cast<double>(rep.total_o2o) / static_cast<double>(rep.total_n) : 0.0;
  rep.ra = rep.total_m ? static_cast<double>(rep.total_o2o) / static_cast<double>(rep.total_m) : 0.0;
  rep.fm = f_measure(rep.dr, rep.ra);
  return rep;
}

float otsu_threshold(const DocumentImage& image) {
  std::array<int64_t, 256> hist{};
  for (float v : image.pixels) {
    int b = std::min(255, std::max(0, static_cast<int>(v * 255.f)));
    hist[static_cast<size_t>(b)]++;
  }
  int64_t total = static_cast<int64_t>(image.pixels.size());
  double sum = 0;
  for (int i = 0; i < 256; ++i) sum += i * static_cast<double>(hist[static_cast<size_t>(i)]);
  double sum_b = 0, max_var = -1;
  int64_t w_b = 0;
  int best = 127;
  for (int i = 0; i < 256; ++i) {
    w_b += hist[static_cast<size_t>(i)];
    if (w_b == 0) continue;
    int64_t w_f = total - w_b;
    if (w_f == 0) break;
    sum_b += i * static_cast<double>(hist[static_cast<size_t>(i)]);
    double m_b = sum_b / static_cast<double>(w_b);
    double m_f = (sum - sum_b) / static_cast<double>(w_f);
    double var = static_cast<double>(w_b) * static_cast<double>(w_f) * (m_b - m_f) * (m_b - m_f);
    if (var > max_var) {
      max_var = var;
      best = i;
    }
  }
  return (static_cast<float>(best) + 0.5f) / 255.f;
}

}  // namespace lc
