#pragma once

#include "core/data.hpp"
#include "core/eval.hpp"
#include "core/model.hpp"

namespace lc {

// full-page inference: aspect-preserving resize to the model's input size,
// forward pass, nearest-integer rounding, restriction to foreground pixels,
// nearest-neighbor transport back to the original resolution
LineMap predict_line_map(LineCounterNet<float>& net, const DocumentImage& image,
                         float fg_threshold = 0.5f);

// the rounding/transport tail of predict_line_map: counts at the network
// resolution become labels at the original resolution on foreground pixels;
// rounded values below 1 are treated as non-text noise
LineMap rounded_counts_to_linemap(const std::vector<float>& counts, int net_h, int net_w,
                                  const DocumentImage& original, const ScaleRecord& rec,
                                  float fg_threshold);

// corpus DR/RA/FM of a model against ground truth; pages already at the
// model's input size go through a batched forward pass
EvalReport evaluate_model(LineCounterNet<float>& net, const std::vector<Sample>& samples,
                          float fg_threshold = 0.5f, double match_threshold = 0.9,
                          int batch_size = 8);

// Otsu's threshold on a grayscale page, for real scans where a fixed
// foreground threshold is wrong; returns a value in (0,1)
float otsu_threshold(const DocumentImage& image);

}  // namespace lc
