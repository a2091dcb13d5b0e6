#pragma once

#include <optional>

#include "core/model.hpp"

namespace lc {

// optimizer/schedule state carried inside a checkpoint so training resumes
// on the exact step trajectory
struct TrainState {
  int64_t adam_t = 0;
  int next_epoch = 0;
  double lr = 1e-4;
  double best_fm = -1.0;
  int since_improve = 0;
};

// Checkpoint layout (all integers little-endian u32):
//   "LCNT" | version | config_len, config JSON | entries until EOF,
//   each entry: name_len, name, rank, extents..., raw float32 data.
// Entries cover parameters, batchnorm running stats (<name>.bn.rmean/.rvar)
// and, when present, Adam moments (<param>.adam_m/.adam_v).
void save_checkpoint(const std::string& path, LineCounterNet<float>& net,
                     const std::optional<TrainState>& state, bool include_optimizer);

LineCounterNet<float> load_checkpoint(const std::string& path,
                                      std::optional<TrainState>* state_out = nullptr);

}  // namespace lc
