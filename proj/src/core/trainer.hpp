#pragma once

#include <functional>

#include "core/checkpoint.hpp"
#include "core/pipeline.hpp"

namespace lc {

struct TrainOptions {
  int epochs = 100;
  int batch_size = 4;
  double lr = 1e-4;
  int patience = 20;  // epochs without val-FM improvement before the lr halves
  uint64_t seed = 1;
  float fg_threshold = 0.5f;
  double match_threshold = 0.9;
  double target_fm = -1.0;  // stop once val FM reaches this, if >= 0
  std::string out_dir;      // when set: log.csv, checkpoint_best/last.lcnt
};

struct EpochStats {
  int epoch = 0;
  double loss = 0;
  double dr = 0, ra = 0, fm = 0;
  double lr = 0;  // after this epoch's schedule update
};

// return false to stop after the current epoch
using EpochCallback = std::function<bool(const EpochStats&)>;

struct TrainResult {
  double best_fm = -1.0;
  int epochs_run = 0;
  std::vector<EpochStats> history;
  std::string best_checkpoint, last_checkpoint;
  TrainState final_state;
};

// halves the lr when the metric stalls for `patience` epochs
struct LrSchedule {
  double lr;
  int patience;
  double best = -1.0;
  int since_improve = 0;

  LrSchedule(double lr0, int patience0) : lr(lr0), patience(patience0) {}

  // feed one epoch's validation metric; returns true if it improved
  bool feed(double metric) {
    if (metric > best) {
      best = metric;
      since_improve = 0;
      return true;
    }
    if (++since_improve >= patience) {
      lr *= 0.5;
      since_improve = 0;
    }
    return false;
  }
};

// Adam training loop over (image, line map) pairs. Samples not matching the
// network input size are resize_pad'ed up front. Validation runs after every
// epoch on val_set (falling back to train_set) and drives the lr schedule
// and best-checkpoint selection. Deterministic for a fixed seed.
TrainResult train_model(LineCounterNet<float>& net, const std::vector<Sample>& train_set,
                        const std::vector<Sample>& val_set, const TrainOptions& opts,
                        const TrainState* resume = nullptr, const EpochCallback& cb = nullptr);

}  // namespace lc
