#include "core/trainer.hpp"

#include <filesystem>
#include <fstream>

namespace fs = std::filesystem;

namespace lc {

namespace {

struct Prepared {
  std::vector<float> pixels;     // input size
  std::vector<float> gt_values;  // count target, input size
  std::vector<uint8_t> mask;
};

Prepared prepare(const Sample& s, const ModelConfig& cfg) {
  Prepared p;
  if (s.image.height == cfg.input_h && s.image.width == cfg.input_w) {
    p.pixels = s.image.pixels;
    LineCountMap c = linecount_from_linemap(s.gt);
    p.gt_values = std::move(c.values);
    p.mask = std::move(c.mask);
    return p;
  }
  DocumentImage img;
  ScaleRecord rec = resize_pad(s.image, img, cfg.input_h, cfg.input_w);
  LineMap map;
  resize_pad_linemap(s.gt, map, rec, cfg.input_h, cfg.input_w);
  p.pixels = std::move(img.pixels);
  LineCountMap c = linecount_from_linemap(map);
  p.gt_values = std::move(c.values);
  p.mask = std::move(c.mask);
  return p;
}

// pure function of (seed, epoch) so interrupted runs resume on the same order
void shuffle_indices(std::vector<size_t>& idx, uint64_t seed, int epoch) {
  for (size_t i = 0; i < idx.size(); ++i) idx[i] = i;
  Rng rng(seed * 1000003ull + static_cast<uint64_t>(epoch));
  for (size_t i = idx.size(); i > 1; --i) {
    size_t j = rng.next_u64() % i;
    std::swap(idx[i - 1], idx[j]);
  }
}

}  // namespace

TrainResult train_model(LineCounterNet<float>& net, const std::vector<Sample>& train_set,
                        const std::vector<Sample>& val_set, const TrainOptions& opts,
                        const TrainState* resume, const EpochCallback& cb) {
  if (train_set.empty()) fail(ErrCode::invalid_argument, "train: empty training set");
  if (opts.batch_size < 1) fail(ErrCode::invalid_argument, "train: batch_size must be >= 1");
  const ModelConfig& cfg = net.config();
  const int64_t page = static_cast<int64_t>(cfg.input_h) * cfg.input_w;

  std::vector<Prepared> data;
  data.reserve(train_set.size());
  for (const auto& s : train_set) data.push_back(prepare(s, cfg));
  const std::vector<Sample>& val = val_set.empty() ? train_set : val_set;

  AdamConfig adam;
  adam.lr = opts.lr;
  LrSchedule sched(opts.lr, opts.patience);
  int64_t adam_t = 0;
  int start_epoch = 0;
  if (resume) {
    adam_t = resume->adam_t;
    start_epoch = resume->next_epoch;
    sched.lr = resume->lr;
    sched.best = resume->best_fm;
    sched.since_improve = resume->since_improve;
  }

  std::ofstream log;
  if (!opts.out_dir.empty()) {
    fs::create_directories(opts.out_dir);
    // resumed runs append to an existing log; anything else starts one
    bool fresh = start_epoch == 0 || !fs::exists(fs::path(opts.out_dir) / "log.csv");
    log.open(fs::path(opts.out_dir) / "log.csv", fresh ? std::ios::trunc : std::ios::app);
    if (!log) fail(ErrCode::io, "train: cannot write log in " + opts.out_dir);
    if (fresh) log << "epoch,loss,dr,ra,fm,lr\n";
  }

  TrainResult res;
  res.best_fm = sched.best;
  std::vector<size_t> order(data.size());
  for (size_t i = 0; i < order.size(); ++i) order[i] = i;

  for (int epoch = start_epoch; epoch < opts.epochs; ++epoch) {
    shuffle_indices(order, opts.seed, epoch);
    double loss_sum = 0;
    int64_t pixel_batches = 0;
    for (size_t at = 0; at < order.size(); at += static_cast<size_t>(opts.batch_size)) {
      size_t bs = std::min(static_cast<size_t>(opts.batch_size), order.size() - at);
      std::vector<float> pixels(bs * static_cast<size_t>(page));
      std::vector<float> gt(bs * static_cast<size_t>(page));
      std::vector<uint8_t> mask(bs * static_cast<size_t>(page));
      for (size_t bi = 0; bi < bs; ++bi) {
        const Prepared& p = data[order[at + bi]];
        std::copy(p.pixels.begin(), p.pixels.end(), pixels.begin() + static_cast<ptrdiff_t>(bi * page));
        std::copy(p.gt_values.begin(), p.gt_values.end(), gt.begin() + static_cast<ptrdiff_t>(bi * page));
        std::copy(p.mask.begin(), p.mask.end(), mask.begin() + static_cast<ptrdiff_t>(bi * page));
      }
      auto x = Tensor<float>::from_data({static_cast<int>(bs), 1, cfg.input_h, cfg.input_w},
                                        std::move(pixels));
      auto pred = net.forward(x, /*train=*/true);
      bool empty = false;
      auto loss = loss_masked_l1(pred, gt, mask, &empty);
      double lv = static_cast<double>(loss.item());
      if (!std::isfinite(lv))
        fail(ErrCode::numeric, "train: non-finite loss at epoch " + std::to_string(epoch) +
                                   " batch " + std::to_string(at / opts.batch_size) +
                                   " (first sample " + std::to_string(order[at]) + ", seed " +
                                   std::to_string(opts.seed) + ")");
      if (!empty) {
        loss.backward();
        adam.lr = sched.lr;
        adam_step(net.params(), adam, ++adam_t);
      }
      loss_sum += lv;
      ++pixel_batches;
    }

    EvalReport rep = evaluate_model(net, val, opts.fg_threshold, opts.match_threshold);
    bool improved = sched.feed(rep.fm);

    EpochStats st;
    st.epoch = epoch;
    st.loss = pixel_batches ? loss_sum / static_cast<double>(pixel_batches) : 0.0;
    st.dr = rep.dr;
    st.ra = rep.ra;
    st.fm = rep.fm;
    st.lr = sched.lr;
    res.history.push_back(st);
    res.epochs_run = epoch + 1;
    if (log) {
      log << st.epoch << "," << st.loss << "," << st.dr << "," << st.ra << "," << st.fm << ","
          << st.lr << "\n";
      log.flush();
    }

    if (!opts.out_dir.empty()) {
      TrainState ts;
      ts.adam_t = adam_t;
      ts.next_epoch = epoch + 1;
      ts.lr = sched.lr;
      ts.best_fm = sched.best;
      ts.since_improve = sched.since_improve;
      res.last_checkpoint = (fs::path(opts.out_dir) / "checkpoint_last.lcnt").string();
      save_checkpoint(res.last_checkpoint, net, ts, /*include_optimizer=*/true);
      if (improved) {
        res.best_checkpoint = (fs::path(opts.out_dir) / "checkpoint_best.lcnt").string();
        save_checkpoint(res.best_checkpoint, net, ts, /*include_optimizer=*/true);
      }
    }
    res.best_fm = sched.best;

    if (cb && !cb(st)) break;
    if (opts.target_fm >= 0 && rep.fm >= opts.target_fm) break;
  }

  if (!opts.out_dir.empty() && res.last_checkpoint.empty()) {
    // zero-epoch run still persists the (untrained) model
    TrainState ts;
    ts.adam_t = adam_t;
    ts.next_epoch = start_epoch;
    ts.lr = sched.lr;
    ts.best_fm = sched.best;
    ts.since_improve = sched.since_improve;
    res.last_checkpoint = (fs::path(opts.out_dir) / "checkpoint_last.lcnt").string();
    save_checkpoint(res.last_checkpoint, net, ts, /*include_optimizer=*/true);
  }
  res.final_state = TrainState{adam_t, res.epochs_run > 0 ? res.epochs_run : start_epoch, sched.lr,
                               sched.best, sched.since_improve};
  return res;
}

}  // namespace lc
