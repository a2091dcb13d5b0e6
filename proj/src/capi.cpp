#include "linecounter.h"

#include <cstdio>
#include <cstring>
#include <filesystem>
#include <optional>

#include "core/checkpoint.hpp"
#include "core/trainer.hpp"
#include "json.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

struct lc_model {
  lc::LineCounterNet<float> net;
  std::optional<lc::TrainState> state;
};

namespace {

thread_local std::string g_last_error;

int code_of(lc::ErrCode c) {
  switch (c) {
    case lc::ErrCode::invalid_argument: return LC_EINVAL;
    case lc::ErrCode::shape_mismatch: return LC_ESHAPE;
    case lc::ErrCode::io: return LC_EIO;
    case lc::ErrCode::format: return LC_EFORMAT;
    case lc::ErrCode::numeric: return LC_ENUMERIC;
    case lc::ErrCode::state: return LC_ESTATE;
  }
  return LC_EINVAL;
}

template <typename F>
int guarded(F&& f) {
  try {
    f();
    g_last_error.clear();
    return LC_OK;
  } catch (const lc::Error& e) {
    g_last_error = e.what();
    return code_of(e.code());
  } catch (const std::exception& e) {
    g_last_error = e.what();
    return LC_EINVAL;
  }
}

char* dup_string(const std::string& s) {
  char* out = static_cast<char*>(std::malloc(s.size() + 1));
  std::memcpy(out, s.c_str(), s.size() + 1);
  return out;
}

void require(bool ok, const char* what) {
  if (!ok) lc::fail(lc::ErrCode::invalid_argument, what);
}

std::vector<lc::LineMap> load_linemaps(const std::string& manifest_path) {
  auto entries = lc::read_manifest(manifest_path);
  fs::path base = fs::path(manifest_path).parent_path();
  std::vector<lc::LineMap> maps;
  maps.reserve(entries.size());
  for (const auto& e : entries) {
    fs::path p(e.linemap_path);
    maps.push_back(lc::read_pgm16(p.is_absolute() ? p.string() : (base / p).string()));
  }
  return maps;
}

}  // namespace

extern "C" {

const char* lc_version(void) { return "1.0.0"; }

const char* lc_last_error(void) { return g_last_error.c_str(); }

int lc_set_threads(int n) {
  return guarded([&] {
    require(n >= 1, "lc_set_threads: n must be >= 1");
    lc::set_blas_threads(n);
  });
}

int lc_model_build(const char* config_json, uint64_t seed, lc_model** out) {
  return guarded([&] {
    require(out != nullptr, "lc_model_build: out is NULL");
    lc::ModelConfig cfg =
        config_json && *config_json ? lc::ModelConfig::from_json(config_json) : lc::ModelConfig{};
    *out = new lc_model{lc::LineCounterNet<float>(cfg, seed), std::nullopt};
  });
}

int lc_model_open(const char* checkpoint_path, lc_model** out) {
  return guarded([&] {
    require(checkpoint_path && out, "lc_model_open: NULL argument");
    std::optional<lc::TrainState> st;
    auto net = lc::load_checkpoint(checkpoint_path, &st);
    *out = new lc_model{std::move(net), st};
  });
}

int lc_model_save(lc_model* m, const char* checkpoint_path) {
  return guarded([&] {
    require(m && checkpoint_path, "lc_model_save: NULL argument");
    lc::save_checkpoint(checkpoint_path, m->net, m->state, m->state.has_value());
  });
}

void lc_model_close(lc_model* m) { delete m; }

int lc_model_config(lc_model* m, char** json_out) {
  return guarded([&] {
    require(m && json_out, "lc_model_config: NULL argument");
    *json_out = dup_string(m->net.config().to_json());
  });
}

int lc_model_param_count(lc_model* m, uint64_t* count_out) {
  return guarded([&] {
    require(m && count_out, "lc_model_param_count: NULL argument");
    *count_out = static_cast<uint64_t>(m->net.param_count());
  });
}

int lc_synth_dataset(const char* spec_json, int count, uint64_t seed, const char* out_dir,
                     char** manifest_path_out) {
  return guarded([&] {
    require(out_dir != nullptr, "lc_synth_dataset: out_dir is NULL");
    require(count >= 0, "lc_synth_dataset: count must be >= 0");
    lc::SynthSpec spec =
        spec_json && *spec_json ? lc::SynthSpec::from_json(spec_json) : lc::SynthSpec{};
    spec.validate();
    // optional per-page warp, keyed in the same spec JSON
    std::string aug_kind;
    double aug_mag = 0.04;
    if (spec_json && *spec_json) {
      json j = json::parse(spec_json);
      aug_kind = j.value("augment", std::string());
      aug_mag = j.value("augment_magnitude", aug_mag);
      if (!aug_kind.empty() && aug_kind != "perspective" && aug_kind != "tps")
        lc::fail(lc::ErrCode::invalid_argument, "lc_synth_dataset: augment must be perspective or tps");
    }
    std::error_code ec;
    fs::create_directories(out_dir, ec);
    if (!fs::is_directory(out_dir))
      lc::fail(lc::ErrCode::io, std::string("lc_synth_dataset: cannot create ") + out_dir);
    std::vector<lc::ManifestEntry> entries;
    char name[64];
    for (int i = 0; i < count; ++i) {
      auto [img, map] = lc::synth_page(spec, seed + static_cast<uint64_t>(i));
      if (!aug_kind.empty()) {
        auto kind = aug_kind == "perspective" ? lc::WarpKind::perspective : lc::WarpKind::thin_plate_spline;
        std::tie(img, map) = lc::augment(img, map, kind, aug_mag, seed ^ (0xa0a0a0a0ull + i));
      }
      std::snprintf(name, sizeof(name), "img_%05d.pgm", i);
      std::string img_name = name;
      std::snprintf(name, sizeof(name), "map_%05d.pgm", i);
      std::string map_name = name;
      lc::write_pgm8((fs::path(out_dir) / img_name).string(), img);
      lc::write_pgm16((fs::path(out_dir) / map_name).string(), map);
      entries.push_back({img_name, map_name});
    }
    std::string manifest = (fs::path(out_dir) / "manifest.json").string();
    lc::write_manifest(manifest, entries);
    if (manifest_path_out) *manifest_path_out = dup_string(manifest);
  });
}

int lc_train(lc_model* m, const char* train_manifest, const char* val_manifest,
             const char* options_json, const char* out_dir, lc_epoch_callback cb, void* user,
             lc_train_summary* summary_out) {
  return guarded([&] {
    require(m && train_manifest, "lc_train: NULL argument");
    lc::TrainOptions opts;
    bool resume = false;
    if (options_json && *options_json) {
      json j;
      try {
        j = json::parse(options_json);
      } catch (const std::exception& e) {
        lc::fail(lc::ErrCode::format, std::string("lc_train options: ") + e.what());
      }
      opts.epochs = j.value("epochs", opts.epochs);
      opts.batch_size = j.value("batch_size", opts.batch_size);
      opts.lr = j.value("lr", opts.lr);
      opts.patience = j.value("patience", opts.patience);
      opts.seed = j.value("seed", opts.seed);
      opts.fg_threshold = j.value("fg_threshold", opts.fg_threshold);
      opts.match_threshold = j.value("match_threshold", opts.match_threshold);
      opts.target_fm = j.value("target_fm", opts.target_fm);
      resume = j.value("resume", false);
    }
    if (out_dir) opts.out_dir = out_dir;
    if (resume && !m->state)
      lc::fail(lc::ErrCode::state, "lc_train: resume requested but the checkpoint has no train state");

    auto train_set = lc::load_dataset(train_manifest);
    std::vector<lc::Sample> val_set;
    if (val_manifest && *val_manifest) val_set = lc::load_dataset(val_manifest);

    lc::EpochCallback callback;
    if (cb) {
      callback = [cb, user](const lc::EpochStats& st) {
        lc_epoch_stats s{st.epoch, st.loss, st.dr, st.ra, st.fm, st.lr};
        return cb(&s, user) == 0;
      };
    }
    auto res = lc::train_model(m->net, train_set, val_set, opts,
                               resume ? &m->state.value() : nullptr, callback);
    m->state = res.final_state;  // keeps the handle resumable from where training stopped
    if (summary_out) {
      summary_out->best_fm = res.best_fm;
      summary_out->epochs_run = res.epochs_run;
    }
  });
}

int lc_infer_file(lc_model* m, const char* image_pgm, const char* out_linemap_pgm,
                  const char* out_viz_ppm, float fg_threshold) {
  return guarded([&] {
    require(m && image_pgm && out_linemap_pgm, "lc_infer_file: NULL argument");
    auto img = lc::read_pgm8(image_pgm);
    lc::LineMap map = lc::predict_line_map(m->net, img, fg_threshold);
    lc::write_pgm16(out_linemap_pgm, map);
    if (out_viz_ppm) lc::write_label_ppm(out_viz_ppm, map);
  });
}

int lc_infer_buffer(lc_model* m, const float* image, int width, int height, float fg_threshold,
                    int32_t* labels_out) {
  return guarded([&] {
    require(m && image && labels_out, "lc_infer_buffer: NULL argument");
    require(width > 0 && height > 0, "lc_infer_buffer: bad extent");
    lc::DocumentImage img;
    img.width = width;
    img.height = height;
    img.pixels.assign(image, image + static_cast<size_t>(width) * height);
    lc::LineMap map = lc::predict_line_map(m->net, img, fg_threshold);
    std::copy(map.labels.begin(), map.labels.end(), labels_out);
  });
}

int lc_evaluate(const char* gt_manifest, const char* det_manifest, double match_threshold,
                char** report_json_out, char** table_out) {
  return guarded([&] {
    require(gt_manifest && det_manifest, "lc_evaluate: NULL argument");
    auto gt = load_linemaps(gt_manifest);
    auto det = load_linemaps(det_manifest);
    if (gt.empty()) lc::fail(lc::ErrCode::invalid_argument,
                             std::string("lc_evaluate: empty corpus in manifest ") + gt_manifest);
    if (gt.size() != det.size())
      lc::fail(lc::ErrCode::invalid_argument,
               "lc_evaluate: gt has " + std::to_string(gt.size()) + " pages but det has " +
                   std::to_string(det.size()));
    lc::EvalReport rep;
    for (size_t i = 0; i < gt.size(); ++i) {
      lc::PageEval ev = lc::one_to_one(gt[i], det[i], match_threshold);
      rep.total_n += ev.n;
      rep.total_m += ev.m;
      rep.total_o2o += ev.o2o;
      rep.pages.push_back(std::move(ev));
    }
    rep.dr = rep.total_n ? static_cast<double>(rep.total_o2o) / static_cast<double>(rep.total_n) : 0.0;
    rep.ra = rep.total_m ? static_cast<double>(rep.total_o2o) / static_cast<double>(rep.total_m) : 0.0;
    rep.fm = lc::f_measure(rep.dr, rep.ra);
    if (report_json_out) *report_json_out = dup_string(rep.to_json());
    if (table_out) *table_out = dup_string(rep.to_table());
  });
}

void lc_string_free(char* s) { std::free(s); }

}  // extern "C"
