// linecounter CLI: synth | train | infer | eval | ablate. Talks to the core
// exclusively through the C API in linecounter.h; every run writes its
// resolved configuration next to its outputs so results are replayable.
#include <linecounter.h>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

const char* code_name(int rc) {
  switch (rc) {
    case LC_OK: return "OK";
    case LC_EINVAL: return "EINVAL";
    case LC_ESHAPE: return "ESHAPE";
    case LC_EIO: return "EIO";
    case LC_EFORMAT: return "EFORMAT";
    case LC_ENUMERIC: return "ENUMERIC";
    case LC_ESTATE: return "ESTATE";
  }
  return "EUNKNOWN";
}

struct CliError {
  int rc;
  std::string message;
};

void check(int rc) {
  if (rc != LC_OK) throw CliError{rc, lc_last_error()};
}

void write_text(const std::string& path, const std::string& text) {
  std::ofstream os(path);
  if (!os) throw CliError{LC_EIO, "cannot write " + path};
  os << text;
}

void write_run_config(const std::string& out_dir, const std::string& command, const json& resolved) {
  json j;
  j["command"] = command;
  j["resolved"] = resolved;
  fs::create_directories(out_dir);
  write_text((fs::path(out_dir) / "run_config.json").string(), j.dump(2) + "\n");
}

// --input-size HxW
void parse_size(const std::string& s, int& h, int& w) {
  auto x = s.find('x');
  if (x == std::string::npos) throw CliError{LC_EINVAL, "expected HxW, got " + s};
  h = std::stoi(s.substr(0, x));
  w = std::stoi(s.substr(x + 1));
}

struct ModelFlags {
  std::string input_size;
  std::string encoder_channels;
  std::string counter_order;
  std::string counter_bidi;  // e.g. "true,true"
  std::string monotone_placement;
  std::string monotone_act;
  int counter_hidden = 0;

  void add_to(CLI::App* cmd) {
    cmd->add_option("--input-size", input_size, "network input as HxW (default 192x128)");
    cmd->add_option("--encoder-channels", encoder_channels, "comma-separated stage widths (default 16,32,64)");
    cmd->add_option("--counter-order", counter_order, "horizontal_first|vertical_first");
    cmd->add_option("--counter-bidi", counter_bidi, "bidirectional flags for the two GRUs, e.g. true,true");
    cmd->add_option("--monotone-placement", monotone_placement, "before_decoder|after_decoder|none");
    cmd->add_option("--monotone-act", monotone_act, "relu|abs_tanh|sigmoid|hard_sigmoid");
    cmd->add_option("--counter-hidden", counter_hidden, "GRU hidden channels (default 64)");
  }

  json to_config() const {
    json cfg = json::object();
    if (!input_size.empty()) {
      int h, w;
      parse_size(input_size, h, w);
      cfg["input_size"] = {h, w};
    }
    if (!encoder_channels.empty()) {
      std::vector<int> ch;
      std::stringstream ss(encoder_channels);
      std::string tok;
      while (std::getline(ss, tok, ',')) ch.push_back(std::stoi(tok));
      cfg["encoder_channels"] = ch;
    }
    if (!counter_order.empty()) cfg["counter_order"] = counter_order;
    if (!counter_bidi.empty()) {
      auto comma = counter_bidi.find(',');
      if (comma == std::string::npos) throw CliError{LC_EINVAL, "--counter-bidi expects two flags"};
      auto flag = [](const std::string& s) {
        if (s == "true" || s == "1") return true;
        if (s == "false" || s == "0") return false;
        throw CliError{LC_EINVAL, "bad boolean: " + s};
      };
      cfg["counter_bidirectional"] = {flag(counter_bidi.substr(0, comma)),
                                      flag(counter_bidi.substr(comma + 1))};
    }
    if (!monotone_placement.empty()) cfg["monotone_placement"] = monotone_placement;
    if (!monotone_act.empty()) cfg["monotone_preactivation"] = monotone_act;
    if (counter_hidden > 0) cfg["counter_hidden"] = counter_hidden;
    return cfg;
  }
};

struct OwnedString {
  char* p = nullptr;
  ~OwnedString() { lc_string_free(p); }
  std::string str() const { return p ? p : ""; }
};

int print_epoch(const lc_epoch_stats* st, void*) {
  std::printf("epoch %3d  loss %.5f  DR %.3f RA %.3f FM %.3f  lr %g\n", st->epoch, st->loss,
              st->dr, st->ra, st->fm, st->lr);
  std::fflush(stdout);
  return 0;
}

json train_options_json(int epochs, int batch_size, double lr, int patience, uint64_t seed,
                        double fg_threshold, double match_threshold, double target_fm, bool resume) {
  json j;
  j["epochs"] = epochs;
  j["batch_size"] = batch_size;
  j["lr"] = lr;
  j["patience"] = patience;
  j["seed"] = seed;
  j["fg_threshold"] = fg_threshold;
  j["match_threshold"] = match_threshold;
  if (target_fm >= 0) j["target_fm"] = target_fm;
  if (resume) j["resume"] = true;
  return j;
}

struct AblateRow {
  std::string name;
  json config;
};

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"LineCounter: text-line segmentation by per-pixel line counting"};
  app.require_subcommand(1);

  if (const char* th = std::getenv("LINECOUNTER_THREADS")) {
    int n = std::atoi(th);
    if (n > 0) lc_set_threads(n);
  }

  // ---- synth ----
  auto* synth = app.add_subcommand("synth", "generate a synthetic page dataset");
  std::string synth_out = "dataset";
  int synth_count = 100;
  uint64_t synth_seed = 1;
  std::string page_size, lines_range, glyph_range, gap_range;
  double skew = 1.5, curve = 1.5;
  std::string aug_kind;
  double aug_mag = 0.04;
  synth->add_option("--out", synth_out, "output directory")->required();
  synth->add_option("--count", synth_count, "number of pages");
  synth->add_option("--seed", synth_seed, "RNG seed");
  synth->add_option("--page-size", page_size, "page extent HxW (default 192x128)");
  synth->add_option("--lines", lines_range, "line count range MIN..MAX (default 3..8)");
  synth->add_option("--glyph", glyph_range, "glyph height range MIN..MAX");
  synth->add_option("--gap", gap_range, "inter-line gap range MIN..MAX (<=0 touches)");
  synth->add_option("--skew", skew, "max per-line skew in degrees");
  synth->add_option("--curve", curve, "max sine baseline amplitude in pixels");
  synth->add_option("--augment", aug_kind, "apply a warp to each page: perspective|tps");
  synth->add_option("--augment-magnitude", aug_mag, "warp magnitude as a fraction of min extent");

  // ---- train ----
  auto* train = app.add_subcommand("train", "train a model on a manifest");
  std::string train_manifest, val_manifest, train_out = "run", resume_ckpt;
  int epochs = 100, batch_size = 4, patience = 20;
  double lr = 1e-4, fg_threshold = 0.5, match_threshold = 0.9, target_fm = -1;
  uint64_t train_seed = 1;
  ModelFlags mf;
  train->add_option("--manifest", train_manifest, "training manifest")->required();
  train->add_option("--val-manifest", val_manifest, "validation manifest (drives the lr schedule)");
  train->add_option("--out", train_out, "output directory");
  train->add_option("--epochs", epochs, "epoch budget");
  train->add_option("--batch-size", batch_size, "batch size (default 4)");
  train->add_option("--lr", lr, "initial learning rate (default 1e-4)");
  train->add_option("--patience", patience, "epochs without FM improvement before halving lr");
  train->add_option("--seed", train_seed, "RNG seed");
  train->add_option("--fg-threshold", fg_threshold, "foreground intensity threshold");
  train->add_option("--match-threshold", match_threshold, "one-to-one match threshold (default 0.9)");
  train->add_option("--target-fm", target_fm, "stop early once validation FM reaches this");
  train->add_option("--resume", resume_ckpt, "checkpoint_last.lcnt to resume from");
  mf.add_to(train);

  // ---- infer ----
  auto* infer = app.add_subcommand("infer", "predict line maps for page images");
  std::string infer_ckpt, infer_out = "pred";
  std::vector<std::string> infer_images;
  double infer_fg = 0.5;
  bool viz = false;
  infer->add_option("--checkpoint", infer_ckpt, "model checkpoint")->required();
  infer->add_option("--out", infer_out, "output directory");
  infer->add_option("images", infer_images, "input 8-bit PGM pages")->required();
  infer->add_option("--fg-threshold", infer_fg, "foreground intensity threshold");
  infer->add_flag("--viz", viz, "also write color-coded PPM visualizations");

  // ---- eval ----
  auto* eval = app.add_subcommand("eval", "DR/RA/FM of detections against ground truth");
  std::string gt_manifest, det_manifest, eval_out;
  double eval_threshold = 0.9;
  eval->add_option("--manifest", gt_manifest, "ground-truth manifest")->required();
  eval->add_option("--det", det_manifest, "detection manifest (e.g. written by infer)")->required();
  eval->add_option("--match-threshold", eval_threshold, "one-to-one match threshold (default 0.9)");
  eval->add_option("--out", eval_out, "directory for report.json (default: print only)");

  // ---- ablate ----
  auto* ablate = app.add_subcommand("ablate", "train a grid of configurations and tabulate FM");
  std::string ab_manifest, ab_val, ab_out = "ablation", ab_grid = "monotone";
  int ab_epochs = 10;
  uint64_t ab_seed = 1;
  ModelFlags ab_mf;
  int ab_batch = 4;
  double ab_lr = 1e-4;
  ablate->add_option("--manifest", ab_manifest, "training manifest")->required();
  ablate->add_option("--val-manifest", ab_val, "evaluation manifest for the table")->required();
  ablate->add_option("--out", ab_out, "output directory");
  ablate->add_option("--grid", ab_grid, "topology|monotone");
  ablate->add_option("--epochs", ab_epochs, "identical epoch budget per configuration");
  ablate->add_option("--seed", ab_seed, "identical seed per configuration");
  ablate->add_option("--batch-size", ab_batch, "batch size");
  ablate->add_option("--lr", ab_lr, "learning rate");
  ab_mf.add_to(ablate);

  CLI11_PARSE(app, argc, argv);

  try {
    if (*synth) {
      json spec = json::object();
      if (!page_size.empty()) {
        int h, w;
        parse_size(page_size, h, w);
        spec["page_h"] = h;
        spec["page_w"] = w;
      }
      auto parse_range = [](const std::string& s, const char* what) {
        auto dots = s.find("..");
        if (dots == std::string::npos) throw CliError{LC_EINVAL, std::string(what) + ": expected MIN..MAX, got " + s};
        return std::pair<int, int>{std::stoi(s.substr(0, dots)), std::stoi(s.substr(dots + 2))};
      };
      if (!lines_range.empty()) {
        auto [a, b] = parse_range(lines_range, "--lines");
        spec["lines_min"] = a;
        spec["lines_max"] = b;
      }
      if (!glyph_range.empty()) {
        auto [a, b] = parse_range(glyph_range, "--glyph");
        spec["glyph_h_min"] = a;
        spec["glyph_h_max"] = b;
      }
      if (!gap_range.empty()) {
        auto [a, b] = parse_range(gap_range, "--gap");
        spec["gap_min"] = a;
        spec["gap_max"] = b;
      }
      spec["skew_deg"] = skew;
      spec["curve_amp"] = curve;
      if (!aug_kind.empty()) {
        spec["augment"] = aug_kind;
        spec["augment_magnitude"] = aug_mag;
      }

      OwnedString manifest;
      check(lc_synth_dataset(spec.dump().c_str(), synth_count, synth_seed, synth_out.c_str(), &manifest.p));
      json resolved{{"spec", spec}, {"count", synth_count}, {"seed", synth_seed}, {"out", synth_out}};
      write_run_config(synth_out, "synth", resolved);
      std::printf("wrote %d pages, manifest %s\n", synth_count, manifest.str().c_str());
      return 0;
    }

    if (*train) {
      json cfg = mf.to_config();
      lc_model* model = nullptr;
      bool resume = !resume_ckpt.empty();
      if (resume) {
        check(lc_model_open(resume_ckpt.c_str(), &model));
      } else {
        check(lc_model_build(cfg.dump().c_str(), train_seed, &model));
      }
      json opts = train_options_json(epochs, batch_size, lr, patience, train_seed, fg_threshold,
                                     match_threshold, target_fm, resume);
      OwnedString resolved_cfg;
      check(lc_model_config(model, &resolved_cfg.p));
      write_run_config(train_out, "train",
                       json{{"model", json::parse(resolved_cfg.str())},
                            {"options", opts},
                            {"train_manifest", train_manifest},
                            {"val_manifest", val_manifest},
                            {"resume", resume_ckpt}});
      lc_train_summary summary{};
      int rc = lc_train(model, train_manifest.c_str(), val_manifest.empty() ? nullptr : val_manifest.c_str(),
                        opts.dump().c_str(), train_out.c_str(), print_epoch, nullptr, &summary);
      lc_model_close(model);
      check(rc);
      std::printf("best FM %.3f after %d epochs; artifacts in %s\n", summary.best_fm,
                  summary.epochs_run, train_out.c_str());
      return 0;
    }

    if (*infer) {
      lc_model* model = nullptr;
      check(lc_model_open(infer_ckpt.c_str(), &model));
      fs::create_directories(infer_out);
      json det = json::array();
      for (const auto& img : infer_images) {
        std::string stem = fs::path(img).stem().string();
        std::string out_map = (fs::path(infer_out) / (stem + "_linemap.pgm")).string();
        std::string out_viz = (fs::path(infer_out) / (stem + "_viz.ppm")).string();
        int rc = lc_infer_file(model, img.c_str(), out_map.c_str(), viz ? out_viz.c_str() : nullptr,
                               static_cast<float>(infer_fg));
        if (rc != LC_OK) {
          lc_model_close(model);
          check(rc);
        }
        det.push_back({{"image_path", fs::absolute(img).string()},
                       {"linemap_path", fs::absolute(out_map).string()}});
        std::printf("%s -> %s\n", img.c_str(), out_map.c_str());
      }
      lc_model_close(model);
      write_text((fs::path(infer_out) / "det_manifest.json").string(), det.dump(2) + "\n");
      write_run_config(infer_out, "infer",
                       json{{"checkpoint", infer_ckpt}, {"fg_threshold", infer_fg},
                            {"images", infer_images}, {"viz", viz}});
      return 0;
    }

    if (*eval) {
      OwnedString report, table;
      check(lc_evaluate(gt_manifest.c_str(), det_manifest.c_str(), eval_threshold, &report.p, &table.p));
      std::printf("%s", table.str().c_str());
      if (!eval_out.empty()) {
        fs::create_directories(eval_out);
        write_text((fs::path(eval_out) / "report.json").string(), report.str() + "\n");
        write_run_config(eval_out, "eval",
                         json{{"gt", gt_manifest}, {"det", det_manifest}, {"match_threshold", eval_threshold}});
      }
      return 0;
    }

    if (*ablate) {
      std::vector<AblateRow> rows;
      json base = ab_mf.to_config();
      if (ab_grid == "topology") {
        // the 8 counter topologies: order x (first uni/bi) x (second uni/bi),
        // all with plain BatchNorm+ReLU counter convs
        for (std::string order : {"vertical_first", "horizontal_first"})
          for (bool bidi1 : {false, true})
            for (bool bidi2 : {false, true}) {
              json cfg = base;
              cfg["counter_order"] = order;
              cfg["counter_bidirectional"] = {bidi1, bidi2};
              cfg["monotone_placement"] = "none";
              std::string name = (order == "horizontal_first" ? "H" : "V");
              name += bidi1 ? "bi" : "uni";
              name += order == "horizontal_first" ? "_V" : "_H";
              name += bidi2 ? "bi" : "uni";
              rows.push_back({name, cfg});
            }
      } else if (ab_grid == "monotone") {
        json cfg = base;
        cfg["monotone_placement"] = "none";
        rows.push_back({"baseline", cfg});
        for (std::string act : {"relu", "abs_tanh", "sigmoid", "hard_sigmoid"})
          for (std::string place : {"after_decoder", "before_decoder"}) {
            json c2 = base;
            c2["monotone_placement"] = place;
            c2["monotone_preactivation"] = act;
            rows.push_back({act + "+cumsum/" + place, c2});
          }
      } else {
        throw CliError{LC_EINVAL, "--grid must be topology or monotone"};
      }

      fs::create_directories(ab_out);
      write_run_config(ab_out, "ablate",
                       json{{"grid", ab_grid}, {"epochs", ab_epochs}, {"seed", ab_seed},
                            {"manifest", ab_manifest}, {"val_manifest", ab_val}, {"base", base}});
      json opts = train_options_json(ab_epochs, ab_batch, ab_lr, /*patience=*/1000000, ab_seed,
                                     0.5, 0.9, -1, false);
      json table = json::array();
      std::printf("%-28s %8s %8s\n", "configuration", "best FM", "status");
      for (const auto& row : rows) {
        std::string sub = (fs::path(ab_out) / row.name).string();
        lc_model* model = nullptr;
        lc_train_summary summary{};
        int rc = lc_model_build(row.config.dump().c_str(), ab_seed, &model);
        if (rc == LC_OK)
          rc = lc_train(model, ab_manifest.c_str(), ab_val.c_str(), opts.dump().c_str(), sub.c_str(),
                        nullptr, nullptr, &summary);
        if (model) lc_model_close(model);
        json jrow{{"name", row.name}, {"config", row.config}};
        if (rc == LC_OK) {
          jrow["fm"] = summary.best_fm;
          std::printf("%-28s %8.3f %8s\n", row.name.c_str(), summary.best_fm, "ok");
        } else {
          // one broken cell must not sink the grid
          jrow["error"] = std::string(code_name(rc)) + ": " + lc_last_error();
          std::printf("%-28s %8s %8s\n", row.name.c_str(), "-", code_name(rc));
        }
        table.push_back(jrow);
        write_text((fs::path(ab_out) / "table.json").string(), table.dump(2) + "\n");
      }
      return 0;
    }
  } catch (const CliError& e) {
    json err{{"error", {{"code", code_name(e.rc)}, {"message", e.message}}}};
    std::fprintf(stderr, "%s\n", err.dump().c_str());
    return e.rc == LC_OK ? 1 : e.rc;
  } catch (const std::exception& e) {
    json err{{"error", {{"code", "EUNKNOWN"}, {"message", e.what()}}}};
    std::fprintf(stderr, "%s\n", err.dump().c_str());
    return 1;
  }
  return 0;
}
