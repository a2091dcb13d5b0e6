#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <linecounter.h>

#include <filesystem>
#include <fstream>
#include <string>

#include "json.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

fs::path tmp_dir(const char* leaf) {
  auto p = fs::temp_directory_path() / leaf;
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

std::string slurp(const fs::path& p) {
  std::ifstream is(p, std::ios::binary);
  REQUIRE(is.good());
  return std::string((std::istreambuf_iterator<char>(is)), {});
}

const char* kTinyConfig =
    R"({"encoder_channels":[4,8],"counter_hidden":8,"input_size":[64,64]})";
const char* kTinySpec =
    R"({"page_h":64,"page_w":64,"lines_min":2,"lines_max":4,"glyph_h_min":6,"glyph_h_max":10})";

}  // namespace

TEST_CASE("version and error text") {
  CHECK(std::string(lc_version()) == "1.0.0");
  lc_model* m = nullptr;
  CHECK(lc_model_build("{not json", 1, &m) == LC_EFORMAT);
  CHECK(std::string(lc_last_error()).find("json") != std::string::npos);
  CHECK(m == nullptr);
}

TEST_CASE("bad config values are EINVAL") {
  lc_model* m = nullptr;
  CHECK(lc_model_build(R"({"input_size":[100,100]})", 1, &m) == LC_EINVAL);
  CHECK(lc_model_build(R"({"counter_order":"sideways"})", 1, &m) == LC_EINVAL);
}

TEST_CASE("default build exposes config and the pinned parameter count") {
  lc_model* m = nullptr;
  REQUIRE(lc_model_build("{}", 7, &m) == LC_OK);
  uint64_t n = 0;
  CHECK(lc_model_param_count(m, &n) == LC_OK);
  CHECK(n == 379411);
  char* cfg = nullptr;
  REQUIRE(lc_model_config(m, &cfg) == LC_OK);
  json j = json::parse(cfg);
  CHECK(j["counter_order"] == "horizontal_first");
  CHECK(j["monotone_placement"] == "before_decoder");
  CHECK(j["input_size"][0] == 192);
  lc_string_free(cfg);
  lc_model_close(m);
}

TEST_CASE("checkpoint round trip through the C API is byte-exact") {
  auto dir = tmp_dir("lc_capi_ckpt");
  lc_model* m = nullptr;
  REQUIRE(lc_model_build(kTinyConfig, 3, &m) == LC_OK);
  auto p1 = (dir / "a.lcnt").string();
  REQUIRE(lc_model_save(m, p1.c_str()) == LC_OK);
  lc_model_close(m);

  lc_model* m2 = nullptr;
  REQUIRE(lc_model_open(p1.c_str(), &m2) == LC_OK);
  auto p2 = (dir / "b.lcnt").string();
  REQUIRE(lc_model_save(m2, p2.c_str()) == LC_OK);
  lc_model_close(m2);
  CHECK(slurp(p1) == slurp(p2));

  lc_model* m3 = nullptr;
  CHECK(lc_model_open((dir / "missing.lcnt").string().c_str(), &m3) == LC_EIO);
}

TEST_CASE("synthetic dataset generation is deterministic; count 0 is valid") {
  auto dir = tmp_dir("lc_capi_synth");
  char* manifest = nullptr;
  REQUIRE(lc_synth_dataset(kTinySpec, 3, 11, (dir / "d1").string().c_str(), &manifest) == LC_OK);
  std::string m1 = manifest;
  lc_string_free(manifest);
  REQUIRE(lc_synth_dataset(kTinySpec, 3, 11, (dir / "d2").string().c_str(), &manifest) == LC_OK);
  std::string m2 = manifest;
  lc_string_free(manifest);
  CHECK(slurp(m1) == slurp(m2));
  CHECK(slurp(fs::path(m1).parent_path() / "img_00000.pgm") ==
        slurp(fs::path(m2).parent_path() / "img_00000.pgm"));

  REQUIRE(lc_synth_dataset(kTinySpec, 0, 11, (dir / "d0").string().c_str(), &manifest) == LC_OK);
  json j = json::parse(slurp(manifest));
  lc_string_free(manifest);
  CHECK(j.is_array());
  CHECK(j.empty());
}

TEST_CASE("train writes log, checkpoints and reports epochs through the callback") {
  auto dir = tmp_dir("lc_capi_train");
  char* manifest = nullptr;
  REQUIRE(lc_synth_dataset(kTinySpec, 4, 21, (dir / "data").string().c_str(), &manifest) == LC_OK);
  std::string mpath = manifest;
  lc_string_free(manifest);

  lc_model* m = nullptr;
  REQUIRE(lc_model_build(kTinyConfig, 5, &m) == LC_OK);
  int epochs_seen = 0;
  auto cb = [](const lc_epoch_stats* st, void* user) {
    CHECK(st->epoch == *static_cast<int*>(user));
    ++*static_cast<int*>(user);
    return 0;
  };
  lc_train_summary summary{};
  std::string run = (dir / "run").string();
  REQUIRE(lc_train(m, mpath.c_str(), mpath.c_str(), R"({"epochs":2,"batch_size":2})", run.c_str(),
                   cb, &epochs_seen, &summary) == LC_OK);
  lc_model_close(m);
  CHECK(epochs_seen == 2);
  CHECK(summary.epochs_run == 2);
  CHECK(summary.best_fm >= 0.0);

  std::string log = slurp(fs::path(run) / "log.csv");
  CHECK(log.substr(0, 23) == "epoch,loss,dr,ra,fm,lr\n");
  CHECK(fs::exists(fs::path(run) / "checkpoint_last.lcnt"));
  CHECK(fs::exists(fs::path(run) / "checkpoint_best.lcnt"));
}

TEST_CASE("zero-epoch training still persists an openable checkpoint") {
  auto dir = tmp_dir("lc_capi_train0");
  char* manifest = nullptr;
  REQUIRE(lc_synth_dataset(kTinySpec, 2, 31, (dir / "data").string().c_str(), &manifest) == LC_OK);
  std::string mpath = manifest;
  lc_string_free(manifest);

  lc_model* m = nullptr;
  REQUIRE(lc_model_build(kTinyConfig, 6, &m) == LC_OK);
  std::string run = (dir / "run").string();
  REQUIRE(lc_train(m, mpath.c_str(), nullptr, R"({"epochs":0})", run.c_str(), nullptr, nullptr,
                   nullptr) == LC_OK);
  lc_model_close(m);
  lc_model* m2 = nullptr;
  CHECK(lc_model_open((fs::path(run) / "checkpoint_last.lcnt").string().c_str(), &m2) == LC_OK);
  lc_model_close(m2);
}

TEST_CASE("inference on a blank page yields an all-zero 16-bit map") {
  auto dir = tmp_dir("lc_capi_infer");
  // blank 40x50 PGM
  std::ofstream os(dir / "blank.pgm", std::ios::binary);
  os << "P5\n40 50\n255\n";
  for (int i = 0; i < 2000; ++i) os.put(static_cast<char>(255));
  os.close();

  lc_model* m = nullptr;
  REQUIRE(lc_model_build(kTinyConfig, 8, &m) == LC_OK);
  auto out = (dir / "blank_map.pgm").string();
  auto viz = (dir / "blank_viz.ppm").string();
  REQUIRE(lc_infer_file(m, (dir / "blank.pgm").string().c_str(), out.c_str(), viz.c_str(), 0.5f) ==
          LC_OK);
  lc_model_close(m);

  std::string map = slurp(out);
  CHECK(map.substr(0, 15) == "P5\n40 50\n65535\n");
  for (size_t i = 15; i < map.size(); ++i) CHECK(map[i] == '\0');
  CHECK(fs::exists(viz));

  // buffer-based inference agrees
  lc_model* m2 = nullptr;
  REQUIRE(lc_model_build(kTinyConfig, 8, &m2) == LC_OK);
  std::vector<float> img(40 * 50, 1.f);
  std::vector<int32_t> labels(40 * 50, -1);
  REQUIRE(lc_infer_buffer(m2, img.data(), 40, 50, 0.5f, labels.data()) == LC_OK);
  lc_model_close(m2);
  for (int32_t v : labels) CHECK(v == 0);
}

TEST_CASE("evaluation of a dataset against itself is perfect") {
  auto dir = tmp_dir("lc_capi_eval");
  char* manifest = nullptr;
  REQUIRE(lc_synth_dataset(kTinySpec, 3, 41, (dir / "data").string().c_str(), &manifest) == LC_OK);
  std::string mpath = manifest;
  lc_string_free(manifest);

  char* report = nullptr;
  char* table = nullptr;
  REQUIRE(lc_evaluate(mpath.c_str(), mpath.c_str(), 0.9, &report, &table) == LC_OK);
  json j = json::parse(report);
  CHECK(j["corpus"]["fm"] == 1.0);
  CHECK(std::string(table).find("corpus") != std::string::npos);
  lc_string_free(report);
  lc_string_free(table);

  // pairing mismatch is an error
  auto short_manifest = (dir / "short.json").string();
  std::ofstream os(short_manifest);
  os << R"([{"image_path":")" << (dir / "data" / "img_00000.pgm").string()
     << R"(","linemap_path":")" << (dir / "data" / "map_00000.pgm").string() << R"("}])";
  os.close();
  CHECK(lc_evaluate(mpath.c_str(), short_manifest.c_str(), 0.9, nullptr, nullptr) == LC_EINVAL);
}
