#include "core/checkpoint.hpp"

#include <cstring>
#include <fstream>

#include "json.hpp"

using nlohmann::json;

namespace lc {

namespace {

constexpr char kMagic[4] = {'L', 'C', 'N', 'T'};
constexpr uint32_t kVersion = 1;

void put_u32(std::ostream& os, uint32_t v) {
  uint8_t b[4] = {static_cast<uint8_t>(v), static_cast<uint8_t>(v >> 8),
                  static_cast<uint8_t>(v >> 16), static_cast<uint8_t>(v >> 24)};
  os.write(reinterpret_cast<const char*>(b), 4);
}

uint32_t get_u32(std::istream& is, const std::string& path) {
  uint8_t b[4];
  is.read(reinterpret_cast<char*>(b), 4);
  if (!is) fail(ErrCode::format, "checkpoint '" + path + "': truncated");
  return static_cast<uint32_t>(b[0]) | (static_cast<uint32_t>(b[1]) << 8) |
         (static_cast<uint32_t>(b[2]) << 16) | (static_cast<uint32_t>(b[3]) << 24);
}

void put_floats(std::ostream& os, const std::vector<float>& v) {
  static_assert(sizeof(float) == 4);
  // x86-64 is little-endian; raw write matches the format
  os.write(reinterpret_cast<const char*>(v.data()), static_cast<std::streamsize>(v.size() * 4));
}

void put_entry(std::ostream& os, const std::string& name, const Shape& shape,
               const std::vector<float>& data) {
  put_u32(os, static_cast<uint32_t>(name.size()));
  os.write(name.data(), static_cast<std::streamsize>(name.size()));
  put_u32(os, static_cast<uint32_t>(shape.size()));
  for (int e : shape) put_u32(os, static_cast<uint32_t>(e));
  put_floats(os, data);
}

struct Entry {
  std::string name;
  Shape shape;
  std::vector<float> data;
};

}  // namespace

void save_checkpoint(const std::string& path, LineCounterNet<float>& net,
                     const std::optional<TrainState>& state, bool include_optimizer) {
  std::ofstream os(path, std::ios::binary);
  if (!os) fail(ErrCode::io, "cannot write checkpoint " + path);
  os.write(kMagic, 4);
  put_u32(os, kVersion);

  json cfg = json::parse(net.config().to_json());
  json root;
  root["model"] = cfg;
  if (state) {
    root["train_state"] = {{"adam_t", state->adam_t},
                           {"next_epoch", state->next_epoch},
                           {"lr", state->lr},
                           {"best_fm", state->best_fm},
                           {"since_improve", state->since_improve}};
  }
  std::string cfg_text = root.dump();
  put_u32(os, static_cast<uint32_t>(cfg_text.size()));
  os.write(cfg_text.data(), static_cast<std::streamsize>(cfg_text.size()));

  for (auto& p : net.params()) {
    put_entry(os, p.name, p.tensor.shape(), p.tensor.value());
    if (include_optimizer) {
      put_entry(os, p.name + ".adam_m", p.tensor.shape(), p.adam_m);
      put_entry(os, p.name + ".adam_v", p.tensor.shape(), p.adam_v);
    }
  }
  for (auto& [name, buf] : net.state_buffers())
    put_entry(os, name, {static_cast<int>(buf->size())}, *buf);
  if (!os) fail(ErrCode::io, "short write to checkpoint " + path);
}

LineCounterNet<float> load_checkpoint(const std::string& path,
                                      std::optional<TrainState>* state_out) {
  std::ifstream is(path, std::ios::binary);
  if (!is) fail(ErrCode::io, "cannot read checkpoint " + path);
  char magic[4];
  is.read(magic, 4);
  if (!is || std::memcmp(magic, kMagic, 4) != 0)
    fail(ErrCode::format, "checkpoint '" + path + "': bad magic (want LCNT)");
  uint32_t version = get_u32(is, path);
  if (version != kVersion)
    fail(ErrCode::format, "checkpoint '" + path + "': unsupported version " + std::to_string(version));
  uint32_t cfg_len = get_u32(is, path);
  std::string cfg_text(cfg_len, '\0');
  is.read(cfg_text.data(), cfg_len);
  if (!is) fail(ErrCode::format, "checkpoint '" + path + "': truncated config");

  json root;
  try {
    root = json::parse(cfg_text);
  } catch (const std::exception& e) {
    fail(ErrCode::format, "checkpoint '" + path + "': config not valid JSON: " + e.what());
  }
  ModelConfig cfg = ModelConfig::from_json(root["model"].dump());
  if (state_out) {
    *state_out = std::nullopt;
    if (root.contains("train_state")) {
      TrainState ts;
      const auto& j = root["train_state"];
      ts.adam_t = j.value("adam_t", int64_t{0});
      ts.next_epoch = j.value("next_epoch", 0);
      ts.lr = j.value("lr", 1e-4);
      ts.best_fm = j.value("best_fm", -1.0);
      ts.since_improve = j.value("since_improve", 0);
      *state_out = ts;
    }
  }

  LineCounterNet<float> net(cfg, 0);

  std::vector<Entry> entries;
  while (true) {
    uint8_t peek;
    is.read(reinterpret_cast<char*>(&peek), 1);
    if (!is) break;  // clean EOF
    is.putback(static_cast<char>(peek));
    Entry e;
    uint32_t name_len = get_u32(is, path);
    e.name.resize(name_len);
    is.read(e.name.data(), name_len);
    uint32_t rank = get_u32(is, path);
    int64_t count = 1;
    for (uint32_t i = 0; i < rank; ++i) {
      uint32_t ext = get_u32(is, path);
      e.shape.push_back(static_cast<int>(ext));
      count *= ext;
    }
    e.data.resize(static_cast<size_t>(count));
    is.read(reinterpret_cast<char*>(e.data.data()), count * 4);
    if (!is) fail(ErrCode::format, "checkpoint '" + path + "': truncated entry " + e.name);
    entries.push_back(std::move(e));
  }

  auto find = [&](const std::string& name) -> Entry* {
    for (auto& e : entries)
      if (e.name == name) return &e;
    return nullptr;
  };

  for (auto& p : net.params()) {
    Entry* e = find(p.name);
    if (!e) fail(ErrCode::format, "checkpoint '" + path + "': missing parameter " + p.name);
    if (e->shape != p.tensor.shape())
      fail(ErrCode::format, "checkpoint '" + path + "': shape mismatch for " + p.name + ": file " +
                                shape_str(e->shape) + " vs model " + shape_str(p.tensor.shape()));
    p.tensor.mutable_value() = e->data;
    if (Entry* m = find(p.name + ".adam_m")) p.adam_m = m->data;
    if (Entry* v = find(p.name + ".adam_v")) p.adam_v = v->data;
  }
  for (auto& [name, buf] : net.state_buffers()) {
    Entry* e = find(name);
    if (!e) fail(ErrCode::format, "checkpoint '" + path + "': missing state " + name);
    if (e->data.size() != buf->size())
      fail(ErrCode::format, "checkpoint '" + path + "': size mismatch for " + name);
    *buf = e->data;
  }
  return net;
}

}  // namespace lc
