#include "core/model.hpp"

#include "json.hpp"

using nlohmann::json;

namespace lc {

const char* counter_order_name(CounterOrder o) {
  return o == CounterOrder::horizontal_first ? "horizontal_first" : "vertical_first";
}

CounterOrder counter_order_from_name(const std::string& s) {
  if (s == "horizontal_first") return CounterOrder::horizontal_first;
  if (s == "vertical_first") return CounterOrder::vertical_first;
  fail(ErrCode::invalid_argument, "unknown counter order: " + s);
}

const char* placement_name(MonotonePlacement p) {
  switch (p) {
    case MonotonePlacement::before_decoder: return "before_decoder";
    case MonotonePlacement::after_decoder: return "after_decoder";
    case MonotonePlacement::none: return "none";
  }
  return "?";
}

MonotonePlacement placement_from_name(const std::string& s) {
  if (s == "before_decoder") return MonotonePlacement::before_decoder;
  if (s == "after_decoder") return MonotonePlacement::after_decoder;
  if (s == "none") return MonotonePlacement::none;
  fail(ErrCode::invalid_argument, "unknown monotone placement: " + s);
}

void ModelConfig::validate() const {
  if (encoder_channels.empty()) fail(ErrCode::invalid_argument, "config: encoder_channels empty");
  for (int c : encoder_channels)
    if (c <= 0) fail(ErrCode::invalid_argument, "config: encoder channel counts must be > 0");
  if (counter_hidden <= 0) fail(ErrCode::invalid_argument, "config: counter_hidden must be > 0");
  if (kernel_size < 1 || kernel_size % 2 == 0)
    fail(ErrCode::invalid_argument, "config: kernel_size must be odd");
  int div = 1 << encoder_channels.size();
  if (input_h <= 0 || input_w <= 0 || input_h % div || input_w % div)
    fail(ErrCode::invalid_argument,
         "config: input size " + std::to_string(input_h) + "x" + std::to_string(input_w) +
             " must be divisible by " + std::to_string(div) + " (one stride-2 per encoder stage)");
}

std::string ModelConfig::to_json() const {
  json j;
  j["encoder_channels"] = encoder_channels;
  j["counter_hidden"] = counter_hidden;
  j["counter_order"] = counter_order_name(counter_order);
  j["counter_bidirectional"] = {counter_bidi_first, counter_bidi_second};
  j["monotone_placement"] = placement_name(monotone_placement);
  j["monotone_preactivation"] = act_name(monotone_preactivation);
  j["input_size"] = {input_h, input_w};
  j["kernel_size"] = kernel_size;
  return j.dump();
}

ModelConfig ModelConfig::from_json(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const std::exception& e) {
    fail(ErrCode::format, std::string("model config json: ") + e.what());
  }
  ModelConfig c;
  if (j.contains("encoder_channels")) c.encoder_channels = j["encoder_channels"].get<std::vector<int>>();
  c.counter_hidden = j.value("counter_hidden", c.counter_hidden);
  if (j.contains("counter_order")) c.counter_order = counter_order_from_name(j["counter_order"].get<std::string>());
  if (j.contains("counter_bidirectional")) {
    auto v = j["counter_bidirectional"];
    if (!v.is_array() || v.size() != 2)
      fail(ErrCode::format, "model config: counter_bidirectional must be [bool, bool]");
    c.counter_bidi_first = v[0].get<bool>();
    c.counter_bidi_second = v[1].get<bool>();
  }
  if (j.contains("monotone_placement"))
    c.monotone_placement = placement_from_name(j["monotone_placement"].get<std::string>());
  if (j.contains("monotone_preactivation"))
    c.monotone_preactivation = act_from_name(j["monotone_preactivation"].get<std::string>());
  if (j.contains("input_size")) {
    auto v = j["input_size"];
    if (!v.is_array() || v.size() != 2) fail(ErrCode::format, "model config: input_size must be [H, W]");
    c.input_h = v[0].get<int>();
    c.input_w = v[1].get<int>();
  }
  c.kernel_size = j.value("kernel_size", c.kernel_size);
  c.validate();
  return c;
}

}  // namespace lc
