#include "core/tensor.hpp"

#include "core/ops.hpp"

namespace lc {

namespace {
thread_local bool g_grad_enabled = true;
}

bool grad_enabled() { return g_grad_enabled; }
void set_grad_enabled(bool b) { g_grad_enabled = b; }

const char* act_name(Act a) {
  switch (a) {
    case Act::relu: return "relu";
    case Act::tanh: return "tanh";
    case Act::sigmoid: return "sigmoid";
    case Act::hard_sigmoid: return "hard_sigmoid";
    case Act::abs_tanh: return "abs_tanh";
  }
  return "?";
}

Act act_from_name(const std::string& s) {
  if (s == "relu") return Act::relu;
  if (s == "tanh") return Act::tanh;
  if (s == "sigmoid") return Act::sigmoid;
  if (s == "hard_sigmoid") return Act::hard_sigmoid;
  if (s == "abs_tanh") return Act::abs_tanh;
  fail(ErrCode::invalid_argument, "unknown activation: " + s);
}

}  // namespace lc
