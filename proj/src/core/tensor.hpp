#pragma once

#include <algorithm>
#include <functional>
#include <memory>
#include <numeric>
#include <sstream>
#include <unordered_set>

#include "core/common.hpp"

namespace lc {

using Shape = std::vector<int>;

inline int64_t shape_numel(const Shape& s) {
  int64_t n = 1;
  for (int e : s) n *= e;
  return n;
}

inline std::string shape_str(const Shape& s) {
  std::ostringstream os;
  os << "[";
  for (size_t i = 0; i < s.size(); ++i) os << (i ? "," : "") << s[i];
  os << "]";
  return os.str();
}

[[noreturn]] inline void shape_fail(const std::string& what, const Shape& a, const Shape& b) {
  fail(ErrCode::shape_mismatch, what + ": " + shape_str(a) + " vs " + shape_str(b));
}

// When false, ops compute values only and record no graph (inference mode).
bool grad_enabled();
void set_grad_enabled(bool);

struct NoGradGuard {
  bool prev;
  NoGradGuard() : prev(grad_enabled()) { set_grad_enabled(false); }
  ~NoGradGuard() { set_grad_enabled(prev); }
};

// Dense tensor participating in a reverse-mode differentiation graph.
// One logical thread per graph; ops are free functions in ops.hpp.
template <typename T>
class Tensor {
 public:
  struct Node {
    Shape shape;
    std::vector<T> value;
    std::vector<T> grad;
    bool requires_grad = false;  // leaf that wants a gradient
    bool needs_grad = false;     // this or some ancestor requires grad
    const char* op = "leaf";
    std::string label;
    std::vector<std::shared_ptr<Node>> parents;
    std::function<void(Node&)> backward;  // accumulate into parents' grads

    int64_t numel() const { return static_cast<int64_t>(value.size()); }
    void ensure_grad() {
      if (grad.size() != value.size()) grad.assign(value.size(), T(0));
    }
  };

  Tensor() = default;
  explicit Tensor(std::shared_ptr<Node> n) : n_(std::move(n)) {}

  static Tensor zeros(Shape s) { return full(std::move(s), T(0)); }

  static Tensor full(Shape s, T v) {
    auto n = std::make_shared<Node>();
    int64_t cnt = shape_numel(s);
    n->shape = std::move(s);
    n->value.assign(static_cast<size_t>(cnt), v);
    return Tensor(std::move(n));
  }

  static Tensor from_data(Shape s, std::vector<T> data) {
    if (shape_numel(s) != static_cast<int64_t>(data.size()))
      fail(ErrCode::shape_mismatch,
           "from_data: " + shape_str(s) + " needs " + std::to_string(shape_numel(s)) +
               " values, got " + std::to_string(data.size()));
    auto n = std::make_shared<Node>();
    n->shape = std::move(s);
    n->value = std::move(data);
    return Tensor(std::move(n));
  }

  static Tensor uniform(Shape s, Rng& rng, T lo, T hi) {
    auto t = zeros(std::move(s));
    for (auto& v : t.node()->value) v = static_cast<T>(rng.uniform(lo, hi));
    return t;
  }

  bool valid() const { return n_ != nullptr; }
  const Shape& shape() const { return n_->shape; }
  int dim(int i) const { return n_->shape[static_cast<size_t>(i)]; }
  int rank() const { return static_cast<int>(n_->shape.size()); }
  int64_t numel() const { return n_->numel(); }

  const std::vector<T>& value() const { return n_->value; }
  std::vector<T>& mutable_value() { return n_->value; }
  const std::vector<T>& grad() const { return n_->grad; }
  std::vector<T>& mutable_grad() {
    n_->ensure_grad();
    return n_->grad;
  }

  T item() const {
    if (numel() != 1) fail(ErrCode::shape_mismatch, "item: tensor is not scalar " + shape_str(shape()));
    return n_->value[0];
  }

  Tensor& set_requires_grad(bool b) {
    n_->requires_grad = b;
    n_->needs_grad = b;
    return *this;
  }
  bool requires_grad() const { return n_->requires_grad; }
  bool needs_grad() const { return n_->needs_grad; }

  Tensor& set_label(std::string l) {
    n_->label = std::move(l);
    return *this;
  }
  const std::string& label() const { return n_->label; }
  const char* op() const { return n_->op; }

  void zero_grad() { n_->grad.assign(n_->value.size(), T(0)); }

  // copy of values with no graph attached
  Tensor detach() const {
    auto n = std::make_shared<Node>();
    n->shape = n_->shape;
    n->value = n_->value;
    return Tensor(std::move(n));
  }

  std::shared_ptr<Node> node() const { return n_; }

  // Reverse-mode pass from a scalar root. Grads of every reachable
  // needs_grad node are (re)set, then populated.
  void backward() {
    if (numel() != 1) fail(ErrCode::invalid_argument, "backward: root must be scalar");
    std::vector<Node*> order;
    topo_sort(order);
    for (Node* n : order)
      if (n->needs_grad) n->grad.assign(n->value.size(), T(0));
    n_->ensure_grad();
    n_->grad[0] = T(1);
    for (auto it = order.rbegin(); it != order.rend(); ++it) {
      Node* n = *it;
      if (n->backward && n->needs_grad) n->backward(*n);
    }
  }

  // walk the graph (root last); used for inspection
  void visit(const std::function<void(const Node&)>& fn) const {
    std::vector<Node*> order;
    topo_sort(order);
    for (Node* n : order) fn(*n);
  }

 private:
  void topo_sort(std::vector<Node*>& order) const {
    std::unordered_set<Node*> seen;
    // iterative DFS; graphs from unrolled recurrences get deep
    std::vector<std::pair<Node*, size_t>> stack;
    stack.emplace_back(n_.get(), 0);
    seen.insert(n_.get());
    while (!stack.empty()) {
      auto& [n, idx] = stack.back();
      if (idx < n->parents.size()) {
        Node* p = n->parents[idx++].get();
        if (seen.insert(p).second) stack.emplace_back(p, 0);
      } else {
        order.push_back(n);
        stack.pop_back();
      }
    }
  }

  std::shared_ptr<Node> n_;
};

// helper for op construction
template <typename T>
std::shared_ptr<typename Tensor<T>::Node> make_op_node(const char* op, Shape shape,
                                                       std::vector<Tensor<T>> parents) {
  auto n = std::make_shared<typename Tensor<T>::Node>();
  n->op = op;
  int64_t cnt = shape_numel(shape);
  n->shape = std::move(shape);
  n->value.assign(static_cast<size_t>(cnt), T(0));
  if (grad_enabled()) {
    bool needs = false;
    for (auto& p : parents) needs = needs || p.needs_grad();
    if (needs) {
      n->needs_grad = true;
      for (auto& p : parents) n->parents.push_back(p.node());
    }
  }
  return n;
}

template <typename T>
bool all_finite(const std::vector<T>& v) {
  for (T x : v)
    if (!std::isfinite(static_cast<double>(x))) return false;
  return true;
}

}  // namespace lc
