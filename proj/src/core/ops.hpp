#pragma once

#include "core/tensor.hpp"

namespace lc {

enum class Act { relu, tanh, sigmoid, hard_sigmoid, abs_tanh };

const char* act_name(Act a);
Act act_from_name(const std::string& s);

namespace detail {
template <typename T>
void check_same_shape(const char* op, const Tensor<T>& a, const Tensor<T>& b) {
  if (a.shape() != b.shape()) shape_fail(op, a.shape(), b.shape());
}
}  // namespace detail

template <typename T>
Tensor<T> add(const Tensor<T>& a, const Tensor<T>& b) {
  detail::check_same_shape("add", a, b);
  auto n = make_op_node<T>("add", a.shape(), {a, b});
  const auto& av = a.value();
  const auto& bv = b.value();
  for (size_t i = 0; i < n->value.size(); ++i) n->value[i] = av[i] + bv[i];
  if (n->needs_grad)
    n->backward = [](auto& self) {
      for (int p = 0; p < 2; ++p) {
        auto& par = *self.parents[p];
        if (!par.needs_grad) continue;
        par.ensure_grad();
        for (size_t i = 0; i < self.grad.size(); ++i) par.grad[i] += self.grad[i];
      }
    };
  return Tensor<T>(n);
}

template <typename T>
Tensor<T> sub(const Tensor<T>& a, const Tensor<T>& b) {
  detail::check_same_shape("sub", a, b);
  auto n = make_op_node<T>("sub", a.shape(), {a, b});
  const auto& av = a.value();
  const auto& bv = b.value();
  for (size_t i = 0; i < n->value.size(); ++i) n->value[i] = av[i] - bv[i];
  if (n->needs_grad)
    n->backward = [](auto& self) {
      auto& pa = *self.parents[0];
      auto& pb = *self.parents[1];
      if (pa.needs_grad) {
        pa.ensure_grad();
        for (size_t i = 0; i < self.grad.size(); ++i) pa.grad[i] += self.grad[i];
      }
      if (pb.needs_grad) {
        pb.ensure_grad();
        for (size_t i = 0; i < self.grad.size(); ++i) pb.grad[i] -= self.grad[i];
      }
    };
  return Tensor<T>(n);
}

template <typename T>
Tensor<T> mul(const Tensor<T>& a, const Tensor<T>& b) {
  detail::check_same_shape("mul", a, b);
  auto n = make_op_node<T>("mul", a.shape(), {a, b});
  const auto& av = a.value();
  const auto& bv = b.value();
  for (size_t i = 0; i < n->value.size(); ++i) n->value[i] = av[i] * bv[i];
  if (n->needs_grad)
    n->backward = [](auto& self) {
      auto& pa = *self.parents[0];
      auto& pb = *self.parents[1];
      if (pa.needs_grad) {
        pa.ensure_grad();
        for (size_t i = 0; i < self.grad.size(); ++i) pa.grad[i] += self.grad[i] * pb.value[i];
      }
      if (pb.needs_grad) {
        pb.ensure_grad();
        for (size_t i = 0; i < self.grad.size(); ++i) pb.grad[i] += self.grad[i] * pa.value[i];
      }
    };
  return Tensor<T>(n);
}

// alpha*x + beta, elementwise
template <typename T>
Tensor<T> affine(const Tensor<T>& x, T alpha, T beta) {
  auto n = make_op_node<T>("affine", x.shape(), {x});
  const auto& xv = x.value();
  for (size_t i = 0; i < n->value.size(); ++i) n->value[i] = alpha * xv[i] + beta;
  if (n->needs_grad)
    n->backward = [alpha](auto& self) {
      auto& p = *self.parents[0];
      if (!p.needs_grad) return;
      p.ensure_grad();
      for (size_t i = 0; i < self.grad.size(); ++i) p.grad[i] += alpha * self.grad[i];
    };
  return Tensor<T>(n);
}

template <typename T>
Tensor<T> activation(const Tensor<T>& x, Act kind) {
  auto n = make_op_node<T>(act_name(kind), x.shape(), {x});
  const auto& xv = x.value();
  auto& yv = n->value;
  switch (kind) {
    case Act::relu:
      for (size_t i = 0; i < yv.size(); ++i) yv[i] = xv[i] > T(0) ? xv[i] : T(0);
      break;
    case Act::tanh:
      for (size_t i = 0; i < yv.size(); ++i) yv[i] = std::tanh(xv[i]);
      break;
    case Act::sigmoid:
      for (size_t i = 0; i < yv.size(); ++i) yv[i] = T(1) / (T(1) + std::exp(-xv[i]));
      break;
    case Act::hard_sigmoid:
      // clamp(0.2x + 0.5, 0, 1)
      for (size_t i = 0; i < yv.size(); ++i)
        yv[i] = std::min(T(1), std::max(T(0), T(0.2) * xv[i] + T(0.5)));
      break;
    case Act::abs_tanh:
      for (size_t i = 0; i < yv.size(); ++i) yv[i] = std::abs(std::tanh(xv[i]));
      break;
  }
  if (n->needs_grad)
    n->backward = [kind](auto& self) {
      auto& p = *self.parents[0];
      if (!p.needs_grad) return;
      p.ensure_grad();
      const auto& xv2 = p.value;
      const auto& yv2 = self.value;
      const auto& g = self.grad;
      switch (kind) {
        case Act::relu:
          for (size_t i = 0; i < g.size(); ++i)
            if (xv2[i] > T(0)) p.grad[i] += g[i];
          break;
        case Act::tanh:
          for (size_t i = 0; i < g.size(); ++i) p.grad[i] += g[i] * (T(1) - yv2[i] * yv2[i]);
          break;
        case Act::sigmoid:
          for (size_t i = 0; i < g.size(); ++i) p.grad[i] += g[i] * yv2[i] * (T(1) - yv2[i]);
          break;
        case Act::hard_sigmoid:
          for (size_t i = 0; i < g.size(); ++i)
            if (xv2[i] > T(-2.5) && xv2[i] < T(2.5)) p.grad[i] += g[i] * T(0.2);
          break;
        case Act::abs_tanh:
          for (size_t i = 0; i < g.size(); ++i) {
            T t = std::tanh(xv2[i]);
            T s = xv2[i] > T(0) ? T(1) : (xv2[i] < T(0) ? T(-1) : T(0));
            p.grad[i] += g[i] * s * (T(1) - t * t);
          }
          break;
      }
    };
  return Tensor<T>(n);
}

// y[i,j] = sum_k a[i,k] b[k,j]
template <typename T>
Tensor<T> matmul(const Tensor<T>& a, const Tensor<T>& b) {
  if (a.rank() != 2 || b.rank() != 2 || a.dim(1) != b.dim(0)) shape_fail("matmul", a.shape(), b.shape());
  int m = a.dim(0), k = a.dim(1), nn = b.dim(1);
  auto n = make_op_node<T>("matmul", {m, nn}, {a, b});
  gemm<T>(false, false, m, nn, k, T(1), a.value().data(), k, b.value().data(), nn, T(0),
          n->value.data(), nn);
  if (n->needs_grad)
    n->backward = [m, k, nn](auto& self) {
      auto& pa = *self.parents[0];
      auto& pb = *self.parents[1];
      if (pa.needs_grad) {
        pa.ensure_grad();
        gemm<T>(false, true, m, k, nn, T(1), self.grad.data(), nn, pb.value.data(), nn, T(1),
                pa.grad.data(), k);
      }
      if (pb.needs_grad) {
        pb.ensure_grad();
        gemm<T>(true, false, k, nn, m, T(1), pa.value.data(), k, self.grad.data(), nn, T(1),
                pb.grad.data(), nn);
      }
    };
  return Tensor<T>(n);
}

// y = x W^T (+ bias); x [N,in], W [out,in], bias [out]
template <typename T>
Tensor<T> linear(const Tensor<T>& x, const Tensor<T>& w, const Tensor<T>& bias) {
  if (x.rank() != 2 || w.rank() != 2 || x.dim(1) != w.dim(1)) shape_fail("linear", x.shape(), w.shape());
  bool has_bias = bias.valid();
  if (has_bias && (bias.rank() != 1 || bias.dim(0) != w.dim(0)))
    shape_fail("linear bias", bias.shape(), w.shape());
  int rows = x.dim(0), in = x.dim(1), out = w.dim(0);
  std::vector<Tensor<T>> parents = {x, w};
  if (has_bias) parents.push_back(bias);
  auto n = make_op_node<T>("linear", {rows, out}, parents);
  gemm<T>(false, true, rows, out, in, T(1), x.value().data(), in, w.value().data(), in, T(0),
          n->value.data(), out);
  if (has_bias) {
    const auto& bv = bias.value();
    for (int r = 0; r < rows; ++r)
      for (int c = 0; c < out; ++c) n->value[static_cast<size_t>(r) * out + c] += bv[c];
  }
  if (n->needs_grad)
    n->backward = [rows, in, out, has_bias](auto& self) {
      auto& px = *self.parents[0];
      auto& pw = *self.parents[1];
      if (px.needs_grad) {
        px.ensure_grad();
        gemm<T>(false, false, rows, in, out, T(1), self.grad.data(), out, pw.value.data(), in,
                T(1), px.grad.data(), in);
      }
      if (pw.needs_grad) {
        pw.ensure_grad();
        gemm<T>(true, false, out, in, rows, T(1), self.grad.data(), out, px.value.data(), in,
                T(1), pw.grad.data(), in);
      }
      if (has_bias) {
        auto& pb = *self.parents[2];
        if (pb.needs_grad) {
          pb.ensure_grad();
          for (int r = 0; r < rows; ++r)
            for (int c = 0; c < out; ++c) pb.grad[c] += self.grad[static_cast<size_t>(r) * out + c];
        }
      }
    };
  return Tensor<T>(n);
}

template <typename T>
Tensor<T> mean(const Tensor<T>& x) {
  if (x.numel() == 0) fail(ErrCode::invalid_argument, "mean: empty tensor");
  auto n = make_op_node<T>("mean", {1}, {x});
  double acc = 0;
  for (T v : x.value()) acc += static_cast<double>(v);
  n->value[0] = static_cast<T>(acc / static_cast<double>(x.numel()));
  if (n->needs_grad)
    n->backward = [](auto& self) {
      auto& p = *self.parents[0];
      if (!p.needs_grad) return;
      p.ensure_grad();
      T g = self.grad[0] / static_cast<T>(p.value.size());
      for (auto& d : p.grad) d += g;
    };
  return Tensor<T>(n);
}

template <typename T>
Tensor<T> abs(const Tensor<T>& x) {
  auto n = make_op_node<T>("abs", x.shape(), {x});
  const auto& xv = x.value();
  for (size_t i = 0; i < n->value.size(); ++i) n->value[i] = std::abs(xv[i]);
  if (n->needs_grad)
    n->backward = [](auto& self) {
      auto& p = *self.parents[0];
      if (!p.needs_grad) return;
      p.ensure_grad();
      for (size_t i = 0; i < self.grad.size(); ++i) {
        T s = p.value[i] > T(0) ? T(1) : (p.value[i] < T(0) ? T(-1) : T(0));
        p.grad[i] += self.grad[i] * s;
      }
    };
  return Tensor<T>(n);
}

// gathers x where mask != 0, row-major order; result is 1-D
template <typename T>
Tensor<T> masked_select(const Tensor<T>& x, const std::vector<uint8_t>& mask) {
  if (static_cast<int64_t>(mask.size()) != x.numel())
    fail(ErrCode::shape_mismatch, "masked_select: mask size " + std::to_string(mask.size()) +
                                      " vs tensor " + shape_str(x.shape()));
  std::vector<int64_t> idx;
  for (size_t i = 0; i < mask.size(); ++i)
    if (mask[i]) idx.push_back(static_cast<int64_t>(i));
  auto n = make_op_node<T>("masked_select", {static_cast<int>(idx.size())}, {x});
  const auto& xv = x.value();
  for (size_t i = 0; i < idx.size(); ++i) n->value[i] = xv[static_cast<size_t>(idx[i])];
  if (n->needs_grad)
    n->backward = [idx](auto& self) {
      auto& p = *self.parents[0];
      if (!p.needs_grad) return;
      p.ensure_grad();
      for (size_t i = 0; i < idx.size(); ++i) p.grad[static_cast<size_t>(idx[i])] += self.grad[i];
    };
  return Tensor<T>(n);
}

// zero-padded "same" convolution, NCHW; k odd, stride 1 or 2
template <typename T>
Tensor<T> conv2d(const Tensor<T>& x, const Tensor<T>& w, const Tensor<T>& bias, int stride) {
  if (x.rank() != 4 || w.rank() != 4) shape_fail("conv2d", x.shape(), w.shape());
  int b = x.dim(0), cin = x.dim(1), h = x.dim(2), wd = x.dim(3);
  int cout = w.dim(0), k = w.dim(2);
  if (w.dim(1) != cin)
    fail(ErrCode::shape_mismatch, "conv2d: input channels " + std::to_string(cin) +
                                      " vs weight expects " + std::to_string(w.dim(1)));
  if (w.dim(3) != k || k % 2 == 0) fail(ErrCode::invalid_argument, "conv2d: kernel must be square and odd");
  if (stride != 1 && stride != 2) fail(ErrCode::invalid_argument, "conv2d: stride must be 1 or 2");
  if (h % stride || wd % stride) fail(ErrCode::invalid_argument, "conv2d: H,W must be divisible by stride");
  if (bias.valid() && (bias.rank() != 1 || bias.dim(0) != cout))
    shape_fail("conv2d bias", bias.shape(), w.shape());
  int ho = h / stride, wo = wd / stride, pad = (k - 1) / 2;
  int hw_out = ho * wo, kk = cin * k * k;

  std::vector<Tensor<T>> parents = {x, w};
  bool has_bias = bias.valid();
  if (has_bias) parents.push_back(bias);
  auto n = make_op_node<T>("conv2d", {b, cout, ho, wo}, parents);

  auto im2col = [=](const T* img, T* col) {
    // col [cin*k*k, ho*wo]; per (ki,kj) row the valid ox range is contiguous
    for (int c = 0; c < cin; ++c) {
      const T* plane = img + static_cast<int64_t>(c) * h * wd;
      for (int ki = 0; ki < k; ++ki)
        for (int kj = 0; kj < k; ++kj) {
          T* dst = col + (static_cast<int64_t>(c) * k * k + ki * k + kj) * hw_out;
          int x_lo = std::max(0, (pad - kj + stride - 1) / stride);
          int x_hi = std::min(wo, (wd - 1 - kj + pad) / stride + 1);
          for (int oy = 0; oy < ho; ++oy) {
            int iy = oy * stride + ki - pad;
            T* d = dst + static_cast<int64_t>(oy) * wo;
            if (iy < 0 || iy >= h) {
              std::fill(d, d + wo, T(0));
              continue;
            }
            const T* src = plane + static_cast<int64_t>(iy) * wd + kj - pad;
            for (int ox = 0; ox < x_lo; ++ox) d[ox] = T(0);
            if (stride == 1) {
              std::copy(src + x_lo, src + x_hi, d + x_lo);
            } else {
              for (int ox = x_lo; ox < x_hi; ++ox) d[ox] = src[ox * stride];
            }
            for (int ox = x_hi; ox < wo; ++ox) d[ox] = T(0);
          }
        }
    }
  };

  std::vector<T> col(static_cast<size_t>(kk) * hw_out);
  for (int bi = 0; bi < b; ++bi) {
    im2col(x.value().data() + static_cast<int64_t>(bi) * cin * h * wd, col.data());
    T* out = n->value.data() + static_cast<int64_t>(bi) * cout * hw_out;
    gemm<T>(false, false, cout, hw_out, kk, T(1), w.value().data(), kk, col.data(), hw_out, T(0),
            out, hw_out);
    if (has_bias) {
      const auto& bv = bias.value();
      for (int c = 0; c < cout; ++c) {
        T bb = bv[c];
        T* oc = out + static_cast<int64_t>(c) * hw_out;
        for (int i = 0; i < hw_out; ++i) oc[i] += bb;
      }
    }
  }

  if (n->needs_grad)
    n->backward = [b, cin, h, wd, cout, k, stride, ho, wo, hw_out, kk, pad, has_bias,
                   im2col](auto& self) {
      auto& px = *self.parents[0];
      auto& pw = *self.parents[1];
      if (px.needs_grad) px.ensure_grad();
      if (pw.needs_grad) pw.ensure_grad();
      std::vector<T> colb(static_cast<size_t>(kk) * hw_out);
      std::vector<T> dcol(static_cast<size_t>(kk) * hw_out);
      for (int bi = 0; bi < b; ++bi) {
        const T* gy = self.grad.data() + static_cast<int64_t>(bi) * cout * hw_out;
        if (pw.needs_grad) {
          im2col(px.value.data() + static_cast<int64_t>(bi) * cin * h * wd, colb.data());
          gemm<T>(false, true, cout, kk, hw_out, T(1), gy, hw_out, colb.data(), hw_out, T(1),
                  pw.grad.data(), kk);
        }
        if (px.needs_grad) {
          gemm<T>(true, false, kk, hw_out, cout, T(1), pw.value.data(), kk, gy, hw_out, T(0),
                  dcol.data(), hw_out);
          // col2im accumulate
          T* gx = px.grad.data() + static_cast<int64_t>(bi) * cin * h * wd;
          for (int c = 0; c < cin; ++c)
            for (int ki = 0; ki < k; ++ki)
              for (int kj = 0; kj < k; ++kj) {
                const T* src = dcol.data() + (static_cast<int64_t>(c) * k * k + ki * k + kj) * hw_out;
                int x_lo = std::max(0, (pad - kj + stride - 1) / stride);
                int x_hi = std::min(wo, (wd - 1 - kj + pad) / stride + 1);
                for (int oy = 0; oy < ho; ++oy) {
                  int iy = oy * stride + ki - pad;
                  if (iy < 0 || iy >= h) continue;
                  T* gp = gx + (static_cast<int64_t>(c) * h + iy) * wd + kj - pad;
                  const T* s = src + static_cast<int64_t>(oy) * wo;
                  if (stride == 1) {
                    for (int ox = x_lo; ox < x_hi; ++ox) gp[ox] += s[ox];
                  } else {
                    for (int ox = x_lo; ox < x_hi; ++ox) gp[ox * stride] += s[ox];
                  }
                }
              }
        }
      }
      if (has_bias) {
        auto& pb = *self.parents[2];
        if (pb.needs_grad) {
          pb.ensure_grad();
          for (int bi = 0; bi < b; ++bi)
            for (int c = 0; c < cout; ++c) {
              const T* gc = self.grad.data() + (static_cast<int64_t>(bi) * cout + c) * hw_out;
              T acc = 0;
              for (int i = 0; i < hw_out; ++i) acc += gc[i];
              pb.grad[c] += acc;
            }
        }
      }
    };
  return Tensor<T>(n);
}

// per-channel running statistics buffer for batchnorm
template <typename T>
struct BnStats {
  std::vector<T> mean, var;
  bool touched = false;  // stays false until the first train-mode update

  explicit BnStats(int channels = 0) { reset(channels); }
  void reset(int channels) {
    mean.assign(static_cast<size_t>(channels), T(0));
    var.assign(static_cast<size_t>(channels), T(1));
    touched = false;
  }
};

// normalizes over (B,H,W) per channel; train mode uses batch statistics and
// updates running stats (TF convention: r = mom*r + (1-mom)*batch)
template <typename T>
Tensor<T> batchnorm(const Tensor<T>& x, const Tensor<T>& gamma, const Tensor<T>& beta,
                    BnStats<T>& stats, bool train, T eps = T(1e-3), T momentum = T(0.99),
                    bool update_running = true) {
  if (x.rank() != 4) fail(ErrCode::shape_mismatch, "batchnorm: expected rank-4, got " + shape_str(x.shape()));
  int b = x.dim(0), c = x.dim(1), h = x.dim(2), w = x.dim(3);
  if (gamma.numel() != c || beta.numel() != c) shape_fail("batchnorm gamma/beta", gamma.shape(), x.shape());
  if (static_cast<int>(stats.mean.size()) != c) fail(ErrCode::shape_mismatch, "batchnorm: stats channel mismatch");
  if (eps <= T(0)) fail(ErrCode::invalid_argument, "batchnorm: eps must be > 0");
  int64_t hw = static_cast<int64_t>(h) * w;
  int64_t cnt = static_cast<int64_t>(b) * hw;

  auto n = make_op_node<T>("batchnorm", x.shape(), {x, gamma, beta});
  const auto& xv = x.value();
  std::vector<T> mu(c), ivs(c);
  if (train) {
    for (int ci = 0; ci < c; ++ci) {
      double s = 0;
      for (int bi = 0; bi < b; ++bi) {
        const T* p = xv.data() + (static_cast<int64_t>(bi) * c + ci) * hw;
        for (int64_t i = 0; i < hw; ++i) s += p[i];
      }
      double m = s / static_cast<double>(cnt);
      double vacc = 0;
      for (int bi = 0; bi < b; ++bi) {
        const T* p = xv.data() + (static_cast<int64_t>(bi) * c + ci) * hw;
        for (int64_t i = 0; i < hw; ++i) {
          double d = p[i] - m;
          vacc += d * d;
        }
      }
      double v = vacc / static_cast<double>(cnt);
      mu[ci] = static_cast<T>(m);
      ivs[ci] = static_cast<T>(1.0 / std::sqrt(v + static_cast<double>(eps)));
      if (update_running) {
        stats.mean[ci] = momentum * stats.mean[ci] + (T(1) - momentum) * static_cast<T>(m);
        stats.var[ci] = momentum * stats.var[ci] + (T(1) - momentum) * static_cast<T>(v);
      }
    }
    if (update_running) stats.touched = true;
  } else {
    // before any training step this is the initialized (0,1) transform
    for (int ci = 0; ci < c; ++ci) {
      mu[ci] = stats.mean[ci];
      ivs[ci] = static_cast<T>(1.0 / std::sqrt(static_cast<double>(stats.var[ci]) + static_cast<double>(eps)));
    }
  }
  const auto& gv = gamma.value();
  const auto& bv = beta.value();
  for (int bi = 0; bi < b; ++bi)
    for (int ci = 0; ci < c; ++ci) {
      const T* p = xv.data() + (static_cast<int64_t>(bi) * c + ci) * hw;
      T* o = n->value.data() + (static_cast<int64_t>(bi) * c + ci) * hw;
      T m = mu[ci], is = ivs[ci], g = gv[ci], bb = bv[ci];
      for (int64_t i = 0; i < hw; ++i) o[i] = g * (p[i] - m) * is + bb;
    }

  if (n->needs_grad)
    n->backward = [b, c, hw, cnt, train, mu, ivs](auto& self) {
      auto& px = *self.parents[0];
      auto& pg = *self.parents[1];
      auto& pb = *self.parents[2];
      const auto& xv2 = px.value;
      const auto& g2 = self.grad;
      if (pg.needs_grad) pg.ensure_grad();
      if (pb.needs_grad) pb.ensure_grad();
      if (px.needs_grad) px.ensure_grad();
      for (int ci = 0; ci < c; ++ci) {
        T m = mu[ci], is = ivs[ci];
        T gam = pg.value[ci];
        // reductions over the channel slice
        double sum_g = 0, sum_gx = 0;
        for (int bi = 0; bi < b; ++bi) {
          const T* gp = g2.data() + (static_cast<int64_t>(bi) * c + ci) * hw;
          const T* xp = xv2.data() + (static_cast<int64_t>(bi) * c + ci) * hw;
          for (int64_t i = 0; i < hw; ++i) {
            sum_g += gp[i];
            sum_gx += gp[i] * (xp[i] - m) * is;
          }
        }
        if (pg.needs_grad) pg.grad[ci] += static_cast<T>(sum_gx);
        if (pb.needs_grad) pb.grad[ci] += static_cast<T>(sum_g);
        if (!px.needs_grad) continue;
        if (train) {
          T inv_n = T(1) / static_cast<T>(cnt);
          for (int bi = 0; bi < b; ++bi) {
            const T* gp = g2.data() + (static_cast<int64_t>(bi) * c + ci) * hw;
            const T* xp = xv2.data() + (static_cast<int64_t>(bi) * c + ci) * hw;
            T* dp = px.grad.data() + (static_cast<int64_t>(bi) * c + ci) * hw;
            for (int64_t i = 0; i < hw; ++i) {
              T xh = (xp[i] - m) * is;
              dp[i] += gam * is * (gp[i] - static_cast<T>(sum_g) * inv_n - xh * static_cast<T>(sum_gx) * inv_n);
            }
          }
        } else {
          for (int bi = 0; bi < b; ++bi) {
            const T* gp = g2.data() + (static_cast<int64_t>(bi) * c + ci) * hw;
            T* dp = px.grad.data() + (static_cast<int64_t>(bi) * c + ci) * hw;
            for (int64_t i = 0; i < hw; ++i) dp[i] += gam * is * gp[i];
          }
        }
      }
    };
  return Tensor<T>(n);
}

// cumulative sum along the height axis of [B,C,H,W]
template <typename T>
Tensor<T> cumsum_y(const Tensor<T>& x) {
  if (x.rank() != 4) fail(ErrCode::shape_mismatch, "cumsum_y: expected rank-4, got " + shape_str(x.shape()));
  int b = x.dim(0), c = x.dim(1), h = x.dim(2), w = x.dim(3);
  auto n = make_op_node<T>("cumsum_y", x.shape(), {x});
  const auto& xv = x.value();
  for (int bi = 0; bi < b; ++bi)
    for (int ci = 0; ci < c; ++ci) {
      const T* src = xv.data() + (static_cast<int64_t>(bi) * c + ci) * h * w;
      T* dst = n->value.data() + (static_cast<int64_t>(bi) * c + ci) * h * w;
      for (int xw = 0; xw < w; ++xw) dst[xw] = src[xw];
      for (int y = 1; y < h; ++y)
        for (int xw = 0; xw < w; ++xw)
          dst[y * w + xw] = dst[(y - 1) * w + xw] + src[y * w + xw];
    }
  if (n->needs_grad)
    n->backward = [b, c, h, w](auto& self) {
      auto& p = *self.parents[0];
      if (!p.needs_grad) return;
      p.ensure_grad();
      // gradient flows to all rows <= y: reverse cumulative sum
      for (int bi = 0; bi < b; ++bi)
        for (int ci = 0; ci < c; ++ci) {
          const T* g = self.grad.data() + (static_cast<int64_t>(bi) * c + ci) * h * w;
          T* d = p.grad.data() + (static_cast<int64_t>(bi) * c + ci) * h * w;
          std::vector<T> acc(static_cast<size_t>(w), T(0));
          for (int y = h - 1; y >= 0; --y)
            for (int xw = 0; xw < w; ++xw) {
              acc[static_cast<size_t>(xw)] += g[y * w + xw];
              d[y * w + xw] += acc[static_cast<size_t>(xw)];
            }
        }
    };
  return Tensor<T>(n);
}

// nearest-neighbor 2x upsampling
template <typename T>
Tensor<T> upsample2x(const Tensor<T>& x) {
  if (x.rank() != 4) fail(ErrCode::shape_mismatch, "upsample2x: expected rank-4, got " + shape_str(x.shape()));
  int b = x.dim(0), c = x.dim(1), h = x.dim(2), w = x.dim(3);
  auto n = make_op_node<T>("upsample2x", {b, c, 2 * h, 2 * w}, {x});
  const auto& xv = x.value();
  for (int64_t pl = 0; pl < static_cast<int64_t>(b) * c; ++pl) {
    const T* src = xv.data() + pl * h * w;
    T* dst = n->value.data() + pl * 4 * h * w;
    for (int y = 0; y < h; ++y)
      for (int xw = 0; xw < w; ++xw) {
        T v = src[y * w + xw];
        T* d0 = dst + (2 * y) * 2 * w + 2 * xw;
        d0[0] = v;
        d0[1] = v;
        d0[2 * w] = v;
        d0[2 * w + 1] = v;
      }
  }
  if (n->needs_grad)
    n->backward = [b, c, h, w](auto& self) {
      auto& p = *self.parents[0];
      if (!p.needs_grad) return;
      p.ensure_grad();
      for (int64_t pl = 0; pl < static_cast<int64_t>(b) * c; ++pl) {
        const T* g = self.grad.data() + pl * 4 * h * w;
        T* d = p.grad.data() + pl * h * w;
        for (int y = 0; y < h; ++y)
          for (int xw = 0; xw < w; ++xw) {
            const T* g0 = g + (2 * y) * 2 * w + 2 * xw;
            d[y * w + xw] += g0[0] + g0[1] + g0[2 * w] + g0[2 * w + 1];
          }
      }
    };
  return Tensor<T>(n);
}

// [B,C1,H,W] ++ [B,C2,H,W] -> [B,C1+C2,H,W]
template <typename T>
Tensor<T> concat_channels(const Tensor<T>& a, const Tensor<T>& b) {
  if (a.rank() != 4 || b.rank() != 4 || a.dim(0) != b.dim(0) || a.dim(2) != b.dim(2) ||
      a.dim(3) != b.dim(3))
    shape_fail("concat_channels", a.shape(), b.shape());
  int bt = a.dim(0), c1 = a.dim(1), c2 = b.dim(1), h = a.dim(2), w = a.dim(3);
  int64_t hw = static_cast<int64_t>(h) * w;
  auto n = make_op_node<T>("concat_channels", {bt, c1 + c2, h, w}, {a, b});
  for (int bi = 0; bi < bt; ++bi) {
    std::copy_n(a.value().data() + static_cast<int64_t>(bi) * c1 * hw, c1 * hw,
                n->value.data() + static_cast<int64_t>(bi) * (c1 + c2) * hw);
    std::copy_n(b.value().data() + static_cast<int64_t>(bi) * c2 * hw, c2 * hw,
                n->value.data() + (static_cast<int64_t>(bi) * (c1 + c2) + c1) * hw);
  }
  if (n->needs_grad)
    n->backward = [bt, c1, c2, hw](auto& self) {
      auto& pa = *self.parents[0];
      auto& pb = *self.parents[1];
      if (pa.needs_grad) {
        pa.ensure_grad();
        for (int bi = 0; bi < bt; ++bi) {
          const T* g = self.grad.data() + static_cast<int64_t>(bi) * (c1 + c2) * hw;
          T* d = pa.grad.data() + static_cast<int64_t>(bi) * c1 * hw;
          for (int64_t i = 0; i < c1 * hw; ++i) d[i] += g[i];
        }
      }
      if (pb.needs_grad) {
        pb.ensure_grad();
        for (int bi = 0; bi < bt; ++bi) {
          const T* g = self.grad.data() + (static_cast<int64_t>(bi) * (c1 + c2) + c1) * hw;
          T* d = pb.grad.data() + static_cast<int64_t>(bi) * c2 * hw;
          for (int64_t i = 0; i < c2 * hw; ++i) d[i] += g[i];
        }
      }
    };
  return Tensor<T>(n);
}

// [N,C1] ++ [N,C2] -> [N,C1+C2]
template <typename T>
Tensor<T> concat_cols(const Tensor<T>& a, const Tensor<T>& b) {
  if (a.rank() != 2 || b.rank() != 2 || a.dim(0) != b.dim(0)) shape_fail("concat_cols", a.shape(), b.shape());
  int rows = a.dim(0), c1 = a.dim(1), c2 = b.dim(1);
  auto n = make_op_node<T>("concat_cols", {rows, c1 + c2}, {a, b});
  for (int r = 0; r < rows; ++r) {
    std::copy_n(a.value().data() + static_cast<int64_t>(r) * c1, c1,
                n->value.data() + static_cast<int64_t>(r) * (c1 + c2));
    std::copy_n(b.value().data() + static_cast<int64_t>(r) * c2, c2,
                n->value.data() + static_cast<int64_t>(r) * (c1 + c2) + c1);
  }
  if (n->needs_grad)
    n->backward = [rows, c1, c2](auto& self) {
      auto& pa = *self.parents[0];
      auto& pb = *self.parents[1];
      if (pa.needs_grad) pa.ensure_grad();
      if (pb.needs_grad) pb.ensure_grad();
      for (int r = 0; r < rows; ++r) {
        const T* g = self.grad.data() + static_cast<int64_t>(r) * (c1 + c2);
        if (pa.needs_grad)
          for (int i = 0; i < c1; ++i) pa.grad[static_cast<size_t>(r) * c1 + i] += g[i];
        if (pb.needs_grad)
          for (int i = 0; i < c2; ++i) pb.grad[static_cast<size_t>(r) * c2 + i] += g[i + c1];
      }
    };
  return Tensor<T>(n);
}

// contiguous row slice [r0, r0+rows) of a [R,C] tensor
template <typename T>
Tensor<T> rows_block(const Tensor<T>& x, int r0, int rows) {
  if (x.rank() != 2 || r0 < 0 || r0 + rows > x.dim(0))
    fail(ErrCode::shape_mismatch, "rows_block: range [" + std::to_string(r0) + "," +
                                      std::to_string(r0 + rows) + ") of " + shape_str(x.shape()));
  int c = x.dim(1);
  auto n = make_op_node<T>("rows_block", {rows, c}, {x});
  std::copy_n(x.value().data() + static_cast<int64_t>(r0) * c, static_cast<int64_t>(rows) * c,
              n->value.data());
  if (n->needs_grad)
    n->backward = [r0, rows, c](auto& self) {
      auto& p = *self.parents[0];
      if (!p.needs_grad) return;
      p.ensure_grad();
      T* d = p.grad.data() + static_cast<int64_t>(r0) * c;
      for (int64_t i = 0; i < static_cast<int64_t>(rows) * c; ++i) d[i] += self.grad[static_cast<size_t>(i)];
    };
  return Tensor<T>(n);
}

// column slice [c0, c0+len) of a [N,C] tensor
template <typename T>
Tensor<T> cols_block(const Tensor<T>& x, int c0, int len) {
  if (x.rank() != 2 || c0 < 0 || c0 + len > x.dim(1))
    fail(ErrCode::shape_mismatch, "cols_block: range [" + std::to_string(c0) + "," +
                                      std::to_string(c0 + len) + ") of " + shape_str(x.shape()));
  int rows = x.dim(0), c = x.dim(1);
  auto n = make_op_node<T>("cols_block", {rows, len}, {x});
  for (int r = 0; r < rows; ++r)
    std::copy_n(x.value().data() + static_cast<int64_t>(r) * c + c0, len,
                n->value.data() + static_cast<int64_t>(r) * len);
  if (n->needs_grad)
    n->backward = [rows, c, c0, len](auto& self) {
      auto& p = *self.parents[0];
      if (!p.needs_grad) return;
      p.ensure_grad();
      for (int r = 0; r < rows; ++r)
        for (int i = 0; i < len; ++i)
          p.grad[static_cast<size_t>(r) * c + c0 + i] += self.grad[static_cast<size_t>(r) * len + i];
    };
  return Tensor<T>(n);
}

// stacks T tensors of [N,C] into [T*N, C], slot t at rows [t*N,(t+1)*N)
template <typename T>
Tensor<T> stack_rows(const std::vector<Tensor<T>>& xs) {
  if (xs.empty()) fail(ErrCode::invalid_argument, "stack_rows: empty input");
  int rows = xs[0].dim(0), c = xs[0].dim(1);
  for (auto& x : xs)
    if (x.rank() != 2 || x.dim(0) != rows || x.dim(1) != c) shape_fail("stack_rows", xs[0].shape(), x.shape());
  auto n = make_op_node<T>("stack_rows", {static_cast<int>(xs.size()) * rows, c}, xs);
  for (size_t t = 0; t < xs.size(); ++t)
    std::copy_n(xs[t].value().data(), static_cast<int64_t>(rows) * c,
                n->value.data() + static_cast<int64_t>(t) * rows * c);
  if (n->needs_grad)
    n->backward = [rows, c](auto& self) {
      for (size_t t = 0; t < self.parents.size(); ++t) {
        auto& p = *self.parents[t];
        if (!p.needs_grad) continue;
        p.ensure_grad();
        const T* g = self.grad.data() + static_cast<int64_t>(t) * rows * c;
        for (int64_t i = 0; i < static_cast<int64_t>(rows) * c; ++i) p.grad[static_cast<size_t>(i)] += g[i];
      }
    };
  return Tensor<T>(n);
}

enum class GruAxis { horizontal, vertical };

// folds [B,C,H,W] into time-major [T*N, C]:
//   horizontal: T=W, N=B*H, row t*N + b*H + h <- x[b,c,h,t]
//   vertical:   T=H, N=B*W, row t*N + b*W + w <- x[b,c,t,w]
template <typename T>
Tensor<T> to_time_major(const Tensor<T>& x, GruAxis axis) {
  if (x.rank() != 4) fail(ErrCode::shape_mismatch, "to_time_major: expected rank-4, got " + shape_str(x.shape()));
  int b = x.dim(0), c = x.dim(1), h = x.dim(2), w = x.dim(3);
  bool horiz = axis == GruAxis::horizontal;
  int tsteps = horiz ? w : h;
  int nbatch = b * (horiz ? h : w);
  auto n = make_op_node<T>("to_time_major", {tsteps * nbatch, c}, {x});
  const T* xv = x.value().data();
  T* out = n->value.data();
  for (int bi = 0; bi < b; ++bi)
    for (int ci = 0; ci < c; ++ci) {
      const T* plane = xv + (static_cast<int64_t>(bi) * c + ci) * h * w;
      for (int y = 0; y < h; ++y)
        for (int xw = 0; xw < w; ++xw) {
          int t = horiz ? xw : y;
          int nn = horiz ? bi * h + y : bi * w + xw;
          out[(static_cast<int64_t>(t) * nbatch + nn) * c + ci] = plane[y * w + xw];
        }
    }
  if (n->needs_grad)
    n->backward = [b, c, h, w, horiz, nbatch](auto& self) {
      auto& p = *self.parents[0];
      if (!p.needs_grad) return;
      p.ensure_grad();
      for (int bi = 0; bi < b; ++bi)
        for (int ci = 0; ci < c; ++ci) {
          T* plane = p.grad.data() + (static_cast<int64_t>(bi) * c + ci) * h * w;
          for (int y = 0; y < h; ++y)
            for (int xw = 0; xw < w; ++xw) {
              int t = horiz ? xw : y;
              int nn = horiz ? bi * h + y : bi * w + xw;
              plane[y * w + xw] += self.grad[(static_cast<int64_t>(t) * nbatch + nn) * c + ci];
            }
        }
    };
  return Tensor<T>(n);
}

// inverse of to_time_major for channel count c' (may differ from input's)
template <typename T>
Tensor<T> from_time_major(const Tensor<T>& y, GruAxis axis, int b, int h, int w) {
  bool horiz = axis == GruAxis::horizontal;
  int tsteps = horiz ? w : h;
  int nbatch = b * (horiz ? h : w);
  if (y.rank() != 2 || y.dim(0) != tsteps * nbatch)
    fail(ErrCode::shape_mismatch, "from_time_major: rows " + shape_str(y.shape()) + " vs expected " +
                                      std::to_string(tsteps * nbatch));
  int c = y.dim(1);
  auto n = make_op_node<T>("from_time_major", {b, c, h, w}, {y});
  const T* yv = y.value().data();
  for (int bi = 0; bi < b; ++bi)
    for (int ci = 0; ci < c; ++ci) {
      T* plane = n->value.data() + (static_cast<int64_t>(bi) * c + ci) * h * w;
      for (int yy = 0; yy < h; ++yy)
        for (int xw = 0; xw < w; ++xw) {
          int t = horiz ? xw : yy;
          int nn = horiz ? bi * h + yy : bi * w + xw;
          plane[yy * w + xw] = yv[(static_cast<int64_t>(t) * nbatch + nn) * c + ci];
        }
    }
  if (n->needs_grad)
    n->backward = [b, h, w, horiz, nbatch](auto& self) {
      auto& p = *self.parents[0];
      if (!p.needs_grad) return;
      p.ensure_grad();
      int c = static_cast<int>(self.shape[1]);
      for (int bi = 0; bi < b; ++bi)
        for (int ci = 0; ci < c; ++ci) {
          const T* plane = self.grad.data() + (static_cast<int64_t>(bi) * c + ci) * h * w;
          for (int yy = 0; yy < h; ++yy)
            for (int xw = 0; xw < w; ++xw) {
              int t = horiz ? xw : yy;
              int nn = horiz ? bi * h + yy : bi * w + xw;
              p.grad[(static_cast<int64_t>(t) * nbatch + nn) * c + ci] += plane[yy * w + xw];
            }
        }
    };
  return Tensor<T>(n);
}

}  // namespace lc
