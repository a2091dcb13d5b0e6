#pragma once

#include "core/ops.hpp"

namespace lc {

// One direction's worth of GRU weights. Gate equations (update gate keeps
// previous state):
//   z = hard_sigmoid(W_z x + U_z h + b_z)
//   r = hard_sigmoid(W_r x + U_r h + b_r)
//   hcand = tanh(W_h x + U_h (r*h) + b_h)
//   h' = z*h + (1-z)*hcand
template <typename T>
struct GruCellParams {
  Tensor<T> w_z, w_r, w_h;  // [hidden, in]
  Tensor<T> u_z, u_r, u_h;  // [hidden, hidden]
  Tensor<T> b_z, b_r, b_h;  // [hidden]
};

namespace detail {
// recurrent core once the input projections (W x + b) are known
template <typename T>
Tensor<T> gru_core(const Tensor<T>& zin, const Tensor<T>& rin, const Tensor<T>& hin,
                   const Tensor<T>& h_prev, const GruCellParams<T>& p) {
  Tensor<T> none;
  auto z = activation(add(zin, linear(h_prev, p.u_z, none)), Act::hard_sigmoid);
  auto r = activation(add(rin, linear(h_prev, p.u_r, none)), Act::hard_sigmoid);
  auto hcand = activation(add(hin, linear(mul(r, h_prev), p.u_h, none)), Act::tanh);
  return add(mul(z, h_prev), mul(affine(z, T(-1), T(1)), hcand));
}
}  // namespace detail

template <typename T>
Tensor<T> gru_cell_step(const Tensor<T>& x_t, const Tensor<T>& h_prev, const GruCellParams<T>& p) {
  if (x_t.rank() != 2 || h_prev.rank() != 2 || x_t.dim(0) != h_prev.dim(0))
    shape_fail("gru_cell_step", x_t.shape(), h_prev.shape());
  return detail::gru_core(linear(x_t, p.w_z, p.b_z), linear(x_t, p.w_r, p.b_r),
                          linear(x_t, p.w_h, p.b_h), h_prev, p);
}

struct SpatialGruConfig {
  GruAxis axis = GruAxis::horizontal;
  bool bidirectional = true;
  int hidden_channels = 64;
};

namespace detail {
// unrolls one direction over t; input projections are precomputed for the
// whole sequence in three GEMMs, only the recurrence runs per step
template <typename T>
std::vector<Tensor<T>> gru_direction(const Tensor<T>& x_tm, int tsteps, int nbatch,
                                     const GruCellParams<T>& p, bool reverse) {
  auto gz = linear(x_tm, p.w_z, p.b_z);
  auto gr = linear(x_tm, p.w_r, p.b_r);
  auto gh = linear(x_tm, p.w_h, p.b_h);
  int hidden = p.w_z.dim(0);
  Tensor<T> h = Tensor<T>::zeros({nbatch, hidden});
  std::vector<Tensor<T>> out(static_cast<size_t>(tsteps));
  for (int i = 0; i < tsteps; ++i) {
    int t = reverse ? tsteps - 1 - i : i;
    h = gru_core(rows_block(gz, t * nbatch, nbatch), rows_block(gr, t * nbatch, nbatch),
                 rows_block(gh, t * nbatch, nbatch), h, p);
    out[static_cast<size_t>(t)] = h;
  }
  return out;
}
}  // namespace detail

// GRU recurrence across one spatial axis of [B,C,H,W]: the chosen axis is
// time, everything else folds into the batch. Output channels are
// hidden_channels, doubled by forward/backward concatenation when
// bidirectional.
template <typename T>
Tensor<T> spatial_gru(const Tensor<T>& input, const SpatialGruConfig& cfg,
                      const GruCellParams<T>& fwd,
                      const GruCellParams<std::type_identity_t<T>>* bwd = nullptr) {
  if (input.rank() != 4) fail(ErrCode::shape_mismatch, "spatial_gru: expected rank-4, got " + shape_str(input.shape()));
  if (cfg.bidirectional && !bwd) fail(ErrCode::invalid_argument, "spatial_gru: bidirectional needs backward params");
  int b = input.dim(0), h = input.dim(2), w = input.dim(3);
  bool horiz = cfg.axis == GruAxis::horizontal;
  int tsteps = horiz ? w : h;
  int nbatch = b * (horiz ? h : w);

  auto x_tm = to_time_major(input, cfg.axis);
  auto hf = detail::gru_direction(x_tm, tsteps, nbatch, fwd, false);
  if (!cfg.bidirectional) return from_time_major(stack_rows(hf), cfg.axis, b, h, w);

  auto hb = detail::gru_direction(x_tm, tsteps, nbatch, *bwd, true);
  std::vector<Tensor<T>> merged(static_cast<size_t>(tsteps));
  for (int t = 0; t < tsteps; ++t)
    merged[static_cast<size_t>(t)] = concat_cols(hf[static_cast<size_t>(t)], hb[static_cast<size_t>(t)]);
  return from_time_major(stack_rows(merged), cfg.axis, b, h, w);
}

}  // namespace lc
