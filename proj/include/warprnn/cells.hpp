#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <vector>

#include "warprnn/numerics.hpp"
#include "warprnn/params.hpp"
#include "warprnn/rng.hpp"
#include "warprnn/tasks.hpp"

namespace warprnn {

// Per-sample recurrent state; c is used by the LSTM only (empty = zeros).
struct CellState {
  RealVector h;
  RealVector c;
};

// ---- single-sample step operations --------------------------------------------

namespace detail {
// Shared gate blend, used verbatim by leaky_step and gated_step so the
// constant-gate reduction (zero gate weights, b_g = leak logits) is
// bit-identical between the two families.
inline RealVector gate_blend(const RealVector& g, const RealVector& u,
                             const RealVector& h) {
  return (g.array() * u.array() + (1.0 - g.array()) * h.array()).matrix();
}

inline void check_state(const RealVector& h, Index n_h, const char* who) {
  check_config(h.size() == n_h,
               std::string(who) + ": state size does not match n_h");
}
}  // namespace detail

// h' = tanh(W_x x + W_h h + b)
inline CellState rnn_step(const RnnParams& p, const RealVector& x,
                          const CellState& s) {
  detail::check_state(s.h, p.n_h(), "rnn_step");
  return {tanh_act(affine(p.W_x, x, p.b) + p.W_h * s.h), {}};
}

// h'_i = alpha_i * tanh(pre)_i + (1-alpha_i) * h_i, alpha = sigmoid(a)
inline CellState leaky_step(const LeakyParams& p, const RealVector& x,
                            const CellState& s) {
  detail::check_state(s.h, p.n_h(), "leaky_step");
  const RealVector alpha = sigmoid(p.a);
  const RealVector u = tanh_act(affine(p.base.W_x, x, p.base.b) + p.base.W_h * s.h);
  return {detail::gate_blend(alpha, u, s.h), {}};
}

// g = sigmoid(W_gx x + W_gh h + b_g); h' = g*tanh(pre) + (1-g)*h
inline std::pair<CellState, RealVector> gated_step(const GatedParams& p,
                                                   const RealVector& x,
                                                   const CellState& s) {
  detail::check_state(s.h, p.n_h(), "gated_step");
  const RealVector g = sigmoid(affine(p.W_gx, x, p.b_g) + p.W_gh * s.h);
  const RealVector u = tanh_act(affine(p.base.W_x, x, p.base.b) + p.base.W_h * s.h);
  return {{detail::gate_blend(g, u, s.h), {}}, g};
}

// i,f,o = sigmoid(affines); c' = f*c + i*tanh(candidate); h' = o*tanh(c')
inline CellState lstm_step(const LstmParams& p, const RealVector& x,
                           const CellState& s) {
  detail::check_state(s.h, p.n_h(), "lstm_step");
  RealVector c = s.c;
  if (c.size() == 0) c = RealVector::Zero(p.n_h());
  detail::check_state(c, p.n_h(), "lstm_step (cell)");
  const RealVector i = sigmoid(affine(p.W_xi, x, p.b_i) + p.W_hi * s.h);
  const RealVector f = sigmoid(affine(p.W_xf, x, p.b_f) + p.W_hf * s.h);
  const RealVector z = tanh_act(affine(p.W_xc, x, p.b_c) + p.W_hc * s.h);
  const RealVector o = sigmoid(affine(p.W_xo, x, p.b_o) + p.W_ho * s.h);
  CellState out;
  out.c = (f.array() * c.array() + i.array() * z.array()).matrix();
  out.h = (o.array() * tanh_act(out.c).array()).matrix();
  return out;
}

inline RealVector readout_class(const ReadoutParams& p, const CellState& s) {
  return affine(p.W_out, s.h, p.b_out);
}

// ---- batched sequence engine ---------------------------------------------------
//
// Layout: batch rows, step-major stacks. Row (t*B + b) of an (L*B)-row stack
// belongs to timestep t, sample b. States are indexed 0..L with H_0 = 0;
// step t consumes x_t and H_t and produces H_{t+1}; the readout at step t is
// applied to H_{t+1}.
//
// The per-family gate stack holds, per step, the post-activation values the
// backward pass needs:
//   rnn:   1 block  (overwritten by the backward pass; h' lives in H_stack)
//   gated: 2 blocks [u | g]
//   lstm:  4 blocks [i | f | z | o]
// The leaky family runs through the gated engine with zero gate weights and
// b_g = leak logits (the constant-gate reduction, exact by construction);
// the gate-weight gradients it produces are discarded and db_g becomes da.

struct Tape {
  Arch arch = Arch::rnn;
  Index B = 0, L = 0, n_h = 0, n_x = 0, k = 0, gates = 1;

  // batch data
  RealMatrix X_all;                     // (L*B) x n_x
  std::vector<std::int32_t> tgt_flat;   // classification targets, (L*B)
  std::vector<std::uint8_t> mask_flat;  // (L*B)
  std::vector<double> add_tgt;          // adding targets, (B)
  std::vector<double> inv_mask_count;   // 1/n_mask per sample, (B)

  // forward caches
  RealMatrix H_stack;  // ((L+1)*B) x n_h
  RealMatrix C_stack;  // ((L+1)*B) x n_h (lstm)
  RealMatrix G_stack;  // (L*B) x gates*n_h
  RealMatrix logits;   // (L*B) x k
  RealMatrix d_logits; // (L*B) x k (scaled loss gradient, filled on forward)

  // backward workspace
  RealMatrix dS_stack;                     // (L*B) x gates*n_h
  RealMatrix dh_read;                      // (L*B) x n_h
  RealMatrix dh, carry, dc_total, scratch; // B x n_h

  // results
  double loss = 0.0;
  std::int64_t masked_total = 0;
  std::int64_t masked_correct = 0;
  bool has_grads = false;  // d_logits valid (forward ran with want_grads)

  // State H_t as recorded during the forward pass (t in 0..L).
  auto state(Index t) const { return H_stack.middleRows(t * B, B); }
};

namespace detail {

struct Packs {
  RealMatrix wx;  // (gates*n_h) x n_x
  RealMatrix wh;  // (gates*n_h) x n_h
  RealVector b;   // gates*n_h
};

inline Packs build_packs(const RnnParams& p) {
  return {p.W_x, p.W_h, p.b};
}

inline Packs build_packs(const GatedParams& p) {
  const Index n = p.n_h();
  Packs k;
  k.wx.resize(2 * n, p.n_x());
  k.wh.resize(2 * n, n);
  k.b.resize(2 * n);
  k.wx.topRows(n) = p.base.W_x;
  k.wx.bottomRows(n) = p.W_gx;
  k.wh.topRows(n) = p.base.W_h;
  k.wh.bottomRows(n) = p.W_gh;
  k.b.head(n) = p.base.b;
  k.b.tail(n) = p.b_g;
  return k;
}

inline Packs build_packs(const LstmParams& p) {
  const Index n = p.n_h();
  Packs k;
  k.wx.resize(4 * n, p.n_x());
  k.wh.resize(4 * n, n);
  k.b.resize(4 * n);
  const RealMatrix* wx[4] = {&p.W_xi, &p.W_xf, &p.W_xc, &p.W_xo};
  const RealMatrix* wh[4] = {&p.W_hi, &p.W_hf, &p.W_hc, &p.W_ho};
  const RealVector* b[4] = {&p.b_i, &p.b_f, &p.b_c, &p.b_o};
  for (Index g = 0; g < 4; ++g) {
    k.wx.middleRows(g * n, n) = *wx[g];
    k.wh.middleRows(g * n, n) = *wh[g];
    k.b.segment(g * n, n) = *b[g];
  }
  return k;
}

// The leaky cell as a gated cell with constant per-unit gates.
inline GatedParams as_gated(const LeakyParams& p) {
  GatedParams g;
  g.base = p.base;
  g.W_gx = RealMatrix::Zero(p.n_h(), p.n_x());
  g.W_gh = RealMatrix::Zero(p.n_h(), p.n_h());
  g.b_g = p.a;
  return g;
}

constexpr Index gate_blocks(Arch a) {
  switch (a) {
    case Arch::rnn: return 1;
    case Arch::leaky: return 2;  // runs through the gated engine
    case Arch::gated: return 2;
    case Arch::lstm: return 4;
  }
  return 1;
}

// Assemble the batch tensors shared by every family.
inline void load_batch(Tape& t, const std::vector<TaskSample>& batch,
                       Index n_h, Index n_x, Index k, Arch arch) {
  check_config(!batch.empty(), "sequence_forward: empty batch");
  const Index B = static_cast<Index>(batch.size());
  const Index L = static_cast<Index>(batch[0].length());
  check_config(L >= 1, "sequence_forward: empty sequence");
  const bool adding = batch[0].kind == TaskKind::adding;
  for (const TaskSample& s : batch) {
    check_config(static_cast<Index>(s.length()) == L,
                 "sequence_forward: ragged batch (lengths differ)");
    check_config((s.kind == TaskKind::adding) == adding,
                 "sequence_forward: mixed task kinds in one batch");
    check_config(s.mask.size() == s.length(),
                 "sequence_forward: mask length mismatch");
    check_config(s.mask_count() >= 1, "sequence_forward: empty mask");
  }
  check_config(adding ? (n_x == 2 && k == 1) : true,
               "sequence_forward: adding task expects n_x=2, k=1");

  const Index G = gate_blocks(arch);
  t.arch = arch;
  t.B = B; t.L = L; t.n_h = n_h; t.n_x = n_x; t.k = k; t.gates = G;
  t.X_all.resize(L * B, n_x);
  t.H_stack.resize((L + 1) * B, n_h);
  if (arch == Arch::lstm) t.C_stack.resize((L + 1) * B, n_h);
  t.G_stack.resize(L * B, G * n_h);
  t.logits.resize(L * B, k);
  t.d_logits.resize(L * B, k);
  t.tgt_flat.assign(static_cast<std::size_t>(L * B), 0);
  t.mask_flat.assign(static_cast<std::size_t>(L * B), 0);
  t.add_tgt.assign(static_cast<std::size_t>(B), 0.0);
  t.inv_mask_count.assign(static_cast<std::size_t>(B), 0.0);

  t.X_all.setZero();
  for (Index b = 0; b < B; ++b) {
    const TaskSample& s = batch[static_cast<std::size_t>(b)];
    t.inv_mask_count[static_cast<std::size_t>(b)] =
        1.0 / static_cast<double>(s.mask_count());
    if (adding) {
      t.add_tgt[static_cast<std::size_t>(b)] = s.target_sum;
      for (Index i = 0; i < L; ++i) {
        t.X_all(i * B + b, 0) = s.values[static_cast<std::size_t>(i)];
        t.X_all(i * B + b, 1) = s.markers[static_cast<std::size_t>(i)];
      }
    } else {
      for (Index i = 0; i < L; ++i) {
        const std::int32_t sym = s.inputs[static_cast<std::size_t>(i)];
        check_config(sym >= 0 && sym < n_x,
                     "sequence_forward: input symbol out of range");
        const std::int32_t tg = s.targets[static_cast<std::size_t>(i)];
        check_config(tg >= 0 && tg < k,
                     "sequence_forward: target symbol out of range");
        t.X_all(i * B + b, sym) = 1.0;
        t.tgt_flat[static_cast<std::size_t>(i * B + b)] = tg;
      }
    }
    for (Index i = 0; i < L; ++i)
      t.mask_flat[static_cast<std::size_t>(i * B + b)] =
          s.mask[static_cast<std::size_t>(i)];
  }
}

// Readout + per-step loss; fills logits, loss, accuracy counters, and (when
// want_grads) the scaled d_logits. Shared by all families.
inline void forward_loss(Tape& t, const ReadoutParams& ro, bool want_grads,
                         bool adding) {
  const Index B = t.B, L = t.L, k = t.k;
  t.logits.noalias() = t.H_stack.middleRows(B, L * B) * ro.W_out.transpose();
  t.logits.rowwise() += ro.b_out.transpose();
  if (want_grads) t.d_logits.setZero();

  // Compensated (Neumaier) accumulation: the finite-difference gradient
  // oracle divides a tiny loss difference by 2*eps, so summation rounding
  // here would otherwise dominate small gradient entries.
  double loss = 0.0, comp = 0.0;
  auto accumulate = [&loss, &comp](double v) {
    const double s = loss + v;
    if (std::abs(loss) >= std::abs(v))
      comp += (loss - s) + v;
    else
      comp += (v - s) + loss;
    loss = s;
  };
  t.masked_total = 0;
  t.masked_correct = 0;
  const double inv_B = 1.0 / static_cast<double>(B);
  for (Index i = 0; i < L; ++i) {
    for (Index b = 0; b < B; ++b) {
      const Index row = i * B + b;
      if (!t.mask_flat[static_cast<std::size_t>(row)]) continue;
      const double w = t.inv_mask_count[static_cast<std::size_t>(b)] * inv_B;
      if (adding) {
        const double diff =
            t.logits(row, 0) - t.add_tgt[static_cast<std::size_t>(b)];
        accumulate(w * diff * diff);
        if (want_grads) t.d_logits(row, 0) = w * 2.0 * diff;
      } else {
        const Index tgt = t.tgt_flat[static_cast<std::size_t>(row)];
        double* grow = want_grads ? t.d_logits.row(row).data() : nullptr;
        const double l =
            detail::xent_core(t.logits.row(row).data(), k, tgt, grow);
        accumulate(w * l);
        if (want_grads)
          for (Index j = 0; j < k; ++j) t.d_logits(row, j) *= w;
        ++t.masked_total;
        if (detail::argmax_row(t.logits.row(row).data(), k) == tgt)
          ++t.masked_correct;
      }
    }
  }
  if (adding) t.masked_total = -1;  // accuracy undefined
  t.loss = loss + comp;
  t.has_grads = want_grads;
  check_numeric(std::isfinite(loss), "sequence_forward: non-finite loss");
}

// ---- family-specific recurrences (forward) ----

inline void recur_forward_rnn(Tape& t, const Packs& pk) {
  const Index B = t.B;
  t.H_stack.topRows(B).setZero();
  for (Index i = 0; i < t.L; ++i) {
    auto pre = t.G_stack.middleRows(i * B, B);
    pre.noalias() += t.H_stack.middleRows(i * B, B) * pk.wh.transpose();
    t.H_stack.middleRows((i + 1) * B, B).array() = tanh_arr(pre.array());
  }
}

inline void recur_forward_gated(Tape& t, const Packs& pk) {
  const Index B = t.B, n = t.n_h;
  t.H_stack.topRows(B).setZero();
  for (Index i = 0; i < t.L; ++i) {
    auto pre = t.G_stack.middleRows(i * B, B);
    pre.noalias() += t.H_stack.middleRows(i * B, B) * pk.wh.transpose();
    auto u = pre.leftCols(n);
    auto g = pre.rightCols(n);
    u.array() = tanh_arr(u.array());
    g.array() = sigmoid_arr(g.array());
    auto h = t.H_stack.middleRows(i * B, B);
    t.H_stack.middleRows((i + 1) * B, B).array() =
        g.array() * u.array() + (1.0 - g.array()) * h.array();
  }
}

inline void recur_forward_lstm(Tape& t, const Packs& pk) {
  const Index B = t.B, n = t.n_h;
  t.H_stack.topRows(B).setZero();
  t.C_stack.topRows(B).setZero();
  for (Index ii = 0; ii < t.L; ++ii) {
    auto pre = t.G_stack.middleRows(ii * B, B);
    pre.noalias() += t.H_stack.middleRows(ii * B, B) * pk.wh.transpose();
    auto gi = pre.middleCols(0, n);
    auto gf = pre.middleCols(n, n);
    auto gz = pre.middleCols(2 * n, n);
    auto go = pre.middleCols(3 * n, n);
    gi.array() = sigmoid_arr(gi.array());
    gf.array() = sigmoid_arr(gf.array());
    gz.array() = tanh_arr(gz.array());
    go.array() = sigmoid_arr(go.array());
    auto c_prev = t.C_stack.middleRows(ii * B, B);
    auto c_new = t.C_stack.middleRows((ii + 1) * B, B);
    c_new.array() = gf.array() * c_prev.array() + gi.array() * gz.array();
    t.H_stack.middleRows((ii + 1) * B, B).array() =
        go.array() * tanh_arr(c_new.array());
  }
}

template <class P>
double forward_impl(const Network<P>& net, const std::vector<TaskSample>& batch,
                    Tape& t, bool want_grads, Arch arch) {
  load_batch(t, batch, net.n_h(), net.n_x(), net.k(), arch);
  const Packs pk = build_packs(net.cell);
  // Input contributions and biases for every step at once.
  t.G_stack.noalias() = t.X_all * pk.wx.transpose();
  t.G_stack.rowwise() += pk.b.transpose();
  if constexpr (std::is_same_v<P, RnnParams>) recur_forward_rnn(t, pk);
  if constexpr (std::is_same_v<P, GatedParams>) recur_forward_gated(t, pk);
  if constexpr (std::is_same_v<P, LstmParams>) recur_forward_lstm(t, pk);
  forward_loss(t, net.readout, want_grads,
               batch[0].kind == TaskKind::adding);
  return t.loss;
}

// ---- family-specific recurrences (backward) ----

template <class P>
void backward_impl(const Tape& tc, const Network<P>& net, Network<P>& grads) {
  Tape& t = const_cast<Tape&>(tc);  // scratch buffers only; caches are read-only
  const Index B = t.B, L = t.L, n = t.n_h;
  grads = zeros_like(net);
  const Packs pk = build_packs(net.cell);

  // Readout.
  grads.readout.W_out.noalias() =
      t.d_logits.transpose() * t.H_stack.middleRows(B, L * B);
  grads.readout.b_out = t.d_logits.colwise().sum().transpose();
  t.dh_read.resize(L * B, n);
  t.dh_read.noalias() = t.d_logits * net.readout.W_out;

  t.dS_stack.resize(L * B, t.gates * n);
  t.dh.resize(B, n);
  t.carry.resize(B, n);
  t.carry.setZero();
  if constexpr (std::is_same_v<P, LstmParams>) {
    t.dc_total.resize(B, n);
    t.scratch.resize(B, n);
    t.scratch.setZero();  // running dC carry
  }

  for (Index i = L - 1; i >= 0; --i) {
    t.dh = t.dh_read.middleRows(i * B, B) + t.carry;
    auto h_prev = t.H_stack.middleRows(i * B, B);
    auto dS = t.dS_stack.middleRows(i * B, B);

    if constexpr (std::is_same_v<P, RnnParams>) {
      auto h_new = t.H_stack.middleRows((i + 1) * B, B);
      dS.array() = t.dh.array() * (1.0 - h_new.array().square());
      t.carry.noalias() = dS * pk.wh;
    } else if constexpr (std::is_same_v<P, GatedParams>) {
      auto u = t.G_stack.middleRows(i * B, B).leftCols(n);
      auto g = t.G_stack.middleRows(i * B, B).rightCols(n);
      dS.leftCols(n).array() =
          (t.dh.array() * g.array()) * (1.0 - u.array().square());
      dS.rightCols(n).array() = (t.dh.array() * (u.array() - h_prev.array())) *
                                (g.array() * (1.0 - g.array()));
      t.carry.noalias() = dS * pk.wh;
      t.carry.array() += t.dh.array() * (1.0 - g.array());
    } else if constexpr (std::is_same_v<P, LstmParams>) {
      auto gi = t.G_stack.middleRows(i * B, B).middleCols(0, n);
      auto gf = t.G_stack.middleRows(i * B, B).middleCols(n, n);
      auto gz = t.G_stack.middleRows(i * B, B).middleCols(2 * n, n);
      auto go = t.G_stack.middleRows(i * B, B).middleCols(3 * n, n);
      auto c_prev = t.C_stack.middleRows(i * B, B);
      auto c_new = t.C_stack.middleRows((i + 1) * B, B);
      // dC_total = carried dC + dh*o*(1 - tanh(c)^2); tanh(c) recomputed.
      t.dc_total.array() =
          t.scratch.array() +
          t.dh.array() * go.array() *
              (1.0 - tanh_arr(c_new.array()).square());
      dS.middleCols(0, n).array() = (t.dc_total.array() * gz.array()) *
                                    (gi.array() * (1.0 - gi.array()));
      dS.middleCols(n, n).array() = (t.dc_total.array() * c_prev.array()) *
                                    (gf.array() * (1.0 - gf.array()));
      dS.middleCols(2 * n, n).array() =
          (t.dc_total.array() * gi.array()) * (1.0 - gz.array().square());
      dS.middleCols(3 * n, n).array() =
          (t.dh.array() * tanh_arr(c_new.array())) *
          (go.array() * (1.0 - go.array()));
      t.scratch.array() = t.dc_total.array() * gf.array();  // dC carry
      t.carry.noalias() = dS * pk.wh;
    }
  }

  // Weight/bias gradients from the stacked per-step pre-activation grads.
  RealMatrix dwx = t.dS_stack.transpose() * t.X_all;
  RealMatrix dwh = t.dS_stack.transpose() * t.H_stack.topRows(L * B);
  RealVector db = t.dS_stack.colwise().sum().transpose();

  if constexpr (std::is_same_v<P, RnnParams>) {
    grads.cell.W_x = dwx;
    grads.cell.W_h = dwh;
    grads.cell.b = db;
  } else if constexpr (std::is_same_v<P, GatedParams>) {
    grads.cell.base.W_x = dwx.topRows(n);
    grads.cell.base.W_h = dwh.topRows(n);
    grads.cell.base.b = db.head(n);
    grads.cell.W_gx = dwx.bottomRows(n);
    grads.cell.W_gh = dwh.bottomRows(n);
    grads.cell.b_g = db.tail(n);
  } else if constexpr (std::is_same_v<P, LstmParams>) {
    RealMatrix* wx[4] = {&grads.cell.W_xi, &grads.cell.W_xf, &grads.cell.W_xc,
                         &grads.cell.W_xo};
    RealMatrix* wh[4] = {&grads.cell.W_hi, &grads.cell.W_hf, &grads.cell.W_hc,
                         &grads.cell.W_ho};
    RealVector* bv[4] = {&grads.cell.b_i, &grads.cell.b_f, &grads.cell.b_c,
                         &grads.cell.b_o};
    for (Index g = 0; g < 4; ++g) {
      *wx[g] = dwx.middleRows(g * n, n);
      *wh[g] = dwh.middleRows(g * n, n);
      *bv[g] = db.segment(g * n, n);
    }
  }
}

}  // namespace detail

// Runs the cell over the whole batch of sequences from zero initial state,
// computing the masked mean loss (per-sample mean over masked steps, then
// mean over the batch; squared error for the adding task) and recording
// everything the backward pass needs. With want_grads the loss gradients
// w.r.t. the logits are cached in the tape as well.
inline double sequence_forward(const RnnNet& net,
                               const std::vector<TaskSample>& batch, Tape& t,
                               bool want_grads = true) {
  return detail::forward_impl(net, batch, t, want_grads, Arch::rnn);
}
inline double sequence_forward(const GatedNet& net,
                               const std::vector<TaskSample>& batch, Tape& t,
                               bool want_grads = true) {
  return detail::forward_impl(net, batch, t, want_grads, Arch::gated);
}
inline double sequence_forward(const LstmNet& net,
                               const std::vector<TaskSample>& batch, Tape& t,
                               bool want_grads = true) {
  return detail::forward_impl(net, batch, t, want_grads, Arch::lstm);
}
inline double sequence_forward(const LeakyNet& net,
                               const std::vector<TaskSample>& batch, Tape& t,
                               bool want_grads = true) {
  const GatedNet view{detail::as_gated(net.cell), net.readout};
  double loss = detail::forward_impl(view, batch, t, want_grads, Arch::gated);
  t.arch = Arch::leaky;
  return loss;
}

// Exact full-sequence gradient (no truncation) for every parameter,
// accumulated over timesteps and batch, written into `grads`.
inline void sequence_backward(const Tape& t, const RnnNet& net, RnnNet& grads) {
  check_config(t.arch == Arch::rnn && t.n_h == net.n_h() && t.n_x == net.n_x(),
               "sequence_backward: tape/params mismatch");
  check_config(t.has_grads,
               "sequence_backward: forward pass was run without gradients");
  detail::backward_impl(t, net, grads);
}
inline void sequence_backward(const Tape& t, const GatedNet& net,
                              GatedNet& grads) {
  check_config(t.arch == Arch::gated && t.n_h == net.n_h() && t.n_x == net.n_x(),
               "sequence_backward: tape/params mismatch");
  check_config(t.has_grads,
               "sequence_backward: forward pass was run without gradients");
  detail::backward_impl(t, net, grads);
}
inline void sequence_backward(const Tape& t, const LstmNet& net,
                              LstmNet& grads) {
  check_config(t.arch == Arch::lstm && t.n_h == net.n_h() && t.n_x == net.n_x(),
               "sequence_backward: tape/params mismatch");
  check_config(t.has_grads,
               "sequence_backward: forward pass was run without gradients");
  detail::backward_impl(t, net, grads);
}
inline void sequence_backward(const Tape& t, const LeakyNet& net,
                              LeakyNet& grads) {
  check_config(t.arch == Arch::leaky && t.n_h == net.n_h() && t.n_x == net.n_x(),
               "sequence_backward: tape/params mismatch");
  check_config(t.has_grads,
               "sequence_backward: forward pass was run without gradients");
  const GatedNet view{detail::as_gated(net.cell), net.readout};
  GatedNet gview = zeros_like(view);
  detail::backward_impl(t, view, gview);
  grads = zeros_like(net);
  grads.cell.base = gview.cell.base;
  grads.cell.a = gview.cell.b_g;  // alpha = sigmoid(a) <=> g = sigmoid(b_g)
  grads.readout = gview.readout;
}

// ---- finite-difference verification ------------------------------------------

struct FdReport {
  double max_rel_err = 0.0;
  Index worst_param = -1;
  std::string worst_block;
};

// Central finite differences over every parameter entry of `net` on a fixed
// batch; relative error |ga - gfd| / max(floor, |ga| + |gfd|).
template <class P>
FdReport fd_check(Network<P>& net, const std::vector<TaskSample>& batch,
                  double eps = 1e-5) {
  Tape tape;
  sequence_forward(net, batch, tape, true);
  Network<P> grads = zeros_like(net);
  sequence_backward(tape, net, grads);

  FdReport rep;
  ParamRefs prefs = net.spans();
  ParamRefs grefs = grads.spans();
  for (std::size_t s = 0; s < prefs.size(); ++s) {
    for (Index i = 0; i < prefs[s].size; ++i) {
      double& v = prefs[s].data[i];
      const double saved = v;
      v = saved + eps;
      const double vp = v;
      const double lp = sequence_forward(net, batch, tape, false);
      v = saved - eps;
      const double vm = v;
      const double lm = sequence_forward(net, batch, tape, false);
      v = saved;
      // Divide by the step that was actually realized after rounding saved+/-eps
      // (exact by Sterbenz), not the nominal 2*eps.
      const double g_fd = (lp - lm) / (vp - vm);
      const double g_an = grefs[s].data[i];
      check_numeric(std::isfinite(g_an) && std::isfinite(g_fd),
                    "fd_check: non-finite gradient");
      const double rel =
          std::abs(g_an - g_fd) / std::max(1e-8, std::abs(g_an) + std::abs(g_fd));
      if (rel > rep.max_rel_err) {
        rep.max_rel_err = rel;
        rep.worst_param = i;
        rep.worst_block = prefs[s].name;
      }
    }
  }
  return rep;
}

namespace detail {

// A central difference of a double-precision loss L ~ O(1) carries an absolute
// noise floor of roughly ulp(L)/(2*eps) ~ 2.5e-11 at eps = 1e-5: the two loss
// evaluations are each correct only to ~1 ulp, and the perturbation decorrelates
// their rounding.  A parameter whose gradient magnitude sits near that floor is
// therefore indistinguishable from roundoff by ANY finite-difference probe, no
// matter how the probe is computed.  Verification instances must couple every
// live parameter to the loss well above the floor: with the relative-error
// denominator |ga|+|gfd|, a 1e-4 verdict needs |g| >~ 1.3e-7, and 1e-6 leaves
// ~8x margin for batch-to-batch variation in the floor.
constexpr double kMinLiveGrad = 1e-6;

// Verification-instance construction for grad_check: random weights and biases
// over per-draw substreams, a random full-mask classification batch, redrawn
// until the minimum nonzero analytic gradient clears kMinLiveGrad.  Parameters
// with exactly zero analytic gradient are allowed: structural independence
// (e.g. an input column whose symbol never occurs) makes the finite difference
// exactly zero as well.  A gradient bug that silenced a whole block would
// reject every draw and surface as an error here instead of passing silently.
template <class Net>
double conditioned_fd_worst(Index n_h, Index seq_len, std::uint64_t seed) {
  constexpr Index kBatch = 2;
  constexpr Index kAlpha = 10;
  constexpr int kMaxDraws = 64;
  Rng rng(seed);

  for (int draw = 0; draw < kMaxDraws; ++draw) {
    Rng wrng = rng.derive(static_cast<std::uint64_t>(2 * draw));
    Rng drng = rng.derive(static_cast<std::uint64_t>(2 * draw + 1));

    Net net = Net::zeros(n_h, kAlpha, kAlpha);
    init_weights(net, wrng);
    for (ParamRef r : net.spans())  // biases too, to leave the symmetric point
      if (r.fan_in == 0)
        for (Index i = 0; i < r.size; ++i) r.data[i] = wrng.uniform(-0.5, 0.5);

    std::vector<TaskSample> batch;
    for (Index b = 0; b < kBatch; ++b) {
      TaskSample s;
      s.kind = TaskKind::warp;
      for (Index i = 0; i < seq_len; ++i) {
        s.inputs.push_back(static_cast<std::int32_t>(drng.uniform_int(0, kAlpha - 1)));
        s.targets.push_back(static_cast<std::int32_t>(drng.uniform_int(0, kAlpha - 1)));
      }
      s.mask.assign(static_cast<std::size_t>(seq_len), 1);
      batch.push_back(std::move(s));
    }

    Tape tape;
    sequence_forward(net, batch, tape, true);
    Net grads = zeros_like(net);
    sequence_backward(tape, net, grads);
    double min_live = std::numeric_limits<double>::infinity();
    for (ParamRef g : grads.spans())
      for (Index i = 0; i < g.size; ++i) {
        const double a = std::abs(g.data[i]);
        if (a > 0.0 && a < min_live) min_live = a;
      }
    if (std::isfinite(min_live) && min_live >= kMinLiveGrad)
      return fd_check(net, batch).max_rel_err;
  }
  throw NumericError(
      "grad_check: no well-conditioned instance after 64 draws; "
      "a parameter block appears decoupled from the loss");
}

}  // namespace detail

// Builds a randomized instance (random weights and biases, random
// classification batch of 2 sequences over a 10-symbol alphabet, redrawn until
// every live parameter's gradient clears the finite-difference noise floor)
// and returns the worst relative disagreement between analytic and
// central-difference gradients.
inline double grad_check(Arch arch, Index n_h, Index seq_len,
                         std::uint64_t seed) {
  check_config(n_h >= 1 && seq_len >= 1, "grad_check: sizes must be >= 1");
  switch (arch) {
    case Arch::rnn:
      return detail::conditioned_fd_worst<RnnNet>(n_h, seq_len, seed);
    case Arch::leaky:
      return detail::conditioned_fd_worst<LeakyNet>(n_h, seq_len, seed);
    case Arch::gated:
      return detail::conditioned_fd_worst<GatedNet>(n_h, seq_len, seed);
    case Arch::lstm:
      return detail::conditioned_fd_worst<LstmNet>(n_h, seq_len, seed);
  }
  throw ConfigError("grad_check: unknown architecture");
}

}  // namespace warprnn
