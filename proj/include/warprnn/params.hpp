#pragma once

#include <cmath>
#include <string>
#include <variant>
#include <vector>

#include "warprnn/numerics.hpp"

namespace warprnn {

// A named view over one parameter block. fan_in > 0 marks weight matrices
// (initialized uniform in +-1/sqrt(fan_in)); fan_in == 0 marks bias-like
// vectors (initialized to zero). The span order of each struct is its
// declaration order and also the draw order of init_weights, which pins
// reproducibility.
struct ParamRef {
  const char* name;
  double* data;
  Index size;
  Index fan_in;
};

using ParamRefs = std::vector<ParamRef>;

namespace detail {
inline ParamRef ref(const char* name, RealMatrix& m) {
  return {name, m.data(), m.size(), m.cols()};
}
inline ParamRef ref(const char* name, RealVector& v) {
  return {name, v.data(), v.size(), 0};
}
}  // namespace detail

// ---- cell parameter families -------------------------------------------------

// h' = tanh(W_x x + W_h h + b)
struct RnnParams {
  RealMatrix W_x;  // n_h x n_x
  RealMatrix W_h;  // n_h x n_h
  RealVector b;    // n_h

  static RnnParams zeros(Index n_h, Index n_x) {
    RnnParams p;
    p.W_x = RealMatrix::Zero(n_h, n_x);
    p.W_h = RealMatrix::Zero(n_h, n_h);
    p.b = RealVector::Zero(n_h);
    return p;
  }
  Index n_h() const { return W_h.rows(); }
  Index n_x() const { return W_x.cols(); }
  ParamRefs spans() {
    return {detail::ref("W_x", W_x), detail::ref("W_h", W_h),
            detail::ref("b", b)};
  }
};

// h' = alpha.*tanh(pre) + (1-alpha).*h with per-unit alpha = sigmoid(a)
struct LeakyParams {
  RnnParams base;
  RealVector a;  // n_h leak logits

  static LeakyParams zeros(Index n_h, Index n_x) {
    LeakyParams p;
    p.base = RnnParams::zeros(n_h, n_x);
    p.a = RealVector::Zero(n_h);
    return p;
  }
  Index n_h() const { return base.n_h(); }
  Index n_x() const { return base.n_x(); }
  ParamRefs spans() {
    ParamRefs r = base.spans();
    r.push_back(detail::ref("a", a));
    return r;
  }
};

// g = sigmoid(W_gx x + W_gh h + b_g); h' = g.*tanh(pre) + (1-g).*h
struct GatedParams {
  RnnParams base;
  RealMatrix W_gx;  // n_h x n_x
  RealMatrix W_gh;  // n_h x n_h
  RealVector b_g;   // n_h

  static GatedParams zeros(Index n_h, Index n_x) {
    GatedParams p;
    p.base = RnnParams::zeros(n_h, n_x);
    p.W_gx = RealMatrix::Zero(n_h, n_x);
    p.W_gh = RealMatrix::Zero(n_h, n_h);
    p.b_g = RealVector::Zero(n_h);
    return p;
  }
  Index n_h() const { return base.n_h(); }
  Index n_x() const { return base.n_x(); }
  ParamRefs spans() {
    ParamRefs r = base.spans();
    r.push_back(detail::ref("W_gx", W_gx));
    r.push_back(detail::ref("W_gh", W_gh));
    r.push_back(detail::ref("b_g", b_g));
    return r;
  }
};

// i,f,o = sigmoid(affines); c' = f.*c + i.*tanh(candidate); h' = o.*tanh(c')
struct LstmParams {
  RealMatrix W_xi, W_hi;
  RealMatrix W_xf, W_hf;
  RealMatrix W_xc, W_hc;
  RealMatrix W_xo, W_ho;
  RealVector b_i, b_f, b_c, b_o;

  static LstmParams zeros(Index n_h, Index n_x) {
    LstmParams p;
    for (RealMatrix* m : {&p.W_xi, &p.W_xf, &p.W_xc, &p.W_xo})
      *m = RealMatrix::Zero(n_h, n_x);
    for (RealMatrix* m : {&p.W_hi, &p.W_hf, &p.W_hc, &p.W_ho})
      *m = RealMatrix::Zero(n_h, n_h);
    for (RealVector* v : {&p.b_i, &p.b_f, &p.b_c, &p.b_o})
      *v = RealVector::Zero(n_h);
    return p;
  }
  Index n_h() const { return W_hi.rows(); }
  Index n_x() const { return W_xi.cols(); }
  ParamRefs spans() {
    return {detail::ref("W_xi", W_xi), detail::ref("W_hi", W_hi),
            detail::ref("W_xf", W_xf), detail::ref("W_hf", W_hf),
            detail::ref("W_xc", W_xc), detail::ref("W_hc", W_hc),
            detail::ref("W_xo", W_xo), detail::ref("W_ho", W_ho),
            detail::ref("b_i", b_i),   detail::ref("b_f", b_f),
            detail::ref("b_c", b_c),   detail::ref("b_o", b_o)};
  }
};

// Affine readout from hidden state to k logits (k=1 for scalar regression).
struct ReadoutParams {
  RealMatrix W_out;  // k x n_h
  RealVector b_out;  // k

  static ReadoutParams zeros(Index k, Index n_h) {
    ReadoutParams p;
    p.W_out = RealMatrix::Zero(k, n_h);
    p.b_out = RealVector::Zero(k);
    return p;
  }
  Index k() const { return W_out.rows(); }
  Index n_h() const { return W_out.cols(); }
  ParamRefs spans() {
    return {detail::ref("W_out", W_out), detail::ref("b_out", b_out)};
  }
};

// ---- whole-model aggregation --------------------------------------------------

enum class Arch { rnn, leaky, gated, lstm };

inline const char* arch_name(Arch a) {
  switch (a) {
    case Arch::rnn: return "rnn";
    case Arch::leaky: return "leaky";
    case Arch::gated: return "gated";
    case Arch::lstm: return "lstm";
  }
  return "?";
}

template <class CellP>
struct Network {
  CellP cell;
  ReadoutParams readout;

  static Network zeros(Index n_h, Index n_x, Index k) {
    return Network{CellP::zeros(n_h, n_x), ReadoutParams::zeros(k, n_h)};
  }
  Index n_h() const { return cell.n_h(); }
  Index n_x() const { return cell.n_x(); }
  Index k() const { return readout.k(); }
  ParamRefs spans() {
    ParamRefs r = cell.spans();
    for (ParamRef p : readout.spans()) r.push_back(p);
    return r;
  }
};

using RnnNet = Network<RnnParams>;
using LeakyNet = Network<LeakyParams>;
using GatedNet = Network<GatedParams>;
using LstmNet = Network<LstmParams>;
using AnyNet = std::variant<RnnNet, LeakyNet, GatedNet, LstmNet>;

// Variant alternatives are declared in Arch order.
inline Arch arch_of(const AnyNet& net) {
  return static_cast<Arch>(net.index());
}

// Same shapes, all entries zero (gradient buffers, optimizer accumulators).
template <class P>
P zeros_like(const P& src) {
  P out = src;
  for (ParamRef r : out.spans())
    for (Index i = 0; i < r.size; ++i) r.data[i] = 0.0;
  return out;
}

template <class P>
Index param_count(P& p) {
  Index n = 0;
  for (ParamRef r : p.spans()) n += r.size;
  return n;
}

// Weight matrices uniform in +-1/sqrt(fan_in); bias-like vectors zero (so the
// leak logits start at alpha = 0.5 and all gates at 0.5 before any gate-bias
// policy is applied). Draw order = span order.
template <class P>
void init_weights(P& p, Rng& rng) {
  for (ParamRef r : p.spans()) {
    if (r.fan_in > 0) {
      const double s = 1.0 / std::sqrt(static_cast<double>(r.fan_in));
      for (Index i = 0; i < r.size; ++i) r.data[i] = rng.uniform(-s, s);
    } else {
      for (Index i = 0; i < r.size; ++i) r.data[i] = 0.0;
    }
  }
}

inline AnyNet make_network(Arch arch, Index n_h, Index n_x, Index k, Rng& rng) {
  check_config(n_h >= 1 && n_x >= 1 && k >= 1, "make_network: sizes must be >= 1");
  AnyNet net = [&]() -> AnyNet {
    switch (arch) {
      case Arch::rnn: return RnnNet::zeros(n_h, n_x, k);
      case Arch::leaky: return LeakyNet::zeros(n_h, n_x, k);
      case Arch::gated: return GatedNet::zeros(n_h, n_x, k);
      case Arch::lstm: return LstmNet::zeros(n_h, n_x, k);
    }
    throw ConfigError("make_network: unknown architecture");
  }();
  std::visit([&](auto& n) { init_weights(n, rng); }, net);
  return net;
}

}  // namespace warprnn
