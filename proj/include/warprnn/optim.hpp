#pragma once

#include <cmath>
#include <cstdint>
#include <limits>
#include <string>

#include "warprnn/params.hpp"

namespace warprnn {

// Plain (uncentered) RMSprop: s <- rho*s + (1-rho)*g^2;
// theta <- theta - lr * g / sqrt(s + eps). No gradient clipping — a
// non-finite gradient aborts the step with a diagnostic instead.
template <class NetT>
struct RmsPropState {
  double lr = 1e-3;
  double rho = 0.9;
  double eps = 1e-8;
  NetT s;  // squared-gradient moving averages, same shapes as the parameters

  static RmsPropState fresh(const NetT& net, double lr, double rho, double eps) {
    check_config(lr > 0.0, "rmsprop: lr must be > 0");
    check_config(rho >= 0.0 && rho < 1.0, "rmsprop: rho must be in [0,1)");
    check_config(eps > 0.0, "rmsprop: eps must be > 0");
    return RmsPropState{lr, rho, eps, zeros_like(net)};
  }
};

template <class NetT>
void rmsprop_step(RmsPropState<NetT>& state, NetT& params, NetT& grads) {
  ParamRefs p = params.spans();
  ParamRefs g = grads.spans();
  ParamRefs s = state.s.spans();
  for (std::size_t blk = 0; blk < p.size(); ++blk) {
    check_config(p[blk].size == g[blk].size && p[blk].size == s[blk].size,
                 "rmsprop_step: parameter/gradient shape mismatch");
    double* pv = p[blk].data;
    double* gv = g[blk].data;
    double* sv = s[blk].data;
    for (Index i = 0; i < p[blk].size; ++i) {
      const double gi = gv[i];
      if (!std::isfinite(gi))
        throw NumericError(std::string("rmsprop_step: non-finite gradient in ") +
                           p[blk].name);
      sv[i] = state.rho * sv[i] + (1.0 - state.rho) * gi * gi;
      pv[i] -= state.lr * gi / std::sqrt(sv[i] + state.eps);
    }
  }
}

// Evaluation-driven halving schedule: each evaluation point either improves
// on the best loss seen (resetting the counter) or increments it; when the
// counter reaches `patience`, the learning rate is halved and the counter
// resets.
struct LrSchedule {
  std::int64_t patience = 100;
  double best_eval = std::numeric_limits<double>::infinity();
  std::int64_t since_best = 0;

  // Returns true when this update halved the learning rate.
  template <class NetT>
  bool update(double eval_loss, RmsPropState<NetT>& state) {
    return update_lr(eval_loss, state.lr);
  }

  bool update_lr(double eval_loss, double& lr) {
    check_config(std::isfinite(eval_loss),
                 "schedule_update: eval loss must be finite");
    if (eval_loss < best_eval) {
      best_eval = eval_loss;
      since_best = 0;
      return false;
    }
    ++since_best;
    if (since_best >= patience) {
      lr /= 2.0;
      since_best = 0;
      return true;
    }
    return false;
  }
};

}  // namespace warprnn
