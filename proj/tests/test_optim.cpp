#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <vector>

#include "warprnn/optim.hpp"
#include "warprnn/params.hpp"
#include "warprnn/rng.hpp"

using namespace warprnn;

namespace {

// Smallest network shape that exercises every span kind.
RnnNet unit_net(double value) {
  RnnNet net = RnnNet::zeros(1, 1, 1);
  net.cell.W_x(0, 0) = value;
  return net;
}

RnnNet grad_like(const RnnNet& net, double g) {
  RnnNet grads = zeros_like(net);
  grads.cell.W_x(0, 0) = g;
  return grads;
}

}  // namespace

// ---- RMSprop update rule ---------------------------------------------------------

TEST_CASE("rmsprop first step matches the hand-computed update") {
  RnnNet net = unit_net(1.0);
  auto state = RmsPropState<RnnNet>::fresh(net, 1e-3, 0.9, 1e-8);
  RnnNet grads = grad_like(net, 1.0);

  rmsprop_step(state, net, grads);
  // s = (1-0.9)*1^2; theta = 1 - 1e-3/sqrt(s + 1e-8), evaluated in doubles
  REQUIRE(state.s.cell.W_x(0, 0) == 0.09999999999999998);
  REQUIRE_THAT(net.cell.W_x(0, 0),
               Catch::Matchers::WithinULP(0.9968377224979454, 2));

  grads = grad_like(net, 1.0);
  rmsprop_step(state, net, grads);
  // s = 0.9*s + (1-0.9)*1^2
  REQUIRE(state.s.cell.W_x(0, 0) == 0.18999999999999995);
  REQUIRE_THAT(net.cell.W_x(0, 0),
               Catch::Matchers::WithinULP(0.9945435652196124, 4));
}

TEST_CASE("rmsprop handles negative gradients and other hyperparameters") {
  RnnNet net = unit_net(0.0);
  auto state = RmsPropState<RnnNet>::fresh(net, 0.1, 0.5, 1e-8);
  RnnNet grads = grad_like(net, -3.0);
  rmsprop_step(state, net, grads);
  // s = 0.5*9 = 4.5; theta = 0 + 0.1*3/sqrt(4.5 + 1e-8)
  REQUIRE(state.s.cell.W_x(0, 0) == 4.5);
  REQUIRE_THAT(net.cell.W_x(0, 0),
               Catch::Matchers::WithinULP(0.1414213560801747, 2));
}

TEST_CASE("rmsprop leaves parameters with zero gradient untouched") {
  RnnNet net = unit_net(0.7);
  net.cell.b[0] = -0.3;
  auto state = RmsPropState<RnnNet>::fresh(net, 1e-3, 0.9, 1e-8);
  RnnNet grads = grad_like(net, 1.0);  // gradient only on W_x
  rmsprop_step(state, net, grads);
  REQUIRE(net.cell.b[0] == -0.3);
  REQUIRE(net.cell.W_h(0, 0) == 0.0);
  REQUIRE(net.readout.b_out[0] == 0.0);
  REQUIRE(net.cell.W_x(0, 0) != 0.7);
}

TEST_CASE("rmsprop normalizes step size by gradient magnitude") {
  // With accumulated s ~ g^2 the step approaches lr * sign(g) regardless of
  // |g|; two parameters with gradients 1e-6 and 1e+3 move almost equally.
  RnnNet net = RnnNet::zeros(2, 1, 1);
  auto state = RmsPropState<RnnNet>::fresh(net, 1e-3, 0.9, 1e-18);
  for (int it = 0; it < 200; ++it) {
    RnnNet grads = zeros_like(net);
    grads.cell.b[0] = 1e-6;
    grads.cell.b[1] = 1e+3;
    rmsprop_step(state, net, grads);
  }
  const double step0 = -net.cell.b[0] / 200.0;
  const double step1 = -net.cell.b[1] / 200.0;
  REQUIRE_THAT(step0 / step1, Catch::Matchers::WithinAbs(1.0, 0.05));
  REQUIRE_THAT(step1, Catch::Matchers::WithinAbs(1e-3, 1e-4));
}

TEST_CASE("rmsprop descends a quadratic bowl") {
  RnnNet net = RnnNet::zeros(4, 3, 2);
  Rng rng(8);
  init_weights(net, rng);
  auto norm2 = [&]() {
    double n = 0.0;
    for (ParamRef r : net.spans())
      for (Index i = 0; i < r.size; ++i) n += r.data[i] * r.data[i];
    return n;
  };
  const double start = norm2();
  auto state = RmsPropState<RnnNet>::fresh(net, 1e-2, 0.9, 1e-8);
  for (int it = 0; it < 300; ++it) {
    RnnNet grads = net;  // gradient of 0.5*|theta|^2 is theta itself
    rmsprop_step(state, net, grads);
  }
  REQUIRE(norm2() < 0.05 * start);
}

TEST_CASE("rmsprop validates hyperparameters and shapes") {
  RnnNet net = unit_net(1.0);
  REQUIRE_THROWS_AS(RmsPropState<RnnNet>::fresh(net, 0.0, 0.9, 1e-8), ConfigError);
  REQUIRE_THROWS_AS(RmsPropState<RnnNet>::fresh(net, -1.0, 0.9, 1e-8), ConfigError);
  REQUIRE_THROWS_AS(RmsPropState<RnnNet>::fresh(net, 1e-3, 1.0, 1e-8), ConfigError);
  REQUIRE_THROWS_AS(RmsPropState<RnnNet>::fresh(net, 1e-3, -0.1, 1e-8), ConfigError);
  REQUIRE_THROWS_AS(RmsPropState<RnnNet>::fresh(net, 1e-3, 0.9, 0.0), ConfigError);

  auto state = RmsPropState<RnnNet>::fresh(net, 1e-3, 0.9, 1e-8);
  RnnNet wrong = RnnNet::zeros(2, 1, 1);  // mismatched shape
  REQUIRE_THROWS_AS(rmsprop_step(state, net, wrong), ConfigError);
}

TEST_CASE("a non-finite gradient aborts the step and names the block") {
  RnnNet net = unit_net(1.0);
  auto state = RmsPropState<RnnNet>::fresh(net, 1e-3, 0.9, 1e-8);
  RnnNet grads = grad_like(net, 1.0);
  grads.cell.W_h(0, 0) = std::numeric_limits<double>::quiet_NaN();
  REQUIRE_THROWS_WITH(rmsprop_step(state, net, grads),
                      Catch::Matchers::ContainsSubstring("W_h"));
  grads.cell.W_h(0, 0) = std::numeric_limits<double>::infinity();
  REQUIRE_THROWS_AS(rmsprop_step(state, net, grads), NumericError);
}

// ---- evaluation-driven halving schedule ------------------------------------------

TEST_CASE("the schedule halves after patience evaluations without improvement") {
  LrSchedule sched;
  sched.patience = 2;
  double lr = 1.0;

  REQUIRE_FALSE(sched.update_lr(1.0, lr));  // first eval becomes the best
  REQUIRE_FALSE(sched.update_lr(0.9, lr));  // improvement resets
  REQUIRE_FALSE(sched.update_lr(0.95, lr));  // stall 1
  REQUIRE(sched.update_lr(0.95, lr));        // stall 2 -> halve
  REQUIRE(lr == 0.5);
  REQUIRE(sched.since_best == 0);

  REQUIRE_FALSE(sched.update_lr(0.8, lr));  // fresh improvement
  REQUIRE_FALSE(sched.update_lr(0.9, lr));
  REQUIRE(sched.update_lr(0.9, lr));
  REQUIRE(lr == 0.25);
}

TEST_CASE("equal loss does not count as improvement") {
  LrSchedule sched;
  sched.patience = 1;
  double lr = 8.0;
  REQUIRE_FALSE(sched.update_lr(0.5, lr));
  REQUIRE(sched.update_lr(0.5, lr));  // tie -> stall -> halve at patience 1
  REQUIRE(lr == 4.0);
  REQUIRE(sched.update_lr(0.5, lr));
  REQUIRE(lr == 2.0);
  REQUIRE_FALSE(sched.update_lr(0.25, lr));
  REQUIRE(lr == 2.0);
}

TEST_CASE("the schedule tracks the best loss across halvings") {
  LrSchedule sched;
  sched.patience = 3;
  double lr = 1.0;
  sched.update_lr(0.10, lr);
  sched.update_lr(0.20, lr);
  sched.update_lr(0.11, lr);
  REQUIRE(sched.best_eval == 0.10);
  REQUIRE(sched.since_best == 2);
  sched.update_lr(0.09, lr);  // new best
  REQUIRE(sched.best_eval == 0.09);
  REQUIRE(sched.since_best == 0);
  REQUIRE(lr == 1.0);
}

TEST_CASE("the schedule updates the optimizer state in place") {
  RnnNet net = unit_net(1.0);
  auto state = RmsPropState<RnnNet>::fresh(net, 1e-3, 0.9, 1e-8);
  LrSchedule sched;
  sched.patience = 1;
  REQUIRE_FALSE(sched.update(0.5, state));
  REQUIRE(sched.update(0.6, state));
  REQUIRE(state.lr == 5e-4);
  REQUIRE_THROWS_AS(sched.update(std::nan(""), state), ConfigError);
}

TEST_CASE("a long stall produces repeated halvings at the right cadence") {
  LrSchedule sched;
  sched.patience = 100;
  double lr = 1e-3;
  int halvings_at[2] = {0, 0};
  int n_halved = 0;
  sched.update_lr(0.5, lr);  // set best
  for (int ev = 1; ev <= 202 && n_halved < 2; ++ev) {
    if (sched.update_lr(0.5, lr)) halvings_at[n_halved++] = ev;
  }
  REQUIRE(n_halved == 2);
  REQUIRE(halvings_at[0] == 100);
  REQUIRE(halvings_at[1] == 200);
  REQUIRE(lr == 0.25e-3);
}
