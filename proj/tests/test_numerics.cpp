#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <set>

#include "warprnn/numerics.hpp"
#include "warprnn/rng.hpp"

using namespace warprnn;

// ---------------------------------------------------------------------------
// Seeded RNG
// ---------------------------------------------------------------------------

TEST_CASE("uniform draws stay inside the half-open interval") {
  Rng rng(123);
  for (int i = 0; i < 10000; ++i) {
    const double v = rng.uniform(-2.0, 3.0);
    REQUIRE(v >= -2.0);
    REQUIRE(v < 3.0);
  }
}

TEST_CASE("uniform with equal bounds returns the bound") {
  Rng rng(7);
  REQUIRE(rng.uniform(1.5, 1.5) == 1.5);
}

TEST_CASE("uniform with inverted bounds is rejected") {
  Rng rng(7);
  REQUIRE_THROWS_AS(rng.uniform(2.0, 1.0), ConfigError);
}

TEST_CASE("same seed reproduces the same stream") {
  Rng a(42), b(42);
  for (int i = 0; i < 100; ++i) REQUIRE(a.next_u64() == b.next_u64());
}

TEST_CASE("different seeds give different streams") {
  Rng a(1), b(2);
  int same = 0;
  for (int i = 0; i < 64; ++i) same += a.next_u64() == b.next_u64();
  REQUIRE(same == 0);
}

TEST_CASE("derived streams are independent of parent consumption") {
  Rng a(99);
  Rng d1 = a.derive(5);
  a.next_u64();
  a.next_u64();
  Rng d2 = a.derive(5);
  REQUIRE(d1.next_u64() == d2.next_u64());
}

TEST_CASE("distinct derivation indices give distinct streams") {
  Rng a(99);
  std::set<std::uint64_t> firsts;
  for (std::uint64_t s = 0; s < 32; ++s)
    firsts.insert(a.derive(s).next_u64());
  REQUIRE(firsts.size() == 32);
}

TEST_CASE("uniform draws have roughly the right mean") {
  Rng rng(2024);
  double sum = 0.0;
  const int n = 200000;
  for (int i = 0; i < n; ++i) sum += rng.uniform(0.0, 1.0);
  REQUIRE(std::abs(sum / n - 0.5) < 0.005);
}

TEST_CASE("integer draws cover the inclusive range uniformly") {
  Rng rng(5);
  std::set<std::int64_t> seen;
  int counts[6] = {0};
  const int n = 60000;
  for (int i = 0; i < n; ++i) {
    const std::int64_t v = rng.uniform_int(1, 6);
    REQUIRE(v >= 1);
    REQUIRE(v <= 6);
    seen.insert(v);
    ++counts[v - 1];
  }
  REQUIRE(seen.size() == 6);
  for (int c : counts) {
    REQUIRE(c > n / 6 - n / 60);
    REQUIRE(c < n / 6 + n / 60);
  }
}

TEST_CASE("integer draw with equal bounds returns the bound") {
  Rng rng(11);
  REQUIRE(rng.uniform_int(4, 4) == 4);
}

TEST_CASE("free-function draw wrappers match the member calls") {
  Rng a(77), b(77);
  REQUIRE(rng_uniform(a, 0.0, 2.0) == b.uniform(0.0, 2.0));
  REQUIRE(rng_uniform_int(a, -3, 9) == b.uniform_int(-3, 9));
}

// ---------------------------------------------------------------------------
// Dense kernels and activations
// ---------------------------------------------------------------------------

TEST_CASE("affine computes W x + b") {
  RealMatrix W(1, 2);
  W << 2.0, -1.0;
  RealVector x(2);
  x << 0.5, 0.25;
  RealVector b(1);
  b << 0.1;
  const RealVector y = affine(W, x, b);
  REQUIRE(y.size() == 1);
  REQUIRE(y[0] == Catch::Approx(0.85).margin(1e-15));
}

TEST_CASE("affine rejects mismatched shapes") {
  RealMatrix W(2, 3);
  W.setZero();
  RealVector x(2), b(2);
  x.setZero();
  b.setZero();
  REQUIRE_THROWS_AS(affine(W, x, b), ConfigError);
  RealVector x3(3), b1(1);
  x3.setZero();
  b1.setZero();
  REQUIRE_THROWS_AS(affine(W, x3, b1), ConfigError);
}

TEST_CASE("sigmoid hits its anchor values") {
  RealVector x(3);
  x << 0.0, std::log(3.0), -std::log(3.0);
  const RealVector y = sigmoid(x);
  REQUIRE(y[0] == Catch::Approx(0.5).margin(1e-15));
  REQUIRE(y[1] == Catch::Approx(0.75).margin(1e-12));
  REQUIRE(y[2] == Catch::Approx(0.25).margin(1e-12));
}

TEST_CASE("sigmoid is symmetric about one half") {
  Rng rng(3);
  for (int i = 0; i < 200; ++i) {
    const double v = rng.uniform(-30.0, 30.0);
    RealVector x(2);
    x << v, -v;
    const RealVector y = sigmoid(x);
    REQUIRE(y[0] + y[1] == Catch::Approx(1.0).margin(1e-12));
  }
}

TEST_CASE("tanh activation hits its anchor values") {
  RealVector x(2);
  x << 0.0, 0.5;
  const RealVector y = tanh_act(x);
  REQUIRE(y[0] == 0.0);
  REQUIRE(y[1] == Catch::Approx(0.46211715726000974).margin(1e-12));
}

TEST_CASE("tanh activation matches the reference function everywhere") {
  Rng rng(17);
  for (int i = 0; i < 2000; ++i) {
    const double v = rng.uniform(-40.0, 40.0);
    RealVector x(1);
    x << v;
    const double got = tanh_act(x)[0];
    const double want = std::tanh(v);
    REQUIRE(got == Catch::Approx(want).margin(2e-12));
    REQUIRE(std::abs(got) <= 1.0);
  }
}

TEST_CASE("saturated inputs keep activations finite") {
  RealVector x(4);
  x << 1e4, -1e4, 700.0, -700.0;
  const RealVector s = sigmoid(x);
  const RealVector t = tanh_act(x);
  for (int i = 0; i < 4; ++i) {
    REQUIRE(std::isfinite(s[i]));
    REQUIRE(std::isfinite(t[i]));
  }
  REQUIRE(s[0] == Catch::Approx(1.0));
  REQUIRE(s[1] == Catch::Approx(0.0).margin(1e-300));
  REQUIRE(t[0] == Catch::Approx(1.0));
  REQUIRE(t[1] == Catch::Approx(-1.0));
}

// ---------------------------------------------------------------------------
// Softmax cross-entropy
// ---------------------------------------------------------------------------

TEST_CASE("uniform logits over k classes cost log k") {
  RealVector z10 = RealVector::Zero(10);
  REQUIRE(softmax_xent(z10, 3).loss ==
          Catch::Approx(2.302585092994046).margin(1e-12));
  RealVector z8 = RealVector::Constant(8, 1.7);
  REQUIRE(softmax_xent(z8, 0).loss ==
          Catch::Approx(2.0794415416798357).margin(1e-12));
}

TEST_CASE("certain correct prediction costs nothing") {
  RealVector z(4);
  z << 100.0, 0.0, 0.0, 0.0;
  const XentResult r = softmax_xent(z, 0);
  REQUIRE(r.loss == Catch::Approx(0.0).margin(1e-12));
}

TEST_CASE("cross-entropy gradient is softmax minus one-hot") {
  RealVector z(3);
  z << 0.3, -1.2, 2.0;
  const XentResult r = softmax_xent(z, 1);
  double norm = 0.0;
  for (int i = 0; i < 3; ++i) norm += std::exp(z[i]);
  for (int i = 0; i < 3; ++i) {
    const double p = std::exp(z[i]) / norm;
    const double want = p - (i == 1 ? 1.0 : 0.0);
    REQUIRE(r.grad[i] == Catch::Approx(want).margin(1e-12));
  }
}

TEST_CASE("cross-entropy gradient sums to zero") {
  Rng rng(29);
  for (int trial = 0; trial < 100; ++trial) {
    RealVector z(7);
    for (int i = 0; i < 7; ++i) z[i] = rng.uniform(-5.0, 5.0);
    const XentResult r = softmax_xent(z, rng.uniform_int(0, 6));
    REQUIRE(r.grad.sum() == Catch::Approx(0.0).margin(1e-12));
    REQUIRE(r.loss >= 0.0);
  }
}

TEST_CASE("cross-entropy is finite for extreme logits") {
  RealVector z(3);
  z << 1000.0, -1000.0, 999.0;
  const XentResult r = softmax_xent(z, 1);
  REQUIRE(std::isfinite(r.loss));
  REQUIRE(r.grad.allFinite());
}

TEST_CASE("cross-entropy matches finite differences of the loss") {
  Rng rng(31);
  RealVector z(5);
  for (int i = 0; i < 5; ++i) z[i] = rng.uniform(-2.0, 2.0);
  const Index target = 2;
  const XentResult r = softmax_xent(z, target);
  const double eps = 1e-6;
  for (int i = 0; i < 5; ++i) {
    RealVector zp = z, zm = z;
    zp[i] += eps;
    zm[i] -= eps;
    const double fd =
        (softmax_xent(zp, target).loss - softmax_xent(zm, target).loss) /
        (2 * eps);
    REQUIRE(r.grad[i] == Catch::Approx(fd).margin(1e-8));
  }
}

TEST_CASE("out-of-range target is rejected") {
  RealVector z = RealVector::Zero(4);
  REQUIRE_THROWS_AS(softmax_xent(z, 4), ConfigError);
  REQUIRE_THROWS_AS(softmax_xent(z, -1), ConfigError);
}
