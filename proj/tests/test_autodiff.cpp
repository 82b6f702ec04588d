#include <doctest.h>

#include "test_util.hpp"
#include "visemeforge/autodiff.hpp"
#include "visemeforge/nn.hpp"
#include "visemeforge/rng.hpp"

using namespace vf;
using ad::Var;

namespace {

Tensor random_tensor(Rng& rng, std::vector<long> shape, double scale = 1.0) {
  Tensor t(std::move(shape));
  for (long i = 0; i < t.numel(); ++i) t[i] = scale * rng.normal();
  return t;
}

}  // namespace

TEST_CASE("elementwise and reduction gradients match finite differences") {
  Rng rng(11);
  nn::ParamSet ps;
  Var a = ps.add("a", random_tensor(rng, {3, 4}));
  Var b = ps.add("b", random_tensor(rng, {3, 4}));

  auto loss = [&] {
    using namespace ad;
    Var x = mul(add(a, b), sub(a, scale(b, 0.7)));
    x = add(tanh_(x), sigmoid(mul(a, b)));
    x = add(x, leaky_relu(sub(a, b), 0.2));
    return mean(x);
  };
  const auto r = vftest::finite_difference_gradcheck(ps, loss);
  CHECK(r.max_rel_err < 1e-6);
}

TEST_CASE("matmul/linear/concat/slice gradients") {
  Rng rng(3);
  nn::ParamSet ps;
  Var x = ps.add("x", random_tensor(rng, {2, 5}));
  Var w = ps.add("w", random_tensor(rng, {5, 4}, 0.5));
  Var b = ps.add("b", random_tensor(rng, {4}, 0.1));
  Var w2 = ps.add("w2", random_tensor(rng, {2, 3}, 0.5));

  auto loss = [&] {
    using namespace ad;
    Var h = relu(linear(x, w, b));                    // [2,4]
    Var parts = concat({slice(h, 1, 0, 2), slice(h, 1, 2, 2)}, 0);  // [4,2]
    Var y = matmul(parts, w2);                        // [4,3]
    return sum(abs_(y));
  };
  const auto r = vftest::finite_difference_gradcheck(ps, loss);
  CHECK(r.frac_ok == 1.0);
}

TEST_CASE("conv2d/upsample/spatial_mean gradients") {
  Rng rng(7);
  nn::ParamSet ps;
  Var x = ps.add("x", random_tensor(rng, {2, 2, 6, 6}));
  Var w1 = ps.add("w1", random_tensor(rng, {3, 2, 3, 3}, 0.4));
  Var b1 = ps.add("b1", random_tensor(rng, {3}, 0.1));
  Var w2 = ps.add("w2", random_tensor(rng, {2, 3, 3, 3}, 0.4));
  Var b2 = ps.add("b2", random_tensor(rng, {2}, 0.1));

  auto loss = [&] {
    using namespace ad;
    Var h = tanh_(conv2d(x, w1, b1, 2, 1));      // [2,3,3,3]
    h = upsample_nearest2x(h);                   // [2,3,6,6]
    h = sigmoid(conv2d(h, w2, b2, 1, 1));        // [2,2,6,6]
    return mean(spatial_mean(h));
  };
  const auto r = vftest::finite_difference_gradcheck(ps, loss);
  CHECK(r.max_rel_err < 1e-5);
}

TEST_CASE("asymmetric-stride conv (1-D style) gradients") {
  Rng rng(13);
  nn::ParamSet ps;
  Var x = ps.add("x", random_tensor(rng, {3, 1, 1, 20}));
  Var w = ps.add("w", random_tensor(rng, {4, 1, 1, 9}, 0.3));
  Var b = ps.add("b", random_tensor(rng, {4}, 0.1));

  auto loss = [&] {
    using namespace ad;
    return sum(tanh_(conv2d(x, w, b, 1, 4, 0, 4)));
  };
  const auto r = vftest::finite_difference_gradcheck(ps, loss);
  CHECK(r.max_rel_err < 1e-6);
}

TEST_CASE("GRU and BiLSTM gradients through time") {
  Rng rng(19);
  nn::ParamSet ps;
  Var seq = ps.add("seq", random_tensor(rng, {4, 3}));
  nn::GRU gru(ps, "gru", 3, 4, 2, rng);
  nn::BiLSTM lstm(ps, "lstm", 3, 3, rng);

  auto loss = [&] {
    using namespace ad;
    Var g = gru.run(seq);
    Var l = lstm.run(seq);
    return add(mean(g), sum(mul(l, l)));
  };
  const auto r = vftest::finite_difference_gradcheck(ps, loss, 1e-5, 1e-4);
  CHECK(r.frac_ok >= 0.99);
  CHECK(r.max_rel_err < 1e-3);
}

TEST_CASE("softmax cross entropy gradient and value") {
  Rng rng(23);
  nn::ParamSet ps;
  Var logits = ps.add("logits", random_tensor(rng, {1, 6}));

  auto loss = [&] { return ad::softmax_cross_entropy(logits, 2); };
  const auto r = vftest::finite_difference_gradcheck(ps, loss);
  CHECK(r.max_rel_err < 1e-6);

  // Uniform logits: loss equals log(K).
  Var uniform = ad::leaf(Tensor::zeros({1, 6}));
  CHECK(ad::softmax_cross_entropy(uniform, 3)->scalar() == doctest::Approx(std::log(6.0)));

  const Tensor p = ad::softmax(Tensor({3}, {1.0, 1.0, 1.0}));
  CHECK(p[0] == doctest::Approx(1.0 / 3.0));
}

TEST_CASE("clamp blocks gradient outside the active range") {
  nn::ParamSet ps;
  Var x = ps.add("x", Tensor({3}, {-2.0, 0.3, 2.0}));
  auto loss = [&] { return ad::sum(ad::clamp(x, 0.0, 1.0)); };
  ps.zero_grads();
  ad::backward(loss());
  const auto g = ps.grads_flat();
  CHECK(g[0] == 0.0);
  CHECK(g[1] == 1.0);
  CHECK(g[2] == 0.0);
}

TEST_CASE("log of non-positive raises domain error") {
  Var x = ad::leaf(Tensor({2}, {0.5, 0.0}));
  CHECK_THROWS_AS(ad::log_(x), DomainError);
}

TEST_CASE("backward accumulates across shared subexpressions") {
  nn::ParamSet ps;
  Var x = ps.add("x", Tensor::scalar(3.0));
  // y = x*x + x*x = 2x^2, dy/dx = 4x = 12
  Var sq = ad::mul(x, x);
  Var y = ad::add(sq, sq);
  ps.zero_grads();
  ad::backward(y);
  CHECK(x->grad[0] == doctest::Approx(12.0));
}

TEST_CASE("Adam step is deterministic and decreases a quadratic") {
  auto run = [](std::uint64_t seed) {
    Rng rng(seed);
    nn::ParamSet ps;
    Var x = ps.add("x", random_tensor(rng, {4}, 2.0));
    nn::Adam opt(0.05, 0.9, 0.999);
    double last = 0.0;
    for (int i = 0; i < 200; ++i) {
      ps.zero_grads();
      Var loss = ad::sum(ad::mul(x, x));
      ad::backward(loss);
      opt.step(ps.vars());
      last = loss->scalar();
    }
    return last;
  };
  const double a = run(5), b = run(5);
  CHECK(a == b);         // bitwise reproducible
  CHECK(a < 1e-2);       // converged toward the minimum
}
