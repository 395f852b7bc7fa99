#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>
#include <limits>

#include "bemopt/ad/adam.hpp"
#include "bemopt/ad/checkpoint.hpp"
#include "bemopt/ad/gradcheck.hpp"
#include "bemopt/ad/ops.hpp"
#include "bemopt/core/rng.hpp"

using namespace bemopt;
using namespace bemopt::ad;

namespace {

Parameter random_parameter(const std::string& name, Shape shape, Rng& rng, double lo = -1, double hi = 1) {
  Tensor t(std::move(shape));
  for (double& v : t.values()) v = rng.uniform(lo, hi);
  return {name, std::move(t), true};
}

// Scalar probe sum(w .* y) with fixed random weights, so every output entry matters.
Var probe(Graph& g, const Var& y, std::uint64_t seed) {
  Rng rng(seed);
  Tensor w(y.shape());
  for (double& v : w.values()) v = rng.uniform(-1, 1);
  return sum(mul(y, g.constant(std::move(w))));
}

template <typename F>
double check(F&& f, std::vector<Parameter*> params) {
  return grad_check(std::forward<F>(f), params).max_relative_error;
}

}  // namespace

TEST(Softmax, ReferenceValues) {
  Graph g(false);
  const Var y = softmax(g.constant(Tensor({3}, {1, 2, 3})));
  EXPECT_NEAR(y.value()[0], 0.09003057317038046, 1e-15);
  EXPECT_NEAR(y.value()[1], 0.24472847105479767, 1e-15);
  EXPECT_NEAR(y.value()[2], 0.6652409557748219, 1e-15);
}

TEST(Softmax, RowsSumToOneAndLargeScoresAreStable) {
  Graph g(false);
  const Var y = softmax(g.constant(Tensor({2, 3}, {1000, 1001, 1002, -5, 0, 5})));
  for (std::size_t r = 0; r < 2; ++r) {
    double s = 0;
    for (std::size_t c = 0; c < 3; ++c) s += y.value()(r, c);
    EXPECT_NEAR(s, 1.0, 1e-12);
  }
  EXPECT_NEAR(y.value()(0, 2), 0.6652409557748219, 1e-12);
  const Var cols = softmax(g.constant(Tensor({3, 1}, {1, 2, 3})), 0);
  EXPECT_NEAR(cols.value()(2, 0), 0.6652409557748219, 1e-15);
}

TEST(GradCheck, ElementwiseOps) {
  Rng rng(1);
  Parameter a = random_parameter("a", {3, 4}, rng), b = random_parameter("b", {3, 4}, rng);
  Parameter pos = random_parameter("pos", {3, 4}, rng, 0.5, 2.0);
  EXPECT_LT(check([&](Graph& g) { return probe(g, add(g.parameter(a), g.parameter(b)), 1); }, {&a, &b}), 1e-7);
  EXPECT_LT(check([&](Graph& g) { return probe(g, sub(g.parameter(a), g.parameter(b)), 2); }, {&a, &b}), 1e-7);
  EXPECT_LT(check([&](Graph& g) { return probe(g, mul(g.parameter(a), g.parameter(b)), 3); }, {&a, &b}), 1e-7);
  EXPECT_LT(check([&](Graph& g) { return probe(g, scale(g.parameter(a), -2.5), 4); }, {&a}), 1e-7);
  EXPECT_LT(check([&](Graph& g) { return probe(g, square(g.parameter(a)), 5); }, {&a}), 1e-7);
  EXPECT_LT(check([&](Graph& g) { return probe(g, sqrt(g.parameter(pos)), 6); }, {&pos}), 1e-7);
  EXPECT_LT(check([&](Graph& g) { return probe(g, log1p(g.parameter(pos)), 7); }, {&pos}), 1e-7);
  EXPECT_LT(check([&](Graph& g) { return mean(g.parameter(a)); }, {&a}), 1e-7);
}

TEST(GradCheck, ReluAwayFromKink) {
  Rng rng(2);
  Parameter a = random_parameter("a", {4, 5}, rng);
  for (double& v : a.value.values())
    if (std::abs(v) < 0.05) v = 0.3;
  EXPECT_LT(check([&](Graph& g) { return probe(g, relu(g.parameter(a)), 8); }, {&a}), 1e-7);
}

TEST(GradCheck, MatmulBiasAndReshaping) {
  Rng rng(3);
  Parameter x = random_parameter("x", {5, 3}, rng), w = random_parameter("w", {3, 4}, rng);
  Parameter bias = random_parameter("bias", {4}, rng);
  EXPECT_LT(check([&](Graph& g) { return probe(g, add_bias(matmul(g.parameter(x), g.parameter(w)), g.parameter(bias)), 9); },
                  {&x, &w, &bias}),
            1e-7);
  Parameter y = random_parameter("y", {5, 2}, rng);
  EXPECT_LT(check([&](Graph& g) { return probe(g, concat({g.parameter(x), g.parameter(y)}, 1), 10); }, {&x, &y}), 1e-7);
  Parameter z = random_parameter("z", {2, 3}, rng);
  EXPECT_LT(check([&](Graph& g) { return probe(g, concat({g.parameter(x), g.parameter(z)}, 0), 11); }, {&x, &z}), 1e-7);
  EXPECT_LT(check([&](Graph& g) { return probe(g, slice(g.parameter(x), 1, 1, 3), 12); }, {&x}), 1e-7);
  EXPECT_LT(check([&](Graph& g) { return probe(g, slice(g.parameter(x), 0, 2, 4), 13); }, {&x}), 1e-7);
}

TEST(GradCheck, SoftmaxAndLayerNorm) {
  Rng rng(4);
  Parameter a = random_parameter("a", {3, 5}, rng, -2, 2);
  EXPECT_LT(check([&](Graph& g) { return probe(g, softmax(g.parameter(a)), 14); }, {&a}), 1e-7);
  EXPECT_LT(check([&](Graph& g) { return probe(g, softmax(g.parameter(a), 0), 15); }, {&a}), 1e-7);
  Parameter gain = random_parameter("gain", {5}, rng, 0.5, 1.5), bias = random_parameter("bias", {5}, rng);
  EXPECT_LT(check([&](Graph& g) { return probe(g, layer_norm(g.parameter(a), g.parameter(gain), g.parameter(bias)), 16); },
                  {&a, &gain, &bias}),
            1e-6);
}

TEST(GradCheck, WindowedAttention) {
  Rng rng(5);
  const std::size_t seq = 9, heads = 2;
  Parameter q = random_parameter("q", {seq, heads * 3}, rng), k = random_parameter("k", {seq, heads * 3}, rng);
  Parameter v = random_parameter("v", {seq, heads * 2}, rng);
  for (std::size_t window : {1u, 2u, 20u})
    EXPECT_LT(check([&](Graph& g) {
                return probe(g, windowed_attention(g.parameter(q), g.parameter(k), g.parameter(v), heads, window), 17);
              },
                    {&q, &k, &v}),
              1e-6)
        << "window " << window;
}

TEST(WindowedAttention, MatchesPerPositionReference) {
  Rng rng(6);
  const std::size_t seq = 7, heads = 2, kd = 3, vd = 2, window = 2;
  Parameter q = random_parameter("q", {seq, heads * kd}, rng), k = random_parameter("k", {seq, heads * kd}, rng);
  Parameter v = random_parameter("v", {seq, heads * vd}, rng);
  Graph g(false);
  const Tensor z = windowed_attention(g.parameter(q), g.parameter(k), g.parameter(v), heads, window).value();
  for (std::size_t h = 0; h < heads; ++h)
    for (std::size_t t = 0; t < seq; ++t) {
      const std::size_t lo = t >= window ? t - window : 0, hi = std::min(seq - 1, t + window);
      std::vector<double> scores;
      for (std::size_t l = lo; l <= hi; ++l) {
        double s = 0;
        for (std::size_t i = 0; i < kd; ++i) s += q.value(t, h * kd + i) * k.value(l, h * kd + i);
        scores.push_back(std::exp(s / std::sqrt(3.0)));
      }
      double total = 0;
      for (double s : scores) total += s;
      for (std::size_t i = 0; i < vd; ++i) {
        double expected = 0;
        for (std::size_t l = lo; l <= hi; ++l) expected += scores[l - lo] / total * v.value(l, h * vd + i);
        EXPECT_NEAR(z(t, h * vd + i), expected, 1e-12);
      }
    }
}

TEST(Graph, SharedParameterNodeAccumulates) {
  Parameter p{"p", Tensor({2}, {3, -1}), true};
  Graph g;
  const Var a = g.parameter(p), b = g.parameter(p);
  EXPECT_EQ(a.id(), b.id());
  const Var y = sum(mul(a, b));
  g.backward(y);
  const Tensor grad = g.parameter_grad(p);
  EXPECT_EQ(grad[0], 6.0);
  EXPECT_EQ(grad[1], -2.0);
}

TEST(Graph, FrozenAndUnusedParametersGetZeroGradient) {
  Parameter used{"u", Tensor({2}, {1, 2}), true}, frozen{"f", Tensor({2}, {1, 2}), false}, unused{"n", Tensor({3}), true};
  Graph g;
  const Var y = sum(mul(g.parameter(used), g.parameter(frozen)));
  g.backward(y);
  EXPECT_EQ(g.parameter_grad(frozen), Tensor::zeros_like(frozen.value));
  EXPECT_EQ(g.parameter_grad(unused), Tensor::zeros_like(unused.value));
  EXPECT_EQ(g.parameter_grad(used)[1], 2.0);
}

TEST(Graph, BackwardRequiresRecordingAndScalarRoot) {
  Parameter p{"p", Tensor({2}, {1, 2}), true};
  Graph quiet(false);
  const Var y = sum(quiet.parameter(p));
  EXPECT_THROW(quiet.backward(y), Error);
  Graph g;
  EXPECT_THROW(g.backward(g.parameter(p)), ShapeError);
}

TEST(Ops, ShapeMismatchesAreRejected) {
  Graph g(false);
  const Var a = g.constant(Tensor({2, 3})), b = g.constant(Tensor({2, 2}));
  EXPECT_THROW(matmul(a, a), ShapeError);
  EXPECT_THROW(add(a, b), ShapeError);
  EXPECT_THROW(Tensor({2, 2, 2}), ShapeError);
}

TEST(Adam, FirstStepMovesByLearningRate) {
  Parameter p{"p", Tensor({3}, {1, 1, 1}), true};
  std::vector<Parameter*> params{&p};
  AdamState state = AdamState::for_parameters(params);
  AdamConfig cfg;
  cfg.learning_rate = 0.1;
  // Bias correction makes the first step lr * g / (|g| + eps).
  std::vector<Tensor> grads{Tensor({3}, {2.0, -0.5, 0.0})};
  ASSERT_TRUE(adam_step(params, grads, state, cfg));
  EXPECT_NEAR(p.value[0], 0.9, 1e-8);
  EXPECT_NEAR(p.value[1], 1.1, 1e-8);
  EXPECT_EQ(p.value[2], 1.0);
  EXPECT_EQ(state.step, 1);
}

TEST(Adam, NonFiniteGradientSkipsTheStep) {
  Parameter p{"p", Tensor({2}, {1, 1}), true};
  std::vector<Parameter*> params{&p};
  AdamState state = AdamState::for_parameters(params);
  std::vector<Tensor> grads{Tensor({2}, {1.0, std::numeric_limits<double>::quiet_NaN()})};
  EXPECT_FALSE(adam_step(params, grads, state, AdamConfig{}));
  EXPECT_EQ(p.value, Tensor({2}, {1, 1}));
  EXPECT_EQ(state.skipped, 1);
  EXPECT_EQ(state.step, 0);
}

TEST(Adam, MinimizesAQuadratic) {
  Parameter p{"p", Tensor({2}, {3, -4}), true};
  std::vector<Parameter*> params{&p};
  AdamState state = AdamState::for_parameters(params);
  AdamConfig cfg;
  cfg.learning_rate = 0.05;
  for (int i = 0; i < 2000; ++i) {
    Graph g;
    const Var loss = sum(square(g.parameter(p)));
    g.backward(loss);
    std::vector<Tensor> grads{g.parameter_grad(p)};
    adam_step(params, grads, state, cfg);
  }
  EXPECT_LT(std::abs(p.value[0]), 1e-3);
  EXPECT_LT(std::abs(p.value[1]), 1e-3);
}

TEST(Checkpoint, TensorsRoundTripBitExactly) {
  const auto dir = std::filesystem::temp_directory_path() / "bemopt_test_tensors";
  std::filesystem::create_directories(dir);
  const std::string path = (dir / "t.bin").string();
  std::vector<NamedTensor> tensors{
      {"a", Tensor({2, 2}, {0.1, -0.0, std::numeric_limits<double>::denorm_min(), 1e308})},
      {"b", Tensor({3}, {1.0 / 3, -2.5, 7})},
      {"s", Tensor::scalar(42)}};
  const auto index = write_tensors(path, tensors);
  const auto back = read_tensors(path, index);
  ASSERT_EQ(back.size(), tensors.size());
  for (std::size_t i = 0; i < tensors.size(); ++i) {
    EXPECT_EQ(back[i].name, tensors[i].name);
    EXPECT_EQ(back[i].tensor.shape(), tensors[i].tensor.shape());
    for (std::size_t j = 0; j < tensors[i].tensor.size(); ++j)
      EXPECT_EQ(std::bit_cast<std::uint64_t>(back[i].tensor[j]), std::bit_cast<std::uint64_t>(tensors[i].tensor[j]));
  }
  auto bad = index;
  bad[0]["count"] = 99;
  EXPECT_THROW(read_tensors(path, bad), InputError);
  std::filesystem::remove_all(dir);
}
