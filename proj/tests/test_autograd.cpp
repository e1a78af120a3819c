#include <gtest/gtest.h>

#include <fstream>

#include "placefuse/errors.hpp"
#include "placefuse/optimizer.hpp"
#include "placefuse/parameters.hpp"
#include "placefuse/sequential.hpp"
#include "support.hpp"

using namespace placefuse;
using namespace testsupport;

TEST(Tensor, ShapeAndGradBuffer) {
  Tensor t(Shape{2, 3}, 1.5);
  EXPECT_EQ(t.size(), 6u);
  EXPECT_EQ(t.rank(), 2u);
  EXPECT_FALSE(t.has_grad());
  EXPECT_THROW(t.grad(), ContractError);
  t.ensure_grad();
  EXPECT_EQ(t.grad().size(), 6u);
  EXPECT_THROW(Tensor(Shape{2, 0}), ShapeError);
  EXPECT_THROW(Tensor(Shape{2}, std::vector<double>{1, 2, 3}), ShapeError);
  EXPECT_EQ(t.reshaped({3, 2}).shape(), (Shape{3, 2}));
  EXPECT_THROW(t.reshaped({4}), ShapeError);
}

TEST(Ops, Conv2dMatchesDirectLoops) {
  Rng rng(11);
  for (int i = 0; i < 5; ++i) {
    const Tensor x = random_tensor({2, 5, 4}, rng), k = random_tensor({3, 2, 3, 3}, rng),
                 b = random_tensor({3}, rng);
    const Tensor y = conv2d(x, k, b), ref = naive_conv2d(x, k, b);
    ASSERT_EQ(y.shape(), ref.shape());
    for (std::size_t j = 0; j < y.size(); ++j) EXPECT_NEAR(y[j], ref[j], 1e-12);
  }
}

TEST(Ops, Conv3dMatchesDirectLoops) {
  Rng rng(12);
  const Tensor x = random_tensor({2, 3, 4, 5}, rng), k = random_tensor({2, 2, 3, 3, 3}, rng),
               b = random_tensor({2}, rng);
  const Tensor y = conv3d(x, k, b), ref = naive_conv3d(x, k, b);
  for (std::size_t j = 0; j < y.size(); ++j) EXPECT_NEAR(y[j], ref[j], 1e-12);
}

TEST(Ops, ConvIdentityKernelKeepsInput) {
  Rng rng(3);
  const Tensor x = random_tensor({1, 4, 4}, rng);
  Tensor k(Shape{1, 1, 3, 3});
  k[4] = 1.0;
  const Tensor y = conv2d(x, k, Tensor(Shape{1}));
  EXPECT_EQ(y.values(), x.values());
}

TEST(Ops, ShapeErrors) {
  EXPECT_THROW(conv2d(Tensor(Shape{2, 4, 4}), Tensor(Shape{1, 3, 3, 3}), Tensor(Shape{1})), ShapeError);
  EXPECT_THROW(maxpool2d(Tensor(Shape{1, 3, 4})), ShapeError);
  EXPECT_THROW(avgpool3d(Tensor(Shape{1, 2, 2, 5})), ShapeError);
  EXPECT_THROW(fully_connected(Tensor(Shape{3}), Tensor(Shape{2, 4}), Tensor(Shape{2})), ShapeError);
  EXPECT_THROW(l1_distance(Tensor(Shape{3}), Tensor(Shape{4})), ShapeError);
}

TEST(Ops, MaxPoolTieGoesToFirstMaximum) {
  const Tensor x(Shape{1, 2, 2}, std::vector<double>{2.0, 2.0, 1.0, 2.0});
  const Tensor g = maxpool2d_backward(x, Tensor(Shape{1, 1, 1}, 1.0));
  EXPECT_EQ(g.values(), (std::vector<double>{1.0, 0.0, 0.0, 0.0}));
  EXPECT_EQ(maxpool2d(x)[0], 2.0);
}

TEST(Ops, PoolingAndReluExamples) {
  const Tensor x(Shape{1, 2, 2, 2}, std::vector<double>{1, 2, 3, 4, 5, 6, 7, 8});
  EXPECT_DOUBLE_EQ(avgpool3d(x)[0], 4.5);
  const Tensor r = relu(Tensor(Shape{3}, std::vector<double>{-1.0, 0.0, 2.0}));
  EXPECT_EQ(r.values(), (std::vector<double>{0.0, 0.0, 2.0}));
  // Subgradient 0 at the kink.
  const Tensor g = relu_backward(Tensor(Shape{1}, 0.0), Tensor(Shape{1}, 1.0));
  EXPECT_EQ(g[0], 0.0);
  const Tensor gap = global_avg_pool(Tensor(Shape{2, 2}, std::vector<double>{1, 3, 5, 9}));
  EXPECT_EQ(gap.values(), (std::vector<double>{2.0, 7.0}));
}

TEST(Ops, L1DistanceExamples) {
  EXPECT_DOUBLE_EQ(l1_distance(std::vector<double>{0, 0}, std::vector<double>{1, 1}), 2.0);
  const auto [ga, gb] = l1_distance_backward(Tensor(Shape{3}, std::vector<double>{1, 0, 0}),
                                             Tensor(Shape{3}, std::vector<double>{0, 0, 2}), 2.0);
  EXPECT_EQ(ga.values(), (std::vector<double>{2.0, 0.0, -2.0}));
  EXPECT_EQ(gb.values(), (std::vector<double>{-2.0, 0.0, 2.0}));
}

class GradientCheck : public ::testing::TestWithParam<std::string> {};

TEST_P(GradientCheck, MatchesCentralDifferences) {
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    const GradResult r = grad_case(GetParam(), 1000 + seed);
    EXPECT_TRUE(r.pass) << GetParam() << " seed " << seed << " rel error " << r.max_rel_error;
  }
}

INSTANTIATE_TEST_SUITE_P(AllOps, GradientCheck, ::testing::ValuesIn(grad_ops()));

TEST(GradCheck, DetectsWrongBackward) {
  Rng rng(5);
  const DifferentiableOp wrong{[](const Tensor& x) { return relu(x); },
                               [](const Tensor& x, const Tensor& g) {
                                 Tensor out = relu_backward(x, g);
                                 for (std::size_t i = 0; i < out.size(); ++i) out[i] *= 1.1;
                                 return out;
                               }};
  const Tensor x = random_away_from_zero({8}, rng, 0.1);
  EXPECT_FALSE(finite_diff_check(wrong, x, 1e-4, 1e-3).pass);
}

TEST(Sequential, BackwardMatchesFiniteDifferences) {
  ParameterSet params;
  Rng rng(9);
  Sequential net;
  const auto w1 = params.add("c1.weight", random_tensor({2, 1, 3, 3}, rng));
  const auto b1 = params.add("c1.bias", random_tensor({2}, rng));
  net.append(stage::Conv2d{w1, b1});
  net.append(stage::Relu{});
  net.append(stage::MaxPool2d{});
  net.append(stage::GlobalAvgPool{});
  const auto w2 = params.add("fc.weight", random_tensor({3, 2}, rng));
  const auto b2 = params.add("fc.bias", random_tensor({3}, rng));
  net.append(stage::Linear{w2, b2});

  const Tensor x = random_distinct({1, 4, 4}, rng);
  Tape tape;
  const Tensor y = net.forward(params, x, &tape);
  ASSERT_EQ(y.shape(), (Shape{3}));
  const Tensor probe = random_tensor({3}, rng);
  GradientSet grads(params);
  const Tensor gx = net.backward(params, tape, probe, grads, true);

  auto objective = [&](const ParameterSet& p, const Tensor& in) {
    const Tensor out = net.forward(p, in);
    double s = 0;
    for (std::size_t i = 0; i < out.size(); ++i) s += probe[i] * out[i];
    return s;
  };
  const double h = 1e-5;
  for (std::size_t pi = 0; pi < params.size(); ++pi) {
    for (std::size_t j = 0; j < params[pi].tensor.size(); ++j) {
      ParameterSet plus = params, minus = params;
      plus[pi].tensor[j] += h;
      minus[pi].tensor[j] -= h;
      const double num = (objective(plus, x) - objective(minus, x)) / (2 * h);
      EXPECT_NEAR(grads[pi][j], num, 1e-6 + 1e-4 * std::abs(num)) << params[pi].name << "[" << j << "]";
    }
  }
  for (std::size_t j = 0; j < x.size(); ++j) {
    Tensor xp = x, xm = x;
    xp[j] += h;
    xm[j] -= h;
    const double num = (objective(params, xp) - objective(params, xm)) / (2 * h);
    EXPECT_NEAR(gx[j], num, 1e-6 + 1e-4 * std::abs(num));
  }
}

TEST(Parameters, DuplicateNamesAndAssign) {
  ParameterSet a;
  a.add("w", Tensor(Shape{2}, 1.0));
  EXPECT_THROW(a.add("w", Tensor(Shape{2})), ConfigError);
  ParameterSet b;
  b.add("w", Tensor(Shape{2}, 3.0));
  a.assign_values(b);
  EXPECT_TRUE(a.values_equal(b));
  ParameterSet c;
  c.add("w", Tensor(Shape{3}));
  EXPECT_THROW(a.assign_values(c), ShapeError);
}

TEST(Parameters, CheckpointRoundTripIsBitwise) {
  Rng rng(4);
  ParameterSet p;
  p.add("visual.conv1.weight", random_tensor({2, 1, 3, 3}, rng));
  p.add("fusion.w_a", Tensor(Shape{1}, 1.0));
  const auto dir = fresh_dir("ckpt");
  save_checkpoint(dir / "a.ckpt", p);
  const ParameterSet q = load_checkpoint(dir / "a.ckpt");
  EXPECT_TRUE(p.values_equal(q));
  EXPECT_EQ(q[0].name, "visual.conv1.weight");
  {
    std::ofstream bad(dir / "bad.ckpt", std::ios::binary);
    bad << "NOPE";
  }
  EXPECT_THROW(load_checkpoint(dir / "bad.ckpt"), FormatError);
}

TEST(Sgd, MomentumMatchesHandComputation) {
  ParameterSet p;
  p.add("w", Tensor(Shape{1}, 1.0));
  SgdOptimizer opt({0.1, 0.5, 0.01});
  double w = 1.0, v = 0.0;
  for (int step = 0; step < 4; ++step) {
    const double g = 2.0 * w;  // gradient of w^2
    p[0].tensor.ensure_grad();
    p[0].tensor.grad()[0] = g;
    opt.step(p);
    v = 0.5 * v + (g + 0.01 * w);
    w -= 0.1 * v;
    EXPECT_DOUBLE_EQ(p[0].tensor[0], w);
    EXPECT_EQ(p[0].tensor.grad()[0], 0.0);
  }
}

TEST(Sgd, ZeroLearningRateLeavesParametersUnchanged) {
  Rng rng(2);
  ParameterSet p;
  p.add("w", random_tensor({5}, rng));
  const ParameterSet before = p;
  SgdOptimizer opt({0.0, 0.9, 0.1});
  for (int i = 0; i < 10; ++i) {
    p[0].tensor.ensure_grad();
    for (double& g : p[0].tensor.grad()) g = rng.uniform(-1, 1);
    opt.step(p);
  }
  EXPECT_TRUE(p.values_equal(before));
}

TEST(Sgd, MissingGradientIsContractViolation) {
  ParameterSet p;
  p.add("w", Tensor(Shape{1}, 1.0));
  SgdOptimizer opt({});
  EXPECT_THROW(opt.step(p), ContractError);
}
