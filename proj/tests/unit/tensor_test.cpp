#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>

#include "hda/ops.hpp"
#include "hda/rng.hpp"
#include "hda/tensor.hpp"

using namespace hda;

namespace {

std::vector<float> values(const Tensor& t) { return {t.data().begin(), t.data().end()}; }
std::vector<float> grads(const Tensor& t) { return {t.grad().begin(), t.grad().end()}; }

Tensor random_leaf(Shape shape, std::uint64_t seed) {
  Rng rng(seed);
  std::vector<float> v(numel(shape));
  for (float& x : v) x = static_cast<float>(rng.uniform(-2.0, 2.0));
  return Tensor(std::move(shape), std::move(v), true);
}

}  // namespace

TEST(Tensor, ConstructionChecksSize) {
  EXPECT_THROW(Tensor({2, 3}, std::vector<float>(5)), ShapeError);
  const Tensor t({2, 3}, std::vector<float>(6, 1.0f));
  EXPECT_EQ(t.numel(), 6u);
  EXPECT_EQ(t.dim(1), 3u);
}

TEST(Tensor, ElementwiseExamples) {
  EXPECT_EQ(values(add(Tensor({2}, {1, 2}), Tensor({2}, {3, 4}))), (std::vector<float>{4, 6}));
  EXPECT_EQ(values(relu(Tensor({3}, {-1, 0, 2}))), (std::vector<float>{0, 0, 2}));
}

TEST(Tensor, SquareBackward) {
  Tensor x({1}, {3.0f}, true);
  backward(sum(square(x)));
  EXPECT_EQ(grads(x), (std::vector<float>{6.0f}));
}

TEST(Tensor, SumGradientIsOnes) {
  Tensor x = random_leaf({5}, 1);
  backward(sum(x));
  EXPECT_EQ(grads(x), std::vector<float>(5, 1.0f));
}

TEST(Tensor, ZeroScaledLossGivesZeroGradient) {
  Tensor x = random_leaf({4}, 2);
  backward(sum(scale(x, 0.0f)));
  EXPECT_EQ(grads(x), std::vector<float>(4, 0.0f));
}

TEST(Tensor, BackwardIsLinearInTheLoss) {
  Tensor x = random_leaf({3, 4}, 3);
  auto l1 = [&] { return sum(square(x)); };
  auto l2 = [&] { return mean(sigmoid(mul(x, x))); };
  backward(l1());
  const auto g1 = grads(x);
  x.clear_grad();
  backward(l2());
  const auto g2 = grads(x);
  x.clear_grad();
  backward(add(l1(), l2()));
  const auto g12 = grads(x);
  for (std::size_t i = 0; i < g12.size(); ++i) EXPECT_NEAR(g12[i], g1[i] + g2[i], 1e-6);
}

TEST(Tensor, LeafGradientsAccumulateAcrossBackwardCalls) {
  Tensor x({2}, {1.0f, 2.0f}, true);
  backward(sum(x));
  backward(sum(x));
  EXPECT_EQ(grads(x), (std::vector<float>{2.0f, 2.0f}));
}

TEST(Tensor, IntermediatesKeepNoGradient) {
  Tensor x({2}, {1.0f, 2.0f}, true);
  const Tensor y = square(x);
  backward(sum(y));
  EXPECT_FALSE(y.has_grad());
}

TEST(Tensor, NonScalarBackwardThrows) {
  Tensor x({2}, {1.0f, 2.0f}, true);
  EXPECT_THROW(backward(square(x)), ShapeError);
}

TEST(Tensor, NoGradGuardSkipsRecording) {
  Tensor x({2}, {1.0f, 2.0f}, true);
  Tensor y;
  {
    NoGradGuard guard;
    EXPECT_FALSE(grad_enabled());
    y = square(x);
  }
  EXPECT_TRUE(grad_enabled());
  EXPECT_TRUE(y.is_leaf());
  EXPECT_FALSE(y.requires_grad());
}

TEST(Tensor, DetachSharesStorageWithoutGraph) {
  Tensor x({2}, {1.0f, 2.0f}, true);
  const Tensor d = x.detach();
  EXPECT_TRUE(d.same_storage(x));
  EXPECT_FALSE(d.requires_grad());
  const Tensor y = square(d);
  EXPECT_FALSE(y.requires_grad());
}

TEST(Tensor, RecordedTensorsAreImmutable) {
  Tensor x({2}, {1.0f, 2.0f}, true);
  Tensor y = square(x);
  EXPECT_THROW(y.mutable_data(), std::logic_error);
}

TEST(Tensor, ReshapeSharesStorageAndRoutesGradients) {
  Tensor x = random_leaf({2, 3}, 4);
  const Tensor r = x.reshaped({3, 2});
  EXPECT_TRUE(r.same_storage(x));
  EXPECT_THROW(x.reshaped({4, 2}), ShapeError);
  backward(sum(mul(r, r)));
  for (std::size_t i = 0; i < 6; ++i) EXPECT_FLOAT_EQ(x.grad()[i], 2.0f * x[i]);
}

TEST(Tensor, TapeOrdersEveryOpAfterItsInputs) {
  Tensor a = random_leaf({3}, 5), b = random_leaf({3}, 6);
  const Tensor c = mul(a, b);
  const Tensor d = add(c, exp(a));
  const Tensor loss = sum(mul(d, c));
  const Tape tape = Tape::record(loss);
  std::vector<const detail::TensorImpl*> order;
  for (const Tensor& t : tape.ops()) order.push_back(t.impl().get());
  ASSERT_EQ(order.size(), 5u);
  EXPECT_EQ(order.back(), loss.impl().get());
  for (std::size_t k = 0; k < order.size(); ++k) {
    for (const auto& input : order[k]->node->inputs) {
      if (!input->node) continue;
      const auto pos = std::find(order.begin(), order.end(), input.get()) - order.begin();
      EXPECT_LT(static_cast<std::size_t>(pos), k);
    }
  }
}

TEST(Tensor, SharedSubgraphGradientCountsEveryUse) {
  Tensor x({1}, {2.0f}, true);
  const Tensor y = square(x);           // 4
  backward(sum(add(y, mul(y, y))));     // y + y^2, d/dx = (1 + 2y) * 2x = 9 * 4
  EXPECT_FLOAT_EQ(x.grad()[0], 36.0f);
}

TEST(Tensor, BroadcastRules) {
  const Tensor a({2, 3}, {1, 2, 3, 4, 5, 6});
  EXPECT_EQ(values(add(a, Tensor({3}, {10, 20, 30}))), (std::vector<float>{11, 22, 33, 14, 25, 36}));
  EXPECT_EQ(values(mul(Tensor({1}, {2}), a)), (std::vector<float>{2, 4, 6, 8, 10, 12}));
  EXPECT_THROW(add(a, Tensor({2}, {1, 2})), ShapeError);
}

TEST(Tensor, BroadcastGradientSumsOverRepeats) {
  Tensor a = random_leaf({4, 3}, 7);
  Tensor b({3}, {1, 2, 3}, true);
  backward(sum(mul(a, b)));
  for (std::size_t j = 0; j < 3; ++j) {
    double col = 0.0;
    for (std::size_t i = 0; i < 4; ++i) col += a[i * 3 + j];
    EXPECT_NEAR(b.grad()[j], col, 1e-5);
  }
}

TEST(Tensor, ForwardIsBitwiseDeterministic) {
  auto run = [] {
    const Tensor x = random_leaf({2, 3, 5, 5}, 8);
    const Tensor w = random_leaf({4, 3, 3, 3}, 9);
    const Tensor b = random_leaf({4}, 10);
    return values(dropout(relu(conv2d(x, w, b, 1, 1)), 0.3f, true, 77));
  };
  EXPECT_EQ(run(), run());
}
