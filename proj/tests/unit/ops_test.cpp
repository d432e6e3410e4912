#include <gtest/gtest.h>

#include <cmath>
#include <numeric>

#include "hda/ops.hpp"
#include "hda/rng.hpp"

using namespace hda;

namespace {

Tensor random_tensor(Shape shape, std::uint64_t seed, double lo = -1.0, double hi = 1.0) {
  Rng rng(seed);
  std::vector<float> v(numel(shape));
  for (float& x : v) x = static_cast<float>(rng.uniform(lo, hi));
  return Tensor(std::move(shape), std::move(v));
}

// Direct seven-loop convolution in double precision.
std::vector<double> naive_conv(const Tensor& x, const Tensor& w, const Tensor& b, std::size_t stride,
                               std::size_t pad) {
  const std::size_t n = x.dim(0), c = x.dim(1), h = x.dim(2), wd = x.dim(3);
  const std::size_t f = w.dim(0), kh = w.dim(2), kw = w.dim(3);
  const std::size_t oh = (h + 2 * pad - kh) / stride + 1, ow = (wd + 2 * pad - kw) / stride + 1;
  std::vector<double> out(n * f * oh * ow);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t o = 0; o < f; ++o)
      for (std::size_t y = 0; y < oh; ++y)
        for (std::size_t z = 0; z < ow; ++z) {
          double acc = b[o];
          for (std::size_t ch = 0; ch < c; ++ch)
            for (std::size_t p = 0; p < kh; ++p)
              for (std::size_t q = 0; q < kw; ++q) {
                const long iy = static_cast<long>(y * stride + p) - static_cast<long>(pad);
                const long ix = static_cast<long>(z * stride + q) - static_cast<long>(pad);
                if (iy < 0 || ix < 0 || iy >= static_cast<long>(h) || ix >= static_cast<long>(wd)) continue;
                acc += double(x[((i * c + ch) * h + iy) * wd + ix]) * w[((o * c + ch) * kh + p) * kw + q];
              }
          out[((i * f + o) * oh + y) * ow + z] = acc;
        }
  return out;
}

}  // namespace

TEST(Matmul, SmallExample) {
  const Tensor r = matmul(Tensor({1, 2}, {1, 2}), Tensor({2, 1}, {3, 4}));
  EXPECT_EQ(r.shape(), (Shape{1, 1}));
  EXPECT_FLOAT_EQ(r[0], 11.0f);
}

TEST(Matmul, IdentityLeavesMatrixUnchanged) {
  const Tensor a = random_tensor({3, 5}, 1);
  std::vector<float> eye(9, 0.0f);
  for (std::size_t i = 0; i < 3; ++i) eye[i * 4] = 1.0f;
  const Tensor r = matmul(Tensor({3, 3}, eye), a);
  for (std::size_t i = 0; i < a.numel(); ++i) EXPECT_EQ(r[i], a[i]);
}

TEST(Matmul, InnerMismatchNamesBothShapes) {
  try {
    matmul(Tensor::zeros({2, 3}), Tensor::zeros({2, 3}));
    FAIL();
  } catch (const ShapeError& e) {
    EXPECT_NE(std::string(e.what()).find("[2,3]"), std::string::npos) << e.what();
  }
}

TEST(Conv2d, SamePaddingShape) {
  const Tensor y = conv2d(Tensor::zeros({1, 3, 16, 16}), Tensor::zeros({8, 3, 3, 3}), Tensor::zeros({8}), 1, 1);
  EXPECT_EQ(y.shape(), (Shape{1, 8, 16, 16}));
}

TEST(Conv2d, OneByOneKernelIsChannelMix) {
  const Tensor x = random_tensor({2, 3, 4, 5}, 2);
  const Tensor w = random_tensor({2, 3, 1, 1}, 3);
  const Tensor b = Tensor::zeros({2});
  const Tensor y = conv2d(x, w, b, 1, 0);
  for (std::size_t n = 0; n < 2; ++n)
    for (std::size_t o = 0; o < 2; ++o)
      for (std::size_t p = 0; p < 20; ++p) {
        double expect = 0.0;
        for (std::size_t c = 0; c < 3; ++c) expect += double(w[o * 3 + c]) * x[(n * 3 + c) * 20 + p];
        EXPECT_NEAR(y[(n * 2 + o) * 20 + p], expect, 1e-6);
      }
}

TEST(Conv2d, MatchesDirectLoopsForStridesAndPads) {
  for (std::size_t stride : {1u, 2u}) {
    for (std::size_t pad : {0u, 1u, 2u}) {
      const Tensor x = random_tensor({2, 3, 7, 6}, 10 + stride * 3 + pad);
      const Tensor w = random_tensor({4, 3, 3, 3}, 20 + stride);
      const Tensor b = random_tensor({4}, 30 + pad);
      const Tensor y = conv2d(x, w, b, stride, pad);
      const auto expect = naive_conv(x, w, b, stride, pad);
      ASSERT_EQ(y.numel(), expect.size());
      for (std::size_t i = 0; i < expect.size(); ++i) EXPECT_NEAR(y[i], expect[i], 1e-5);
    }
  }
}

TEST(Softmax, ZerosGiveUniform) {
  const Tensor s = softmax(Tensor({3}, {0, 0, 0}), 0);
  for (std::size_t i = 0; i < 3; ++i) EXPECT_NEAR(s[i], 1.0f / 3.0f, 1e-7);
}

TEST(Softmax, RowsSumToOneAndSurviveLargeLogits) {
  const Tensor s = softmax(Tensor({2, 3}, {1000, 999, 998, -5, 0, 5}), 1);
  for (std::size_t r = 0; r < 2; ++r) {
    double total = 0.0;
    for (std::size_t c = 0; c < 3; ++c) {
      EXPECT_TRUE(std::isfinite(s[r * 3 + c]));
      total += s[r * 3 + c];
    }
    EXPECT_NEAR(total, 1.0, 1e-6);
  }
  EXPECT_NEAR(s[0], 1.0 / (1.0 + std::exp(-1.0) + std::exp(-2.0)), 1e-6);
}

TEST(Maxpool2d, TwoByTwo) {
  const Tensor y = maxpool2d(Tensor({1, 1, 2, 2}, {1, 2, 3, 4}), 2, 2);
  EXPECT_EQ(y.shape(), (Shape{1, 1, 1, 1}));
  EXPECT_EQ(y[0], 4.0f);
}

TEST(Maxpool2d, GradientGoesToTheMaximum) {
  Tensor x({1, 1, 2, 2}, {1, 5, 3, 4}, true);
  backward(sum(maxpool2d(x, 2, 2)));
  EXPECT_EQ(std::vector<float>(x.grad().begin(), x.grad().end()), (std::vector<float>{0, 1, 0, 0}));
}

TEST(Upsample, NearestRepeatsPixels) {
  const Tensor y = upsample_nearest2d(Tensor({1, 1, 1, 2}, {1, 2}), 2);
  EXPECT_EQ(y.shape(), (Shape{1, 1, 2, 4}));
  EXPECT_EQ(std::vector<float>(y.data().begin(), y.data().end()), (std::vector<float>{1, 1, 2, 2, 1, 1, 2, 2}));
}

TEST(CropPad, CentersCropAndZeroPads) {
  std::vector<float> v(16);
  std::iota(v.begin(), v.end(), 0.0f);
  const Tensor x({1, 1, 4, 4}, v);
  const Tensor c = crop_pad2d(x, 2, 2);
  EXPECT_EQ(std::vector<float>(c.data().begin(), c.data().end()), (std::vector<float>{5, 6, 9, 10}));
  const Tensor p = crop_pad2d(Tensor({1, 1, 1, 1}, {7}), 3, 3);
  EXPECT_EQ(std::vector<float>(p.data().begin(), p.data().end()), (std::vector<float>{0, 0, 0, 0, 7, 0, 0, 0, 0}));
}

TEST(GlobalAvgPool, MeansEachChannel) {
  const Tensor y = global_avg_pool2d(Tensor({1, 2, 1, 2}, {1, 3, 10, 20}));
  EXPECT_EQ(y.shape(), (Shape{1, 2}));
  EXPECT_FLOAT_EQ(y[0], 2.0f);
  EXPECT_FLOAT_EQ(y[1], 15.0f);
}

TEST(BatchNorm, TrainingNormalizesAndUpdatesRunningStats) {
  const Tensor x = random_tensor({4, 2, 3, 3}, 40, -3.0, 5.0);
  std::vector<float> rm(2, 0.0f), rv(2, 1.0f);
  BatchNormState st{rm, rv, true, true, 0.1f, 1e-5f};
  const Tensor y = batchnorm2d(x, Tensor::full({2}, 1.0f), Tensor::zeros({2}), st);
  for (std::size_t c = 0; c < 2; ++c) {
    double m = 0.0, ym = 0.0, yv = 0.0;
    std::vector<double> xs;
    for (std::size_t n = 0; n < 4; ++n)
      for (std::size_t p = 0; p < 9; ++p) {
        xs.push_back(x[(n * 2 + c) * 9 + p]);
        ym += y[(n * 2 + c) * 9 + p];
      }
    for (double v : xs) m += v;
    m /= xs.size();
    double var = 0.0;
    for (double v : xs) var += (v - m) * (v - m);
    ym /= xs.size();
    for (std::size_t n = 0; n < 4; ++n)
      for (std::size_t p = 0; p < 9; ++p) yv += std::pow(y[(n * 2 + c) * 9 + p] - ym, 2);
    EXPECT_NEAR(ym, 0.0, 1e-5);
    EXPECT_NEAR(yv / xs.size(), 1.0, 1e-3);
    EXPECT_NEAR(rm[c], 0.1 * m, 1e-5);
    EXPECT_NEAR(rv[c], 0.9 + 0.1 * var / (xs.size() - 1), 1e-4);
  }
}

TEST(BatchNorm, EvalUsesRunningStatsAndLeavesThemAlone) {
  std::vector<float> rm{1.0f}, rv{4.0f};
  BatchNormState st{rm, rv, false, true, 0.1f, 0.0f};
  const Tensor y = batchnorm2d(Tensor({1, 1, 1, 2}, {3, 5}), Tensor({1}, {2}), Tensor({1}, {1}), st);
  EXPECT_FLOAT_EQ(y[0], 3.0f);  // 2 * (3 - 1) / 2 + 1
  EXPECT_FLOAT_EQ(y[1], 5.0f);
  EXPECT_EQ(rm[0], 1.0f);
  EXPECT_EQ(rv[0], 4.0f);
}

TEST(Dropout, EvalIsIdentityAndTrainingScalesSurvivors) {
  const Tensor x = Tensor::full({10000}, 1.0f);
  const Tensor e = dropout(x, 0.25f, false, 3);
  EXPECT_TRUE(e.same_storage(x) || std::equal(e.data().begin(), e.data().end(), x.data().begin()));
  const Tensor t = dropout(x, 0.25f, true, 3);
  std::size_t kept = 0;
  for (float v : t.data()) {
    if (v != 0.0f) {
      EXPECT_FLOAT_EQ(v, 1.0f / 0.75f);
      ++kept;
    }
  }
  EXPECT_NEAR(kept / 10000.0, 0.75, 0.02);
  EXPECT_EQ(dropout_mask(100, 0.5f, 9), dropout_mask(100, 0.5f, 9));
  EXPECT_NE(dropout_mask(100, 0.5f, 9), dropout_mask(100, 0.5f, 10));
}

TEST(IndexSelect, RepeatedRowsAccumulateGradient) {
  Tensor x({3, 2}, {1, 2, 3, 4, 5, 6}, true);
  const std::vector<std::size_t> idx{2, 0, 2};
  const Tensor y = index_select(x, idx);
  EXPECT_EQ(std::vector<float>(y.data().begin(), y.data().end()), (std::vector<float>{5, 6, 1, 2, 5, 6}));
  backward(sum(y));
  EXPECT_EQ(std::vector<float>(x.grad().begin(), x.grad().end()), (std::vector<float>{1, 1, 0, 0, 2, 2}));
}

TEST(OneHot, RowsMarkLabels) {
  const std::vector<int> labels{2, 0};
  const Tensor y = one_hot(labels, 3);
  EXPECT_EQ(std::vector<float>(y.data().begin(), y.data().end()), (std::vector<float>{0, 0, 1, 1, 0, 0}));
}

TEST(Reductions, AxisSumDropsAxis) {
  const Tensor x({2, 3}, {1, 2, 3, 4, 5, 6});
  const Tensor s0 = sum(x, {0});
  EXPECT_EQ(s0.shape(), (Shape{3}));
  EXPECT_EQ(std::vector<float>(s0.data().begin(), s0.data().end()), (std::vector<float>{5, 7, 9}));
  const Tensor m1 = mean(x, {1});
  EXPECT_EQ(std::vector<float>(m1.data().begin(), m1.data().end()), (std::vector<float>{2, 5}));
  EXPECT_EQ(sum(x).shape(), (Shape{1}));
}

TEST(Elementwise, LogOfZeroIsNegativeInfinity) {
  const Tensor y = log(Tensor({1}, {0.0f}));
  EXPECT_TRUE(std::isinf(y[0]) && y[0] < 0);
}

TEST(Relu, PropagatesNaN) {
  const Tensor y = relu(Tensor({3}, {std::nanf(""), -1.0f, 2.0f}));
  EXPECT_TRUE(std::isnan(y[0]));
  EXPECT_EQ(y[1], 0.0f);
  EXPECT_EQ(y[2], 2.0f);
}
