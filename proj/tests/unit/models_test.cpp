#include <gtest/gtest.h>

#include <set>

#include "hda/models.hpp"
#include "hda/ops.hpp"
#include "hda/rng.hpp"

using namespace hda;

namespace {

Tensor uniform_batch(Shape shape, std::uint64_t seed) {
  Rng rng(seed);
  std::vector<float> v(numel(shape));
  for (float& x : v) x = static_cast<float>(rng.uniform());
  return Tensor(std::move(shape), std::move(v));
}

std::size_t conv_params(std::size_t in, std::size_t out, std::size_t k = 3) { return out * in * k * k + out; }

ForwardOptions eval_mode(std::uint64_t seed = 0) { return {false, false, true, seed, 0}; }

}  // namespace

TEST(Generator, ParameterCountMatchesLayerSum) {
  // entry conv, 2 residual blocks (2 convs + 2 affine batch norms each), one
  // stride-2 stage for 16→8, exit conv to 3 channels.
  const std::size_t b = 16;
  const std::size_t residual = 2 * conv_params(b, b) + 2 * (2 * b);
  const std::size_t expected = conv_params(1, b) + 2 * residual + conv_params(b, b) + conv_params(b, 3);
  const Network g = build_generator({16, 16, 1}, {8, 8, 3}, b, 1);
  EXPECT_EQ(g.params.trainable_numel(), expected);
  EXPECT_EQ(expected, 12323u);
}

TEST(Generator, ProbeShapesBothDirections) {
  Network g = build_generator({16, 16, 1}, {8, 8, 3}, 16, 1);
  EXPECT_EQ(g.probe_output_shape(2), (Shape{2, 3, 8, 8}));
  Network back = build_generator({8, 8, 3}, {16, 16, 1}, 16, 2);
  EXPECT_EQ(back.probe_output_shape(2), (Shape{2, 1, 16, 16}));
  // Non power-of-two ratio needs the crop/pad stage.
  Network odd = build_generator({10, 7, 2}, {5, 13, 4}, 4, 3);
  EXPECT_EQ(odd.probe_output_shape(1), (Shape{1, 4, 5, 13}));
}

TEST(Generator, CycleClosesShapeAndOutputsStayInUnitRange) {
  Network s2t = build_generator({16, 16, 1}, {8, 8, 3}, 8, 1);
  Network t2s = build_generator({8, 8, 3}, {16, 16, 1}, 8, 2);
  const Tensor x = uniform_batch({3, 1, 16, 16}, 4);
  const Tensor y = s2t(x, {true, true, false, 0, 0});
  const Tensor back = t2s(y, {true, true, false, 0, 0});
  EXPECT_EQ(back.shape(), x.shape());
  for (float v : y.data()) EXPECT_TRUE(v >= 0.0f && v <= 1.0f);
  for (float v : back.data()) EXPECT_TRUE(v >= 0.0f && v <= 1.0f);
}

TEST(Discriminator, LogitShapeAndPurity) {
  Network d = build_discriminator({16, 16, 3}, 8, 5);
  const Tensor x = uniform_batch({5, 3, 16, 16}, 6);
  const Tensor a = d(x, eval_mode());
  EXPECT_EQ(a.shape(), (Shape{5, 1}));
  const Tensor b = d(x, eval_mode());
  EXPECT_TRUE(std::equal(a.data().begin(), a.data().end(), b.data().begin()));
}

TEST(Discriminator, CollapsedResolutionFailsAtBuild) {
  EXPECT_NO_THROW(build_discriminator({8, 8, 1}, 8, 1));
  EXPECT_THROW(build_discriminator({4, 4, 1}, 8, 1), BuildError);
}

TEST(Classifier, LogitShapes) {
  Network c = build_classifier({16, 16, 1}, 4, 7);
  EXPECT_EQ(c.probe_output_shape(3), (Shape{3, 4}));
  Network t = build_classifier({8, 8, 3}, 4, 7);
  EXPECT_EQ(t.probe_output_shape(2), (Shape{2, 4}));
  Network f = build_final_classifier({8, 8, 3}, 4, 8);
  EXPECT_EQ(f.probe_output_shape(1), (Shape{1, 4}));
  EXPECT_THROW(build_classifier({16, 16, 1}, 1, 7), BuildError);
}

TEST(Classifier, EvalModeIgnoresDropoutSeed) {
  Network c = build_classifier({16, 16, 1}, 4, 7);
  const Tensor x = uniform_batch({2, 1, 16, 16}, 8);
  const Tensor a = c(x, eval_mode(1));
  const Tensor b = c(x, eval_mode(999));
  EXPECT_TRUE(std::equal(a.data().begin(), a.data().end(), b.data().begin()));
  const Tensor ta = c(x, {true, false, true, 1, 0});
  const Tensor tb = c(x, {true, false, true, 999, 0});
  EXPECT_FALSE(std::equal(ta.data().begin(), ta.data().end(), tb.data().begin()));
}

TEST(Bundle, BuildsEveryNetworkWithDistinctNames) {
  const ModelBundle b = build_bundle({16, 16, 1}, {8, 8, 3}, 4, {}, 1);
  std::set<std::string> names;
  for (const Network* n : b.training_networks()) names.insert(n->name);
  EXPECT_EQ(names.size(), 6u);
  const ModelBundle again = build_bundle({16, 16, 1}, {8, 8, 3}, 4, {}, 1);
  EXPECT_TRUE(b.g_s2t.params.bitwise_equal(again.g_s2t.params));
  EXPECT_FALSE(b.c_s.params.bitwise_equal(b.final.params));
}

TEST(DomainShapeText, ParsesAndRejects) {
  EXPECT_EQ(parse_domain_shape("16x8x3"), (DomainShape{16, 8, 3}));
  EXPECT_EQ(to_string(DomainShape{16, 8, 3}), "16x8x3");
  EXPECT_THROW(parse_domain_shape("16x8"), std::invalid_argument);
  EXPECT_THROW(parse_domain_shape("0x8x3"), std::invalid_argument);
}
