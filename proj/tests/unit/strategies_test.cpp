#include <gtest/gtest.h>

#include <filesystem>

#include "hda/strategies.hpp"
#include "hda/training.hpp"

using namespace hda;

namespace {

struct Fixture {
  DomainDataset source;
  DomainDataset target;
  DomainDataset val;
  ModelBundle bundle;
};

Fixture make_fixture(std::size_t per_class, std::size_t train_per_class, std::size_t n_labeled) {
  auto [s, t] = generate_synthetic_pair({4, per_class, {16, 16, 1}, {8, 8, 3}, 2});
  auto [train, val] = split_and_budget(t, {train_per_class, per_class - train_per_class, 2}, n_labeled);
  return {s.with_access(LabelAccess::kTraining), std::move(train), std::move(val),
          build_bundle({16, 16, 1}, {8, 8, 3}, 4, {4, 4, 4, 4}, 2)};
}

// 1×1×1 inputs; class 1 whenever the pixel is positive, ties to class 0.
Network threshold_network() {
  Network net{"threshold", {1, 1, 1}, {LayerSpec::global_avg_pool(), LayerSpec::dense(1, 2)}, {}};
  net.params = init_parameters(net.layers, 1);
  auto w = net.params.at("1.weight").mutable_data();
  w[0] = -1.0f;
  w[1] = 1.0f;
  return net;
}

DomainDataset scalar_dataset(std::vector<float> pixels, std::vector<int> labels) {
  DomainDataset ds({1, 1, 1}, {"a", "b"});
  for (std::size_t i = 0; i < pixels.size(); ++i) ds.add(std::vector<float>{pixels[i]}, labels[i]);
  return ds;
}

}  // namespace

TEST(StrategyNames, RoundTrip) {
  for (Strategy s : kAllStrategies) EXPECT_EQ(parse_strategy(to_string(s)), s);
  EXPECT_EQ(to_string(Strategy::kSource), "source");
  EXPECT_EQ(parse_strategy("baseline"), Strategy::kBaseline);
  EXPECT_THROW(parse_strategy("both"), std::invalid_argument);
}

TEST(Assemble, SourceIsTransferredSourcePlusLabeledTarget) {
  Fixture f = make_fixture(25, 20, 3);
  const AssembledSet set = assemble_hda_source(f.bundle, f.source, f.target);
  EXPECT_EQ(set.size(), 100u + 12u);
  EXPECT_EQ(set.count(Provenance::kTransferredSource), 100u);
  EXPECT_EQ(set.count(Provenance::kLabeledTarget), 12u);
  EXPECT_EQ(set.items.shape(), f.target.shape());
  for (std::size_t i = 0; i < 100; ++i) {
    EXPECT_EQ(set.provenance[i], Provenance::kTransferredSource);
    EXPECT_EQ(set.items.label(i), f.source.label(i));
  }
  const std::size_t per = f.target.shape().numel();
  const Tensor all = map_images(f.bundle.g_s2t, f.source.all());
  EXPECT_TRUE(std::equal(all.data().begin() + 7 * per, all.data().begin() + 8 * per, set.items.image(7).begin()));
  // GEMM blocking depends on batch size, so a lone sample only agrees to rounding.
  const Tensor single = map_images(f.bundle.g_s2t, f.source.batch(std::vector<std::size_t>{7}));
  for (std::size_t k = 0; k < per; ++k) EXPECT_NEAR(single[k], set.items.image(7)[k], 1e-5);
}

TEST(Assemble, SourceWithoutTargetLabels) {
  Fixture f = make_fixture(25, 20, 0);
  const AssembledSet set = assemble_hda_source(f.bundle, f.source, f.target);
  EXPECT_EQ(set.size(), 100u);
  EXPECT_EQ(set.count(Provenance::kTransferredSource), 100u);
}

TEST(Assemble, TargetPseudoLabelsComeFromSourceClassifierThroughGenerator) {
  Fixture f = make_fixture(25, 20, 2);
  const AssembledSet set = assemble_hda_target(f.bundle, f.target);
  ASSERT_EQ(set.size(), 80u);
  EXPECT_EQ(set.count(Provenance::kLabeledTarget), 8u);
  EXPECT_EQ(set.count(Provenance::kPseudoLabeledTarget), 72u);
  const std::vector<int> oracle = predict(f.bundle.c_s, map_images(f.bundle.g_t2s, f.target.all()));
  for (std::size_t i = 0; i < f.target.size(); ++i) {
    EXPECT_TRUE(std::equal(f.target.image(i).begin(), f.target.image(i).end(), set.items.image(i).begin()));
    if (f.target.is_labeled(i)) {
      EXPECT_EQ(set.provenance[i], Provenance::kLabeledTarget);
      EXPECT_EQ(set.items.label(i), f.target.label(i));
    } else {
      EXPECT_EQ(set.provenance[i], Provenance::kPseudoLabeledTarget);
      EXPECT_EQ(set.items.label(i), oracle[i]);
    }
  }
}

TEST(Assemble, FullCountsLabeledTargetOnce) {
  Fixture f = make_fixture(25, 20, 5);
  const AssembledSet set = assemble_hda_full(f.bundle, f.source, f.target);
  EXPECT_EQ(set.size(), 100u + 80u);
  EXPECT_EQ(set.count(Provenance::kTransferredSource), 100u);
  EXPECT_EQ(set.count(Provenance::kLabeledTarget), 20u);
  EXPECT_EQ(set.count(Provenance::kPseudoLabeledTarget), 60u);
}

TEST(Assemble, BaselineKeepsOnlyLabeledTarget) {
  Fixture f = make_fixture(25, 20, 4);
  const AssembledSet set = assemble_baseline(f.target);
  EXPECT_EQ(set.size(), 16u);
  EXPECT_EQ(set.count(Provenance::kLabeledTarget), 16u);
  for (std::size_t i = 0; i < set.size(); ++i) EXPECT_TRUE(set.items.label(i).has_value());
}

TEST(Assemble, LeavesTheBundleUnchanged) {
  Fixture f = make_fixture(25, 20, 3);
  const ModelBundle before = f.bundle.clone();
  for (Strategy s : kAllStrategies) assemble(s, f.bundle, f.source, f.target);
  for (std::size_t k = 0; k < 6; ++k) {
    EXPECT_TRUE(before.training_networks()[k]->params.bitwise_equal(f.bundle.training_networks()[k]->params));
  }
}

TEST(Assemble, ExportsWithProvenance) {
  Fixture f = make_fixture(25, 20, 1);
  const AssembledSet set = assemble_hda_full(f.bundle, f.source, f.target);
  const auto path = std::filesystem::temp_directory_path() / "hda_strategies_full.hdad";
  save_hdad(path, set.items, set.provenance);
  const HdadContents back = load_hdad(path);
  EXPECT_EQ(back.provenance, set.provenance);
  EXPECT_EQ(back.dataset.size(), set.size());
}

TEST(FinalTraining, TrainsOnlyTheGivenNetwork) {
  Fixture f = make_fixture(25, 20, 3);
  const ModelBundle before = f.bundle.clone();
  Network final = f.bundle.final.clone();
  const AssembledSet set = assemble_hda_target(f.bundle, f.target);
  const double acc = train_final(final, set, {2, 16, {1e-3f, 0.9f, 0.999f, 1e-8f}, 1});
  EXPECT_GE(acc, 0.0);
  EXPECT_LE(acc, 100.0);
  EXPECT_FALSE(final.params.bitwise_equal(f.bundle.final.params));
  EXPECT_TRUE(before.final.params.bitwise_equal(f.bundle.final.params));
  EXPECT_TRUE(before.c_s.params.bitwise_equal(f.bundle.c_s.params));
}

TEST(FinalTraining, ZeroEpochsAndEmptySets) {
  Fixture f = make_fixture(25, 20, 0);
  Network final = f.bundle.final.clone();
  const AssembledSet set = assemble_hda_target(f.bundle, f.target);
  EXPECT_EQ(train_final(final, set, {0, 16, {}, 1}), 0.0);
  EXPECT_TRUE(final.params.bitwise_equal(f.bundle.final.params));
  EXPECT_THROW(train_final(final, assemble_baseline(f.target), {1, 16, {}, 1}), DataError);
}

TEST(Evaluate, PercentagesRoundedToHundredths) {
  Network net = threshold_network();
  EXPECT_EQ(evaluate(net, scalar_dataset({0, 1, 0, 0.5f}, {0, 1, 0, 1})), 100.0);
  EXPECT_EQ(evaluate(net, scalar_dataset({0, 1, 0, 0.5f}, {0, 1, 1, 0})), 50.0);
  EXPECT_EQ(evaluate(net, scalar_dataset({0, 1, 1}, {0, 1, 0})), 66.67);
}

TEST(Evaluate, RequiresLabels) {
  Network net = threshold_network();
  DomainDataset ds({1, 1, 1}, {"a", "b"});
  ds.add(std::vector<float>{0.0f}, std::nullopt);
  EXPECT_THROW(evaluate(net, ds), DataError);
}
