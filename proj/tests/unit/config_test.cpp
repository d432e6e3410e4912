#include <gtest/gtest.h>

#include <set>

#include "hda/config.hpp"

using namespace hda;

TEST(Config, DefaultsEchoAndReparseLosslessly) {
  const RunConfig defaults;
  const std::string text = echo_config(defaults);
  EXPECT_EQ(parse_config(text), defaults);
  EXPECT_EQ(echo_config(parse_config(text)), text);
}

TEST(Config, EveryKeyIsEchoedOnceWithHelp) {
  const std::string text = "\n" + echo_config(RunConfig{});
  std::set<std::string> seen;
  for (const auto& key : config_keys()) {
    EXPECT_FALSE(key.help.empty()) << key.name;
    EXPECT_TRUE(seen.insert(key.name).second) << key.name;
    EXPECT_NE(text.find("\n" + key.name + " = "), std::string::npos) << key.name;
  }
}

TEST(Config, NonDefaultValuesRoundTrip) {
  RunConfig c;
  set_config_value(c, "data", "folder");
  set_config_value(c, "source_path", "/data/src");
  set_config_value(c, "target_class_map", "crop:A+B,forest:F");
  set_config_value(c, "target_shape", "64x64x3");
  set_config_value(c, "lambda_cycle", "0.1");
  set_config_value(c, "g_lr", "3.3e-5");
  set_config_value(c, "classifier_freeze", "false");
  set_config_value(c, "strategy", "full");
  set_config_value(c, "budgets", "650,325,0");
  set_config_value(c, "seed", "18446744073709551615");
  const RunConfig back = parse_config(echo_config(c));
  EXPECT_EQ(back, c);
  EXPECT_EQ(back.data, DataKind::kFolder);
  EXPECT_EQ(back.target_shape, (DomainShape{64, 64, 3}));
  EXPECT_EQ(back.training.weights.lambda_cycle, 0.1f);
  EXPECT_EQ(back.training.generator_optimizer.lr, 3.3e-5f);
  EXPECT_FALSE(back.training.classifier_freeze);
  EXPECT_EQ(back.strategy, Strategy::kFull);
  EXPECT_EQ(back.budgets, (std::vector<std::size_t>{650, 325, 0}));
  EXPECT_EQ(back.training.seed, 18446744073709551615ULL);
}

TEST(Config, CommentsAndBlankLines) {
  const RunConfig c = parse_config("# header\n\n iterations = 12  # trailing\nbatch_size=4\n");
  EXPECT_EQ(c.training.iterations, 12u);
  EXPECT_EQ(c.training.batch_size, 4u);
}

TEST(Config, UnknownKeysAndBadValuesAreErrors) {
  EXPECT_THROW(parse_config("iterationz = 3\n"), ConfigError);
  EXPECT_THROW(parse_config("iterations = -3\n"), ConfigError);
  EXPECT_THROW(parse_config("g_lr = fast\n"), ConfigError);
  EXPECT_THROW(parse_config("strategy = both\n"), ConfigError);
  EXPECT_THROW(parse_config("just words\n"), ConfigError);
  try {
    parse_config("seed = 1\nbogus = 2\n");
    FAIL();
  } catch (const ConfigError& e) {
    EXPECT_NE(std::string(e.what()).find("line 2"), std::string::npos) << e.what();
    EXPECT_NE(std::string(e.what()).find("bogus"), std::string::npos) << e.what();
  }
}

TEST(Config, ValidationCatchesInconsistencies) {
  EXPECT_NO_THROW(validate(RunConfig{}));
  RunConfig c;
  c.n_yt = c.split.train_per_class + 1;
  EXPECT_THROW(validate(c), ConfigError);
  c = RunConfig{};
  c.budgets = {1000};
  EXPECT_THROW(validate(c), ConfigError);
  c = RunConfig{};
  c.data = DataKind::kHdad;
  EXPECT_THROW(validate(c), ConfigError);
  c.source_path = "a";
  c.target_path = "b";
  EXPECT_NO_THROW(validate(c));
  c.data = DataKind::kFolder;
  EXPECT_THROW(validate(c), ConfigError);
  c = RunConfig{};
  c.training.weights.w_metric = -1.0f;
  EXPECT_THROW(validate(c), ConfigError);
  c = RunConfig{};
  c.out_dir = "";
  EXPECT_THROW(validate(c), ConfigError);
}

TEST(Config, MissingFileIsAConfigError) {
  EXPECT_THROW(load_config("/nonexistent/run.cfg"), ConfigError);
}
