#include "hda/config.hpp"

#include <charconv>
#include <fstream>
#include <functional>
#include <sstream>

namespace hda {

namespace {

struct KeyEntry {
  ConfigKey key;
  std::function<std::string(const RunConfig&)> get;
  std::function<void(RunConfig&, const std::string&)> set;
};

[[noreturn]] void bad_value(const std::string& value, const char* expected) {
  throw ConfigError("invalid value '" + value + "' (expected " + expected + ")");
}

std::uint64_t parse_u64(const std::string& s) {
  std::uint64_t v = 0;
  const auto [end, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc{} || end != s.data() + s.size() || s.empty()) bad_value(s, "a non-negative integer");
  return v;
}

float parse_float(const std::string& s) {
  std::size_t used = 0;
  float v = 0.0f;
  try {
    v = std::stof(s, &used);
  } catch (const std::exception&) {
    bad_value(s, "a number");
  }
  if (used != s.size()) bad_value(s, "a number");
  return v;
}

bool parse_bool(const std::string& s) {
  if (s == "true" || s == "1") return true;
  if (s == "false" || s == "0") return false;
  bad_value(s, "true or false");
}

// Shortest text that parses back to the same float.
std::string fmt_float(float v) {
  char buf[32];
  const auto [end, ec] = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, end);
}

std::string fmt_bool(bool v) { return v ? "true" : "false"; }

std::string data_kind_name(DataKind kind) {
  switch (kind) {
    case DataKind::kSynthetic: return "synthetic";
    case DataKind::kHdad: return "hdad";
    case DataKind::kFolder: return "folder";
  }
  return "synthetic";
}

std::vector<std::size_t> parse_list(const std::string& s) {
  std::vector<std::size_t> out;
  std::istringstream in(s);
  std::string item;
  while (std::getline(in, item, ',')) out.push_back(parse_u64(item));
  if (out.empty()) bad_value(s, "a comma-separated list of integers");
  return out;
}

std::string fmt_list(const std::vector<std::size_t>& v) {
  std::string out;
  for (std::size_t i = 0; i < v.size(); ++i) out += (i ? "," : "") + std::to_string(v[i]);
  return out;
}

DomainShape parse_shape(const std::string& s) {
  try {
    return parse_domain_shape(s);
  } catch (const std::exception&) {
    bad_value(s, "HxWxC");
  }
}

template <class T>
KeyEntry size_key(std::string name, std::string help, T RunConfig::*group, std::size_t T::*field) {
  return {{std::move(name), std::move(help)},
          [=](const RunConfig& c) { return std::to_string(c.*group.*field); },
          [=](RunConfig& c, const std::string& v) { c.*group.*field = parse_u64(v); }};
}

template <class T>
KeyEntry u64_key(std::string name, std::string help, T RunConfig::*group, std::uint64_t T::*field) {
  return {{std::move(name), std::move(help)},
          [=](const RunConfig& c) { return std::to_string(c.*group.*field); },
          [=](RunConfig& c, const std::string& v) { c.*group.*field = parse_u64(v); }};
}

KeyEntry adam_key(std::string name, std::string help, AdamConfig TrainingConfig::*opt, float AdamConfig::*field) {
  return {{std::move(name), std::move(help)},
          [=](const RunConfig& c) { return fmt_float(c.training.*opt.*field); },
          [=](RunConfig& c, const std::string& v) { c.training.*opt.*field = parse_float(v); }};
}

KeyEntry string_key(std::string name, std::string help, std::string RunConfig::*field) {
  return {{std::move(name), std::move(help)}, [=](const RunConfig& c) { return c.*field; },
          [=](RunConfig& c, const std::string& v) { c.*field = v; }};
}

KeyEntry shape_key(std::string name, std::string help, DomainShape RunConfig::*field) {
  return {{std::move(name), std::move(help)}, [=](const RunConfig& c) { return to_string(c.*field); },
          [=](RunConfig& c, const std::string& v) { c.*field = parse_shape(v); }};
}

const std::vector<KeyEntry>& entries() {
  static const std::vector<KeyEntry> table = [] {
    std::vector<KeyEntry> t;
    t.push_back({{"data", "dataset kind: synthetic, hdad or folder"},
                 [](const RunConfig& c) { return data_kind_name(c.data); },
                 [](RunConfig& c, const std::string& v) {
                   for (DataKind k : {DataKind::kSynthetic, DataKind::kHdad, DataKind::kFolder})
                     if (data_kind_name(k) == v) return void(c.data = k);
                   bad_value(v, "synthetic, hdad or folder");
                 }});
    t.push_back(size_key("num_classes", "synthetic class count", &RunConfig::synthetic, &SyntheticSpec::num_classes));
    t.push_back(size_key("per_class", "synthetic samples per class and domain", &RunConfig::synthetic,
                         &SyntheticSpec::per_class));
    t.push_back({{"synthetic_source_shape", "synthetic source shape HxWxC"},
                 [](const RunConfig& c) { return to_string(c.synthetic.source); },
                 [](RunConfig& c, const std::string& v) { c.synthetic.source = parse_shape(v); }});
    t.push_back({{"synthetic_target_shape", "synthetic target shape HxWxC"},
                 [](const RunConfig& c) { return to_string(c.synthetic.target); },
                 [](RunConfig& c, const std::string& v) { c.synthetic.target = parse_shape(v); }});
    t.push_back(u64_key("data_seed", "synthetic generation seed", &RunConfig::synthetic, &SyntheticSpec::seed));
    t.push_back(string_key("source_path", "source HDAD dump or image-folder root", &RunConfig::source_path));
    t.push_back(string_key("target_path", "target HDAD dump or image-folder root", &RunConfig::target_path));
    t.push_back(string_key("source_class_map", "folder ingestion map, e.g. crop:A+B,forest:F",
                           &RunConfig::source_class_map));
    t.push_back(string_key("target_class_map", "folder ingestion map for the target root",
                           &RunConfig::target_class_map));
    t.push_back(shape_key("source_shape", "folder ingestion source shape HxWxC", &RunConfig::source_shape));
    t.push_back(shape_key("target_shape", "folder ingestion target shape HxWxC", &RunConfig::target_shape));
    t.push_back(size_key("train_per_class", "target training samples per class", &RunConfig::split,
                         &SplitSpec::train_per_class));
    t.push_back(size_key("val_per_class", "target validation samples per class", &RunConfig::split,
                         &SplitSpec::val_per_class));
    t.push_back(u64_key("split_seed", "target split seed", &RunConfig::split, &SplitSpec::seed));
    t.push_back({{"n_yt", "labeled target samples per class"},
                 [](const RunConfig& c) { return std::to_string(c.n_yt); },
                 [](RunConfig& c, const std::string& v) { c.n_yt = parse_u64(v); }});
    t.push_back(size_key("iterations", "adversarial iterations", &RunConfig::training, &TrainingConfig::iterations));
    t.push_back(size_key("batch_size", "adversarial minibatch size", &RunConfig::training,
                         &TrainingConfig::batch_size));
    t.push_back(u64_key("seed", "training seed", &RunConfig::training, &TrainingConfig::seed));
    t.push_back({{"lambda_cycle", "cycle loss weight"},
                 [](const RunConfig& c) { return fmt_float(c.training.weights.lambda_cycle); },
                 [](RunConfig& c, const std::string& v) { c.training.weights.lambda_cycle = parse_float(v); }});
    t.push_back({{"w_metric", "metric loss weight"},
                 [](const RunConfig& c) { return fmt_float(c.training.weights.w_metric); },
                 [](RunConfig& c, const std::string& v) { c.training.weights.w_metric = parse_float(v); }});
    t.push_back({{"w_classif", "classification loss weight"},
                 [](const RunConfig& c) { return fmt_float(c.training.weights.w_classif); },
                 [](RunConfig& c, const std::string& v) { c.training.weights.w_classif = parse_float(v); }});
    const std::pair<const char*, AdamConfig TrainingConfig::*> groups[] = {
        {"g", &TrainingConfig::generator_optimizer},
        {"d", &TrainingConfig::discriminator_optimizer},
        {"c", &TrainingConfig::classifier_optimizer}};
    for (const auto& [prefix, opt] : groups) {
      const std::string p = prefix;
      t.push_back(adam_key(p + "_lr", p + " Adam learning rate", opt, &AdamConfig::lr));
      t.push_back(adam_key(p + "_beta1", p + " Adam beta1", opt, &AdamConfig::beta1));
      t.push_back(adam_key(p + "_beta2", p + " Adam beta2", opt, &AdamConfig::beta2));
      t.push_back(adam_key(p + "_eps", p + " Adam epsilon", opt, &AdamConfig::eps));
    }
    t.push_back(size_key("pretrain_epochs", "classifier pretraining epochs", &RunConfig::training,
                         &TrainingConfig::pretrain_epochs));
    t.push_back(size_key("pretrain_batch_size", "classifier pretraining minibatch", &RunConfig::training,
                         &TrainingConfig::pretrain_batch_size));
    t.push_back({{"pairs_all_max_batch", "batches up to this size use every pair"},
                 [](const RunConfig& c) { return std::to_string(c.training.pair_policy.all_pairs_max_batch); },
                 [](RunConfig& c, const std::string& v) { c.training.pair_policy.all_pairs_max_batch = parse_u64(v); }});
    t.push_back({{"pairs_sampled", "pairs sampled for larger batches"},
                 [](const RunConfig& c) { return std::to_string(c.training.pair_policy.sampled_pairs); },
                 [](RunConfig& c, const std::string& v) { c.training.pair_policy.sampled_pairs = parse_u64(v); }});
    t.push_back({{"classifier_freeze", "keep C_s/C_t fixed during adversarial training"},
                 [](const RunConfig& c) { return fmt_bool(c.training.classifier_freeze); },
                 [](RunConfig& c, const std::string& v) { c.training.classifier_freeze = parse_bool(v); }});
    t.push_back(size_key("log_every", "progress line period (0 = silent)", &RunConfig::training,
                         &TrainingConfig::log_every));
    t.push_back(size_key("checkpoint_every", "periodic checkpoint period (0 = end only)", &RunConfig::training,
                         &TrainingConfig::checkpoint_every));
    t.push_back(size_key("generator_channels", "generator base width", &RunConfig::models,
                         &ModelConfig::generator_channels));
    t.push_back(size_key("discriminator_channels", "discriminator base width", &RunConfig::models,
                         &ModelConfig::discriminator_channels));
    t.push_back(size_key("classifier_channels", "C_s/C_t base width", &RunConfig::models,
                         &ModelConfig::classifier_channels));
    t.push_back(size_key("final_channels", "final classifier base width", &RunConfig::models,
                         &ModelConfig::final_channels));
    t.push_back(size_key("final_epochs", "final classifier epochs", &RunConfig::final_training,
                         &FinalTrainingConfig::epochs));
    t.push_back(size_key("final_batch_size", "final classifier minibatch", &RunConfig::final_training,
                         &FinalTrainingConfig::batch_size));
    t.push_back({{"final_lr", "final classifier Adam learning rate"},
                 [](const RunConfig& c) { return fmt_float(c.final_training.optimizer.lr); },
                 [](RunConfig& c, const std::string& v) { c.final_training.optimizer.lr = parse_float(v); }});
    t.push_back(u64_key("final_seed", "final classifier seed", &RunConfig::final_training, &FinalTrainingConfig::seed));
    t.push_back({{"strategy", "classify strategy: baseline, source, target or full"},
                 [](const RunConfig& c) { return to_string(c.strategy); },
                 [](RunConfig& c, const std::string& v) {
                   try {
                     c.strategy = parse_strategy(v);
                   } catch (const std::invalid_argument&) {
                     bad_value(v, "baseline, source, target or full");
                   }
                 }});
    t.push_back({{"budgets", "sweep budgets, comma separated"},
                 [](const RunConfig& c) { return fmt_list(c.budgets); },
                 [](RunConfig& c, const std::string& v) { c.budgets = parse_list(v); }});
    t.push_back(string_key("out_dir", "output directory", &RunConfig::out_dir));
    return t;
  }();
  return table;
}

const KeyEntry& find_entry(const std::string& key) {
  for (const auto& e : entries())
    if (e.key.name == key) return e;
  throw ConfigError("unknown config key '" + key + "'");
}

std::string trim(const std::string& s) {
  const auto first = s.find_first_not_of(" \t\r");
  if (first == std::string::npos) return "";
  return s.substr(first, s.find_last_not_of(" \t\r") - first + 1);
}

}  // namespace

const std::vector<ConfigKey>& config_keys() {
  static const std::vector<ConfigKey> keys = [] {
    std::vector<ConfigKey> out;
    for (const auto& e : entries()) out.push_back(e.key);
    return out;
  }();
  return keys;
}

void set_config_value(RunConfig& config, const std::string& key, const std::string& value) {
  try {
    find_entry(key).set(config, value);
  } catch (const ConfigError& e) {
    if (std::string(e.what()).starts_with("unknown")) throw;
    throw ConfigError(key + ": " + e.what());
  }
}

std::string get_config_value(const RunConfig& config, const std::string& key) { return find_entry(key).get(config); }

bool RunConfig::operator==(const RunConfig& other) const {
  for (const auto& e : entries())
    if (e.get(*this) != e.get(other)) return false;
  return true;
}

RunConfig parse_config(const std::string& text) {
  RunConfig config;
  std::istringstream in(text);
  std::string line;
  std::size_t number = 0;
  while (std::getline(in, line)) {
    ++number;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.resize(hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw ConfigError("line " + std::to_string(number) + ": expected key = value");
    try {
      set_config_value(config, trim(line.substr(0, eq)), trim(line.substr(eq + 1)));
    } catch (const ConfigError& e) {
      throw ConfigError("line " + std::to_string(number) + ": " + e.what());
    }
  }
  return config;
}

RunConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot read config '" + path.string() + "'");
  std::ostringstream text;
  text << in.rdbuf();
  return parse_config(text.str());
}

std::string echo_config(const RunConfig& config) {
  std::string out;
  for (const auto& e : entries()) out += e.key.name + " = " + e.get(config) + "\n";
  return out;
}

void validate(const RunConfig& config) {
  try {
    validate(config.training);
  } catch (const std::invalid_argument& e) {
    throw ConfigError(e.what());
  }
  if (config.n_yt > config.split.train_per_class) {
    throw ConfigError("n_yt " + std::to_string(config.n_yt) + " exceeds train_per_class " +
                      std::to_string(config.split.train_per_class));
  }
  for (std::size_t b : config.budgets) {
    if (b > config.split.train_per_class) {
      throw ConfigError("budget " + std::to_string(b) + " exceeds train_per_class");
    }
  }
  if (config.data != DataKind::kSynthetic && (config.source_path.empty() || config.target_path.empty())) {
    throw ConfigError("source_path and target_path are required for data = hdad or folder");
  }
  if (config.data == DataKind::kFolder && (config.source_class_map.empty() || config.target_class_map.empty())) {
    throw ConfigError("source_class_map and target_class_map are required for data = folder");
  }
  if (config.final_training.batch_size < 1) throw ConfigError("final_batch_size must be >= 1");
  if (!(config.final_training.optimizer.lr > 0.0f)) throw ConfigError("final_lr must be positive");
  if (config.out_dir.empty()) throw ConfigError("out_dir must not be empty");
}

}  // namespace hda
