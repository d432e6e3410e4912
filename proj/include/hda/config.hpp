#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <stdexcept>
#include <string>
#include <vector>

#include "hda/data.hpp"
#include "hda/models.hpp"
#include "hda/strategies.hpp"
#include "hda/training.hpp"

namespace hda {

class ConfigError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

enum class DataKind { kSynthetic, kHdad, kFolder };

/// Everything a CLI run needs. Text form is one `key = value` per line;
/// `#` starts a comment; unknown keys are errors.
struct RunConfig {
  DataKind data = DataKind::kSynthetic;
  SyntheticSpec synthetic;
  std::string source_path;
  std::string target_path;
  std::string source_class_map;
  std::string target_class_map;
  /// Shapes used for folder ingestion; synthetic data uses `synthetic`.
  DomainShape source_shape{16, 16, 1};
  DomainShape target_shape{8, 8, 3};

  SplitSpec split;
  std::size_t n_yt = 0;

  TrainingConfig training;
  ModelConfig models;
  FinalTrainingConfig final_training;

  Strategy strategy = Strategy::kTarget;
  std::vector<std::size_t> budgets{10, 5, 1, 0};
  std::string out_dir = "run";

  bool operator==(const RunConfig& other) const;
};

struct ConfigKey {
  std::string name;
  std::string help;
};

/// Every accepted key with a one-line description, in echo order.
const std::vector<ConfigKey>& config_keys();

/// Sets one key; throws ConfigError for unknown keys or unparsable values.
void set_config_value(RunConfig& config, const std::string& key, const std::string& value);
std::string get_config_value(const RunConfig& config, const std::string& key);

RunConfig parse_config(const std::string& text);
RunConfig load_config(const std::filesystem::path& path);
/// Lossless: parse_config(echo_config(c)) == c.
std::string echo_config(const RunConfig& config);

/// Throws ConfigError when values are inconsistent.
void validate(const RunConfig& config);

}  // namespace hda
