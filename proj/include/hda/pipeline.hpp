#pragma once

#include <map>
#include <optional>
#include <string>
#include <vector>

#include "hda/config.hpp"
#include "hda/strategies.hpp"
#include "hda/training.hpp"

namespace hda {

/// Full, fully annotated source and target datasets with a common class list.
struct DomainData {
  DomainDataset source;
  DomainDataset target;
};

/// Generates, loads or ingests according to `config.data`.
DomainData load_domains(const RunConfig& config);

/// Source used whole; target split into a budgeted train part and a fully
/// labeled validation part.
struct PreparedData {
  DomainDataset source;
  DomainDataset target_train;
  DomainDataset target_val;
};
PreparedData prepare(const DomainData& data, const RunConfig& config, std::size_t n_yt);

ModelBundle make_bundle(const RunConfig& config, const PreparedData& data);

/// Trains a copy of the bundle's untouched final classifier on the strategy's
/// assembly and returns its validation accuracy. Throws ConfigError for the
/// baseline when no target label is available.
double run_strategy(ModelBundle& bundle, const PreparedData& data, const RunConfig& config, Strategy strategy);

struct BudgetResult {
  std::size_t n_yt = 0;
  /// nullopt for the baseline at n_yt = 0.
  std::map<Strategy, std::optional<double>> accuracy;
  TrainResult training;
};

/// Split, train, then evaluate every strategy for one label budget.
BudgetResult run_budget(const DomainData& data, const RunConfig& config, std::size_t n_yt,
                        const TrainHooks& hooks = {});

std::string metrics_header();
std::string metrics_row(Strategy strategy, std::size_t n_yt, double accuracy, std::uint64_t seed);

/// Aligned text table, one row per budget in descending order, "-" where a
/// cell is undefined.
std::string format_table(std::vector<BudgetResult> rows);

/// "12.35" style rendering.
std::string format_accuracy(double accuracy);

}  // namespace hda
