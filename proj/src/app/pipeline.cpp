#include "hda/pipeline.hpp"

#include <algorithm>
#include <cstdio>

namespace hda {

namespace {

// Re-labels `ds` under a class list of `count` generic names.
DomainDataset widen_classes(const DomainDataset& ds, std::size_t count) {
  if (ds.num_classes() == count) return ds;
  std::vector<std::string> names;
  for (std::size_t c = 0; c < count; ++c) names.push_back("class" + std::to_string(c));
  DomainDataset out(ds.shape(), names);
  const DomainDataset view = ds.evaluation_view();
  for (std::size_t i = 0; i < ds.size(); ++i) out.add(ds.image(i), view.label(i), ds.is_labeled(i));
  return out;
}

}  // namespace

DomainData load_domains(const RunConfig& config) {
  DomainData data;
  switch (config.data) {
    case DataKind::kSynthetic: {
      auto [source, target] = generate_synthetic_pair(config.synthetic);
      data.source = std::move(source);
      data.target = std::move(target);
      break;
    }
    case DataKind::kHdad: {
      data.source = load_hdad(config.source_path).dataset;
      data.target = load_hdad(config.target_path).dataset;
      const std::size_t classes = std::max(data.source.num_classes(), data.target.num_classes());
      data.source = widen_classes(data.source, classes);
      data.target = widen_classes(data.target, classes);
      break;
    }
    case DataKind::kFolder: {
      data.source = ingest_image_folder(config.source_path, config.source_shape,
                                        parse_class_map(config.source_class_map)).dataset;
      data.target = ingest_image_folder(config.target_path, config.target_shape,
                                        parse_class_map(config.target_class_map)).dataset;
      if (data.source.class_names() != data.target.class_names()) {
        throw ConfigError("source and target class maps must name the same classes in the same order");
      }
      break;
    }
  }
  if (!data.source.fully_annotated() || !data.target.fully_annotated()) {
    throw DataError("source and target datasets must carry a label for every sample");
  }
  if (data.source.num_classes() < 2) throw DataError("at least two classes are required");
  return data;
}

PreparedData prepare(const DomainData& data, const RunConfig& config, std::size_t n_yt) {
  PreparedData out;
  out.source = data.source.with_access(LabelAccess::kTraining);
  auto [train, val] = split_and_budget(data.target, config.split, n_yt);
  out.target_train = std::move(train);
  out.target_val = std::move(val);
  return out;
}

ModelBundle make_bundle(const RunConfig& config, const PreparedData& data) {
  return build_bundle(data.source.shape(), data.target_train.shape(), data.source.num_classes(), config.models,
                      config.training.seed);
}

double run_strategy(ModelBundle& bundle, const PreparedData& data, const RunConfig& config, Strategy strategy) {
  if (strategy == Strategy::kBaseline && data.target_train.labeled_count() == 0) {
    throw ConfigError("the baseline needs labeled target samples (n_yt > 0)");
  }
  const AssembledSet set = assemble(strategy, bundle, data.source, data.target_train);
  Network final = bundle.final.clone();
  train_final(final, set, config.final_training);
  return evaluate(final, data.target_val);
}

BudgetResult run_budget(const DomainData& data, const RunConfig& config, std::size_t n_yt, const TrainHooks& hooks) {
  const PreparedData prepared = prepare(data, config, n_yt);
  ModelBundle bundle = make_bundle(config, prepared);
  BudgetResult result;
  result.n_yt = n_yt;
  result.training = train(bundle, prepared.source, prepared.target_train, config.training, hooks);
  for (Strategy s : kAllStrategies) {
    if (s == Strategy::kBaseline && n_yt == 0) {
      result.accuracy[s] = std::nullopt;
    } else {
      result.accuracy[s] = run_strategy(bundle, prepared, config, s);
    }
  }
  return result;
}

std::string metrics_header() { return "strategy,n_yt,accuracy,seed"; }

std::string format_accuracy(double accuracy) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.2f", accuracy);
  return buf;
}

std::string metrics_row(Strategy strategy, std::size_t n_yt, double accuracy, std::uint64_t seed) {
  return to_string(strategy) + "," + std::to_string(n_yt) + "," + format_accuracy(accuracy) + "," +
         std::to_string(seed);
}

std::string format_table(std::vector<BudgetResult> rows) {
  std::sort(rows.begin(), rows.end(), [](const BudgetResult& a, const BudgetResult& b) { return a.n_yt > b.n_yt; });
  const std::vector<std::string> header{"# n_yt", "Baseline", "HDAsource", "HDAtarget", "HDAfull"};
  std::vector<std::vector<std::string>> cells{header};
  for (const auto& row : rows) {
    std::vector<std::string> line{std::to_string(row.n_yt)};
    for (Strategy s : kAllStrategies) {
      const auto it = row.accuracy.find(s);
      line.push_back(it != row.accuracy.end() && it->second ? format_accuracy(*it->second) : "-");
    }
    cells.push_back(std::move(line));
  }
  std::vector<std::size_t> width(header.size(), 0);
  for (const auto& line : cells)
    for (std::size_t c = 0; c < line.size(); ++c) width[c] = std::max(width[c], line[c].size());
  std::string out;
  for (const auto& line : cells) {
    for (std::size_t c = 0; c < line.size(); ++c) {
      const std::string pad(width[c] - line[c].size(), ' ');
      out += c == 0 ? line[c] + pad : "  " + pad + line[c];
    }
    out += "\n";
  }
  return out;
}

}  // namespace hda
