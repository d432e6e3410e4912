#include "hda/strategies.hpp"

#include <algorithm>
#include <cmath>

#include "hda/training.hpp"

namespace hda {

std::string to_string(Strategy strategy) {
  switch (strategy) {
    case Strategy::kBaseline: return "baseline";
    case Strategy::kSource: return "source";
    case Strategy::kTarget: return "target";
    case Strategy::kFull: return "full";
  }
  return "unknown";
}

Strategy parse_strategy(const std::string& text) {
  for (Strategy s : kAllStrategies)
    if (to_string(s) == text) return s;
  throw std::invalid_argument("unknown strategy '" + text + "' (expected baseline, source, target or full)");
}

std::size_t AssembledSet::count(Provenance p) const {
  return static_cast<std::size_t>(std::count(provenance.begin(), provenance.end(), p));
}

Tensor map_images(Network& network, const Tensor& images, std::size_t chunk) {
  NoGradGuard no_grad;
  const std::size_t n = images.dim(0);
  if (n == 0) throw DataError("map_images: empty batch");
  const std::size_t per = images.numel() / n;
  Shape in_shape = images.shape();
  std::vector<float> out;
  Shape out_shape;
  for (std::size_t start = 0; start < n; start += chunk) {
    const std::size_t count = std::min(chunk, n - start);
    in_shape[0] = count;
    const auto src = images.data().subspan(start * per, count * per);
    const Tensor y = network(Tensor(in_shape, std::vector<float>(src.begin(), src.end())), ForwardOptions{});
    out.insert(out.end(), y.data().begin(), y.data().end());
    out_shape = y.shape();
  }
  out_shape[0] = n;
  return Tensor(out_shape, std::move(out));
}

namespace {

AssembledSet empty_set(const DomainDataset& target) {
  return AssembledSet{DomainDataset(target.shape(), target.class_names()), {}};
}

void append_transferred_source(AssembledSet& set, ModelBundle& bundle, const DomainDataset& source) {
  if (source.empty()) return;
  const Tensor mapped = map_images(bundle.g_s2t, source.all());
  const std::size_t per = set.items.shape().numel();
  for (std::size_t i = 0; i < source.size(); ++i) {
    const auto y = source.label(i);
    if (!y) throw DataError("source sample " + std::to_string(i) + " has no label");
    set.items.add(mapped.data().subspan(i * per, per), y);
    set.provenance.push_back(Provenance::kTransferredSource);
  }
}

void append_labeled_target(AssembledSet& set, const DomainDataset& target) {
  for (std::size_t i : target.labeled_indices()) {
    set.items.add(target.image(i), target.label(i));
    set.provenance.push_back(Provenance::kLabeledTarget);
  }
}

void append_target(AssembledSet& set, ModelBundle& bundle, const DomainDataset& target) {
  const auto unlabeled = target.unlabeled_indices();
  std::vector<int> pseudo;
  if (!unlabeled.empty()) pseudo = predict(bundle.c_s, map_images(bundle.g_t2s, target.batch(unlabeled)));
  std::size_t next = 0;
  for (std::size_t i = 0; i < target.size(); ++i) {
    if (const auto y = target.label(i)) {
      set.items.add(target.image(i), y);
      set.provenance.push_back(Provenance::kLabeledTarget);
    } else {
      set.items.add(target.image(i), pseudo[next++]);
      set.provenance.push_back(Provenance::kPseudoLabeledTarget);
    }
  }
}

void check_shapes(const ModelBundle& bundle, const DomainDataset* source, const DomainDataset& target) {
  if (target.shape() != bundle.target || (source && source->shape() != bundle.source)) {
    throw DataError("dataset shapes do not match the bundle " + to_string(bundle.source) + " / " +
                    to_string(bundle.target));
  }
}

}  // namespace

AssembledSet assemble_hda_source(ModelBundle& bundle, const DomainDataset& source, const DomainDataset& target) {
  check_shapes(bundle, &source, target);
  AssembledSet set = empty_set(target);
  append_transferred_source(set, bundle, source);
  append_labeled_target(set, target);
  return set;
}

AssembledSet assemble_hda_target(ModelBundle& bundle, const DomainDataset& target) {
  check_shapes(bundle, nullptr, target);
  AssembledSet set = empty_set(target);
  append_target(set, bundle, target);
  return set;
}

AssembledSet assemble_hda_full(ModelBundle& bundle, const DomainDataset& source, const DomainDataset& target) {
  check_shapes(bundle, &source, target);
  AssembledSet set = empty_set(target);
  append_transferred_source(set, bundle, source);
  append_target(set, bundle, target);
  return set;
}

AssembledSet assemble_baseline(const DomainDataset& target) {
  AssembledSet set = empty_set(target);
  append_labeled_target(set, target);
  return set;
}

AssembledSet assemble(Strategy strategy, ModelBundle& bundle, const DomainDataset& source,
                      const DomainDataset& target) {
  switch (strategy) {
    case Strategy::kBaseline: return assemble_baseline(target);
    case Strategy::kSource: return assemble_hda_source(bundle, source, target);
    case Strategy::kTarget: return assemble_hda_target(bundle, target);
    case Strategy::kFull: return assemble_hda_full(bundle, source, target);
  }
  throw std::invalid_argument("unknown strategy");
}

double train_final(Network& final, const AssembledSet& set, const FinalTrainingConfig& config) {
  if (set.size() == 0) throw DataError("train_final: empty training set");
  if (config.epochs == 0) return 0.0;
  return pretrain_classifier(final, set.items, config.epochs, config.optimizer, config.batch_size, config.seed)
      .train_accuracy;
}

double evaluate(Network& final, const DomainDataset& val) {
  if (val.empty()) throw DataError("evaluate: empty validation set");
  const DomainDataset view = val.evaluation_view();
  std::vector<int> truth;
  for (std::size_t i = 0; i < view.size(); ++i) {
    const auto y = view.label(i);
    if (!y) throw DataError("evaluate: validation sample " + std::to_string(i) + " has no label");
    truth.push_back(*y);
  }
  const auto predicted = predict(final, view.all());
  std::size_t correct = 0;
  for (std::size_t i = 0; i < truth.size(); ++i) correct += predicted[i] == truth[i];
  const double pct = 100.0 * static_cast<double>(correct) / static_cast<double>(truth.size());
  return std::round(pct * 100.0) / 100.0;
}

}  // namespace hda
