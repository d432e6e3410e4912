#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "hda/data.hpp"
#include "hda/models.hpp"
#include "hda/nn.hpp"

namespace hda {

/// Final-classifier training sets. Baseline uses the labeled target budget only.
enum class Strategy { kBaseline, kSource, kTarget, kFull };

inline constexpr std::array<Strategy, 4> kAllStrategies{Strategy::kBaseline, Strategy::kSource, Strategy::kTarget,
                                                        Strategy::kFull};

std::string to_string(Strategy strategy);
/// Accepts "baseline", "source", "target", "full".
Strategy parse_strategy(const std::string& text);

/// Target-shaped labeled items with one provenance tag each.
struct AssembledSet {
  DomainDataset items;
  std::vector<Provenance> provenance;

  std::size_t size() const { return items.size(); }
  std::size_t count(Provenance p) const;
};

/// {(G_s2t(x_s), y_s)} followed by the labeled target items.
AssembledSet assemble_hda_source(ModelBundle& bundle, const DomainDataset& source, const DomainDataset& target);
/// Every target item in order: labeled items keep their label, unlabeled
/// ones get argmax C_s(G_t2s(x_t)).
AssembledSet assemble_hda_target(ModelBundle& bundle, const DomainDataset& target);
/// Transferred source followed by the target assembly; labeled target items appear once.
AssembledSet assemble_hda_full(ModelBundle& bundle, const DomainDataset& source, const DomainDataset& target);
AssembledSet assemble_baseline(const DomainDataset& target);
AssembledSet assemble(Strategy strategy, ModelBundle& bundle, const DomainDataset& source,
                      const DomainDataset& target);

struct FinalTrainingConfig {
  std::size_t epochs = 30;
  std::size_t batch_size = 16;
  AdamConfig optimizer{1e-3f, 0.9f, 0.999f, 1e-8f};
  std::uint64_t seed = 1;
};

/// Cross-entropy training of `final` alone. Throws DataError on an empty set.
/// Returns the training accuracy in percent.
double train_final(Network& final, const AssembledSet& set, const FinalTrainingConfig& config);

/// 100 * correct / N rounded to 2 decimals. Throws DataError when any
/// validation sample has no label.
double evaluate(Network& final, const DomainDataset& val);

/// Applies `network` in eval mode without recording a graph.
Tensor map_images(Network& network, const Tensor& images, std::size_t chunk = 64);

}  // namespace hda
