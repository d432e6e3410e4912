#pragma once

#include <cstdint>
#include <functional>
#include <stdexcept>
#include <string>
#include <vector>

#include "hda/data.hpp"
#include "hda/losses.hpp"
#include "hda/models.hpp"
#include "hda/nn.hpp"

namespace hda {

struct TrainingConfig {
  /// Adversarial iterations. Zero leaves the bundle untouched (no pretraining either).
  std::size_t iterations = 3000;
  std::size_t batch_size = 8;
  std::uint64_t seed = 1;
  LossWeights weights;
  AdamConfig generator_optimizer;
  AdamConfig discriminator_optimizer;
  /// Used for classifier pretraining and for joint updates when not frozen.
  AdamConfig classifier_optimizer{1e-3f, 0.9f, 0.999f, 1e-8f};
  std::size_t pretrain_epochs = 10;
  std::size_t pretrain_batch_size = 16;
  PairPolicy pair_policy;
  bool classifier_freeze = true;
  std::size_t log_every = 100;
  /// 0 disables periodic checkpoints.
  std::size_t checkpoint_every = 0;
};

/// Throws std::invalid_argument when the configuration is unusable.
void validate(const TrainingConfig& config);

class NumericError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct StepTrace {
  std::size_t iteration = 0;
  LossReport report;
  /// Sum of both discriminator losses from sub-update (1); not part of the CSV.
  double discriminator_loss = 0.0;
  double ms = 0.0;
};

std::string trace_csv_header();
std::string to_csv_row(const StepTrace& trace);

struct PretrainResult {
  bool skipped = false;
  std::size_t steps = 0;
  /// Percentage on the labeled subset, evaluated after training.
  double train_accuracy = 0.0;
};

/// Minibatch cross-entropy training of `classifier` on the labeled subset of
/// `ds`. Throws DataError when no labeled sample exists.
PretrainResult pretrain_classifier(Network& classifier, const DomainDataset& ds, std::size_t epochs,
                                   const AdamConfig& optimizer, std::size_t batch_size, std::uint64_t seed);

/// Inputs of one adversarial iteration.
struct StepBatch {
  Tensor source;
  std::vector<int> source_labels;
  Tensor target;
  /// Rows of `target` that carry a visible label, and those labels.
  std::vector<std::size_t> target_labeled_rows;
  std::vector<int> target_labels;
};

struct StepContext {
  std::size_t iteration = 0;
  /// C_s / C_t were pretrained and may score generated images.
  bool source_classifier_ready = true;
  bool target_classifier_ready = true;
};

/// (1) discriminators on real vs generated, generators frozen;
/// (2) generators on the weighted generator objective, D and C frozen;
/// (3) classifiers on real labeled data unless frozen.
/// Throws NumericError naming the first non-finite term.
StepTrace train_step(ModelBundle& bundle, const StepBatch& batch, const TrainingConfig& config,
                     const StepContext& context);

struct TrainHooks {
  std::function<void(const StepTrace&)> on_step;
  std::function<void(std::size_t iteration, const ModelBundle&)> on_checkpoint;
};

struct TrainResult {
  PretrainResult source_pretrain;
  PretrainResult target_pretrain;
  std::vector<StepTrace> trace;
};

/// Pretrains C_s (and C_t when target labels exist), then runs the
/// adversarial iterations over per-epoch reshuffled minibatches.
TrainResult train(ModelBundle& bundle, const DomainDataset& source, const DomainDataset& target,
                  const TrainingConfig& config, const TrainHooks& hooks = {});

/// Stable 64-bit salt for per-network random streams.
std::uint64_t name_salt(const std::string& name);

/// Argmax predictions in eval mode, ties to the lowest class.
std::vector<int> predict(Network& classifier, const Tensor& images, std::size_t chunk = 64);

}  // namespace hda
