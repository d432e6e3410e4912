#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <utility>
#include <vector>

#include "hda/rng.hpp"
#include "hda/tensor.hpp"

namespace hda {

/// Clamp applied to every probability before taking its log.
inline constexpr float kProbabilityClamp = 1e-7f;

/// -mean log sigma(real) - mean log(1 - sigma(fake)); the discriminator
/// minimizes this. Logits are N×1 (or N) with equal N >= 1.
Tensor gan_loss_discriminator(const Tensor& real_logits, const Tensor& fake_logits);

/// Non-saturating generator loss -mean log sigma(fake).
Tensor gan_loss_generator(const Tensor& fake_logits);

/// Mean absolute error over all elements.
Tensor cycle_loss(const Tensor& x, const Tensor& reconstructed);

using IndexPair = std::pair<std::size_t, std::size_t>;

/// Mean over pairs of (d(x_i, x_j) - d(g_i, g_j))^2 where d is the Euclidean
/// distance of flattened samples divided by sqrt(elements per sample), so
/// distances are comparable across domains of different dimension.
Tensor metric_loss(const Tensor& x_batch, const Tensor& g_batch, std::span<const IndexPair> pairs);

/// Mean cross-entropy of softmax(logits) against labels.
Tensor classification_loss(const Tensor& logits, std::span<const int> labels);

struct PairPolicy {
  /// Batches up to this size use every unordered pair.
  std::size_t all_pairs_max_batch = 8;
  /// Otherwise this many random distinct pairs are drawn per step.
  std::size_t sampled_pairs = 32;
  bool operator==(const PairPolicy&) const = default;
};

std::vector<IndexPair> make_pairs(std::size_t batch, const PairPolicy& policy, Rng& rng);

struct LossWeights {
  float lambda_cycle = 10.0f;
  float w_metric = 1.0f;
  float w_classif = 1.0f;
  bool operator==(const LossWeights&) const = default;
};

/// Throws std::invalid_argument on a negative weight.
void validate(const LossWeights& weights);

struct LossReport {
  double gan_s2t = 0.0;
  double gan_t2s = 0.0;
  double cycle = 0.0;
  double metric_s2t = 0.0;
  double metric_t2s = 0.0;
  double classif_s = 0.0;
  double classif_t = 0.0;
  double total = 0.0;
  bool operator==(const LossReport&) const = default;
};

/// gan_s2t + gan_t2s + lambda*cycle + w_classif*(classif_s + classif_t)
///   + w_metric*(metric_s2t + metric_t2s). Absent terms are zero.
double total_loss(const LossReport& report, const LossWeights& weights);

}  // namespace hda
