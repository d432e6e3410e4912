#include "hda/losses.hpp"

#include <algorithm>
#include <cmath>
#include <set>
#include <stdexcept>
#include <string>

#include "hda/ops.hpp"

namespace hda {

namespace {

std::size_t batch_of(const Tensor& logits, const char* what) {
  if (logits.rank() == 0 || logits.numel() == 0 || logits.dim(0) == 0) {
    throw std::invalid_argument(std::string(what) + ": empty batch");
  }
  if (logits.numel() != logits.dim(0)) {
    throw ShapeError(std::string(what) + ": expected one logit per sample, got " + to_string(logits.shape()));
  }
  return logits.dim(0);
}

Tensor clamped_sigmoid(const Tensor& logits) {
  return clamp(sigmoid(logits), kProbabilityClamp, 1.0f - kProbabilityClamp);
}

}  // namespace

Tensor gan_loss_discriminator(const Tensor& real_logits, const Tensor& fake_logits) {
  const std::size_t nr = batch_of(real_logits, "gan_loss_discriminator");
  const std::size_t nf = batch_of(fake_logits, "gan_loss_discriminator");
  if (nr != nf) {
    throw ShapeError("gan_loss_discriminator: real batch " + std::to_string(nr) + " vs fake batch " +
                     std::to_string(nf));
  }
  const Tensor real_term = mean(log(clamped_sigmoid(real_logits)));
  const Tensor fake_term = mean(log(add_scalar(neg(clamped_sigmoid(fake_logits)), 1.0f)));
  return neg(add(real_term, fake_term));
}

Tensor gan_loss_generator(const Tensor& fake_logits) {
  batch_of(fake_logits, "gan_loss_generator");
  return neg(mean(log(clamped_sigmoid(fake_logits))));
}

Tensor cycle_loss(const Tensor& x, const Tensor& reconstructed) {
  if (x.shape() != reconstructed.shape()) {
    throw ShapeError("cycle_loss: shapes " + to_string(x.shape()) + " and " + to_string(reconstructed.shape()) +
                     " differ");
  }
  if (x.numel() == 0) throw std::invalid_argument("cycle_loss: empty batch");
  return mean(abs(sub(x, reconstructed)));
}

namespace {

// Normalized distances for each pair, shape [P].
Tensor pair_distances(const Tensor& batch, std::span<const std::size_t> first, std::span<const std::size_t> second) {
  const std::size_t n = batch.dim(0);
  const std::size_t per_sample = batch.numel() / n;
  const Tensor flat = batch.reshaped({n, per_sample});
  const Tensor diff = sub(index_select(flat, first), index_select(flat, second));
  const Tensor dist = sqrt(sum(square(diff), {1}));
  return scale(dist, 1.0f / std::sqrt(static_cast<float>(per_sample)));
}

}  // namespace

Tensor metric_loss(const Tensor& x_batch, const Tensor& g_batch, std::span<const IndexPair> pairs) {
  if (pairs.empty()) throw std::invalid_argument("metric_loss: empty pair list");
  if (x_batch.rank() == 0 || g_batch.rank() == 0 || x_batch.dim(0) != g_batch.dim(0) || x_batch.dim(0) == 0) {
    throw ShapeError("metric_loss: batches " + to_string(x_batch.shape()) + " and " + to_string(g_batch.shape()) +
                     " must hold the same nonzero number of samples");
  }
  const std::size_t n = x_batch.dim(0);
  std::vector<std::size_t> first, second;
  first.reserve(pairs.size());
  second.reserve(pairs.size());
  for (const auto& [i, j] : pairs) {
    if (i >= n || j >= n) {
      throw std::out_of_range("metric_loss: pair (" + std::to_string(i) + "," + std::to_string(j) +
                              ") out of range for batch " + std::to_string(n));
    }
    first.push_back(i);
    second.push_back(j);
  }
  const Tensor dx = pair_distances(x_batch, first, second);
  const Tensor dg = pair_distances(g_batch, first, second);
  return mean(square(sub(dx, dg)));
}

Tensor classification_loss(const Tensor& logits, std::span<const int> labels) {
  if (logits.rank() != 2) throw ShapeError("classification_loss: logits must be N×C, got " + to_string(logits.shape()));
  if (labels.empty() || logits.dim(0) == 0) throw std::invalid_argument("classification_loss: empty batch");
  if (labels.size() != logits.dim(0)) {
    throw ShapeError("classification_loss: " + std::to_string(labels.size()) + " labels for " +
                     std::to_string(logits.dim(0)) + " rows");
  }
  const Tensor targets = one_hot(labels, logits.dim(1));
  const Tensor log_p = log(clamp(softmax(logits, 1), kProbabilityClamp, 1.0f));
  return neg(scale(sum(mul(log_p, targets)), 1.0f / static_cast<float>(labels.size())));
}

std::vector<IndexPair> make_pairs(std::size_t batch, const PairPolicy& policy, Rng& rng) {
  if (batch < 2) throw std::invalid_argument("make_pairs: need at least two samples");
  std::vector<IndexPair> pairs;
  if (batch <= policy.all_pairs_max_batch) {
    for (std::size_t i = 0; i < batch; ++i)
      for (std::size_t j = i + 1; j < batch; ++j) pairs.emplace_back(i, j);
    return pairs;
  }
  // Distinct unordered pairs, stored with i < j; capped at the number that exist.
  const std::size_t wanted = std::min(policy.sampled_pairs, batch * (batch - 1) / 2);
  std::set<IndexPair> seen;
  pairs.reserve(wanted);
  while (pairs.size() < wanted) {
    std::size_t i = rng.below(batch);
    std::size_t j = rng.below(batch);
    if (i == j) continue;
    if (j < i) std::swap(i, j);
    if (seen.emplace(i, j).second) pairs.emplace_back(i, j);
  }
  return pairs;
}

void validate(const LossWeights& weights) {
  if (!(weights.lambda_cycle >= 0.0f) || !(weights.w_metric >= 0.0f) || !(weights.w_classif >= 0.0f)) {
    throw std::invalid_argument("loss weights must be non-negative");
  }
}

double total_loss(const LossReport& r, const LossWeights& w) {
  validate(w);
  return r.gan_s2t + r.gan_t2s + w.lambda_cycle * r.cycle + w.w_classif * (r.classif_s + r.classif_t) +
         w.w_metric * (r.metric_s2t + r.metric_t2s);
}

}  // namespace hda
