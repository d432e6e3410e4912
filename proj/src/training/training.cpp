#include "hda/training.hpp"

#include <chrono>
#include <cmath>
#include <cstdio>

#include "hda/ops.hpp"
#include "hda/rng.hpp"

namespace hda {

void validate(const TrainingConfig& config) {
  validate(config.weights);
  if (config.batch_size < 1) throw std::invalid_argument("batch_size must be >= 1");
  if (config.weights.w_metric > 0.0f && config.batch_size < 2) {
    throw std::invalid_argument("batch_size must be >= 2 while the metric loss is active");
  }
  if (config.pretrain_batch_size < 1) throw std::invalid_argument("pretrain_batch_size must be >= 1");
  for (const AdamConfig* opt : {&config.generator_optimizer, &config.discriminator_optimizer,
                                &config.classifier_optimizer}) {
    if (!(opt->lr > 0.0f) || !(opt->beta1 >= 0.0f && opt->beta1 < 1.0f) || !(opt->beta2 >= 0.0f && opt->beta2 < 1.0f) ||
        !(opt->eps > 0.0f)) {
      throw std::invalid_argument("optimizer settings out of range");
    }
  }
  if (config.pair_policy.sampled_pairs < 1) throw std::invalid_argument("pair policy needs at least one pair");
}

std::string trace_csv_header() {
  return "iteration,gan_s2t,gan_t2s,cycle,metric_s2t,metric_t2s,classif_s,classif_t,total,ms";
}

std::string to_csv_row(const StepTrace& t) {
  char buf[512];
  const auto& r = t.report;
  std::snprintf(buf, sizeof buf, "%zu,%.9g,%.9g,%.9g,%.9g,%.9g,%.9g,%.9g,%.9g,%.3f", t.iteration, r.gan_s2t, r.gan_t2s,
                r.cycle, r.metric_s2t, r.metric_t2s, r.classif_s, r.classif_t, r.total, t.ms);
  return buf;
}

std::uint64_t name_salt(const std::string& name) {
  std::uint64_t h = 0xCBF29CE484222325ULL;
  for (unsigned char ch : name) {
    h ^= ch;
    h *= 0x100000001B3ULL;
  }
  return h;
}

std::vector<int> predict(Network& classifier, const Tensor& images, std::size_t chunk) {
  NoGradGuard no_grad;
  const std::size_t n = images.dim(0);
  const std::size_t per = n ? images.numel() / n : 0;
  Shape shape = images.shape();
  std::vector<int> out;
  out.reserve(n);
  ForwardOptions eval;
  for (std::size_t start = 0; start < n; start += chunk) {
    const std::size_t count = std::min(chunk, n - start);
    shape[0] = count;
    const auto src = images.data().subspan(start * per, count * per);
    const Tensor logits = classifier(Tensor(shape, std::vector<float>(src.begin(), src.end())), eval);
    const std::size_t classes = logits.dim(1);
    for (std::size_t i = 0; i < count; ++i) {
      std::size_t best = 0;
      for (std::size_t k = 1; k < classes; ++k)
        if (logits[i * classes + k] > logits[i * classes + best]) best = k;
      out.push_back(static_cast<int>(best));
    }
  }
  return out;
}

PretrainResult pretrain_classifier(Network& classifier, const DomainDataset& ds, std::size_t epochs,
                                   const AdamConfig& optimizer, std::size_t batch_size, std::uint64_t seed) {
  std::vector<std::size_t> labeled = ds.labeled_indices();
  if (labeled.empty()) throw DataError("pretrain_classifier: no labeled samples");
  if (batch_size < 1) throw std::invalid_argument("pretrain_classifier: batch_size must be >= 1");
  PretrainResult result;
  Rng rng(seed);
  ForwardOptions train_opts;
  train_opts.training = true;
  train_opts.seed = derive_seed(seed, name_salt(classifier.name));
  for (std::size_t epoch = 0; epoch < epochs; ++epoch) {
    rng.shuffle(std::span<std::size_t>(labeled));
    for (std::size_t start = 0; start < labeled.size(); start += batch_size) {
      const std::size_t count = std::min(batch_size, labeled.size() - start);
      const std::span<const std::size_t> idx(labeled.data() + start, count);
      std::vector<int> labels;
      for (std::size_t i : idx) labels.push_back(*ds.label(i));
      train_opts.step = result.steps++;
      const Tensor loss = classification_loss(classifier(ds.batch(idx), train_opts), labels);
      if (!std::isfinite(loss.item())) throw NumericError("pretrain_classifier: non-finite loss");
      backward(loss);
      adam_step(classifier.params, optimizer);
    }
  }
  const std::vector<int> predicted = predict(classifier, ds.batch(labeled));
  std::size_t correct = 0;
  for (std::size_t k = 0; k < labeled.size(); ++k) correct += predicted[k] == *ds.label(labeled[k]);
  result.train_accuracy = 100.0 * static_cast<double>(correct) / static_cast<double>(labeled.size());
  return result;
}

namespace {

double checked(const Tensor& term, const char* name, std::size_t iteration) {
  const double v = term.item();
  if (!std::isfinite(v)) {
    throw NumericError("non-finite " + std::string(name) + " loss at iteration " + std::to_string(iteration));
  }
  return v;
}

ForwardOptions options(bool training, bool update, bool frozen, std::uint64_t seed, std::size_t step) {
  ForwardOptions o;
  o.training = training;
  o.update_running_stats = update;
  o.frozen = frozen;
  o.seed = seed;
  o.step = step;
  return o;
}

}  // namespace

StepTrace train_step(ModelBundle& bundle, const StepBatch& batch, const TrainingConfig& config,
                     const StepContext& context) {
  const auto started = std::chrono::steady_clock::now();
  const std::size_t it = context.iteration;
  const Tensor& xs = batch.source;
  const Tensor& xt = batch.target;
  const LossWeights& w = config.weights;
  StepTrace trace;
  trace.iteration = it;

  // (1) discriminators; generated images come from frozen generators.
  {
    Tensor fake_t, fake_s;
    {
      NoGradGuard no_grad;
      const auto frozen_g = options(true, false, true, 0, it);
      fake_t = bundle.g_s2t(xs, frozen_g);
      fake_s = bundle.g_t2s(xt, frozen_g);
    }
    const auto train_d = options(true, true, false, 0, it);
    const Tensor loss_t = gan_loss_discriminator(bundle.d_t(xt, train_d), bundle.d_t(fake_t, train_d));
    const Tensor loss_s = gan_loss_discriminator(bundle.d_s(xs, train_d), bundle.d_s(fake_s, train_d));
    const Tensor loss_d = add(loss_t, loss_s);
    trace.discriminator_loss = checked(loss_d, "discriminator", it);
    backward(loss_d);
    adam_step(bundle.d_s.params, config.discriminator_optimizer);
    adam_step(bundle.d_t.params, config.discriminator_optimizer);
  }

  // (2) generators; discriminators and classifiers contribute gradients
  // only with respect to their inputs.
  LossReport& r = trace.report;
  {
    const auto train_g = options(true, true, false, 0, it);
    const auto frozen_d = options(true, false, true, 0, it);
    const auto frozen_c = options(false, false, true, 0, it);

    const Tensor fake_t = bundle.g_s2t(xs, train_g);
    const Tensor fake_s = bundle.g_t2s(xt, train_g);
    const Tensor gan_s2t = gan_loss_generator(bundle.d_t(fake_t, frozen_d));
    const Tensor gan_t2s = gan_loss_generator(bundle.d_s(fake_s, frozen_d));
    r.gan_s2t = checked(gan_s2t, "gan_s2t", it);
    r.gan_t2s = checked(gan_t2s, "gan_t2s", it);
    Tensor objective = add(gan_s2t, gan_t2s);

    if (w.lambda_cycle > 0.0f) {
      const Tensor cycle = add(cycle_loss(xs, bundle.g_t2s(fake_t, train_g)), cycle_loss(xt, bundle.g_s2t(fake_s, train_g)));
      r.cycle = checked(cycle, "cycle", it);
      objective = add(objective, scale(cycle, w.lambda_cycle));
    }
    if (w.w_metric > 0.0f) {
      Rng pair_rng(derive_seed(config.seed, 0x9A125, it));
      const auto pairs_s = make_pairs(xs.dim(0), config.pair_policy, pair_rng);
      const auto pairs_t = make_pairs(xt.dim(0), config.pair_policy, pair_rng);
      const Tensor m_s2t = metric_loss(xs, fake_t, pairs_s);
      const Tensor m_t2s = metric_loss(xt, fake_s, pairs_t);
      r.metric_s2t = checked(m_s2t, "metric_s2t", it);
      r.metric_t2s = checked(m_t2s, "metric_t2s", it);
      objective = add(objective, scale(add(m_s2t, m_t2s), w.w_metric));
    }
    if (w.w_classif > 0.0f) {
      if (context.source_classifier_ready && !batch.target_labeled_rows.empty()) {
        const Tensor routed = index_select(fake_s, batch.target_labeled_rows);
        const Tensor cls = classification_loss(bundle.c_s(routed, frozen_c), batch.target_labels);
        r.classif_s = checked(cls, "classif_s", it);
        objective = add(objective, scale(cls, w.w_classif));
      }
      if (context.target_classifier_ready && !batch.source_labels.empty()) {
        const Tensor cls = classification_loss(bundle.c_t(fake_t, frozen_c), batch.source_labels);
        r.classif_t = checked(cls, "classif_t", it);
        objective = add(objective, scale(cls, w.w_classif));
      }
    }
    checked(objective, "total", it);
    backward(objective);
    adam_step(bundle.g_s2t.params, config.generator_optimizer);
    adam_step(bundle.g_t2s.params, config.generator_optimizer);
  }
  r.total = total_loss(r, w);

  // (3) optional joint classifier updates on real labeled data.
  if (!config.classifier_freeze) {
    if (context.source_classifier_ready && !batch.source_labels.empty()) {
      const auto opts = options(true, true, false, derive_seed(config.seed, name_salt(bundle.c_s.name)), it);
      const Tensor loss = classification_loss(bundle.c_s(xs, opts), batch.source_labels);
      checked(loss, "c_s update", it);
      backward(loss);
      adam_step(bundle.c_s.params, config.classifier_optimizer);
    }
    if (context.target_classifier_ready && !batch.target_labeled_rows.empty()) {
      const auto opts = options(true, true, false, derive_seed(config.seed, name_salt(bundle.c_t.name)), it);
      const Tensor labeled = index_select(xt, batch.target_labeled_rows);
      const Tensor loss = classification_loss(bundle.c_t(labeled, opts), batch.target_labels);
      checked(loss, "c_t update", it);
      backward(loss);
      adam_step(bundle.c_t.params, config.classifier_optimizer);
    }
  }

  trace.ms = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - started).count();
  return trace;
}

namespace {

// Walks a reshuffled permutation per epoch; an incomplete tail starts a new epoch.
class EpochSampler {
 public:
  EpochSampler(std::size_t size, std::uint64_t seed) : rng_(seed), order_(size) {
    for (std::size_t i = 0; i < size; ++i) order_[i] = i;
    pos_ = size;
  }

  std::vector<std::size_t> next(std::size_t count) {
    if (pos_ + count > order_.size()) {
      rng_.shuffle(std::span<std::size_t>(order_));
      pos_ = 0;
    }
    std::vector<std::size_t> out(order_.begin() + static_cast<long>(pos_), order_.begin() + static_cast<long>(pos_ + count));
    pos_ += count;
    return out;
  }

 private:
  Rng rng_;
  std::vector<std::size_t> order_;
  std::size_t pos_;
};

}  // namespace

TrainResult train(ModelBundle& bundle, const DomainDataset& source, const DomainDataset& target,
                  const TrainingConfig& config, const TrainHooks& hooks) {
  validate(config);
  if (source.access() != LabelAccess::kTraining || target.access() != LabelAccess::kTraining) {
    throw DataError("training datasets must use the training label access mode");
  }
  if (source.shape() != bundle.source || target.shape() != bundle.target) {
    throw DataError("dataset shapes " + to_string(source.shape()) + " / " + to_string(target.shape()) +
                    " do not match the bundle " + to_string(bundle.source) + " / " + to_string(bundle.target));
  }
  TrainResult result;
  if (config.iterations == 0) return result;
  if (config.batch_size > source.size() || config.batch_size > target.size()) {
    throw std::invalid_argument("batch_size exceeds a dataset size");
  }

  result.source_pretrain = pretrain_classifier(bundle.c_s, source, config.pretrain_epochs, config.classifier_optimizer,
                                               config.pretrain_batch_size, derive_seed(config.seed, 0xC5));
  if (target.labeled_count() > 0) {
    result.target_pretrain = pretrain_classifier(bundle.c_t, target, config.pretrain_epochs,
                                                 config.classifier_optimizer, config.pretrain_batch_size,
                                                 derive_seed(config.seed, 0xC7));
  } else {
    result.target_pretrain.skipped = true;
  }

  StepContext context;
  context.source_classifier_ready = true;
  context.target_classifier_ready = !result.target_pretrain.skipped;

  EpochSampler source_sampler(source.size(), derive_seed(config.seed, 0x5A));
  EpochSampler target_sampler(target.size(), derive_seed(config.seed, 0x7A));
  result.trace.reserve(config.iterations);
  for (std::size_t it = 0; it < config.iterations; ++it) {
    StepBatch batch;
    const auto src_idx = source_sampler.next(config.batch_size);
    const auto tgt_idx = target_sampler.next(config.batch_size);
    batch.source = source.batch(src_idx);
    for (std::size_t i : src_idx) {
      const auto l = source.label(i);
      if (!l) throw DataError("source sample " + std::to_string(i) + " has no label");
      batch.source_labels.push_back(*l);
    }
    batch.target = target.batch(tgt_idx);
    for (std::size_t row = 0; row < tgt_idx.size(); ++row) {
      if (const auto l = target.label(tgt_idx[row])) {
        batch.target_labeled_rows.push_back(row);
        batch.target_labels.push_back(*l);
      }
    }
    context.iteration = it;
    result.trace.push_back(train_step(bundle, batch, config, context));
    if (hooks.on_step) hooks.on_step(result.trace.back());
    if (hooks.on_checkpoint && config.checkpoint_every > 0 && (it + 1) % config.checkpoint_every == 0) {
      hooks.on_checkpoint(it + 1, bundle);
    }
  }
  return result;
}

}  // namespace hda
