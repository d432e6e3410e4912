#pragma once

#include <cstdint>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "hda/tensor.hpp"

namespace hda {

enum class LayerKind {
  kConv,
  kBatchNorm,
  kRelu,
  kMaxPool,
  kUpsample,
  kDropout,
  kDense,
  kSigmoid,
  kSoftmax,
  kResidualBlock,
  kGlobalAvgPool,
  kCropPad,
};

std::string to_string(LayerKind kind);

struct LayerSpec {
  LayerKind kind = LayerKind::kRelu;
  std::size_t in_channels = 0;   // conv, dense (in units), batchnorm / residual (channels)
  std::size_t out_channels = 0;  // conv, dense (out units)
  std::size_t kernel = 0;        // conv, maxpool
  std::size_t stride = 1;        // conv, maxpool
  std::size_t pad = 0;           // conv
  std::size_t factor = 1;        // upsample
  float rate = 0.0f;             // dropout
  std::size_t out_h = 0;         // crop/pad
  std::size_t out_w = 0;

  static LayerSpec conv(std::size_t in, std::size_t out, std::size_t kernel = 3, std::size_t stride = 1,
                        std::size_t pad = 1);
  static LayerSpec batchnorm(std::size_t channels);
  static LayerSpec relu();
  static LayerSpec maxpool(std::size_t kernel, std::size_t stride = 0);
  static LayerSpec upsample(std::size_t factor);
  static LayerSpec dropout(float rate);
  static LayerSpec dense(std::size_t in, std::size_t out);
  static LayerSpec sigmoid();
  static LayerSpec softmax();
  static LayerSpec residual_block(std::size_t channels);
  static LayerSpec global_avg_pool();
  static LayerSpec crop_pad(std::size_t height, std::size_t width);

  bool operator==(const LayerSpec&) const = default;
};

class SpecError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Throws SpecError when the hyperparameters are invalid for the kind.
void validate(const LayerSpec& spec);

class MissingGradientError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Named tensors in insertion order. Trainable entries require gradients;
/// the rest are buffers such as batch-norm running statistics.
class ParameterSet {
 public:
  struct Entry {
    std::string name;
    Tensor value;
    bool trainable = true;
  };

  struct AdamState {
    std::int64_t step = 0;
    std::vector<std::vector<float>> first;   // one per trainable entry, in order
    std::vector<std::vector<float>> second;
    bool operator==(const AdamState&) const = default;
  };

  void add(std::string name, Tensor value, bool trainable = true);
  bool contains(const std::string& name) const;
  Tensor& at(const std::string& name);
  const Tensor& at(const std::string& name) const;

  std::span<Entry> entries() { return entries_; }
  std::span<const Entry> entries() const { return entries_; }
  std::size_t size() const { return entries_.size(); }
  /// Number of trainable scalars.
  std::size_t trainable_numel() const;

  AdamState& optimizer_state() { return adam_; }
  const AdamState& optimizer_state() const { return adam_; }

  void zero_grad();
  /// Deep copy of values and optimizer state; gradients are not copied.
  ParameterSet clone() const;
  bool bitwise_equal(const ParameterSet& other) const;

 private:
  std::size_t index_of(const std::string& name) const;

  std::vector<Entry> entries_;
  AdamState adam_;
};

/// Glorot-uniform conv/dense weights, zero biases, unit batch-norm scale.
ParameterSet init_parameters(std::span<const LayerSpec> layers, std::uint64_t seed);

struct ForwardOptions {
  bool training = false;
  /// Batch-norm running statistics are only touched when training and this is set.
  bool update_running_stats = true;
  /// Parameters enter the graph as constants: no gradient reaches them.
  bool frozen = false;
  /// Dropout streams derive from (seed, layer index, step).
  std::uint64_t seed = 0;
  std::uint64_t step = 0;
};

/// Applies the layers in order. Shape errors name the failing layer index.
Tensor forward(std::span<const LayerSpec> layers, ParameterSet& params, const Tensor& x,
               const ForwardOptions& options);

struct AdamConfig {
  float lr = 2e-4f;
  float beta1 = 0.5f;
  float beta2 = 0.999f;
  float eps = 1e-8f;
  bool operator==(const AdamConfig&) const = default;
};

/// Bias-corrected Adam over the trainable entries, then clears their
/// gradients. Throws MissingGradientError before touching anything when a
/// trainable entry has no gradient.
void adam_step(ParameterSet& params, const AdamConfig& config);

/// A layer stack with its parameters and per-sample input shape (C, H, W).
struct Network {
  std::string name;
  Shape input_shape;
  std::vector<LayerSpec> layers;
  ParameterSet params;

  Tensor operator()(const Tensor& x, const ForwardOptions& options) { return forward(layers, params, x, options); }
  /// Output shape for a batch of `batch` inputs, computed by a no-grad probe.
  Shape probe_output_shape(std::size_t batch);
  Network clone() const;
};

}  // namespace hda
