#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "hda/tensor.hpp"

namespace hda {

enum class Elementwise { kAdd, kSub, kMul, kDiv, kNeg, kLog, kExp, kRelu, kSigmoid, kSquare, kAbs };

/// Binary kinds need `b`; `b` must equal `a` in shape, match a trailing
/// suffix of `a`'s shape, or hold a single value. log(0) yields -inf.
Tensor elementwise(Elementwise kind, const Tensor& a, const Tensor* b = nullptr);

Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);
Tensor div(const Tensor& a, const Tensor& b);
Tensor neg(const Tensor& a);
Tensor log(const Tensor& a);
Tensor exp(const Tensor& a);
Tensor relu(const Tensor& a);
Tensor sigmoid(const Tensor& a);
Tensor square(const Tensor& a);
Tensor abs(const Tensor& a);
/// Gradient at exactly zero is taken as zero.
Tensor sqrt(const Tensor& a);
/// Gradient passes only where lo < a < hi.
Tensor clamp(const Tensor& a, float lo, float hi);
Tensor scale(const Tensor& a, float factor);
Tensor add_scalar(const Tensor& a, float value);

Tensor matmul(const Tensor& a, const Tensor& b);
Tensor transpose(const Tensor& a);

/// Sum/mean over the listed axes (all axes when empty); reduced axes are
/// dropped, a full reduction gives shape [1].
Tensor sum(const Tensor& x, std::vector<std::size_t> axes = {});
Tensor mean(const Tensor& x, std::vector<std::size_t> axes = {});

Tensor softmax(const Tensor& x, std::size_t axis);

/// x: N×C×H×W, w: F×C×kH×kW, bias: F.
Tensor conv2d(const Tensor& x, const Tensor& w, const Tensor& bias, std::size_t stride, std::size_t pad);
Tensor maxpool2d(const Tensor& x, std::size_t kernel, std::size_t stride);
Tensor upsample_nearest2d(const Tensor& x, std::size_t factor);
/// Center crop and/or zero pad to out_h×out_w.
Tensor crop_pad2d(const Tensor& x, std::size_t out_h, std::size_t out_w);
/// N×C×H×W → N×C.
Tensor global_avg_pool2d(const Tensor& x);

struct BatchNormState {
  std::span<float> running_mean;
  std::span<float> running_var;
  bool training = true;
  bool update_running = true;
  float momentum = 0.1f;
  float eps = 1e-5f;
};

/// Batch statistics in training mode (running statistics updated when
/// requested, unbiased variance), running statistics otherwise.
Tensor batchnorm2d(const Tensor& x, const Tensor& gamma, const Tensor& beta, const BatchNormState& state);

/// Keep-mask for dropout; element i is drawn from a counter-based stream so
/// the mask depends only on (stream_key, i).
std::vector<std::uint8_t> dropout_mask(std::size_t count, float rate, std::uint64_t stream_key);
Tensor dropout(const Tensor& x, float rate, bool training, std::uint64_t stream_key);

/// Rows of x (axis 0) picked by index; repeated indices allowed.
Tensor index_select(const Tensor& x, std::span<const std::size_t> indices);

/// Constant N×num_classes one-hot matrix.
Tensor one_hot(std::span<const int> labels, std::size_t num_classes);

}  // namespace hda
