#pragma once

#include <cstddef>
#include <functional>
#include <memory>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace hda {

using Shape = std::vector<std::size_t>;

std::size_t numel(const Shape& shape);
std::string to_string(const Shape& shape);

class ShapeError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

class Tensor;

namespace detail {

struct TensorImpl;

// Accumulates into the gradient buffer of each input; a null entry means
// that input does not need a gradient.
using BackwardFn = std::function<void(std::span<const float> grad_out,
                                      std::span<std::vector<float>* const> grad_in)>;

struct Node {
  const char* op = "";
  std::vector<std::shared_ptr<TensorImpl>> inputs;
  BackwardFn backward;
};

struct TensorImpl {
  Shape shape;
  std::shared_ptr<std::vector<float>> data;
  bool requires_grad = false;
  std::optional<std::vector<float>> grad;
  std::shared_ptr<Node> node;
};

}  // namespace detail

/// Dense row-major float tensor. Copies share storage; use clone() for a
/// deep copy. Tensors produced by an op are never mutated afterwards.
class Tensor {
 public:
  Tensor();
  Tensor(Shape shape, std::vector<float> data, bool requires_grad = false);

  static Tensor zeros(Shape shape, bool requires_grad = false);
  static Tensor full(Shape shape, float value, bool requires_grad = false);
  static Tensor scalar(float value, bool requires_grad = false);

  const Shape& shape() const { return impl_->shape; }
  std::size_t dim(std::size_t axis) const;
  std::size_t rank() const { return impl_->shape.size(); }
  std::size_t numel() const { return impl_->data->size(); }

  std::span<const float> data() const { return *impl_->data; }
  /// Writable access for leaves (optimizer updates, buffers). Throws for
  /// tensors recorded on a tape.
  std::span<float> mutable_data();
  float item() const;
  float operator[](std::size_t i) const { return (*impl_->data)[i]; }

  bool requires_grad() const { return impl_->requires_grad; }
  void set_requires_grad(bool value);
  bool is_leaf() const { return impl_->node == nullptr; }

  bool has_grad() const { return impl_->grad.has_value(); }
  std::span<const float> grad() const;
  void zero_grad();
  void clear_grad() { impl_->grad.reset(); }

  /// Same storage, cut from any tape and not requiring gradients.
  Tensor detach() const;
  Tensor clone() const;
  Tensor reshaped(Shape shape) const;

  bool same_storage(const Tensor& other) const { return impl_->data == other.impl_->data; }

  const std::shared_ptr<detail::TensorImpl>& impl() const { return impl_; }
  static Tensor from_impl(std::shared_ptr<detail::TensorImpl> impl);

 private:
  struct AdoptTag {};
  Tensor(AdoptTag, std::shared_ptr<detail::TensorImpl> impl) : impl_(std::move(impl)) {}

  std::shared_ptr<detail::TensorImpl> impl_;
};

bool grad_enabled();

/// Disables tape recording on this thread for its lifetime.
class NoGradGuard {
 public:
  NoGradGuard();
  ~NoGradGuard();
  NoGradGuard(const NoGradGuard&) = delete;
  NoGradGuard& operator=(const NoGradGuard&) = delete;

 private:
  bool previous_;
};

/// Builds the output tensor of an op and, when any input requires a
/// gradient and recording is enabled, attaches the backward closure.
Tensor make_result(const char* op, Shape shape, std::shared_ptr<std::vector<float>> data,
                   std::initializer_list<Tensor> inputs, detail::BackwardFn backward);
Tensor make_result(const char* op, Shape shape, std::vector<float> data,
                   std::initializer_list<Tensor> inputs, detail::BackwardFn backward);

using Buffer = std::shared_ptr<std::vector<float>>;
inline Buffer make_buffer(std::size_t n, float value = 0.0f) {
  return std::make_shared<std::vector<float>>(n, value);
}

/// Ordered record of the ops reachable from a root; every op appears after
/// all of its inputs.
class Tape {
 public:
  static Tape record(const Tensor& root);

  std::span<const Tensor> ops() const { return ops_; }
  std::size_t size() const { return ops_.size(); }

  /// Reverse pass. Leaf gradients accumulate across calls; intermediate
  /// gradients live only for the duration of the pass.
  void backward(const Tensor& root) const;

 private:
  std::vector<Tensor> ops_;
};

/// Runs the reverse pass from a single-element loss. Calling it twice
/// without zeroing accumulates into the leaves.
void backward(const Tensor& loss);

}  // namespace hda
