#include "hda/tensor.hpp"

#include <algorithm>
#include <sstream>
#include <unordered_map>
#include <unordered_set>

namespace hda {

namespace {
thread_local bool g_grad_enabled = true;
}

std::size_t numel(const Shape& shape) {
  std::size_t n = 1;
  for (std::size_t extent : shape) n *= extent;
  return n;
}

std::string to_string(const Shape& shape) {
  std::ostringstream os;
  os << '[';
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) os << ',';
    os << shape[i];
  }
  os << ']';
  return os.str();
}

Tensor::Tensor() : Tensor(Shape{0}, {}) {}

Tensor::Tensor(Shape shape, std::vector<float> data, bool requires_grad)
    : impl_(std::make_shared<detail::TensorImpl>()) {
  if (hda::numel(shape) != data.size()) {
    throw ShapeError("tensor shape " + to_string(shape) + " holds " +
                     std::to_string(hda::numel(shape)) + " values, got " + std::to_string(data.size()));
  }
  impl_->shape = std::move(shape);
  impl_->data = std::make_shared<std::vector<float>>(std::move(data));
  impl_->requires_grad = requires_grad;
}

Tensor Tensor::zeros(Shape shape, bool requires_grad) { return full(std::move(shape), 0.0f, requires_grad); }

Tensor Tensor::full(Shape shape, float value, bool requires_grad) {
  const std::size_t n = hda::numel(shape);
  return Tensor(std::move(shape), std::vector<float>(n, value), requires_grad);
}

Tensor Tensor::scalar(float value, bool requires_grad) { return Tensor(Shape{1}, {value}, requires_grad); }

Tensor Tensor::from_impl(std::shared_ptr<detail::TensorImpl> impl) { return Tensor(AdoptTag{}, std::move(impl)); }

std::size_t Tensor::dim(std::size_t axis) const {
  if (axis >= rank()) {
    throw ShapeError("axis " + std::to_string(axis) + " out of range for shape " + to_string(shape()));
  }
  return impl_->shape[axis];
}

std::span<float> Tensor::mutable_data() {
  if (!is_leaf()) throw std::logic_error("cannot mutate a tensor produced by a recorded op");
  return *impl_->data;
}

float Tensor::item() const {
  if (numel() != 1) throw ShapeError("item() on tensor of shape " + to_string(shape()));
  return (*impl_->data)[0];
}

void Tensor::set_requires_grad(bool value) {
  if (!is_leaf()) throw std::logic_error("requires_grad can only be set on leaves");
  impl_->requires_grad = value;
  if (!value) impl_->grad.reset();
}

std::span<const float> Tensor::grad() const {
  if (!impl_->grad) throw std::logic_error("tensor has no gradient");
  return *impl_->grad;
}

void Tensor::zero_grad() {
  if (impl_->grad) std::fill(impl_->grad->begin(), impl_->grad->end(), 0.0f);
}

Tensor Tensor::detach() const {
  auto impl = std::make_shared<detail::TensorImpl>();
  impl->shape = impl_->shape;
  impl->data = impl_->data;
  return from_impl(std::move(impl));
}

Tensor Tensor::clone() const { return Tensor(shape(), *impl_->data); }

Tensor Tensor::reshaped(Shape shape) const {
  if (hda::numel(shape) != numel()) {
    throw ShapeError("cannot reshape " + to_string(this->shape()) + " to " + to_string(shape));
  }
  auto src = impl_;
  auto impl = std::make_shared<detail::TensorImpl>();
  impl->shape = std::move(shape);
  impl->data = impl_->data;
  if (grad_enabled() && requires_grad()) {
    impl->requires_grad = true;
    impl->node = std::make_shared<detail::Node>();
    impl->node->op = "reshape";
    impl->node->inputs = {src};
    impl->node->backward = [](std::span<const float> g, std::span<std::vector<float>* const> gi) {
      auto& dst = *gi[0];
      for (std::size_t i = 0; i < g.size(); ++i) dst[i] += g[i];
    };
  }
  return from_impl(std::move(impl));
}

bool grad_enabled() { return g_grad_enabled; }

NoGradGuard::NoGradGuard() : previous_(g_grad_enabled) { g_grad_enabled = false; }
NoGradGuard::~NoGradGuard() { g_grad_enabled = previous_; }

Tensor make_result(const char* op, Shape shape, std::vector<float> data,
                   std::initializer_list<Tensor> inputs, detail::BackwardFn backward) {
  return make_result(op, std::move(shape), std::make_shared<std::vector<float>>(std::move(data)), inputs,
                     std::move(backward));
}

Tensor make_result(const char* op, Shape shape, std::shared_ptr<std::vector<float>> data,
                   std::initializer_list<Tensor> inputs, detail::BackwardFn backward) {
  if (numel(shape) != data->size()) {
    throw ShapeError(std::string(op) + ": result shape " + to_string(shape) + " does not match " +
                     std::to_string(data->size()) + " values");
  }
  auto impl = std::make_shared<detail::TensorImpl>();
  impl->shape = std::move(shape);
  impl->data = std::move(data);
  Tensor out = Tensor::from_impl(std::move(impl));
  if (!grad_enabled()) return out;
  const bool any = std::any_of(inputs.begin(), inputs.end(),
                               [](const Tensor& t) { return t.requires_grad(); });
  if (!any) return out;
  auto node = std::make_shared<detail::Node>();
  node->op = op;
  for (const Tensor& t : inputs) node->inputs.push_back(t.impl());
  node->backward = std::move(backward);
  out.impl()->requires_grad = true;
  out.impl()->node = std::move(node);
  return out;
}

Tape Tape::record(const Tensor& root) {
  Tape tape;
  std::unordered_set<const detail::TensorImpl*> visited;
  // Iterative post-order DFS; a node is emitted after all of its inputs.
  std::vector<std::pair<std::shared_ptr<detail::TensorImpl>, std::size_t>> stack;
  if (root.impl()->node) stack.emplace_back(root.impl(), 0);
  visited.insert(root.impl().get());
  while (!stack.empty()) {
    auto& [impl, next] = stack.back();
    const auto& inputs = impl->node->inputs;
    if (next < inputs.size()) {
      const auto& child = inputs[next++];
      if (child->node && child->requires_grad && visited.insert(child.get()).second) {
        stack.emplace_back(child, 0);
      }
    } else {
      tape.ops_.push_back(Tensor::from_impl(impl));
      stack.pop_back();
    }
  }
  return tape;
}

void Tape::backward(const Tensor& root) const {
  if (root.numel() != 1) {
    throw ShapeError("backward() needs a single-element loss, got shape " + to_string(root.shape()));
  }
  if (!root.requires_grad()) return;
  if (root.is_leaf()) {
    auto& g = root.impl()->grad;
    if (!g) g.emplace(1, 0.0f);
    (*g)[0] += 1.0f;
    return;
  }

  std::unordered_map<const detail::TensorImpl*, std::vector<float>> grads;
  grads[root.impl().get()] = std::vector<float>(1, 1.0f);

  std::vector<std::vector<float>*> buffers;
  for (auto it = ops_.rbegin(); it != ops_.rend(); ++it) {
    const auto& impl = it->impl();
    auto found = grads.find(impl.get());
    if (found == grads.end()) continue;
    const std::vector<float> grad_out = std::move(found->second);
    grads.erase(found);

    const auto& node = *impl->node;
    buffers.assign(node.inputs.size(), nullptr);
    for (std::size_t k = 0; k < node.inputs.size(); ++k) {
      const auto& in = node.inputs[k];
      if (!in->requires_grad) continue;
      const std::size_t n = in->data->size();
      if (in->node) {
        auto& buf = grads[in.get()];
        if (buf.empty() && n) buf.assign(n, 0.0f);
        buffers[k] = &buf;
      } else {
        if (!in->grad) in->grad.emplace(n, 0.0f);
        buffers[k] = &*in->grad;
      }
    }
    node.backward(grad_out, buffers);
  }
}

void backward(const Tensor& loss) {
  if (loss.numel() != 1) {
    throw ShapeError("backward() needs a single-element loss, got shape " + to_string(loss.shape()));
  }
  Tape::record(loss).backward(loss);
}

}  // namespace hda
