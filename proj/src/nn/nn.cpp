#include "hda/nn.hpp"

#include <algorithm>
#include <bit>
#include <cmath>

#include "hda/ops.hpp"
#include "hda/rng.hpp"

namespace hda {

std::string to_string(LayerKind kind) {
  switch (kind) {
    case LayerKind::kConv: return "conv";
    case LayerKind::kBatchNorm: return "batchnorm";
    case LayerKind::kRelu: return "relu";
    case LayerKind::kMaxPool: return "maxpool";
    case LayerKind::kUpsample: return "upsample";
    case LayerKind::kDropout: return "dropout";
    case LayerKind::kDense: return "dense";
    case LayerKind::kSigmoid: return "sigmoid";
    case LayerKind::kSoftmax: return "softmax";
    case LayerKind::kResidualBlock: return "residual-block";
    case LayerKind::kGlobalAvgPool: return "global-avg-pool";
    case LayerKind::kCropPad: return "crop-pad";
  }
  return "unknown";
}

LayerSpec LayerSpec::conv(std::size_t in, std::size_t out, std::size_t kernel, std::size_t stride, std::size_t pad) {
  LayerSpec s;
  s.kind = LayerKind::kConv;
  s.in_channels = in;
  s.out_channels = out;
  s.kernel = kernel;
  s.stride = stride;
  s.pad = pad;
  return s;
}

LayerSpec LayerSpec::batchnorm(std::size_t channels) {
  LayerSpec s;
  s.kind = LayerKind::kBatchNorm;
  s.in_channels = channels;
  return s;
}

LayerSpec LayerSpec::relu() { return LayerSpec{}; }

LayerSpec LayerSpec::maxpool(std::size_t kernel, std::size_t stride) {
  LayerSpec s;
  s.kind = LayerKind::kMaxPool;
  s.kernel = kernel;
  s.stride = stride == 0 ? kernel : stride;
  return s;
}

LayerSpec LayerSpec::upsample(std::size_t factor) {
  LayerSpec s;
  s.kind = LayerKind::kUpsample;
  s.factor = factor;
  return s;
}

LayerSpec LayerSpec::dropout(float rate) {
  LayerSpec s;
  s.kind = LayerKind::kDropout;
  s.rate = rate;
  return s;
}

LayerSpec LayerSpec::dense(std::size_t in, std::size_t out) {
  LayerSpec s;
  s.kind = LayerKind::kDense;
  s.in_channels = in;
  s.out_channels = out;
  return s;
}

LayerSpec LayerSpec::sigmoid() {
  LayerSpec s;
  s.kind = LayerKind::kSigmoid;
  return s;
}

LayerSpec LayerSpec::softmax() {
  LayerSpec s;
  s.kind = LayerKind::kSoftmax;
  return s;
}

LayerSpec LayerSpec::residual_block(std::size_t channels) {
  LayerSpec s;
  s.kind = LayerKind::kResidualBlock;
  s.in_channels = channels;
  s.out_channels = channels;
  s.kernel = 3;
  s.pad = 1;
  return s;
}

LayerSpec LayerSpec::global_avg_pool() {
  LayerSpec s;
  s.kind = LayerKind::kGlobalAvgPool;
  return s;
}

LayerSpec LayerSpec::crop_pad(std::size_t height, std::size_t width) {
  LayerSpec s;
  s.kind = LayerKind::kCropPad;
  s.out_h = height;
  s.out_w = width;
  return s;
}

void validate(const LayerSpec& spec) {
  auto fail = [&](const std::string& why) { throw SpecError(to_string(spec.kind) + " layer: " + why); };
  switch (spec.kind) {
    case LayerKind::kConv:
      if (spec.in_channels < 1 || spec.out_channels < 1) fail("channels must be >= 1");
      if (spec.kernel < 1) fail("kernel must be >= 1");
      if (spec.stride < 1) fail("stride must be >= 1");
      break;
    case LayerKind::kBatchNorm:
    case LayerKind::kResidualBlock:
      if (spec.in_channels < 1) fail("channels must be >= 1");
      break;
    case LayerKind::kMaxPool:
      if (spec.kernel < 1 || spec.stride < 1) fail("kernel and stride must be >= 1");
      break;
    case LayerKind::kUpsample:
      if (spec.factor < 1) fail("factor must be >= 1");
      break;
    case LayerKind::kDropout:
      if (!(spec.rate >= 0.0f && spec.rate < 1.0f)) fail("rate must lie in [0, 1)");
      break;
    case LayerKind::kDense:
      if (spec.in_channels < 1 || spec.out_channels < 1) fail("units must be >= 1");
      break;
    case LayerKind::kCropPad:
      if (spec.out_h < 1 || spec.out_w < 1) fail("output extents must be >= 1");
      break;
    default:
      break;
  }
}

void ParameterSet::add(std::string name, Tensor value, bool trainable) {
  if (contains(name)) throw std::invalid_argument("duplicate parameter name '" + name + "'");
  value.set_requires_grad(trainable);
  entries_.push_back({std::move(name), std::move(value), trainable});
}

std::size_t ParameterSet::index_of(const std::string& name) const {
  for (std::size_t i = 0; i < entries_.size(); ++i)
    if (entries_[i].name == name) return i;
  return entries_.size();
}

bool ParameterSet::contains(const std::string& name) const { return index_of(name) < entries_.size(); }

Tensor& ParameterSet::at(const std::string& name) {
  const std::size_t i = index_of(name);
  if (i == entries_.size()) throw std::out_of_range("no parameter named '" + name + "'");
  return entries_[i].value;
}

const Tensor& ParameterSet::at(const std::string& name) const {
  return const_cast<ParameterSet*>(this)->at(name);
}

std::size_t ParameterSet::trainable_numel() const {
  std::size_t n = 0;
  for (const auto& e : entries_)
    if (e.trainable) n += e.value.numel();
  return n;
}

void ParameterSet::zero_grad() {
  for (auto& e : entries_) e.value.clear_grad();
}

ParameterSet ParameterSet::clone() const {
  ParameterSet copy;
  for (const auto& e : entries_) copy.add(e.name, e.value.clone(), e.trainable);
  copy.adam_ = adam_;
  return copy;
}

bool ParameterSet::bitwise_equal(const ParameterSet& other) const {
  if (entries_.size() != other.entries_.size()) return false;
  for (std::size_t i = 0; i < entries_.size(); ++i) {
    const auto& a = entries_[i];
    const auto& b = other.entries_[i];
    if (a.name != b.name || a.trainable != b.trainable || a.value.shape() != b.value.shape()) return false;
    const auto da = a.value.data();
    const auto db = b.value.data();
    if (!std::equal(da.begin(), da.end(), db.begin(), [](float x, float y) {
          return std::bit_cast<std::uint32_t>(x) == std::bit_cast<std::uint32_t>(y);
        }))
      return false;
  }
  return true;
}

namespace {

Tensor glorot(Shape shape, std::size_t fan_in, std::size_t fan_out, std::uint64_t seed) {
  const double limit = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
  Rng rng(seed);
  std::vector<float> values(numel(shape));
  for (float& v : values) v = static_cast<float>(rng.uniform(-limit, limit));
  return Tensor(std::move(shape), std::move(values));
}

void add_conv(ParameterSet& ps, const std::string& prefix, std::size_t in, std::size_t out, std::size_t kernel,
              std::uint64_t seed) {
  const std::size_t area = kernel * kernel;
  ps.add(prefix + "weight", glorot({out, in, kernel, kernel}, in * area, out * area, seed));
  ps.add(prefix + "bias", Tensor::zeros({out}));
}

void add_batchnorm(ParameterSet& ps, const std::string& prefix, std::size_t channels) {
  ps.add(prefix + "gamma", Tensor::full({channels}, 1.0f));
  ps.add(prefix + "beta", Tensor::zeros({channels}));
  ps.add(prefix + "running_mean", Tensor::zeros({channels}), false);
  ps.add(prefix + "running_var", Tensor::full({channels}, 1.0f), false);
}

}  // namespace

ParameterSet init_parameters(std::span<const LayerSpec> layers, std::uint64_t seed) {
  ParameterSet ps;
  for (std::size_t i = 0; i < layers.size(); ++i) {
    const LayerSpec& spec = layers[i];
    validate(spec);
    const std::string prefix = std::to_string(i) + ".";
    switch (spec.kind) {
      case LayerKind::kConv:
        add_conv(ps, prefix, spec.in_channels, spec.out_channels, spec.kernel, derive_seed(seed, i));
        break;
      case LayerKind::kBatchNorm:
        add_batchnorm(ps, prefix, spec.in_channels);
        break;
      case LayerKind::kDense:
        ps.add(prefix + "weight",
               glorot({spec.out_channels, spec.in_channels}, spec.in_channels, spec.out_channels, derive_seed(seed, i)));
        ps.add(prefix + "bias", Tensor::zeros({spec.out_channels}));
        break;
      case LayerKind::kResidualBlock:
        add_conv(ps, prefix + "conv1.", spec.in_channels, spec.in_channels, spec.kernel, derive_seed(seed, i, 1));
        add_batchnorm(ps, prefix + "bn1.", spec.in_channels);
        add_conv(ps, prefix + "conv2.", spec.in_channels, spec.in_channels, spec.kernel, derive_seed(seed, i, 2));
        add_batchnorm(ps, prefix + "bn2.", spec.in_channels);
        break;
      default:
        break;
    }
  }
  return ps;
}

namespace {

struct LayerContext {
  ParameterSet& params;
  const ForwardOptions& options;

  Tensor param(const std::string& name) const {
    Tensor& t = params.at(name);
    return options.frozen ? t.detach() : t;
  }

  Tensor conv(const Tensor& x, const std::string& prefix, std::size_t stride, std::size_t pad) const {
    return conv2d(x, param(prefix + "weight"), param(prefix + "bias"), stride, pad);
  }

  Tensor batchnorm(const Tensor& x, const std::string& prefix) const {
    BatchNormState state{params.at(prefix + "running_mean").mutable_data(),
                         params.at(prefix + "running_var").mutable_data()};
    state.training = options.training;
    state.update_running = options.training && options.update_running_stats;
    return batchnorm2d(x, param(prefix + "gamma"), param(prefix + "beta"), state);
  }
};

Tensor apply_layer(const LayerSpec& spec, std::size_t index, const LayerContext& ctx, const Tensor& x) {
  const std::string prefix = std::to_string(index) + ".";
  switch (spec.kind) {
    case LayerKind::kConv:
      if (x.rank() == 4 && x.dim(1) != spec.in_channels) {
        throw ShapeError("expected " + std::to_string(spec.in_channels) + " input channels, got " +
                         to_string(x.shape()));
      }
      return ctx.conv(x, prefix, spec.stride, spec.pad);
    case LayerKind::kBatchNorm:
      return ctx.batchnorm(x, prefix);
    case LayerKind::kRelu:
      return relu(x);
    case LayerKind::kMaxPool:
      return maxpool2d(x, spec.kernel, spec.stride);
    case LayerKind::kUpsample:
      return upsample_nearest2d(x, spec.factor);
    case LayerKind::kDropout:
      return dropout(x, spec.rate, ctx.options.training, derive_seed(ctx.options.seed, index, ctx.options.step));
    case LayerKind::kDense: {
      if (x.rank() != 2 || x.dim(1) != spec.in_channels) {
        throw ShapeError("dense expects N×" + std::to_string(spec.in_channels) + ", got " + to_string(x.shape()));
      }
      return add(matmul(x, transpose(ctx.param(prefix + "weight"))), ctx.param(prefix + "bias"));
    }
    case LayerKind::kSigmoid:
      return sigmoid(x);
    case LayerKind::kSoftmax:
      return softmax(x, x.rank() - 1);
    case LayerKind::kResidualBlock: {
      Tensor h = ctx.conv(x, prefix + "conv1.", 1, spec.pad);
      h = relu(ctx.batchnorm(h, prefix + "bn1."));
      h = ctx.conv(h, prefix + "conv2.", 1, spec.pad);
      h = ctx.batchnorm(h, prefix + "bn2.");
      return add(x, h);
    }
    case LayerKind::kGlobalAvgPool:
      return global_avg_pool2d(x);
    case LayerKind::kCropPad:
      return crop_pad2d(x, spec.out_h, spec.out_w);
  }
  throw SpecError("unknown layer kind");
}

}  // namespace

Tensor forward(std::span<const LayerSpec> layers, ParameterSet& params, const Tensor& x,
               const ForwardOptions& options) {
  LayerContext ctx{params, options};
  Tensor h = x;
  for (std::size_t i = 0; i < layers.size(); ++i) {
    try {
      h = apply_layer(layers[i], i, ctx, h);
    } catch (const ShapeError& e) {
      throw ShapeError("layer " + std::to_string(i) + " (" + to_string(layers[i].kind) + "): " + e.what());
    }
  }
  return h;
}

void adam_step(ParameterSet& params, const AdamConfig& config) {
  auto entries = params.entries();
  for (const auto& e : entries) {
    if (e.trainable && !e.value.has_grad()) throw MissingGradientError("parameter '" + e.name + "' has no gradient");
  }
  auto& state = params.optimizer_state();
  if (state.first.empty()) {
    for (const auto& e : entries) {
      if (!e.trainable) continue;
      state.first.emplace_back(e.value.numel(), 0.0f);
      state.second.emplace_back(e.value.numel(), 0.0f);
    }
  }
  state.step += 1;
  const double t = static_cast<double>(state.step);
  const float correction1 = static_cast<float>(1.0 - std::pow(static_cast<double>(config.beta1), t));
  const float correction2 = static_cast<float>(1.0 - std::pow(static_cast<double>(config.beta2), t));

  std::size_t slot = 0;
  for (auto& e : entries) {
    if (!e.trainable) continue;
    auto& m = state.first[slot];
    auto& v = state.second[slot];
    ++slot;
    if (m.size() != e.value.numel()) throw std::logic_error("optimizer state does not mirror '" + e.name + "'");
    auto p = e.value.mutable_data();
    const auto g = e.value.grad();
    for (std::size_t i = 0; i < p.size(); ++i) {
      m[i] = config.beta1 * m[i] + (1.0f - config.beta1) * g[i];
      v[i] = config.beta2 * v[i] + (1.0f - config.beta2) * g[i] * g[i];
      const float m_hat = m[i] / correction1;
      const float v_hat = v[i] / correction2;
      p[i] -= config.lr * m_hat / (std::sqrt(v_hat) + config.eps);
    }
    e.value.clear_grad();
  }
}

Shape Network::probe_output_shape(std::size_t batch) {
  NoGradGuard no_grad;
  Shape shape = input_shape;
  shape.insert(shape.begin(), batch);
  ForwardOptions options;
  options.training = false;
  return forward(layers, params, Tensor::zeros(shape), options).shape();
}

Network Network::clone() const { return Network{name, input_shape, layers, params.clone()}; }

}  // namespace hda
