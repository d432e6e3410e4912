#include "hda/models.hpp"

#include <sstream>

#include "hda/rng.hpp"

namespace hda {

std::string to_string(const DomainShape& shape) {
  return std::to_string(shape.height) + "x" + std::to_string(shape.width) + "x" + std::to_string(shape.channels);
}

DomainShape parse_domain_shape(const std::string& text) {
  DomainShape shape;
  char x1 = 0, x2 = 0;
  std::istringstream in(text);
  if (!(in >> shape.height >> x1 >> shape.width >> x2 >> shape.channels) || x1 != 'x' || x2 != 'x' ||
      in.peek() != EOF) {
    throw std::invalid_argument("domain shape must look like HxWxC, got '" + text + "'");
  }
  if (shape.height < 1 || shape.width < 1 || shape.channels < 1) {
    throw std::invalid_argument("domain shape extents must be >= 1, got '" + text + "'");
  }
  return shape;
}

namespace {

void require_extents(const DomainShape& shape, std::size_t minimum, const std::string& what) {
  if (shape.channels < 1 || shape.height < minimum || shape.width < minimum) {
    throw BuildError(what + ": shape " + to_string(shape) + " needs spatial extents >= " + std::to_string(minimum) +
                     " and at least one channel");
  }
}

// Signed stage count: positive means x2 stages, negative /2 stages, chosen so
// the resampled extent is >= target (the remainder is cropped).
int stages_for(std::size_t in, std::size_t out) {
  int stages = 0;
  std::size_t cur = in;
  if (out > in) {
    while (cur < out) {
      cur *= 2;
      ++stages;
    }
  } else {
    while ((cur + 1) / 2 >= out && cur > 1) {
      cur = (cur + 1) / 2;
      --stages;
    }
  }
  return stages;
}

Network finish(std::string name, const DomainShape& in, std::vector<LayerSpec> layers, std::uint64_t seed) {
  Network net;
  net.name = std::move(name);
  net.input_shape = in.chw();
  net.layers = std::move(layers);
  try {
    net.params = init_parameters(net.layers, seed);
  } catch (const SpecError& e) {
    throw BuildError(net.name + ": " + e.what());
  }
  return net;
}

Shape probe(Network& net, const std::string& what) {
  try {
    return net.probe_output_shape(2);
  } catch (const ShapeError& e) {
    throw BuildError(what + ": " + e.what());
  }
}

}  // namespace

Network build_generator(const DomainShape& in, const DomainShape& out, std::size_t base_channels,
                        std::uint64_t seed, std::string name) {
  require_extents(in, 4, "generator input");
  require_extents(out, 4, "generator output");
  if (base_channels < 1) throw BuildError("generator: base_channels must be >= 1");

  std::vector<LayerSpec> layers{LayerSpec::conv(in.channels, base_channels), LayerSpec::relu(),
                                LayerSpec::residual_block(base_channels), LayerSpec::residual_block(base_channels)};

  const int sh = stages_for(in.height, out.height);
  const int sw = stages_for(in.width, out.width);
  int stages = 0;
  if (sh >= 0 && sw >= 0) stages = std::max(sh, sw);
  else if (sh <= 0 && sw <= 0) stages = std::max(sh, sw);
  std::size_t h = in.height, w = in.width;
  for (int s = 0; s < stages; ++s) {
    layers.push_back(LayerSpec::upsample(2));
    layers.push_back(LayerSpec::conv(base_channels, base_channels));
    layers.push_back(LayerSpec::relu());
    h *= 2;
    w *= 2;
  }
  for (int s = 0; s > stages; --s) {
    layers.push_back(LayerSpec::conv(base_channels, base_channels, 3, 2, 1));
    layers.push_back(LayerSpec::relu());
    h = (h + 1) / 2;
    w = (w + 1) / 2;
  }
  if (h != out.height || w != out.width) layers.push_back(LayerSpec::crop_pad(out.height, out.width));
  layers.push_back(LayerSpec::conv(base_channels, out.channels));
  layers.push_back(LayerSpec::sigmoid());

  Network net = finish(std::move(name), in, std::move(layers), seed);
  const Shape got = probe(net, net.name);
  const Shape want{2, out.channels, out.height, out.width};
  if (got != want) {
    throw BuildError(net.name + ": probe produced " + to_string(got) + ", expected " + to_string(want));
  }
  return net;
}

Network build_discriminator(const DomainShape& shape, std::size_t base_channels, std::uint64_t seed,
                            std::string name) {
  require_extents(shape, 1, "discriminator input");
  if (base_channels < 1) throw BuildError("discriminator: base_channels must be >= 1");
  // Each of the first three stride-2 layers must see at least two pixels,
  // otherwise the resolution has collapsed before the last layer.
  std::size_t h = shape.height, w = shape.width;
  for (int layer = 1; layer <= 3; ++layer) {
    if (h < 2 || w < 2) {
      throw BuildError(name + ": shape " + to_string(shape) + " collapses to a single pixel before layer " +
                       std::to_string(layer) + " of 4");
    }
    h = (h - 1) / 2 + 1;
    w = (w - 1) / 2 + 1;
  }

  const std::size_t b = base_channels;
  std::vector<LayerSpec> layers{
      LayerSpec::conv(shape.channels, b, 3, 2, 1), LayerSpec::relu(),
      LayerSpec::conv(b, 2 * b, 3, 2, 1),          LayerSpec::batchnorm(2 * b), LayerSpec::relu(),
      LayerSpec::conv(2 * b, 4 * b, 3, 2, 1),      LayerSpec::batchnorm(4 * b), LayerSpec::relu(),
      LayerSpec::conv(4 * b, 8 * b, 3, 2, 1),      LayerSpec::batchnorm(8 * b), LayerSpec::relu(),
      LayerSpec::global_avg_pool(),                LayerSpec::dense(8 * b, 1),
  };
  Network net = finish(std::move(name), shape, std::move(layers), seed);
  probe(net, net.name);
  return net;
}

Network build_classifier(const DomainShape& shape, std::size_t num_classes, std::uint64_t seed,
                         std::size_t base_channels, std::string name) {
  require_extents(shape, 4, name);
  if (num_classes < 2) throw BuildError(name + ": need at least two classes");
  const std::size_t b = base_channels;
  std::vector<LayerSpec> layers{
      LayerSpec::conv(shape.channels, b), LayerSpec::relu(), LayerSpec::maxpool(2),
      LayerSpec::conv(b, 2 * b),          LayerSpec::relu(), LayerSpec::maxpool(2), LayerSpec::dropout(0.25f),
      LayerSpec::conv(2 * b, 4 * b),      LayerSpec::relu(),
      LayerSpec::conv(4 * b, 4 * b),      LayerSpec::relu(), LayerSpec::dropout(0.25f),
      LayerSpec::global_avg_pool(),       LayerSpec::dense(4 * b, num_classes),
  };
  Network net = finish(std::move(name), shape, std::move(layers), seed);
  probe(net, net.name);
  return net;
}

Network build_final_classifier(const DomainShape& shape, std::size_t num_classes, std::uint64_t seed,
                               std::size_t base_channels, std::string name) {
  require_extents(shape, 2, name);
  if (num_classes < 2) throw BuildError(name + ": need at least two classes");
  const std::size_t b = base_channels;
  std::vector<LayerSpec> layers{
      LayerSpec::conv(shape.channels, b), LayerSpec::relu(), LayerSpec::maxpool(2),
      LayerSpec::conv(b, 2 * b),          LayerSpec::relu(),
      LayerSpec::conv(2 * b, 2 * b),      LayerSpec::relu(),
      LayerSpec::global_avg_pool(),       LayerSpec::dense(2 * b, num_classes),
  };
  Network net = finish(std::move(name), shape, std::move(layers), seed);
  probe(net, net.name);
  return net;
}

ModelBundle ModelBundle::clone() const {
  return ModelBundle{source,      target,      num_classes, g_s2t.clone(), g_t2s.clone(), d_s.clone(),
                     d_t.clone(), c_s.clone(), c_t.clone(), final.clone()};
}

ModelBundle build_bundle(const DomainShape& source, const DomainShape& target, std::size_t num_classes,
                         const ModelConfig& config, std::uint64_t seed) {
  ModelBundle bundle;
  bundle.source = source;
  bundle.target = target;
  bundle.num_classes = num_classes;
  bundle.g_s2t = build_generator(source, target, config.generator_channels, derive_seed(seed, 1), "g_s2t");
  bundle.g_t2s = build_generator(target, source, config.generator_channels, derive_seed(seed, 2), "g_t2s");
  bundle.d_s = build_discriminator(source, config.discriminator_channels, derive_seed(seed, 3), "d_s");
  bundle.d_t = build_discriminator(target, config.discriminator_channels, derive_seed(seed, 4), "d_t");
  bundle.c_s = build_classifier(source, num_classes, derive_seed(seed, 5), config.classifier_channels, "c_s");
  bundle.c_t = build_classifier(target, num_classes, derive_seed(seed, 6), config.classifier_channels, "c_t");
  bundle.final = build_final_classifier(target, num_classes, derive_seed(seed, 7), config.final_channels, "final");
  return bundle;
}

}  // namespace hda
