#pragma once

#include <array>
#include <cstdint>
#include <string>

#include "hda/nn.hpp"

namespace hda {

/// Per-domain image shape; source is (m, n, d), target is (k, l, e).
struct DomainShape {
  std::size_t height = 0;
  std::size_t width = 0;
  std::size_t channels = 0;

  /// Per-sample tensor shape, channels first.
  Shape chw() const { return {channels, height, width}; }
  std::size_t numel() const { return height * width * channels; }
  bool operator==(const DomainShape&) const = default;
};

std::string to_string(const DomainShape& shape);
/// Parses "HxWxC", e.g. "16x16x1".
DomainShape parse_domain_shape(const std::string& text);

class BuildError : public SpecError {
 public:
  using SpecError::SpecError;
};

/// Entry conv, two residual blocks, a chain of x2 / /2 stages with a final
/// center crop/pad to the exact output extents, exit conv and sigmoid.
Network build_generator(const DomainShape& in, const DomainShape& out, std::size_t base_channels,
                        std::uint64_t seed, std::string name = "generator");

/// Four stride-2 convs with widths base*{1,2,4,8}; batch norm after the
/// last three; global mean pool; one logit.
Network build_discriminator(const DomainShape& shape, std::size_t base_channels, std::uint64_t seed,
                            std::string name = "discriminator");

Network build_classifier(const DomainShape& shape, std::size_t num_classes, std::uint64_t seed,
                         std::size_t base_channels = 16, std::string name = "classifier");

Network build_final_classifier(const DomainShape& shape, std::size_t num_classes, std::uint64_t seed,
                               std::size_t base_channels = 16, std::string name = "final");

struct ModelConfig {
  std::size_t generator_channels = 16;
  std::size_t discriminator_channels = 16;
  std::size_t classifier_channels = 16;
  std::size_t final_channels = 16;
};

struct ModelBundle {
  DomainShape source;
  DomainShape target;
  std::size_t num_classes = 0;
  Network g_s2t;
  Network g_t2s;
  Network d_s;
  Network d_t;
  Network c_s;
  Network c_t;
  Network final;

  /// The six networks trained by the adversarial architecture, in checkpoint order.
  std::array<Network*, 6> training_networks() { return {&g_s2t, &g_t2s, &d_s, &d_t, &c_s, &c_t}; }
  std::array<const Network*, 6> training_networks() const { return {&g_s2t, &g_t2s, &d_s, &d_t, &c_s, &c_t}; }
  ModelBundle clone() const;
};

ModelBundle build_bundle(const DomainShape& source, const DomainShape& target, std::size_t num_classes,
                         const ModelConfig& config, std::uint64_t seed);

}  // namespace hda
