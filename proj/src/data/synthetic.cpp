#include <algorithm>
#include <array>
#include <cmath>
#include <numbers>

#include "hda/data.hpp"
#include "hda/rng.hpp"

namespace hda {

namespace {

constexpr std::array<double, 6> kStripeAngles{0.0, 90.0, 45.0, 135.0, 22.5, 112.5};
constexpr std::array<double, 6> kBlobCounts{4.0, 12.0, 20.0, 7.0, 16.0, 28.0};
constexpr std::array<double, 6> kCheckerCells{2.0, 3.0, 4.0, 5.0, 6.0, 7.0};
constexpr double kStripePeriod = 0.5;
constexpr double kBlobRadius = 0.1;
constexpr double kTargetNoise = 0.05;

// One texture instance: class parameters plus per-sample jitter, evaluated
// in normalized coordinates (u, v) in [0, 1)^2. Returns intensity in [0, 1].
struct Texture {
  TextureClass cls;
  double angle = 0.0;
  double phase = 0.0;
  double contrast = 1.0;
  double offset = 0.0;
  std::vector<std::array<double, 2>> blobs;

  double operator()(double u, double v) const {
    double value = 0.5;
    switch (cls.family) {
      case TextureFamily::kStripes: {
        const double a = angle * std::numbers::pi / 180.0;
        const double t = (u * std::cos(a) + v * std::sin(a)) / kStripePeriod + phase;
        value = 0.5 + 0.5 * contrast * std::sin(2.0 * std::numbers::pi * t);
        break;
      }
      case TextureFamily::kBlobs: {
        double peak = 0.0;
        for (const auto& b : blobs) {
          const double du = u - b[0], dv = v - b[1];
          peak = std::max(peak, std::exp(-(du * du + dv * dv) / (2.0 * kBlobRadius * kBlobRadius)));
        }
        value = 0.1 + 0.8 * contrast * peak;
        break;
      }
      case TextureFamily::kCheckerboard: {
        const double n = cls.parameter;
        const double s = std::sin(std::numbers::pi * n * (u + phase)) * std::sin(std::numbers::pi * n * (v + phase));
        value = 0.5 + 0.5 * contrast * (s >= 0.0 ? 1.0 : -1.0);
        break;
      }
    }
    return std::clamp(value + offset, 0.0, 1.0);
  }
};

Texture sample_texture(std::size_t class_id, Rng& rng) {
  Texture t;
  t.cls = texture_class(class_id);
  t.contrast = rng.uniform(0.75, 1.0);
  t.offset = rng.uniform(-0.05, 0.05);
  switch (t.cls.family) {
    case TextureFamily::kStripes:
      t.angle = t.cls.parameter + rng.uniform(-5.0, 5.0);
      t.phase = rng.uniform(-0.1, 0.1);
      break;
    case TextureFamily::kBlobs:
      for (std::size_t k = 0; k < static_cast<std::size_t>(t.cls.parameter); ++k) {
        t.blobs.push_back({rng.uniform(), rng.uniform()});
      }
      break;
    case TextureFamily::kCheckerboard:
      t.phase = rng.uniform(-0.05, 0.05) / t.cls.parameter;
      break;
  }
  return t;
}

// Style A: one point sample per pixel centre, contrast stretched.
std::vector<float> render_source(const Texture& tex, const DomainShape& shape) {
  std::vector<float> img(shape.numel());
  const std::size_t plane = shape.height * shape.width;
  for (std::size_t y = 0; y < shape.height; ++y) {
    for (std::size_t x = 0; x < shape.width; ++x) {
      const double u = (static_cast<double>(x) + 0.5) / static_cast<double>(shape.width);
      const double v = (static_cast<double>(y) + 0.5) / static_cast<double>(shape.height);
      const double sharp = std::clamp(0.5 + 1.5 * (tex(u, v) - 0.5), 0.0, 1.0);
      for (std::size_t c = 0; c < shape.channels; ++c) img[c * plane + y * shape.width + x] = static_cast<float>(sharp);
    }
  }
  return img;
}

// Style B: 2×2 supersampled, [1 2 1]/4 blurred, channel-mixed, noisy.
std::vector<float> render_target(const Texture& tex, const DomainShape& shape, Rng& rng) {
  const std::size_t h = shape.height, w = shape.width;
  std::vector<double> base(h * w);
  for (std::size_t y = 0; y < h; ++y)
    for (std::size_t x = 0; x < w; ++x) {
      double acc = 0.0;
      for (int sy = 0; sy < 2; ++sy)
        for (int sx = 0; sx < 2; ++sx) {
          const double u = (static_cast<double>(x) + 0.25 + 0.5 * sx) / static_cast<double>(w);
          const double v = (static_cast<double>(y) + 0.25 + 0.5 * sy) / static_cast<double>(h);
          acc += tex(u, v);
        }
      base[y * w + x] = acc / 4.0;
    }
  auto at = [&](const std::vector<double>& img, long y, long x) {
    y = std::clamp<long>(y, 0, static_cast<long>(h) - 1);
    x = std::clamp<long>(x, 0, static_cast<long>(w) - 1);
    return img[static_cast<std::size_t>(y) * w + static_cast<std::size_t>(x)];
  };
  std::vector<double> tmp(h * w), blurred(h * w);
  for (std::size_t y = 0; y < h; ++y)
    for (std::size_t x = 0; x < w; ++x) {
      const long yy = static_cast<long>(y), xx = static_cast<long>(x);
      tmp[y * w + x] = 0.25 * at(base, yy, xx - 1) + 0.5 * at(base, yy, xx) + 0.25 * at(base, yy, xx + 1);
    }
  for (std::size_t y = 0; y < h; ++y)
    for (std::size_t x = 0; x < w; ++x) {
      const long yy = static_cast<long>(y), xx = static_cast<long>(x);
      blurred[y * w + x] = 0.25 * at(tmp, yy - 1, xx) + 0.5 * at(tmp, yy, xx) + 0.25 * at(tmp, yy + 1, xx);
    }

  // Channel c = bias + gain * intensity; the second channel is inverted.
  constexpr std::array<std::array<double, 2>, 3> kMix{{{0.1, 0.8}, {0.9, -0.7}, {0.3, 0.4}}};
  std::vector<float> img(shape.numel());
  for (std::size_t c = 0; c < shape.channels; ++c) {
    const auto& mix = kMix[c % kMix.size()];
    const double shift = 0.05 * static_cast<double>(c / kMix.size());
    for (std::size_t k = 0; k < h * w; ++k) {
      const double value = mix[0] + shift + mix[1] * blurred[k] + kTargetNoise * rng.normal();
      img[c * h * w + k] = static_cast<float>(std::clamp(value, 0.0, 1.0));
    }
  }
  return img;
}

void check_spec(const SyntheticSpec& spec) {
  if (spec.num_classes < 2 || spec.num_classes > 16) throw DataError("num_classes must lie in [2, 16]");
  if (spec.per_class < 1) throw DataError("per_class must be >= 1");
  for (const DomainShape* s : {&spec.source, &spec.target}) {
    if (s->height < 4 || s->width < 4 || s->channels < 1) {
      throw DataError("synthetic shape " + to_string(*s) + " needs extents >= 4 and at least one channel");
    }
  }
}

}  // namespace

TextureClass texture_class(std::size_t class_id) {
  const std::size_t k = class_id / 3;
  switch (class_id % 3) {
    case 0: return {TextureFamily::kStripes, kStripeAngles.at(k)};
    case 1: return {TextureFamily::kBlobs, kBlobCounts.at(k)};
    default: return {TextureFamily::kCheckerboard, kCheckerCells.at(k)};
  }
}

std::string texture_class_name(std::size_t class_id) {
  const TextureClass cls = texture_class(class_id);
  const long p = std::lround(cls.parameter * 10.0);
  switch (cls.family) {
    case TextureFamily::kStripes: return "stripes_" + std::to_string(p / 10) + (p % 10 ? "." + std::to_string(p % 10) : "") + "deg";
    case TextureFamily::kBlobs: return "blobs_" + std::to_string(p / 10);
    case TextureFamily::kCheckerboard: return "checker_" + std::to_string(p / 10);
  }
  return "class" + std::to_string(class_id);
}

std::pair<DomainDataset, DomainDataset> generate_synthetic_pair(const SyntheticSpec& spec) {
  check_spec(spec);
  std::vector<std::string> names;
  for (std::size_t c = 0; c < spec.num_classes; ++c) names.push_back(texture_class_name(c));
  DomainDataset source(spec.source, names);
  DomainDataset target(spec.target, names);
  // Every sample draws from its own stream, so order of generation is irrelevant.
  for (std::size_t c = 0; c < spec.num_classes; ++c) {
    for (std::size_t i = 0; i < spec.per_class; ++i) {
      Rng src_rng(derive_seed(spec.seed, 0, c * 100003 + i));
      source.add(render_source(sample_texture(c, src_rng), spec.source), static_cast<int>(c));
      Rng tgt_rng(derive_seed(spec.seed, 1, c * 100003 + i));
      const Texture tex = sample_texture(c, tgt_rng);
      target.add(render_target(tex, spec.target, tgt_rng), static_cast<int>(c));
    }
  }
  return {std::move(source), std::move(target)};
}

}  // namespace hda
