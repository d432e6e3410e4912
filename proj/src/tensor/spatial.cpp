#include <Eigen/Core>
#include <algorithm>
#include <cmath>
#include <string>

#include "hda/ops.hpp"
#include "hda/rng.hpp"

namespace hda {

namespace {

using RowMatrix = Eigen::Matrix<float, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using MapMatrix = Eigen::Map<RowMatrix>;
using ConstMapMatrix = Eigen::Map<const RowMatrix>;

void require_4d(const Tensor& x, const char* op) {
  if (x.rank() != 4) throw ShapeError(std::string(op) + ": expected N×C×H×W input, got " + to_string(x.shape()));
}

struct ConvGeometry {
  std::size_t n, c, h, w, f, kh, kw, stride, pad, oh, ow;
  std::size_t k() const { return c * kh * kw; }
  std::size_t p() const { return oh * ow; }
};

void im2col(const float* x, const ConvGeometry& g, float* cols) {
  const std::size_t np = g.n * g.p();
  for (std::size_t c = 0; c < g.c; ++c) {
    for (std::size_t ki = 0; ki < g.kh; ++ki) {
      for (std::size_t kj = 0; kj < g.kw; ++kj) {
        float* row = cols + ((c * g.kh + ki) * g.kw + kj) * np;
        for (std::size_t n = 0; n < g.n; ++n) {
          const float* plane = x + (n * g.c + c) * g.h * g.w;
          float* dst = row + n * g.p();
          for (std::size_t oh = 0; oh < g.oh; ++oh) {
            const long ih = static_cast<long>(oh * g.stride + ki) - static_cast<long>(g.pad);
            for (std::size_t ow = 0; ow < g.ow; ++ow) {
              const long iw = static_cast<long>(ow * g.stride + kj) - static_cast<long>(g.pad);
              const bool inside = ih >= 0 && iw >= 0 && ih < static_cast<long>(g.h) && iw < static_cast<long>(g.w);
              dst[oh * g.ow + ow] = inside ? plane[ih * static_cast<long>(g.w) + iw] : 0.0f;
            }
          }
        }
      }
    }
  }
}

void col2im(const float* cols, const ConvGeometry& g, float* dx) {
  const std::size_t np = g.n * g.p();
  for (std::size_t c = 0; c < g.c; ++c) {
    for (std::size_t ki = 0; ki < g.kh; ++ki) {
      for (std::size_t kj = 0; kj < g.kw; ++kj) {
        const float* row = cols + ((c * g.kh + ki) * g.kw + kj) * np;
        for (std::size_t n = 0; n < g.n; ++n) {
          float* plane = dx + (n * g.c + c) * g.h * g.w;
          const float* src = row + n * g.p();
          for (std::size_t oh = 0; oh < g.oh; ++oh) {
            const long ih = static_cast<long>(oh * g.stride + ki) - static_cast<long>(g.pad);
            if (ih < 0 || ih >= static_cast<long>(g.h)) continue;
            for (std::size_t ow = 0; ow < g.ow; ++ow) {
              const long iw = static_cast<long>(ow * g.stride + kj) - static_cast<long>(g.pad);
              if (iw < 0 || iw >= static_cast<long>(g.w)) continue;
              plane[ih * static_cast<long>(g.w) + iw] += src[oh * g.ow + ow];
            }
          }
        }
      }
    }
  }
}

}  // namespace

Tensor conv2d(const Tensor& x, const Tensor& w, const Tensor& bias, std::size_t stride, std::size_t pad) {
  require_4d(x, "conv2d");
  if (w.rank() != 4) throw ShapeError("conv2d: weight must be F×C×kH×kW, got " + to_string(w.shape()));
  if (stride < 1) throw std::invalid_argument("conv2d: stride must be >= 1");
  ConvGeometry g{x.dim(0), x.dim(1), x.dim(2), x.dim(3), w.dim(0), w.dim(2), w.dim(3), stride, pad, 0, 0};
  if (w.dim(1) != g.c) {
    throw ShapeError("conv2d: input has " + std::to_string(g.c) + " channels but weight " + to_string(w.shape()) +
                     " expects " + std::to_string(w.dim(1)));
  }
  if (bias.numel() != g.f) {
    throw ShapeError("conv2d: bias " + to_string(bias.shape()) + " does not match " + std::to_string(g.f) + " filters");
  }
  if (g.kh > g.h + 2 * pad || g.kw > g.w + 2 * pad) {
    throw ShapeError("conv2d: kernel " + std::to_string(g.kh) + "x" + std::to_string(g.kw) +
                     " larger than padded input " + to_string(x.shape()));
  }
  g.oh = (g.h + 2 * pad - g.kh) / stride + 1;
  g.ow = (g.w + 2 * pad - g.kw) / stride + 1;
  if (g.oh == 0 || g.ow == 0) throw ShapeError("conv2d: non-positive output extent for " + to_string(x.shape()));

  const std::size_t np = g.n * g.p();
  auto cols = make_buffer(g.k() * np);
  im2col(x.data().data(), g, cols->data());

  RowMatrix prod(g.f, np);
  prod.noalias() = ConstMapMatrix(w.data().data(), g.f, g.k()) * ConstMapMatrix(cols->data(), g.k(), np);

  std::vector<float> out(g.n * g.f * g.p());
  const auto bd = bias.data();
  for (std::size_t n = 0; n < g.n; ++n)
    for (std::size_t f = 0; f < g.f; ++f) {
      const float* src = prod.data() + f * np + n * g.p();
      float* dst = out.data() + (n * g.f + f) * g.p();
      for (std::size_t p = 0; p < g.p(); ++p) dst[p] = src[p] + bd[f];
    }

  Buffer wd = w.impl()->data;
  return make_result("conv2d", {g.n, g.f, g.oh, g.ow}, std::move(out), {x, w, bias},
                     [g, cols, wd](std::span<const float> grad, std::span<std::vector<float>* const> gi) {
                       const std::size_t np = g.n * g.p();
                       RowMatrix gm(g.f, np);
                       for (std::size_t n = 0; n < g.n; ++n)
                         for (std::size_t f = 0; f < g.f; ++f)
                           std::copy_n(grad.data() + (n * g.f + f) * g.p(), g.p(), gm.data() + f * np + n * g.p());
                       if (gi[1]) {
                         MapMatrix(gi[1]->data(), g.f, g.k()).noalias() +=
                             gm * ConstMapMatrix(cols->data(), g.k(), np).transpose();
                       }
                       if (gi[2]) {
                         auto& gb = *gi[2];
                         for (std::size_t f = 0; f < g.f; ++f) gb[f] += gm.row(static_cast<Eigen::Index>(f)).sum();
                       }
                       if (gi[0]) {
                         RowMatrix dcols(g.k(), np);
                         dcols.noalias() = ConstMapMatrix(wd->data(), g.f, g.k()).transpose() * gm;
                         col2im(dcols.data(), g, gi[0]->data());
                       }
                     });
}

Tensor maxpool2d(const Tensor& x, std::size_t kernel, std::size_t stride) {
  require_4d(x, "maxpool2d");
  if (kernel < 1 || stride < 1) throw std::invalid_argument("maxpool2d: kernel and stride must be >= 1");
  const std::size_t n = x.dim(0), c = x.dim(1), h = x.dim(2), w = x.dim(3);
  if (kernel > h || kernel > w) {
    throw ShapeError("maxpool2d: window " + std::to_string(kernel) + " larger than input " + to_string(x.shape()));
  }
  const std::size_t oh = (h - kernel) / stride + 1, ow = (w - kernel) / stride + 1;
  auto argmax = std::make_shared<std::vector<std::size_t>>(n * c * oh * ow);
  std::vector<float> out(argmax->size());
  const auto xd = x.data();
  for (std::size_t plane = 0; plane < n * c; ++plane) {
    const std::size_t base = plane * h * w;
    for (std::size_t i = 0; i < oh; ++i)
      for (std::size_t j = 0; j < ow; ++j) {
        std::size_t best = base + i * stride * w + j * stride;
        for (std::size_t a = 0; a < kernel; ++a)
          for (std::size_t b = 0; b < kernel; ++b) {
            const std::size_t idx = base + (i * stride + a) * w + j * stride + b;
            if (xd[idx] > xd[best]) best = idx;
          }
        const std::size_t o = (plane * oh + i) * ow + j;
        (*argmax)[o] = best;
        out[o] = xd[best];
      }
  }
  return make_result("maxpool2d", {n, c, oh, ow}, std::move(out), {x},
                     [argmax](std::span<const float> g, std::span<std::vector<float>* const> gi) {
                       auto& gx = *gi[0];
                       for (std::size_t o = 0; o < g.size(); ++o) gx[(*argmax)[o]] += g[o];
                     });
}

Tensor upsample_nearest2d(const Tensor& x, std::size_t factor) {
  require_4d(x, "upsample_nearest2d");
  if (factor < 1) throw std::invalid_argument("upsample_nearest2d: factor must be >= 1");
  const std::size_t planes = x.dim(0) * x.dim(1), h = x.dim(2), w = x.dim(3);
  const std::size_t oh = h * factor, ow = w * factor;
  std::vector<float> out(planes * oh * ow);
  const auto xd = x.data();
  for (std::size_t p = 0; p < planes; ++p)
    for (std::size_t i = 0; i < oh; ++i)
      for (std::size_t j = 0; j < ow; ++j) out[(p * oh + i) * ow + j] = xd[(p * h + i / factor) * w + j / factor];
  return make_result("upsample_nearest2d", {x.dim(0), x.dim(1), oh, ow}, std::move(out), {x},
                     [planes, h, w, factor](std::span<const float> g, std::span<std::vector<float>* const> gi) {
                       auto& gx = *gi[0];
                       const std::size_t oh = h * factor, ow = w * factor;
                       for (std::size_t p = 0; p < planes; ++p)
                         for (std::size_t i = 0; i < oh; ++i)
                           for (std::size_t j = 0; j < ow; ++j)
                             gx[(p * h + i / factor) * w + j / factor] += g[(p * oh + i) * ow + j];
                     });
}

Tensor crop_pad2d(const Tensor& x, std::size_t out_h, std::size_t out_w) {
  require_4d(x, "crop_pad2d");
  if (out_h == 0 || out_w == 0) throw ShapeError("crop_pad2d: output extents must be positive");
  const std::size_t planes = x.dim(0) * x.dim(1), h = x.dim(2), w = x.dim(3);
  // Input row = output row + offset; positive offset crops, negative pads.
  const long off_h = (static_cast<long>(h) - static_cast<long>(out_h)) / 2;
  const long off_w = (static_cast<long>(w) - static_cast<long>(out_w)) / 2;
  auto source = std::make_shared<std::vector<long>>(out_h * out_w, -1);
  for (std::size_t i = 0; i < out_h; ++i)
    for (std::size_t j = 0; j < out_w; ++j) {
      const long ih = static_cast<long>(i) + off_h, iw = static_cast<long>(j) + off_w;
      if (ih >= 0 && iw >= 0 && ih < static_cast<long>(h) && iw < static_cast<long>(w))
        (*source)[i * out_w + j] = ih * static_cast<long>(w) + iw;
    }
  const std::size_t in_plane = h * w, out_plane = out_h * out_w;
  std::vector<float> out(planes * out_plane, 0.0f);
  const auto xd = x.data();
  for (std::size_t p = 0; p < planes; ++p)
    for (std::size_t k = 0; k < out_plane; ++k)
      if ((*source)[k] >= 0) out[p * out_plane + k] = xd[p * in_plane + static_cast<std::size_t>((*source)[k])];
  return make_result("crop_pad2d", {x.dim(0), x.dim(1), out_h, out_w}, std::move(out), {x},
                     [source, planes, in_plane, out_plane](std::span<const float> g,
                                                           std::span<std::vector<float>* const> gi) {
                       auto& gx = *gi[0];
                       for (std::size_t p = 0; p < planes; ++p)
                         for (std::size_t k = 0; k < out_plane; ++k)
                           if ((*source)[k] >= 0)
                             gx[p * in_plane + static_cast<std::size_t>((*source)[k])] += g[p * out_plane + k];
                     });
}

Tensor global_avg_pool2d(const Tensor& x) {
  require_4d(x, "global_avg_pool2d");
  const std::size_t planes = x.dim(0) * x.dim(1), area = x.dim(2) * x.dim(3);
  std::vector<float> out(planes);
  const auto xd = x.data();
  for (std::size_t p = 0; p < planes; ++p) {
    double acc = 0.0;
    for (std::size_t k = 0; k < area; ++k) acc += xd[p * area + k];
    out[p] = static_cast<float>(acc / static_cast<double>(area));
  }
  return make_result("global_avg_pool2d", {x.dim(0), x.dim(1)}, std::move(out), {x},
                     [planes, area](std::span<const float> g, std::span<std::vector<float>* const> gi) {
                       auto& gx = *gi[0];
                       const float inv = 1.0f / static_cast<float>(area);
                       for (std::size_t p = 0; p < planes; ++p)
                         for (std::size_t k = 0; k < area; ++k) gx[p * area + k] += g[p] * inv;
                     });
}

Tensor batchnorm2d(const Tensor& x, const Tensor& gamma, const Tensor& beta, const BatchNormState& state) {
  require_4d(x, "batchnorm2d");
  const std::size_t n = x.dim(0), c = x.dim(1), area = x.dim(2) * x.dim(3);
  if (gamma.numel() != c || beta.numel() != c) {
    throw ShapeError("batchnorm2d: affine parameters do not match " + std::to_string(c) + " channels");
  }
  if (state.running_mean.size() != c || state.running_var.size() != c) {
    throw ShapeError("batchnorm2d: running statistics do not match " + std::to_string(c) + " channels");
  }
  const std::size_t count = n * area;
  if (state.training && count < 2) throw ShapeError("batchnorm2d: training mode needs more than one value per channel");

  const auto xd = x.data();
  auto xhat = make_buffer(x.numel());
  auto inv_std = make_buffer(c);
  for (std::size_t ch = 0; ch < c; ++ch) {
    double mu, var;
    if (state.training) {
      double s = 0.0;
      for (std::size_t b = 0; b < n; ++b) {
        const float* p = xd.data() + (b * c + ch) * area;
        for (std::size_t k = 0; k < area; ++k) s += p[k];
      }
      mu = s / static_cast<double>(count);
      double ss = 0.0;
      for (std::size_t b = 0; b < n; ++b) {
        const float* p = xd.data() + (b * c + ch) * area;
        for (std::size_t k = 0; k < area; ++k) {
          const double d = p[k] - mu;
          ss += d * d;
        }
      }
      var = ss / static_cast<double>(count);
      if (state.update_running) {
        const float m = state.momentum;
        state.running_mean[ch] = (1.0f - m) * state.running_mean[ch] + m * static_cast<float>(mu);
        state.running_var[ch] = (1.0f - m) * state.running_var[ch] +
                                m * static_cast<float>(var * static_cast<double>(count) / static_cast<double>(count - 1));
      }
    } else {
      mu = state.running_mean[ch];
      var = state.running_var[ch];
    }
    const float is = static_cast<float>(1.0 / std::sqrt(var + state.eps));
    (*inv_std)[ch] = is;
    const float muf = static_cast<float>(mu);
    float* xh = xhat->data();
    for (std::size_t b = 0; b < n; ++b) {
      const std::size_t base = (b * c + ch) * area;
      for (std::size_t k = 0; k < area; ++k) xh[base + k] = (xd[base + k] - muf) * is;
    }
  }
  std::vector<float> out(x.numel());
  const auto gd = gamma.data();
  const auto bd = beta.data();
  const float* xh = xhat->data();
  for (std::size_t b = 0; b < n; ++b)
    for (std::size_t ch = 0; ch < c; ++ch) {
      const std::size_t base = (b * c + ch) * area;
      for (std::size_t k = 0; k < area; ++k) out[base + k] = gd[ch] * xh[base + k] + bd[ch];
    }

  Buffer gamma_d = gamma.impl()->data;
  const bool training = state.training;
  return make_result(
      "batchnorm2d", x.shape(), std::move(out), {x, gamma, beta},
      [xhat, inv_std, gamma_d, n, c, area, count, training](std::span<const float> g,
                                                            std::span<std::vector<float>* const> gi) {
        const float* xh = xhat->data();
        for (std::size_t ch = 0; ch < c; ++ch) {
          double sum_g = 0.0, sum_gx = 0.0;
          for (std::size_t b = 0; b < n; ++b) {
            const std::size_t base = (b * c + ch) * area;
            float sg = 0.0f, sgx = 0.0f;
            for (std::size_t k = 0; k < area; ++k) {
              sg += g[base + k];
              sgx += g[base + k] * xh[base + k];
            }
            sum_g += sg;
            sum_gx += sgx;
          }
          if (gi[1]) (*gi[1])[ch] += static_cast<float>(sum_gx);
          if (gi[2]) (*gi[2])[ch] += static_cast<float>(sum_g);
          if (!gi[0]) continue;
          float* gx = gi[0]->data();
          const float scale = (*gamma_d)[ch] * (*inv_std)[ch];
          const float mean_g = training ? static_cast<float>(sum_g / static_cast<double>(count)) : 0.0f;
          const float mean_gx = training ? static_cast<float>(sum_gx / static_cast<double>(count)) : 0.0f;
          for (std::size_t b = 0; b < n; ++b) {
            const std::size_t base = (b * c + ch) * area;
            for (std::size_t k = 0; k < area; ++k)
              gx[base + k] += scale * (g[base + k] - mean_g - xh[base + k] * mean_gx);
          }
        }
      });
}

std::vector<std::uint8_t> dropout_mask(std::size_t count, float rate, std::uint64_t stream_key) {
  std::vector<std::uint8_t> mask(count);
  for (std::size_t i = 0; i < count; ++i) mask[i] = unit_float(derive_seed(stream_key, i)) >= rate ? 1 : 0;
  return mask;
}

Tensor dropout(const Tensor& x, float rate, bool training, std::uint64_t stream_key) {
  if (!(rate >= 0.0f && rate < 1.0f)) throw std::invalid_argument("dropout: rate must lie in [0, 1)");
  if (!training || rate == 0.0f) return x;
  auto mask = std::make_shared<std::vector<std::uint8_t>>(dropout_mask(x.numel(), rate, stream_key));
  const float keep_scale = 1.0f / (1.0f - rate);
  std::vector<float> out(x.numel());
  const auto xd = x.data();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = (*mask)[i] ? xd[i] * keep_scale : 0.0f;
  return make_result("dropout", x.shape(), std::move(out), {x},
                     [mask, keep_scale](std::span<const float> g, std::span<std::vector<float>* const> gi) {
                       auto& gx = *gi[0];
                       for (std::size_t i = 0; i < g.size(); ++i)
                         if ((*mask)[i]) gx[i] += g[i] * keep_scale;
                     });
}

}  // namespace hda
