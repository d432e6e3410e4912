#include <Eigen/Core>
#include <algorithm>
#include <cmath>
#include <string>

#include "hda/ops.hpp"

namespace hda {

namespace {

using RowMatrix = Eigen::Matrix<float, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using MapMatrix = Eigen::Map<RowMatrix>;
using ConstMapMatrix = Eigen::Map<const RowMatrix>;

void require_rank(const Tensor& t, std::size_t rank, const char* op) {
  if (t.rank() != rank) {
    throw ShapeError(std::string(op) + ": expected rank " + std::to_string(rank) + ", got shape " +
                     to_string(t.shape()));
  }
}

}  // namespace

Tensor matmul(const Tensor& a, const Tensor& b) {
  require_rank(a, 2, "matmul");
  require_rank(b, 2, "matmul");
  const std::size_t rows = a.dim(0), inner = a.dim(1), cols = b.dim(1);
  if (b.dim(0) != inner) {
    throw ShapeError("matmul: inner dimensions differ, " + to_string(a.shape()) + " x " + to_string(b.shape()));
  }
  Buffer ad = a.impl()->data;
  Buffer bd = b.impl()->data;
  std::vector<float> out(rows * cols);
  MapMatrix(out.data(), rows, cols).noalias() =
      ConstMapMatrix(ad->data(), rows, inner) * ConstMapMatrix(bd->data(), inner, cols);
  return make_result("matmul", {rows, cols}, std::move(out), {a, b},
                     [ad, bd, rows, inner, cols](std::span<const float> g, std::span<std::vector<float>* const> gi) {
                       ConstMapMatrix gm(g.data(), rows, cols);
                       if (gi[0]) {
                         MapMatrix(gi[0]->data(), rows, inner).noalias() +=
                             gm * ConstMapMatrix(bd->data(), inner, cols).transpose();
                       }
                       if (gi[1]) {
                         MapMatrix(gi[1]->data(), inner, cols).noalias() +=
                             ConstMapMatrix(ad->data(), rows, inner).transpose() * gm;
                       }
                     });
}

Tensor transpose(const Tensor& a) {
  require_rank(a, 2, "transpose");
  const std::size_t rows = a.dim(0), cols = a.dim(1);
  Buffer ad = a.impl()->data;
  std::vector<float> out(rows * cols);
  for (std::size_t r = 0; r < rows; ++r)
    for (std::size_t c = 0; c < cols; ++c) out[c * rows + r] = (*ad)[r * cols + c];
  return make_result("transpose", {cols, rows}, std::move(out), {a},
                     [rows, cols](std::span<const float> g, std::span<std::vector<float>* const> gi) {
                       auto& ga = *gi[0];
                       for (std::size_t r = 0; r < rows; ++r)
                         for (std::size_t c = 0; c < cols; ++c) ga[r * cols + c] += g[c * rows + r];
                     });
}

namespace {

// Maps each input flat index to its output flat index under the reduction.
std::vector<std::size_t> reduction_map(const Shape& shape, const std::vector<bool>& reduced, Shape& out_shape) {
  out_shape.clear();
  for (std::size_t d = 0; d < shape.size(); ++d)
    if (!reduced[d]) out_shape.push_back(shape[d]);
  if (out_shape.empty()) out_shape.push_back(1);

  const std::size_t n = numel(shape);
  std::vector<std::size_t> map(n, 0);
  std::vector<std::size_t> index(shape.size(), 0);
  for (std::size_t flat = 0; flat < n; ++flat) {
    std::size_t out = 0;
    for (std::size_t d = 0; d < shape.size(); ++d)
      if (!reduced[d]) out = out * shape[d] + index[d];
    map[flat] = out;
    for (std::size_t d = shape.size(); d-- > 0;) {
      if (++index[d] < shape[d]) break;
      index[d] = 0;
    }
  }
  return map;
}

Tensor reduce(const char* op, const Tensor& x, std::vector<std::size_t> axes, bool average) {
  std::vector<bool> reduced(x.rank(), axes.empty());
  for (std::size_t axis : axes) {
    if (axis >= x.rank()) {
      throw ShapeError(std::string(op) + ": invalid axis " + std::to_string(axis) + " for shape " +
                       to_string(x.shape()));
    }
    reduced[axis] = true;
  }
  Shape out_shape;
  auto map = std::make_shared<std::vector<std::size_t>>(reduction_map(x.shape(), reduced, out_shape));
  const std::size_t out_n = numel(out_shape);
  const std::size_t group = out_n ? x.numel() / out_n : 0;
  const float factor = average ? 1.0f / static_cast<float>(std::max<std::size_t>(group, 1)) : 1.0f;

  std::vector<double> acc(out_n, 0.0);
  const auto xd = x.data();
  for (std::size_t i = 0; i < xd.size(); ++i) acc[(*map)[i]] += xd[i];
  std::vector<float> out(out_n);
  for (std::size_t i = 0; i < out_n; ++i) out[i] = static_cast<float>(acc[i] * factor);

  return make_result(op, std::move(out_shape), std::move(out), {x},
                     [map, factor](std::span<const float> g, std::span<std::vector<float>* const> gi) {
                       auto& gx = *gi[0];
                       for (std::size_t i = 0; i < gx.size(); ++i) gx[i] += g[(*map)[i]] * factor;
                     });
}

}  // namespace

Tensor sum(const Tensor& x, std::vector<std::size_t> axes) { return reduce("sum", x, std::move(axes), false); }
Tensor mean(const Tensor& x, std::vector<std::size_t> axes) { return reduce("mean", x, std::move(axes), true); }

Tensor softmax(const Tensor& x, std::size_t axis) {
  if (axis >= x.rank()) {
    throw ShapeError("softmax: invalid axis " + std::to_string(axis) + " for shape " + to_string(x.shape()));
  }
  std::size_t outer = 1, inner = 1;
  for (std::size_t d = 0; d < axis; ++d) outer *= x.dim(d);
  for (std::size_t d = axis + 1; d < x.rank(); ++d) inner *= x.dim(d);
  const std::size_t len = x.dim(axis);

  Buffer out = make_buffer(x.numel());
  const auto xd = x.data();
  for (std::size_t o = 0; o < outer; ++o) {
    for (std::size_t in = 0; in < inner; ++in) {
      const std::size_t base = o * len * inner + in;
      float mx = -INFINITY;
      for (std::size_t k = 0; k < len; ++k) mx = std::max(mx, xd[base + k * inner]);
      double total = 0.0;
      for (std::size_t k = 0; k < len; ++k) {
        const float e = std::exp(xd[base + k * inner] - mx);
        (*out)[base + k * inner] = e;
        total += e;
      }
      for (std::size_t k = 0; k < len; ++k) (*out)[base + k * inner] = static_cast<float>((*out)[base + k * inner] / total);
    }
  }
  return make_result("softmax", x.shape(), out, {x},
                     [out, outer, inner, len](std::span<const float> g, std::span<std::vector<float>* const> gi) {
                       auto& gx = *gi[0];
                       const auto& y = *out;
                       for (std::size_t o = 0; o < outer; ++o) {
                         for (std::size_t in = 0; in < inner; ++in) {
                           const std::size_t base = o * len * inner + in;
                           double dot = 0.0;
                           for (std::size_t k = 0; k < len; ++k) dot += g[base + k * inner] * y[base + k * inner];
                           for (std::size_t k = 0; k < len; ++k) {
                             const std::size_t i = base + k * inner;
                             gx[i] += static_cast<float>(y[i] * (g[i] - dot));
                           }
                         }
                       }
                     });
}

Tensor index_select(const Tensor& x, std::span<const std::size_t> indices) {
  if (x.rank() < 1) throw ShapeError("index_select: rank-0 tensor");
  const std::size_t rows = x.dim(0);
  const std::size_t row_size = rows ? x.numel() / rows : 0;
  auto idx = std::make_shared<std::vector<std::size_t>>(indices.begin(), indices.end());
  for (std::size_t i : *idx) {
    if (i >= rows) {
      throw std::out_of_range("index_select: index " + std::to_string(i) + " out of range for " +
                              std::to_string(rows) + " rows");
    }
  }
  Shape out_shape = x.shape();
  out_shape[0] = idx->size();
  std::vector<float> out(idx->size() * row_size);
  const auto xd = x.data();
  for (std::size_t r = 0; r < idx->size(); ++r)
    std::copy_n(xd.begin() + (*idx)[r] * row_size, row_size, out.begin() + r * row_size);
  return make_result("index_select", std::move(out_shape), std::move(out), {x},
                     [idx, row_size](std::span<const float> g, std::span<std::vector<float>* const> gi) {
                       auto& gx = *gi[0];
                       for (std::size_t r = 0; r < idx->size(); ++r) {
                         const std::size_t src = (*idx)[r] * row_size;
                         for (std::size_t k = 0; k < row_size; ++k) gx[src + k] += g[r * row_size + k];
                       }
                     });
}

Tensor one_hot(std::span<const int> labels, std::size_t num_classes) {
  std::vector<float> out(labels.size() * num_classes, 0.0f);
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (labels[i] < 0 || static_cast<std::size_t>(labels[i]) >= num_classes) {
      throw std::out_of_range("label " + std::to_string(labels[i]) + " outside [0, " +
                              std::to_string(num_classes) + ")");
    }
    out[i * num_classes + static_cast<std::size_t>(labels[i])] = 1.0f;
  }
  return Tensor({labels.size(), num_classes}, std::move(out));
}

}  // namespace hda
