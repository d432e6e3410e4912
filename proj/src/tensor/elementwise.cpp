#include <algorithm>
#include <cmath>
#include <string>

#include "hda/ops.hpp"

namespace hda {

namespace {

bool is_suffix(const Shape& small, const Shape& large) {
  if (small.size() > large.size()) return false;
  return std::equal(small.rbegin(), small.rend(), large.rbegin());
}

bool broadcastable(const Shape& small, const Shape& large) {
  return numel(small) == 1 || is_suffix(small, large);
}

const char* kind_name(Elementwise kind) {
  switch (kind) {
    case Elementwise::kAdd: return "add";
    case Elementwise::kSub: return "sub";
    case Elementwise::kMul: return "mul";
    case Elementwise::kDiv: return "div";
    case Elementwise::kNeg: return "neg";
    case Elementwise::kLog: return "log";
    case Elementwise::kExp: return "exp";
    case Elementwise::kRelu: return "relu";
    case Elementwise::kSigmoid: return "sigmoid";
    case Elementwise::kSquare: return "square";
    case Elementwise::kAbs: return "abs";
  }
  return "?";
}

bool is_binary(Elementwise kind) {
  return kind == Elementwise::kAdd || kind == Elementwise::kSub || kind == Elementwise::kMul ||
         kind == Elementwise::kDiv;
}

// Calls f(i, ia, ib) for every output index. One operand spans the whole
// output; the other repeats with its own period.
template <typename F>
void for_each_index(std::size_t n, std::size_t na, std::size_t nb, F f) {
  if (na == n && nb == n) {
    for (std::size_t i = 0; i < n; ++i) f(i, i, i);
  } else if (na == n) {
    for (std::size_t o = 0; o < n; o += nb)
      for (std::size_t j = 0; j < nb; ++j) f(o + j, o + j, j);
  } else {
    for (std::size_t o = 0; o < n; o += na)
      for (std::size_t j = 0; j < na; ++j) f(o + j, j, o + j);
  }
}

Tensor binary(Elementwise kind, const Tensor& a, const Tensor& b) {
  const Shape* out_shape = nullptr;
  if (a.shape() == b.shape() || broadcastable(b.shape(), a.shape())) {
    out_shape = &a.shape();
  } else if (broadcastable(a.shape(), b.shape())) {
    out_shape = &b.shape();
  } else {
    throw ShapeError(std::string(kind_name(kind)) + ": shapes " + to_string(a.shape()) + " and " +
                     to_string(b.shape()) + " are not broadcastable");
  }
  const std::size_t n = numel(*out_shape);
  const std::size_t na = a.numel();
  const std::size_t nb = b.numel();
  Buffer ad = a.impl()->data;
  Buffer bd = b.impl()->data;
  std::vector<float> out(n);
  const float* pa = ad->data();
  const float* pb = bd->data();
  float* po = out.data();
  switch (kind) {
    case Elementwise::kAdd:
      for_each_index(n, na, nb, [=](std::size_t i, std::size_t ia, std::size_t ib) { po[i] = pa[ia] + pb[ib]; });
      break;
    case Elementwise::kSub:
      for_each_index(n, na, nb, [=](std::size_t i, std::size_t ia, std::size_t ib) { po[i] = pa[ia] - pb[ib]; });
      break;
    case Elementwise::kMul:
      for_each_index(n, na, nb, [=](std::size_t i, std::size_t ia, std::size_t ib) { po[i] = pa[ia] * pb[ib]; });
      break;
    case Elementwise::kDiv:
      for_each_index(n, na, nb, [=](std::size_t i, std::size_t ia, std::size_t ib) { po[i] = pa[ia] / pb[ib]; });
      break;
    default:
      break;
  }
  return make_result(kind_name(kind), *out_shape, std::move(out), {a, b},
                     [kind, ad, bd, n, na, nb](std::span<const float> gs, std::span<std::vector<float>* const> gi) {
                       const float* pa = ad->data();
                       const float* pb = bd->data();
                       const float* g = gs.data();
                       if (gi[0]) {
                         float* ga = gi[0]->data();
                         switch (kind) {
                           case Elementwise::kAdd:
                           case Elementwise::kSub:
                             for_each_index(n, na, nb, [=](std::size_t i, std::size_t ia, std::size_t) { ga[ia] += g[i]; });
                             break;
                           case Elementwise::kMul:
                             for_each_index(n, na, nb,
                                            [=](std::size_t i, std::size_t ia, std::size_t ib) { ga[ia] += g[i] * pb[ib]; });
                             break;
                           case Elementwise::kDiv:
                             for_each_index(n, na, nb,
                                            [=](std::size_t i, std::size_t ia, std::size_t ib) { ga[ia] += g[i] / pb[ib]; });
                             break;
                           default:
                             break;
                         }
                       }
                       if (gi[1]) {
                         float* gb = gi[1]->data();
                         switch (kind) {
                           case Elementwise::kAdd:
                             for_each_index(n, na, nb, [=](std::size_t i, std::size_t, std::size_t ib) { gb[ib] += g[i]; });
                             break;
                           case Elementwise::kSub:
                             for_each_index(n, na, nb, [=](std::size_t i, std::size_t, std::size_t ib) { gb[ib] -= g[i]; });
                             break;
                           case Elementwise::kMul:
                             for_each_index(n, na, nb,
                                            [=](std::size_t i, std::size_t ia, std::size_t ib) { gb[ib] += g[i] * pa[ia]; });
                             break;
                           case Elementwise::kDiv:
                             for_each_index(n, na, nb, [=](std::size_t i, std::size_t ia, std::size_t ib) {
                               gb[ib] -= g[i] * pa[ia] / (pb[ib] * pb[ib]);
                             });
                             break;
                           default:
                             break;
                         }
                       }
                     });
}

template <typename Forward, typename Derivative>
Tensor unary(const char* name, const Tensor& a, Forward forward, Derivative derivative) {
  Buffer ad = a.impl()->data;
  const std::size_t n = a.numel();
  Buffer out = make_buffer(n);
  const float* pa = ad->data();
  float* po = out->data();
  for (std::size_t i = 0; i < n; ++i) po[i] = forward(pa[i]);
  return make_result(name, a.shape(), out, {a},
                     [ad, out, derivative](std::span<const float> g, std::span<std::vector<float>* const> gi) {
                       float* ga = gi[0]->data();
                       const float* x = ad->data();
                       const float* y = out->data();
                       for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i] * derivative(x[i], y[i]);
                     });
}

}  // namespace

Tensor elementwise(Elementwise kind, const Tensor& a, const Tensor* b) {
  if (is_binary(kind)) {
    if (!b) throw std::invalid_argument(std::string(kind_name(kind)) + " needs two operands");
    return binary(kind, a, *b);
  }
  switch (kind) {
    case Elementwise::kNeg:
      return unary("neg", a, [](float x) { return -x; }, [](float, float) { return -1.0f; });
    case Elementwise::kLog:
      return unary("log", a, [](float x) { return std::log(x); }, [](float x, float) { return 1.0f / x; });
    case Elementwise::kExp:
      return unary("exp", a, [](float x) { return std::exp(x); }, [](float, float y) { return y; });
    case Elementwise::kRelu:
      return unary("relu", a, [](float x) { return x < 0.0f ? 0.0f : x; },
                   [](float x, float) { return x > 0.0f ? 1.0f : 0.0f; });
    case Elementwise::kSigmoid:
      return unary("sigmoid", a, [](float x) { return 1.0f / (1.0f + std::exp(-x)); },
                   [](float, float y) { return y * (1.0f - y); });
    case Elementwise::kSquare:
      return unary("square", a, [](float x) { return x * x; }, [](float x, float) { return 2.0f * x; });
    case Elementwise::kAbs:
      return unary("abs", a, [](float x) { return std::fabs(x); },
                   [](float x, float) { return x > 0.0f ? 1.0f : (x < 0.0f ? -1.0f : 0.0f); });
    default:
      break;
  }
  throw std::invalid_argument("unsupported elementwise kind");
}

Tensor add(const Tensor& a, const Tensor& b) { return binary(Elementwise::kAdd, a, b); }
Tensor sub(const Tensor& a, const Tensor& b) { return binary(Elementwise::kSub, a, b); }
Tensor mul(const Tensor& a, const Tensor& b) { return binary(Elementwise::kMul, a, b); }
Tensor div(const Tensor& a, const Tensor& b) { return binary(Elementwise::kDiv, a, b); }
Tensor neg(const Tensor& a) { return elementwise(Elementwise::kNeg, a); }
Tensor log(const Tensor& a) { return elementwise(Elementwise::kLog, a); }
Tensor exp(const Tensor& a) { return elementwise(Elementwise::kExp, a); }
Tensor relu(const Tensor& a) { return elementwise(Elementwise::kRelu, a); }
Tensor sigmoid(const Tensor& a) { return elementwise(Elementwise::kSigmoid, a); }
Tensor square(const Tensor& a) { return elementwise(Elementwise::kSquare, a); }
Tensor abs(const Tensor& a) { return elementwise(Elementwise::kAbs, a); }

Tensor sqrt(const Tensor& a) {
  return unary("sqrt", a, [](float x) { return std::sqrt(x); },
               [](float, float y) { return y > 0.0f ? 0.5f / y : 0.0f; });
}

Tensor clamp(const Tensor& a, float lo, float hi) {
  return unary("clamp", a, [lo, hi](float x) { return std::clamp(x, lo, hi); },
               [lo, hi](float x, float) { return (x > lo && x < hi) ? 1.0f : 0.0f; });
}

Tensor scale(const Tensor& a, float factor) {
  return unary("scale", a, [factor](float x) { return x * factor; }, [factor](float, float) { return factor; });
}

Tensor add_scalar(const Tensor& a, float value) {
  return unary("add_scalar", a, [value](float x) { return x + value; }, [](float, float) { return 1.0f; });
}

}  // namespace hda
