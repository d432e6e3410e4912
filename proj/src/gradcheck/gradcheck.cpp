#include "hda/gradcheck.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <functional>
#include <numeric>

#include "hda/losses.hpp"
#include "hda/ops.hpp"
#include "hda/rng.hpp"

namespace hda::gradcheck {

bool SuiteResult::all_passed() const { return failures() == 0; }

std::size_t SuiteResult::failures() const {
  return static_cast<std::size_t>(std::count_if(cases.begin(), cases.end(), [](const CaseResult& c) { return !c.passed; }));
}

namespace {

using Values = std::vector<double>;
using FloatFn = ForwardFn;
using RefFn = ReferenceFn;

constexpr double kStep = 1e-3;
constexpr double kProbClamp = 1e-7;

struct Case {
  std::vector<Tensor> inputs;  // all require gradients
  FloatFn fn;
  RefFn ref;
};

Tensor random_tensor(const Shape& shape, Rng& rng, double lo, double hi) {
  std::vector<float> v(numel(shape));
  for (float& x : v) x = static_cast<float>(rng.uniform(lo, hi));
  return Tensor(shape, std::move(v), true);
}

// Values whose magnitude is at least `margin` away from each point in `kinks`.
Tensor away_from(const Shape& shape, Rng& rng, double lo, double hi, std::vector<double> kinks, double margin) {
  std::vector<float> v(numel(shape));
  for (float& x : v) {
    double d;
    do {
      d = rng.uniform(lo, hi);
    } while (std::any_of(kinks.begin(), kinks.end(), [&](double k) { return std::abs(d - k) < margin; }));
    x = static_cast<float>(d);
  }
  return Tensor(shape, std::move(v), true);
}

// Distinct values at least 0.04 apart, randomly ordered, so every max is unique.
Tensor distinct_tensor(const Shape& shape, Rng& rng) {
  const std::size_t n = numel(shape);
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  rng.shuffle(std::span<std::size_t>(order));
  std::vector<float> v(n);
  for (std::size_t i = 0; i < n; ++i) v[i] = static_cast<float>(0.05 * static_cast<double>(order[i]) - 1.0 + rng.uniform(0.0, 0.005));
  return Tensor(shape, std::move(v), true);
}

std::size_t pick(Rng& rng, std::size_t lo, std::size_t hi) { return lo + rng.below(hi - lo + 1); }

Values to_values(const Tensor& t) { return Values(t.data().begin(), t.data().end()); }

double sigmoid_d(double x) { return 1.0 / (1.0 + std::exp(-x)); }

// ---- double reference kernels -------------------------------------------

Values ref_conv(const Values& x, const Values& w, const Values& b, std::size_t n, std::size_t c, std::size_t h,
                std::size_t wd, std::size_t f, std::size_t k, std::size_t stride, std::size_t pad) {
  const std::size_t oh = (h + 2 * pad - k) / stride + 1, ow = (wd + 2 * pad - k) / stride + 1;
  Values out(n * f * oh * ow);
  for (std::size_t bi = 0; bi < n; ++bi)
    for (std::size_t fi = 0; fi < f; ++fi)
      for (std::size_t y = 0; y < oh; ++y)
        for (std::size_t xo = 0; xo < ow; ++xo) {
          double acc = b[fi];
          for (std::size_t ci = 0; ci < c; ++ci)
            for (std::size_t ky = 0; ky < k; ++ky)
              for (std::size_t kx = 0; kx < k; ++kx) {
                const long iy = static_cast<long>(y * stride + ky) - static_cast<long>(pad);
                const long ix = static_cast<long>(xo * stride + kx) - static_cast<long>(pad);
                if (iy < 0 || ix < 0 || iy >= static_cast<long>(h) || ix >= static_cast<long>(wd)) continue;
                acc += w[((fi * c + ci) * k + ky) * k + kx] *
                       x[((bi * c + ci) * h + static_cast<std::size_t>(iy)) * wd + static_cast<std::size_t>(ix)];
              }
          out[((bi * f + fi) * oh + y) * ow + xo] = acc;
        }
  return out;
}

Values ref_softmax_rows(const Values& x, std::size_t rows, std::size_t cols) {
  Values out(x.size());
  for (std::size_t r = 0; r < rows; ++r) {
    double m = -1e300;
    for (std::size_t j = 0; j < cols; ++j) m = std::max(m, x[r * cols + j]);
    double s = 0.0;
    for (std::size_t j = 0; j < cols; ++j) s += std::exp(x[r * cols + j] - m);
    for (std::size_t j = 0; j < cols; ++j) out[r * cols + j] = std::exp(x[r * cols + j] - m) / s;
  }
  return out;
}

double ref_mean(const Values& v) { return std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size()); }

Values ref_pair_distances(const Values& x, std::size_t n, const std::vector<IndexPair>& pairs) {
  const std::size_t d = x.size() / n;
  Values out;
  for (const auto& [i, j] : pairs) {
    double s = 0.0;
    for (std::size_t k = 0; k < d; ++k) {
      const double diff = x[i * d + k] - x[j * d + k];
      s += diff * diff;
    }
    out.push_back(std::sqrt(s) / std::sqrt(static_cast<double>(d)));
  }
  return out;
}

// ---- case builders -------------------------------------------------------

using Builder = std::function<Case(Rng&)>;

Case unary_case(Rng& rng, Tensor x, std::function<Tensor(const Tensor&)> f, std::function<double(double)> g) {
  (void)rng;
  return {{x}, [f](const std::vector<Tensor>& in) { return f(in[0]); },
          [g](const std::vector<Values>& in) {
            Values out(in[0].size());
            for (std::size_t i = 0; i < out.size(); ++i) out[i] = g(in[0][i]);
            return out;
          }};
}

Case binary_case(Tensor a, Tensor b, std::function<Tensor(const Tensor&, const Tensor&)> f,
                 std::function<double(double, double)> g) {
  return {{a, b}, [f](const std::vector<Tensor>& in) { return f(in[0], in[1]); },
          [g](const std::vector<Values>& in) {
            Values out(in[0].size());
            const std::size_t nb = in[1].size();
            for (std::size_t i = 0; i < out.size(); ++i) out[i] = g(in[0][i], in[1][i % nb]);
            return out;
          }};
}

Shape random_shape(Rng& rng) { return {pick(rng, 1, 3), pick(rng, 2, 4), pick(rng, 2, 5)}; }

std::vector<std::pair<std::string, Builder>> builders() {
  std::vector<std::pair<std::string, Builder>> b;
  b.emplace_back("add", [](Rng& r) {
    const Shape s = random_shape(r);
    return binary_case(random_tensor(s, r, -1, 1), random_tensor(s, r, -1, 1),
                       [](const Tensor& x, const Tensor& y) { return add(x, y); }, [](double x, double y) { return x + y; });
  });
  b.emplace_back("add_broadcast", [](Rng& r) {
    const Shape s = random_shape(r);
    return binary_case(random_tensor(s, r, -1, 1), random_tensor({s[1], s[2]}, r, -1, 1),
                       [](const Tensor& x, const Tensor& y) { return add(x, y); }, [](double x, double y) { return x + y; });
  });
  b.emplace_back("sub", [](Rng& r) {
    const Shape s = random_shape(r);
    return binary_case(random_tensor(s, r, -1, 1), random_tensor(s, r, -1, 1),
                       [](const Tensor& x, const Tensor& y) { return sub(x, y); }, [](double x, double y) { return x - y; });
  });
  b.emplace_back("mul", [](Rng& r) {
    const Shape s = random_shape(r);
    return binary_case(random_tensor(s, r, -1, 1), random_tensor(s, r, -1, 1),
                       [](const Tensor& x, const Tensor& y) { return mul(x, y); }, [](double x, double y) { return x * y; });
  });
  b.emplace_back("mul_scalar_broadcast", [](Rng& r) {
    const Shape s = random_shape(r);
    return binary_case(random_tensor(s, r, -1, 1), random_tensor({1}, r, -1, 1),
                       [](const Tensor& x, const Tensor& y) { return mul(x, y); }, [](double x, double y) { return x * y; });
  });
  b.emplace_back("div", [](Rng& r) {
    const Shape s = random_shape(r);
    return binary_case(random_tensor(s, r, -1, 1), random_tensor(s, r, 0.5, 2),
                       [](const Tensor& x, const Tensor& y) { return div(x, y); }, [](double x, double y) { return x / y; });
  });
  b.emplace_back("neg", [](Rng& r) {
    return unary_case(r, random_tensor(random_shape(r), r, -1, 1), [](const Tensor& x) { return neg(x); },
                      [](double x) { return -x; });
  });
  b.emplace_back("log", [](Rng& r) {
    return unary_case(r, random_tensor(random_shape(r), r, 0.3, 2), [](const Tensor& x) { return log(x); },
                      [](double x) { return std::log(x); });
  });
  b.emplace_back("exp", [](Rng& r) {
    return unary_case(r, random_tensor(random_shape(r), r, -2, 2), [](const Tensor& x) { return exp(x); },
                      [](double x) { return std::exp(x); });
  });
  b.emplace_back("relu", [](Rng& r) {
    return unary_case(r, away_from(random_shape(r), r, -1, 1, {0.0}, 0.02), [](const Tensor& x) { return relu(x); },
                      [](double x) { return x > 0 ? x : 0.0; });
  });
  b.emplace_back("sigmoid", [](Rng& r) {
    return unary_case(r, random_tensor(random_shape(r), r, -3, 3), [](const Tensor& x) { return sigmoid(x); },
                      sigmoid_d);
  });
  b.emplace_back("square", [](Rng& r) {
    return unary_case(r, random_tensor(random_shape(r), r, -1, 1), [](const Tensor& x) { return square(x); },
                      [](double x) { return x * x; });
  });
  b.emplace_back("abs", [](Rng& r) {
    return unary_case(r, away_from(random_shape(r), r, -1, 1, {0.0}, 0.02), [](const Tensor& x) { return abs(x); },
                      [](double x) { return std::abs(x); });
  });
  b.emplace_back("sqrt", [](Rng& r) {
    return unary_case(r, random_tensor(random_shape(r), r, 0.2, 2), [](const Tensor& x) { return sqrt(x); },
                      [](double x) { return std::sqrt(x); });
  });
  b.emplace_back("clamp", [](Rng& r) {
    return unary_case(r, away_from(random_shape(r), r, -1, 1, {-0.4, 0.5}, 0.02),
                      [](const Tensor& x) { return clamp(x, -0.4f, 0.5f); },
                      [](double x) { return std::clamp(x, static_cast<double>(-0.4f), static_cast<double>(0.5f)); });
  });
  b.emplace_back("scale", [](Rng& r) {
    const float f = static_cast<float>(r.uniform(-2, 2));
    return unary_case(r, random_tensor(random_shape(r), r, -1, 1), [f](const Tensor& x) { return scale(x, f); },
                      [f](double x) { return x * f; });
  });
  b.emplace_back("add_scalar", [](Rng& r) {
    const float f = static_cast<float>(r.uniform(-2, 2));
    return unary_case(r, random_tensor(random_shape(r), r, -1, 1), [f](const Tensor& x) { return add_scalar(x, f); },
                      [f](double x) { return x + f; });
  });
  b.emplace_back("matmul", [](Rng& r) {
    const std::size_t m = pick(r, 1, 4), k = pick(r, 1, 5), n = pick(r, 1, 4);
    return Case{{random_tensor({m, k}, r, -1, 1), random_tensor({k, n}, r, -1, 1)},
                [](const std::vector<Tensor>& in) { return matmul(in[0], in[1]); },
                [m, k, n](const std::vector<Values>& in) {
                  Values out(m * n, 0.0);
                  for (std::size_t i = 0; i < m; ++i)
                    for (std::size_t j = 0; j < n; ++j)
                      for (std::size_t p = 0; p < k; ++p) out[i * n + j] += in[0][i * k + p] * in[1][p * n + j];
                  return out;
                }};
  });
  b.emplace_back("transpose", [](Rng& r) {
    const std::size_t m = pick(r, 1, 4), n = pick(r, 1, 4);
    return Case{{random_tensor({m, n}, r, -1, 1)}, [](const std::vector<Tensor>& in) { return transpose(in[0]); },
                [m, n](const std::vector<Values>& in) {
                  Values out(m * n);
                  for (std::size_t i = 0; i < m; ++i)
                    for (std::size_t j = 0; j < n; ++j) out[j * m + i] = in[0][i * n + j];
                  return out;
                }};
  });
  b.emplace_back("sum_axis", [](Rng& r) {
    const Shape s = random_shape(r);
    const std::size_t axis = r.below(3);
    return Case{{random_tensor(s, r, -1, 1)}, [axis](const std::vector<Tensor>& in) { return sum(in[0], {axis}); },
                [s, axis](const std::vector<Values>& in) {
                  Shape out_shape;
                  for (std::size_t d = 0; d < 3; ++d)
                    if (d != axis) out_shape.push_back(s[d]);
                  Values out(numel(out_shape), 0.0);
                  for (std::size_t i = 0; i < s[0]; ++i)
                    for (std::size_t j = 0; j < s[1]; ++j)
                      for (std::size_t k = 0; k < s[2]; ++k) {
                        const std::size_t idx[3] = {i, j, k};
                        std::size_t o = 0;
                        for (std::size_t d = 0; d < 3; ++d)
                          if (d != axis) o = o * s[d] + idx[d];
                        out[o] += in[0][(i * s[1] + j) * s[2] + k];
                      }
                  return out;
                }};
  });
  b.emplace_back("mean_all", [](Rng& r) {
    return Case{{random_tensor(random_shape(r), r, -1, 1)}, [](const std::vector<Tensor>& in) { return mean(in[0]); },
                [](const std::vector<Values>& in) { return Values{ref_mean(in[0])}; }};
  });
  b.emplace_back("softmax", [](Rng& r) {
    const std::size_t rows = pick(r, 1, 4), cols = pick(r, 2, 5);
    return Case{{random_tensor({rows, cols}, r, -2, 2)}, [](const std::vector<Tensor>& in) { return softmax(in[0], 1); },
                [rows, cols](const std::vector<Values>& in) { return ref_softmax_rows(in[0], rows, cols); }};
  });
  for (std::size_t stride : {1, 2}) {
    b.emplace_back("conv2d_s" + std::to_string(stride), [stride](Rng& r) {
      const std::size_t n = pick(r, 1, 2), c = pick(r, 1, 3), h = pick(r, 3, 6), w = pick(r, 3, 6), f = pick(r, 1, 3);
      const std::size_t k = r.below(2) ? 3 : 1, pad = k == 3 ? r.below(2) : 0;
      return Case{{random_tensor({n, c, h, w}, r, -1, 1), random_tensor({f, c, k, k}, r, -1, 1),
                   random_tensor({f}, r, -1, 1)},
                  [stride, pad](const std::vector<Tensor>& in) { return conv2d(in[0], in[1], in[2], stride, pad); },
                  [=](const std::vector<Values>& in) { return ref_conv(in[0], in[1], in[2], n, c, h, w, f, k, stride, pad); }};
    });
  }
  b.emplace_back("maxpool2d", [](Rng& r) {
    const std::size_t n = pick(r, 1, 2), c = pick(r, 1, 2), h = 2 * pick(r, 1, 3), w = 2 * pick(r, 1, 3);
    return Case{{distinct_tensor({n, c, h, w}, r)}, [](const std::vector<Tensor>& in) { return maxpool2d(in[0], 2, 2); },
                [=](const std::vector<Values>& in) {
                  Values out(n * c * (h / 2) * (w / 2));
                  for (std::size_t p = 0; p < n * c; ++p)
                    for (std::size_t y = 0; y < h / 2; ++y)
                      for (std::size_t x = 0; x < w / 2; ++x) {
                        double m = -1e300;
                        for (std::size_t dy = 0; dy < 2; ++dy)
                          for (std::size_t dx = 0; dx < 2; ++dx) m = std::max(m, in[0][(p * h + 2 * y + dy) * w + 2 * x + dx]);
                        out[(p * (h / 2) + y) * (w / 2) + x] = m;
                      }
                  return out;
                }};
  });
  b.emplace_back("upsample_nearest2d", [](Rng& r) {
    const std::size_t n = pick(r, 1, 2), c = pick(r, 1, 2), h = pick(r, 1, 3), w = pick(r, 1, 3);
    return Case{{random_tensor({n, c, h, w}, r, -1, 1)},
                [](const std::vector<Tensor>& in) { return upsample_nearest2d(in[0], 2); },
                [=](const std::vector<Values>& in) {
                  Values out(n * c * h * w * 4);
                  for (std::size_t p = 0; p < n * c; ++p)
                    for (std::size_t y = 0; y < 2 * h; ++y)
                      for (std::size_t x = 0; x < 2 * w; ++x)
                        out[(p * 2 * h + y) * 2 * w + x] = in[0][(p * h + y / 2) * w + x / 2];
                  return out;
                }};
  });
  for (bool grow : {false, true}) {
    b.emplace_back(grow ? "crop_pad2d_pad" : "crop_pad2d_crop", [grow](Rng& r) {
      const std::size_t n = pick(r, 1, 2), c = pick(r, 1, 2), h = pick(r, 3, 6), w = pick(r, 3, 6);
      const std::size_t oh = grow ? h + pick(r, 1, 3) : h - pick(r, 1, 2);
      const std::size_t ow = grow ? w + pick(r, 1, 3) : w - pick(r, 1, 2);
      return Case{{random_tensor({n, c, h, w}, r, -1, 1)},
                  [oh, ow](const std::vector<Tensor>& in) { return crop_pad2d(in[0], oh, ow); },
                  [=](const std::vector<Values>& in) {
                    // Centered: the leading margin is half the size difference, truncated.
                    const long top = (static_cast<long>(h) - static_cast<long>(oh)) / 2;
                    const long left = (static_cast<long>(w) - static_cast<long>(ow)) / 2;
                    Values out(n * c * oh * ow, 0.0);
                    for (std::size_t p = 0; p < n * c; ++p)
                      for (std::size_t y = 0; y < oh; ++y)
                        for (std::size_t x = 0; x < ow; ++x) {
                          const long sy = static_cast<long>(y) + top, sx = static_cast<long>(x) + left;
                          if (sy >= 0 && sx >= 0 && sy < static_cast<long>(h) && sx < static_cast<long>(w))
                            out[(p * oh + y) * ow + x] = in[0][(p * h + static_cast<std::size_t>(sy)) * w + static_cast<std::size_t>(sx)];
                        }
                    return out;
                  }};
    });
  }
  b.emplace_back("global_avg_pool2d", [](Rng& r) {
    const std::size_t n = pick(r, 1, 2), c = pick(r, 1, 3), h = pick(r, 1, 4), w = pick(r, 1, 4);
    return Case{{random_tensor({n, c, h, w}, r, -1, 1)},
                [](const std::vector<Tensor>& in) { return global_avg_pool2d(in[0]); },
                [=](const std::vector<Values>& in) {
                  Values out(n * c);
                  for (std::size_t p = 0; p < n * c; ++p)
                    out[p] = ref_mean(Values(in[0].begin() + static_cast<long>(p * h * w),
                                             in[0].begin() + static_cast<long>((p + 1) * h * w)));
                  return out;
                }};
  });
  for (bool training : {true, false}) {
    b.emplace_back(training ? "batchnorm2d_train" : "batchnorm2d_eval", [training](Rng& r) {
      const std::size_t n = pick(r, 2, 3), c = pick(r, 1, 3), h = pick(r, 1, 3), w = pick(r, 2, 3);
      auto rm = std::make_shared<std::vector<float>>(c), rv = std::make_shared<std::vector<float>>(c);
      for (std::size_t ch = 0; ch < c; ++ch) {
        (*rm)[ch] = static_cast<float>(r.uniform(-0.5, 0.5));
        (*rv)[ch] = static_cast<float>(r.uniform(0.5, 1.5));
      }
      constexpr float eps = 1e-5f;
      return Case{{random_tensor({n, c, h, w}, r, -1, 1), random_tensor({c}, r, 0.5, 1.5), random_tensor({c}, r, -0.5, 0.5)},
                  [=](const std::vector<Tensor>& in) {
                    BatchNormState st{*rm, *rv, training, false};
                    st.eps = eps;
                    return batchnorm2d(in[0], in[1], in[2], st);
                  },
                  [=](const std::vector<Values>& in) {
                    const std::size_t area = h * w, count = n * area;
                    Values out(in[0].size());
                    for (std::size_t ch = 0; ch < c; ++ch) {
                      double mu = (*rm)[ch], var = (*rv)[ch];
                      if (training) {
                        mu = 0.0;
                        for (std::size_t bi = 0; bi < n; ++bi)
                          for (std::size_t k = 0; k < area; ++k) mu += in[0][(bi * c + ch) * area + k];
                        mu /= static_cast<double>(count);
                        var = 0.0;
                        for (std::size_t bi = 0; bi < n; ++bi)
                          for (std::size_t k = 0; k < area; ++k) {
                            const double d = in[0][(bi * c + ch) * area + k] - mu;
                            var += d * d;
                          }
                        var /= static_cast<double>(count);
                      }
                      for (std::size_t bi = 0; bi < n; ++bi)
                        for (std::size_t k = 0; k < area; ++k) {
                          const std::size_t i = (bi * c + ch) * area + k;
                          out[i] = in[1][ch] * (in[0][i] - mu) / std::sqrt(var + static_cast<double>(eps)) + in[2][ch];
                        }
                    }
                    return out;
                  }};
    });
  }
  b.emplace_back("dropout", [](Rng& r) {
    const Shape s = random_shape(r);
    const std::uint64_t key = r.next();
    const float rate = 0.3f;
    return Case{{random_tensor(s, r, -1, 1)},
                [key, rate](const std::vector<Tensor>& in) { return dropout(in[0], rate, true, key); },
                [key, rate](const std::vector<Values>& in) {
                  const auto mask = dropout_mask(in[0].size(), rate, key);
                  Values out(in[0].size());
                  for (std::size_t i = 0; i < out.size(); ++i)
                    out[i] = mask[i] ? in[0][i] / (1.0 - static_cast<double>(rate)) : 0.0;
                  return out;
                }};
  });
  b.emplace_back("index_select", [](Rng& r) {
    const std::size_t rows = pick(r, 2, 5), cols = pick(r, 1, 4), picks = pick(r, 1, 6);
    std::vector<std::size_t> idx(picks);
    for (auto& i : idx) i = r.below(rows);
    return Case{{random_tensor({rows, cols}, r, -1, 1)},
                [idx](const std::vector<Tensor>& in) { return index_select(in[0], idx); },
                [idx, cols](const std::vector<Values>& in) {
                  Values out;
                  for (std::size_t i : idx)
                    for (std::size_t j = 0; j < cols; ++j) out.push_back(in[0][i * cols + j]);
                  return out;
                }};
  });
  b.emplace_back("reshaped", [](Rng& r) {
    const Shape s = random_shape(r);
    return Case{{random_tensor(s, r, -1, 1)},
                [s](const std::vector<Tensor>& in) { return in[0].reshaped({s[0] * s[1], s[2]}); },
                [](const std::vector<Values>& in) { return in[0]; }};
  });

  // Losses.
  b.emplace_back("gan_loss_discriminator", [](Rng& r) {
    const std::size_t n = pick(r, 1, 6);
    return Case{{random_tensor({n, 1}, r, -3, 3), random_tensor({n, 1}, r, -3, 3)},
                [](const std::vector<Tensor>& in) { return gan_loss_discriminator(in[0], in[1]); },
                [](const std::vector<Values>& in) {
                  double real = 0.0, fake = 0.0;
                  for (double v : in[0]) real += std::log(std::clamp(sigmoid_d(v), kProbClamp, 1.0 - kProbClamp));
                  for (double v : in[1]) fake += std::log(1.0 - std::clamp(sigmoid_d(v), kProbClamp, 1.0 - kProbClamp));
                  return Values{-(real / static_cast<double>(in[0].size()) + fake / static_cast<double>(in[1].size()))};
                }};
  });
  b.emplace_back("gan_loss_generator", [](Rng& r) {
    const std::size_t n = pick(r, 1, 6);
    return Case{{random_tensor({n, 1}, r, -3, 3)},
                [](const std::vector<Tensor>& in) { return gan_loss_generator(in[0]); },
                [](const std::vector<Values>& in) {
                  double s = 0.0;
                  for (double v : in[0]) s += std::log(std::clamp(sigmoid_d(v), kProbClamp, 1.0 - kProbClamp));
                  return Values{-s / static_cast<double>(in[0].size())};
                }};
  });
  b.emplace_back("cycle_loss", [](Rng& r) {
    const Shape s = {pick(r, 1, 3), pick(r, 1, 3), pick(r, 2, 4), pick(r, 2, 4)};
    const Tensor x = random_tensor(s, r, 0, 1);
    // Keep |x - rec| clear of the kink at zero.
    std::vector<float> rec(x.numel());
    for (std::size_t i = 0; i < rec.size(); ++i) {
      const double d = r.uniform(0.02, 0.5) * (r.below(2) ? 1.0 : -1.0);
      rec[i] = static_cast<float>(x[i] + d);
    }
    return Case{{x, Tensor(s, rec, true)},
                [](const std::vector<Tensor>& in) { return cycle_loss(in[0], in[1]); },
                [](const std::vector<Values>& in) {
                  double acc = 0.0;
                  for (std::size_t i = 0; i < in[0].size(); ++i) acc += std::abs(in[0][i] - in[1][i]);
                  return Values{acc / static_cast<double>(in[0].size())};
                }};
  });
  b.emplace_back("metric_loss", [](Rng& r) {
    const std::size_t n = pick(r, 2, 5);
    const Shape sx = {n, pick(r, 1, 2), pick(r, 2, 4), pick(r, 2, 4)};
    const Shape sg = {n, pick(r, 1, 3), pick(r, 2, 3), pick(r, 2, 3)};
    std::vector<IndexPair> pairs;
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = i + 1; j < n; ++j) pairs.emplace_back(i, j);
    return Case{{random_tensor(sx, r, 0, 1), random_tensor(sg, r, 0, 1)},
                [pairs](const std::vector<Tensor>& in) { return metric_loss(in[0], in[1], pairs); },
                [pairs, n](const std::vector<Values>& in) {
                  const Values dx = ref_pair_distances(in[0], n, pairs);
                  const Values dg = ref_pair_distances(in[1], n, pairs);
                  double acc = 0.0;
                  for (std::size_t p = 0; p < dx.size(); ++p) acc += (dx[p] - dg[p]) * (dx[p] - dg[p]);
                  return Values{acc / static_cast<double>(dx.size())};
                }};
  });
  b.emplace_back("classification_loss", [](Rng& r) {
    const std::size_t n = pick(r, 1, 5), c = pick(r, 2, 5);
    std::vector<int> labels(n);
    for (int& l : labels) l = static_cast<int>(r.below(c));
    return Case{{random_tensor({n, c}, r, -2, 2)},
                [labels](const std::vector<Tensor>& in) { return classification_loss(in[0], labels); },
                [labels, n, c](const std::vector<Values>& in) {
                  const Values p = ref_softmax_rows(in[0], n, c);
                  double acc = 0.0;
                  for (std::size_t i = 0; i < n; ++i)
                    acc += std::log(std::clamp(p[i * c + static_cast<std::size_t>(labels[i])], kProbClamp, 1.0));
                  return Values{-acc / static_cast<double>(n)};
                }};
  });
  return b;
}

CaseResult run_case(const std::string& name, std::size_t trial, Case c, Rng& rng, const Tolerance& tol) {
  CaseResult result;
  result.name = name;
  result.trial = trial;

  const Tensor y = c.fn(c.inputs);
  std::vector<float> w(y.numel());
  for (float& v : w) v = static_cast<float>(rng.uniform(-1.0, 1.0));
  const Tensor weights(y.shape(), w);
  backward(sum(mul(y, weights)));

  std::vector<Values> base;
  for (const auto& t : c.inputs) base.push_back(to_values(t));
  auto objective = [&](const std::vector<Values>& in) {
    const Values out = c.ref(in);
    double acc = 0.0;
    for (std::size_t i = 0; i < out.size(); ++i) acc += static_cast<double>(w[i]) * out[i];
    return acc;
  };

  for (std::size_t k = 0; k < c.inputs.size(); ++k) {
    const auto analytic = c.inputs[k].has_grad() ? c.inputs[k].grad() : std::span<const float>{};
    for (std::size_t i = 0; i < base[k].size(); ++i) {
      std::vector<Values> probe = base;
      probe[k][i] = base[k][i] + kStep;
      const double up = objective(probe);
      probe[k][i] = base[k][i] - kStep;
      const double down = objective(probe);
      const double numeric = (up - down) / (2.0 * kStep);
      const double a = analytic.empty() ? 0.0 : static_cast<double>(analytic[i]);
      const double abs_err = std::abs(a - numeric);
      const double denom = std::max(std::abs(a), std::abs(numeric));
      const double rel_err = denom > 0.0 ? abs_err / denom : 0.0;
      ++result.elements;
      result.max_abs_err = std::max(result.max_abs_err, abs_err);
      if (abs_err >= tol.abs_tol) {
        result.max_rel_err = std::max(result.max_rel_err, rel_err);
        if (rel_err >= tol.rel_tol) result.passed = false;
      }
    }
  }
  return result;
}

}  // namespace

CaseResult check(const std::string& name, std::vector<Tensor> inputs, const ForwardFn& forward,
                 const ReferenceFn& reference, std::uint64_t seed, const Tolerance& tolerance) {
  Rng rng(seed);
  return run_case(name, 0, Case{std::move(inputs), forward, reference}, rng, tolerance);
}

std::vector<std::string> case_names() {
  std::vector<std::string> names;
  for (const auto& [name, builder] : builders()) names.push_back(name);
  return names;
}

SuiteResult run_suite(std::uint64_t seed, std::size_t trials, const Tolerance& tolerance) {
  const auto started = std::chrono::steady_clock::now();
  SuiteResult suite;
  const auto all = builders();
  for (std::size_t c = 0; c < all.size(); ++c) {
    for (std::size_t t = 0; t < trials; ++t) {
      Rng rng(derive_seed(seed, c, t));
      suite.cases.push_back(run_case(all[c].first, t, all[c].second(rng), rng, tolerance));
    }
  }
  suite.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();
  return suite;
}

}  // namespace hda::gradcheck
