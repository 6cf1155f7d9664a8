#include "uwpose/ops.hpp"

#include <Eigen/Core>
#include <algorithm>
#include <cmath>
#include <initializer_list>
#include <string>

#include "uwpose/errors.hpp"

namespace uwpose::ad {

namespace {

using Node = std::shared_ptr<TensorImpl>;
using RowMat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using MatMap = Eigen::Map<RowMat>;
using ConstMatMap = Eigen::Map<const RowMat>;

bool tracking(std::initializer_list<const Tensor*> inputs) {
  if (Tape::active() == nullptr) return false;
  for (const auto* t : inputs) {
    if (t->requires_grad()) return true;
  }
  return false;
}

template <typename Fn>
void record(std::vector<Node> inputs, std::vector<Node> outputs, Fn&& fn) {
  for (auto& out : outputs) out->requires_grad = true;
  Tape::active()->record(std::move(inputs), std::move(outputs), std::forward<Fn>(fn));
}

#ifndef NDEBUG
bool all_finite(std::span<const double> v) {
  return std::all_of(v.begin(), v.end(), [](double x) { return std::isfinite(x); });
}
#endif

void check_finite([[maybe_unused]] const char* op, [[maybe_unused]] const Tensor& out,
                  [[maybe_unused]] std::initializer_list<const Tensor*> inputs) {
#ifndef NDEBUG
  if (all_finite(out.data())) return;
  for (const auto* t : inputs) {
    if (!all_finite(t->data())) return;
  }
  throw ContractError(std::string(op) + " produced a non-finite value from finite inputs");
#endif
}

void require_rank(const char* op, const Tensor& t, std::size_t rank, const char* what) {
  if (t.rank() != rank) {
    throw ShapeError(std::string(op) + ": " + what + " must have rank " + std::to_string(rank) +
                     ", got " + to_string(t.shape()));
  }
}

[[noreturn]] void mismatch(const char* op, const Tensor& a, const Tensor& b) {
  throw ShapeError(std::string(op) + ": incompatible shapes " + to_string(a.shape()) + " and " +
                   to_string(b.shape()));
}

double stable_sigmoid(double x) {
  if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

enum class BinaryKind { kAdd, kSub, kMul };

Tensor binary(const char* op, BinaryKind kind, const Tensor& a, const Tensor& b) {
  const bool same = a.shape() == b.shape();
  const bool a_scalar = a.size() == 1;
  const bool b_scalar = b.size() == 1;
  if (!same && !a_scalar && !b_scalar) mismatch(op, a, b);
  const Shape& shape = (same || b_scalar) ? a.shape() : b.shape();
  const std::size_t n = numel(shape);
  const std::size_t sa = a.size() == n ? 1 : 0;
  const std::size_t sb = b.size() == n ? 1 : 0;

  Buffer out(n);
  const auto ad = a.data();
  const auto bd = b.data();
  for (std::size_t i = 0; i < n; ++i) {
    const double x = ad[i * sa], y = bd[i * sb];
    switch (kind) {
      case BinaryKind::kAdd: out[i] = x + y; break;
      case BinaryKind::kSub: out[i] = x - y; break;
      case BinaryKind::kMul: out[i] = x * y; break;
    }
  }
  Tensor result = Tensor::from_buffer(shape, std::move(out));
  check_finite(op, result, {&a, &b});
  if (tracking({&a, &b})) {
    auto* ai = a.impl().get();
    auto* bi = b.impl().get();
    auto* oi = result.impl().get();
    record({a.impl(), b.impl()}, {result.impl()}, [=] {
      const auto& go = oi->grad;
      if (ai->requires_grad) {
        auto& ga = ai->grad_buffer();
        for (std::size_t i = 0; i < n; ++i) {
          const double d = kind == BinaryKind::kMul ? go[i] * bi->data[i * sb] : go[i];
          ga[i * sa] += d;
        }
      }
      if (bi->requires_grad) {
        auto& gb = bi->grad_buffer();
        for (std::size_t i = 0; i < n; ++i) {
          double d = go[i];
          if (kind == BinaryKind::kSub) d = -d;
          if (kind == BinaryKind::kMul) d *= ai->data[i * sa];
          gb[i * sb] += d;
        }
      }
    });
  }
  return result;
}

// Unary op whose derivative can be written in terms of input x and output y.
template <typename Fwd, typename Deriv>
Tensor unary(const char* op, const Tensor& a, Fwd fwd, Deriv deriv) {
  Buffer out(a.size());
  const auto ad = a.data();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = fwd(ad[i]);
  Tensor result = Tensor::from_buffer(a.shape(), std::move(out));
  check_finite(op, result, {&a});
  if (tracking({&a})) {
    auto* ai = a.impl().get();
    auto* oi = result.impl().get();
    record({a.impl()}, {result.impl()}, [ai, oi, deriv] {
      auto& ga = ai->grad_buffer();
      for (std::size_t i = 0; i < ga.size(); ++i) ga[i] += oi->grad[i] * deriv(ai->data[i], oi->data[i]);
    });
  }
  return result;
}

}  // namespace

Tensor add(const Tensor& a, const Tensor& b) { return binary("add", BinaryKind::kAdd, a, b); }
Tensor sub(const Tensor& a, const Tensor& b) { return binary("sub", BinaryKind::kSub, a, b); }
Tensor mul(const Tensor& a, const Tensor& b) { return binary("mul", BinaryKind::kMul, a, b); }

Tensor scale(const Tensor& a, double factor) {
  return unary(
      "scale", a, [factor](double x) { return factor * x; }, [factor](double, double) { return factor; });
}

Tensor relu(const Tensor& a) {
  return unary(
      // NaN passes through so a poisoned input still surfaces as divergence.
      "relu", a, [](double x) { return x > 0.0 || std::isnan(x) ? x : 0.0; },
      [](double x, double) { return x > 0.0 ? 1.0 : 0.0; });
}

Tensor tanh(const Tensor& a) {
  return unary(
      "tanh", a, [](double x) { return std::tanh(x); }, [](double, double y) { return 1.0 - y * y; });
}

Tensor sigmoid(const Tensor& a) {
  return unary("sigmoid", a, stable_sigmoid, [](double, double y) { return y * (1.0 - y); });
}

Tensor sum(const Tensor& a) {
  double total = 0.0;
  for (double v : a.data()) total += v;
  Tensor result = Tensor::scalar(total);
  if (tracking({&a})) {
    auto* ai = a.impl().get();
    auto* oi = result.impl().get();
    record({a.impl()}, {result.impl()}, [ai, oi] {
      auto& ga = ai->grad_buffer();
      const double g = oi->grad[0];
      for (auto& v : ga) v += g;
    });
  }
  return result;
}

Tensor mean(const Tensor& a) { return scale(sum(a), 1.0 / static_cast<double>(a.size())); }

Tensor row_l2_norm(const Tensor& a) {
  require_rank("row_l2_norm", a, 2, "input");
  const std::size_t rows = a.dim(0), cols = a.dim(1);
  Buffer out(rows);
  const auto ad = a.data();
  for (std::size_t r = 0; r < rows; ++r) {
    double s = 0.0;
    for (std::size_t c = 0; c < cols; ++c) s += ad[r * cols + c] * ad[r * cols + c];
    out[r] = std::sqrt(s);
  }
  Tensor result = Tensor::from_buffer({rows}, std::move(out));
  if (tracking({&a})) {
    auto* ai = a.impl().get();
    auto* oi = result.impl().get();
    record({a.impl()}, {result.impl()}, [ai, oi, rows, cols] {
      auto& ga = ai->grad_buffer();
      for (std::size_t r = 0; r < rows; ++r) {
        const double norm = oi->data[r];
        if (norm == 0.0) continue;
        const double g = oi->grad[r] / norm;
        for (std::size_t c = 0; c < cols; ++c) ga[r * cols + c] += g * ai->data[r * cols + c];
      }
    });
  }
  return result;
}

Tensor dense(const Tensor& input, const Tensor& weight, const Tensor& bias) {
  require_rank("dense", input, 2, "input");
  require_rank("dense", weight, 2, "weight");
  require_rank("dense", bias, 1, "bias");
  const std::size_t n = input.dim(0), d = input.dim(1), m = weight.dim(1);
  if (weight.dim(0) != d) mismatch("dense", input, weight);
  if (bias.dim(0) != m) mismatch("dense", weight, bias);

  Buffer out(n * m);
  {
    ConstMatMap x(input.data().data(), n, d);
    ConstMatMap w(weight.data().data(), d, m);
    Eigen::Map<const Eigen::RowVectorXd> b(bias.data().data(), m);
    MatMap y(out.data(), n, m);
    y.noalias() = x * w;
    y.rowwise() += b;
  }
  Tensor result = Tensor::from_buffer({n, m}, std::move(out));
  check_finite("dense", result, {&input, &weight, &bias});
  if (tracking({&input, &weight, &bias})) {
    auto* xi = input.impl().get();
    auto* wi = weight.impl().get();
    auto* bi = bias.impl().get();
    auto* oi = result.impl().get();
    record({input.impl(), weight.impl(), bias.impl()}, {result.impl()}, [=] {
      ConstMatMap go(oi->grad.data(), n, m);
      if (xi->requires_grad) {
        MatMap gx(xi->grad_buffer().data(), n, d);
        gx.noalias() += go * ConstMatMap(wi->data.data(), d, m).transpose();
      }
      if (wi->requires_grad) {
        MatMap gw(wi->grad_buffer().data(), d, m);
        gw.noalias() += ConstMatMap(xi->data.data(), n, d).transpose() * go;
      }
      if (bi->requires_grad) {
        Eigen::Map<Eigen::RowVectorXd> gb(bi->grad_buffer().data(), m);
        gb += go.colwise().sum();
      }
    });
  }
  return result;
}

namespace {

struct ConvGeometry {
  std::size_t n, c, h, w, f, kh, kw, stride, pad, oh, ow;
  std::size_t patch() const { return c * kh * kw; }
  std::size_t pixels() const { return oh * ow; }
};

// cols[(ch*kh + i)*kw + j][oy*ow + ox] = x[ch][oy*s + i - p][ox*s + j - p]
void im2col(const ConvGeometry& g, const double* x, double* cols) {
  const std::size_t pixels = g.pixels();
  for (std::size_t ch = 0; ch < g.c; ++ch) {
    for (std::size_t i = 0; i < g.kh; ++i) {
      for (std::size_t j = 0; j < g.kw; ++j) {
        double* row = cols + ((ch * g.kh + i) * g.kw + j) * pixels;
        for (std::size_t oy = 0; oy < g.oh; ++oy) {
          const auto iy = static_cast<std::ptrdiff_t>(oy * g.stride + i) - static_cast<std::ptrdiff_t>(g.pad);
          for (std::size_t ox = 0; ox < g.ow; ++ox) {
            const auto ix = static_cast<std::ptrdiff_t>(ox * g.stride + j) - static_cast<std::ptrdiff_t>(g.pad);
            const bool inside = iy >= 0 && ix >= 0 && iy < static_cast<std::ptrdiff_t>(g.h) &&
                                ix < static_cast<std::ptrdiff_t>(g.w);
            row[oy * g.ow + ox] = inside ? x[(ch * g.h + iy) * g.w + ix] : 0.0;
          }
        }
      }
    }
  }
}

void col2im_add(const ConvGeometry& g, const double* cols, double* dx) {
  const std::size_t pixels = g.pixels();
  for (std::size_t ch = 0; ch < g.c; ++ch) {
    for (std::size_t i = 0; i < g.kh; ++i) {
      for (std::size_t j = 0; j < g.kw; ++j) {
        const double* row = cols + ((ch * g.kh + i) * g.kw + j) * pixels;
        for (std::size_t oy = 0; oy < g.oh; ++oy) {
          const auto iy = static_cast<std::ptrdiff_t>(oy * g.stride + i) - static_cast<std::ptrdiff_t>(g.pad);
          if (iy < 0 || iy >= static_cast<std::ptrdiff_t>(g.h)) continue;
          for (std::size_t ox = 0; ox < g.ow; ++ox) {
            const auto ix = static_cast<std::ptrdiff_t>(ox * g.stride + j) - static_cast<std::ptrdiff_t>(g.pad);
            if (ix < 0 || ix >= static_cast<std::ptrdiff_t>(g.w)) continue;
            dx[(ch * g.h + iy) * g.w + ix] += row[oy * g.ow + ox];
          }
        }
      }
    }
  }
}

}  // namespace

Tensor conv2d(const Tensor& input, const Tensor& kernel, const Tensor& bias, std::size_t stride,
              std::size_t padding) {
  require_rank("conv2d", input, 4, "input");
  require_rank("conv2d", kernel, 4, "kernel");
  require_rank("conv2d", bias, 1, "bias");
  if (stride == 0) throw ShapeError("conv2d: stride must be >= 1");
  ConvGeometry g{};
  g.n = input.dim(0);
  g.c = input.dim(1);
  g.h = input.dim(2);
  g.w = input.dim(3);
  g.f = kernel.dim(0);
  g.kh = kernel.dim(2);
  g.kw = kernel.dim(3);
  g.stride = stride;
  g.pad = padding;
  if (kernel.dim(1) != g.c) mismatch("conv2d", input, kernel);
  if (bias.dim(0) != g.f) mismatch("conv2d", kernel, bias);
  if (g.kh > g.h + 2 * padding || g.kw > g.w + 2 * padding) mismatch("conv2d", input, kernel);
  g.oh = (g.h + 2 * padding - g.kh) / stride + 1;
  g.ow = (g.w + 2 * padding - g.kw) / stride + 1;

  const std::size_t in_stride = g.c * g.h * g.w;
  const std::size_t out_stride = g.f * g.pixels();
  Buffer out(g.n * out_stride);
  Buffer cols(g.patch() * g.pixels());
  ConstMatMap k(kernel.data().data(), g.f, g.patch());
  Eigen::Map<const Eigen::VectorXd> b(bias.data().data(), g.f);
  for (std::size_t s = 0; s < g.n; ++s) {
    im2col(g, input.data().data() + s * in_stride, cols.data());
    MatMap y(out.data() + s * out_stride, g.f, g.pixels());
    y.noalias() = k * ConstMatMap(cols.data(), g.patch(), g.pixels());
    y.colwise() += b;
  }
  Tensor result = Tensor::from_buffer({g.n, g.f, g.oh, g.ow}, std::move(out));
  check_finite("conv2d", result, {&input, &kernel, &bias});

  if (tracking({&input, &kernel, &bias})) {
    auto* xi = input.impl().get();
    auto* ki = kernel.impl().get();
    auto* bi = bias.impl().get();
    auto* oi = result.impl().get();
    record({input.impl(), kernel.impl(), bias.impl()}, {result.impl()}, [=] {
      Buffer cols(g.patch() * g.pixels());
      Buffer dcols(xi->requires_grad ? cols.size() : 0);
      ConstMatMap k(ki->data.data(), g.f, g.patch());
      for (std::size_t s = 0; s < g.n; ++s) {
        ConstMatMap go(oi->grad.data() + s * out_stride, g.f, g.pixels());
        if (ki->requires_grad) {
          im2col(g, xi->data.data() + s * in_stride, cols.data());
          MatMap gk(ki->grad_buffer().data(), g.f, g.patch());
          gk.noalias() += go * ConstMatMap(cols.data(), g.patch(), g.pixels()).transpose();
        }
        if (bi->requires_grad) {
          Eigen::Map<Eigen::VectorXd> gb(bi->grad_buffer().data(), g.f);
          gb += go.rowwise().sum();
        }
        if (xi->requires_grad) {
          MatMap dc(dcols.data(), g.patch(), g.pixels());
          dc.noalias() = k.transpose() * go;
          col2im_add(g, dcols.data(), xi->grad_buffer().data() + s * in_stride);
        }
      }
    });
  }
  return result;
}

Tensor maxpool2d(const Tensor& input, std::size_t size, std::size_t stride) {
  require_rank("maxpool2d", input, 4, "input");
  if (size == 0 || stride == 0) throw ShapeError("maxpool2d: size and stride must be >= 1");
  const std::size_t n = input.dim(0), c = input.dim(1), h = input.dim(2), w = input.dim(3);
  if (size > h || size > w) {
    throw ShapeError("maxpool2d: window " + std::to_string(size) + " exceeds input " + to_string(input.shape()));
  }
  const std::size_t oh = (h - size) / stride + 1, ow = (w - size) / stride + 1;
  Buffer out(n * c * oh * ow);
  std::vector<std::size_t> argmax(out.size());
  const auto x = input.data();
  for (std::size_t plane = 0; plane < n * c; ++plane) {
    for (std::size_t oy = 0; oy < oh; ++oy) {
      for (std::size_t ox = 0; ox < ow; ++ox) {
        std::size_t best = plane * h * w + (oy * stride) * w + ox * stride;
        for (std::size_t i = 0; i < size; ++i) {
          for (std::size_t j = 0; j < size; ++j) {
            const std::size_t idx = plane * h * w + (oy * stride + i) * w + ox * stride + j;
            if (x[idx] > x[best]) best = idx;
          }
        }
        const std::size_t o = (plane * oh + oy) * ow + ox;
        out[o] = x[best];
        argmax[o] = best;
      }
    }
  }
  Tensor result = Tensor::from_buffer({n, c, oh, ow}, std::move(out));
  if (tracking({&input})) {
    auto* xi = input.impl().get();
    auto* oi = result.impl().get();
    record({input.impl()}, {result.impl()}, [xi, oi, argmax = std::move(argmax)] {
      auto& gx = xi->grad_buffer();
      for (std::size_t o = 0; o < argmax.size(); ++o) gx[argmax[o]] += oi->grad[o];
    });
  }
  return result;
}

Tensor global_avgpool(const Tensor& input) {
  require_rank("global_avgpool", input, 4, "input");
  const std::size_t n = input.dim(0), c = input.dim(1), area = input.dim(2) * input.dim(3);
  Buffer out(n * c);
  const auto x = input.data();
  for (std::size_t p = 0; p < n * c; ++p) {
    double s = 0.0;
    for (std::size_t k = 0; k < area; ++k) s += x[p * area + k];
    out[p] = s / static_cast<double>(area);
  }
  Tensor result = Tensor::from_buffer({n, c}, std::move(out));
  if (tracking({&input})) {
    auto* xi = input.impl().get();
    auto* oi = result.impl().get();
    record({input.impl()}, {result.impl()}, [xi, oi, n, c, area] {
      auto& gx = xi->grad_buffer();
      for (std::size_t p = 0; p < n * c; ++p) {
        const double g = oi->grad[p] / static_cast<double>(area);
        for (std::size_t k = 0; k < area; ++k) gx[p * area + k] += g;
      }
    });
  }
  return result;
}

Tensor reshape(const Tensor& a, Shape shape) {
  if (numel(shape) != a.size()) {
    throw ShapeError("reshape: cannot view " + to_string(a.shape()) + " as " + to_string(shape));
  }
  Tensor result = Tensor::from_buffer(std::move(shape), Buffer(a.data().begin(), a.data().end()));
  if (tracking({&a})) {
    auto* ai = a.impl().get();
    auto* oi = result.impl().get();
    record({a.impl()}, {result.impl()}, [ai, oi] {
      auto& ga = ai->grad_buffer();
      for (std::size_t i = 0; i < ga.size(); ++i) ga[i] += oi->grad[i];
    });
  }
  return result;
}

Tensor flatten(const Tensor& a) {
  if (a.rank() < 2) throw ShapeError("flatten: need rank >= 2, got " + to_string(a.shape()));
  return reshape(a, {a.dim(0), a.size() / a.dim(0)});
}

Tensor concat(const std::vector<Tensor>& parts, std::size_t axis) {
  if (parts.empty()) throw ShapeError("concat: no inputs");
  const Shape& first = parts.front().shape();
  if (axis >= first.size()) throw ShapeError("concat: axis " + std::to_string(axis) + " out of range for " + to_string(first));
  Shape shape = first;
  shape[axis] = 0;
  for (const auto& p : parts) {
    if (p.rank() != first.size()) mismatch("concat", parts.front(), p);
    for (std::size_t d = 0; d < first.size(); ++d) {
      if (d != axis && p.dim(d) != first[d]) mismatch("concat", parts.front(), p);
    }
    shape[axis] += p.dim(axis);
  }
  std::size_t outer = 1, inner = 1;
  for (std::size_t d = 0; d < axis; ++d) outer *= first[d];
  for (std::size_t d = axis + 1; d < first.size(); ++d) inner *= first[d];

  Buffer out(numel(shape));
  const std::size_t out_block = shape[axis] * inner;
  std::size_t offset = 0;
  std::vector<std::size_t> offsets;
  for (const auto& p : parts) {
    const std::size_t block = p.dim(axis) * inner;
    for (std::size_t o = 0; o < outer; ++o) {
      std::copy_n(p.data().begin() + o * block, block, out.begin() + o * out_block + offset);
    }
    offsets.push_back(offset);
    offset += block;
  }
  Tensor result = Tensor::from_buffer(shape, std::move(out));
  bool any = false;
  for (const auto& p : parts) any = any || p.requires_grad();
  if (any && Tape::active() != nullptr) {
    std::vector<Node> inputs;
    for (const auto& p : parts) inputs.push_back(p.impl());
    auto* oi = result.impl().get();
    std::vector<TensorImpl*> raw;
    for (const auto& p : parts) raw.push_back(p.impl().get());
    record(inputs, {result.impl()}, [raw, oi, offsets, outer, out_block] {
      for (std::size_t k = 0; k < raw.size(); ++k) {
        if (!raw[k]->requires_grad) continue;
        auto& g = raw[k]->grad_buffer();
        const std::size_t block = g.size() / outer;
        for (std::size_t o = 0; o < outer; ++o) {
          for (std::size_t i = 0; i < block; ++i) g[o * block + i] += oi->grad[o * out_block + offsets[k] + i];
        }
      }
    });
  }
  return result;
}

Tensor gather_cell(const Tensor& feature_map, std::size_t row, std::size_t col) {
  require_rank("gather_cell", feature_map, 4, "feature map");
  const std::size_t n = feature_map.dim(0), c = feature_map.dim(1), h = feature_map.dim(2),
                    w = feature_map.dim(3);
  if (row >= h || col >= w) {
    throw ShapeError("gather_cell: cell (" + std::to_string(row) + "," + std::to_string(col) +
                     ") outside grid " + to_string(feature_map.shape()));
  }
  Buffer out(n * c);
  const auto x = feature_map.data();
  for (std::size_t p = 0; p < n * c; ++p) out[p] = x[(p * h + row) * w + col];
  Tensor result = Tensor::from_buffer({n, c}, std::move(out));
  if (tracking({&feature_map})) {
    auto* xi = feature_map.impl().get();
    auto* oi = result.impl().get();
    record({feature_map.impl()}, {result.impl()}, [=] {
      auto& g = xi->grad_buffer();
      for (std::size_t p = 0; p < n * c; ++p) g[(p * h + row) * w + col] += oi->grad[p];
    });
  }
  return result;
}

LstmState lstm_cell(const Tensor& x, const LstmState& state, const LstmParams& params) {
  require_rank("lstm_cell", x, 2, "x");
  require_rank("lstm_cell", state.h, 2, "h");
  require_rank("lstm_cell", state.c, 2, "c");
  require_rank("lstm_cell", params.w_input, 2, "w_input");
  require_rank("lstm_cell", params.w_hidden, 2, "w_hidden");
  require_rank("lstm_cell", params.bias, 1, "bias");
  const std::size_t n = x.dim(0), din = x.dim(1), dh = params.w_hidden.dim(0), g4 = 4 * dh;
  if (params.w_input.dim(0) != din || params.w_input.dim(1) != g4) mismatch("lstm_cell", x, params.w_input);
  if (params.w_hidden.dim(1) != g4) mismatch("lstm_cell", params.w_hidden, params.w_input);
  if (params.bias.dim(0) != g4) mismatch("lstm_cell", params.bias, params.w_input);
  if (state.h.dim(0) != n || state.h.dim(1) != dh) mismatch("lstm_cell", x, state.h);
  if (state.c.shape() != state.h.shape()) mismatch("lstm_cell", state.h, state.c);

  // Activated gates, [N, 4*Dh], kept for the backward pass.
  auto gates = std::make_shared<Buffer>(n * g4);
  {
    MatMap a(gates->data(), n, g4);
    a.noalias() = ConstMatMap(x.data().data(), n, din) * ConstMatMap(params.w_input.data().data(), din, g4);
    a.noalias() += ConstMatMap(state.h.data().data(), n, dh) * ConstMatMap(params.w_hidden.data().data(), dh, g4);
    a.rowwise() += Eigen::Map<const Eigen::RowVectorXd>(params.bias.data().data(), g4);
  }
  Buffer h_out(n * dh), c_out(n * dh);
  const auto c_prev = state.c.data();
  for (std::size_t r = 0; r < n; ++r) {
    double* a = gates->data() + r * g4;
    for (std::size_t k = 0; k < dh; ++k) {
      a[k] = stable_sigmoid(a[k]);
      a[dh + k] = stable_sigmoid(a[dh + k]);
      a[2 * dh + k] = std::tanh(a[2 * dh + k]);
      a[3 * dh + k] = stable_sigmoid(a[3 * dh + k]);
      const double c = a[dh + k] * c_prev[r * dh + k] + a[k] * a[2 * dh + k];
      c_out[r * dh + k] = c;
      h_out[r * dh + k] = a[3 * dh + k] * std::tanh(c);
    }
  }
  LstmState next{Tensor::from_buffer({n, dh}, std::move(h_out)), Tensor::from_buffer({n, dh}, std::move(c_out))};
  check_finite("lstm_cell", next.h, {&x, &state.h, &state.c, &params.w_input, &params.w_hidden, &params.bias});

  if (tracking({&x, &state.h, &state.c, &params.w_input, &params.w_hidden, &params.bias})) {
    auto* xi = x.impl().get();
    auto* hi = state.h.impl().get();
    auto* ci = state.c.impl().get();
    auto* wxi = params.w_input.impl().get();
    auto* whi = params.w_hidden.impl().get();
    auto* bi = params.bias.impl().get();
    auto* ho = next.h.impl().get();
    auto* co = next.c.impl().get();
    record({x.impl(), state.h.impl(), state.c.impl(), params.w_input.impl(), params.w_hidden.impl(),
            params.bias.impl()},
           {next.h.impl(), next.c.impl()}, [=] {
             Buffer dgates(n * g4);
             const bool has_dh = !ho->grad.empty();
             const bool has_dc = !co->grad.empty();
             Buffer* dc_prev = ci->requires_grad ? &ci->grad_buffer() : nullptr;
             for (std::size_t r = 0; r < n; ++r) {
               const double* a = gates->data() + r * g4;
               double* d = dgates.data() + r * g4;
               for (std::size_t k = 0; k < dh; ++k) {
                 const std::size_t idx = r * dh + k;
                 const double i = a[k], f = a[dh + k], g = a[2 * dh + k], o = a[3 * dh + k];
                 const double tc = std::tanh(co->data[idx]);
                 const double dh_out = has_dh ? ho->grad[idx] : 0.0;
                 const double dc = (has_dc ? co->grad[idx] : 0.0) + dh_out * o * (1.0 - tc * tc);
                 d[k] = dc * g * i * (1.0 - i);
                 d[dh + k] = dc * ci->data[idx] * f * (1.0 - f);
                 d[2 * dh + k] = dc * i * (1.0 - g * g);
                 d[3 * dh + k] = dh_out * tc * o * (1.0 - o);
                 if (dc_prev) (*dc_prev)[idx] += dc * f;
               }
             }
             ConstMatMap dg(dgates.data(), n, g4);
             if (xi->requires_grad) {
               MatMap(xi->grad_buffer().data(), n, din).noalias() +=
                   dg * ConstMatMap(wxi->data.data(), din, g4).transpose();
             }
             if (hi->requires_grad) {
               MatMap(hi->grad_buffer().data(), n, dh).noalias() +=
                   dg * ConstMatMap(whi->data.data(), dh, g4).transpose();
             }
             if (wxi->requires_grad) {
               MatMap(wxi->grad_buffer().data(), din, g4).noalias() +=
                   ConstMatMap(xi->data.data(), n, din).transpose() * dg;
             }
             if (whi->requires_grad) {
               MatMap(whi->grad_buffer().data(), dh, g4).noalias() +=
                   ConstMatMap(hi->data.data(), n, dh).transpose() * dg;
             }
             if (bi->requires_grad) {
               Eigen::Map<Eigen::RowVectorXd>(bi->grad_buffer().data(), g4) += dg.colwise().sum();
             }
           });
  }
  return next;
}

}  // namespace uwpose::ad
