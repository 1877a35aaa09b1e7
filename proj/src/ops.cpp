// Copyright 2026 The mofe-restore Authors
// SPDX-License-Identifier: Apache-2.0

#include "mofe/ops.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

#include "mofe/errors.hpp"
#include "kernels.hpp"

namespace mofe {

namespace {

template <typename T>
void require_same_shape(const Tensor<T>& a, const Tensor<T>& b, const char* op) {
  if (a.shape() != b.shape()) {
    throw DimensionError(std::string(op) + ": shape mismatch " + shape_str(a.shape()) + " vs " +
                         shape_str(b.shape()));
  }
}

struct AxisSplit {
  std::size_t outer = 1;
  std::size_t extent = 1;
  std::size_t inner = 1;
};

AxisSplit split_at(const Shape& shape, std::size_t axis) {
  AxisSplit s;
  for (std::size_t i = 0; i < axis; ++i) s.outer *= shape[i];
  s.extent = shape[axis];
  for (std::size_t i = axis + 1; i < shape.size(); ++i) s.inner *= shape[i];
  return s;
}

// Unary elementwise op whose derivative is a function of (input, output).
template <typename T, typename Fwd, typename Deriv>
Tensor<T> unary(const Tensor<T>& x, const char* name, Fwd fwd, Deriv deriv) {
  const auto& in = x.values();
  std::vector<T> out(in.size());
  for (std::size_t i = 0; i < in.size(); ++i) out[i] = fwd(in[i]);
  return make_result<T>(x.shape(), std::move(out), {x}, name, [deriv](Node<T>& self) {
    auto& p = *self.parents[0];
    auto& g = p.grad_buffer();
    for (std::size_t i = 0; i < g.size(); ++i) {
      g[i] += self.grad[i] * deriv(p.data[i], self.data[i]);
    }
  });
}

}  // namespace

template <typename T>
Tensor<T> add(const Tensor<T>& a, const Tensor<T>& b) {
  require_same_shape(a, b, "add");
  std::vector<T> out(a.numel());
  const auto& x = a.values();
  const auto& y = b.values();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = x[i] + y[i];
  return make_result<T>(a.shape(), std::move(out), {a, b}, "add", [](Node<T>& self) {
    for (auto& p : self.parents) {
      if (!p->requires_grad) continue;
      auto& g = p->grad_buffer();
      for (std::size_t i = 0; i < g.size(); ++i) g[i] += self.grad[i];
    }
  });
}

template <typename T>
Tensor<T> sub(const Tensor<T>& a, const Tensor<T>& b) {
  require_same_shape(a, b, "sub");
  std::vector<T> out(a.numel());
  const auto& x = a.values();
  const auto& y = b.values();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = x[i] - y[i];
  return make_result<T>(a.shape(), std::move(out), {a, b}, "sub", [](Node<T>& self) {
    if (self.parents[0]->requires_grad) {
      auto& g = self.parents[0]->grad_buffer();
      for (std::size_t i = 0; i < g.size(); ++i) g[i] += self.grad[i];
    }
    if (self.parents[1]->requires_grad) {
      auto& g = self.parents[1]->grad_buffer();
      for (std::size_t i = 0; i < g.size(); ++i) g[i] -= self.grad[i];
    }
  });
}

template <typename T>
Tensor<T> mul(const Tensor<T>& a, const Tensor<T>& b) {
  require_same_shape(a, b, "mul");
  std::vector<T> out(a.numel());
  const auto& x = a.values();
  const auto& y = b.values();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = x[i] * y[i];
  return make_result<T>(a.shape(), std::move(out), {a, b}, "mul", [](Node<T>& self) {
    auto& pa = *self.parents[0];
    auto& pb = *self.parents[1];
    if (pa.requires_grad) {
      auto& g = pa.grad_buffer();
      for (std::size_t i = 0; i < g.size(); ++i) g[i] += self.grad[i] * pb.data[i];
    }
    if (pb.requires_grad) {
      auto& g = pb.grad_buffer();
      for (std::size_t i = 0; i < g.size(); ++i) g[i] += self.grad[i] * pa.data[i];
    }
  });
}

template <typename T>
Tensor<T> scale(const Tensor<T>& x, T factor) {
  std::vector<T> out(x.values());
  for (auto& v : out) v *= factor;
  return make_result<T>(x.shape(), std::move(out), {x}, "scale", [factor](Node<T>& self) {
    auto& g = self.parents[0]->grad_buffer();
    for (std::size_t i = 0; i < g.size(); ++i) g[i] += self.grad[i] * factor;
  });
}

template <typename T>
Tensor<T> add_scalar(const Tensor<T>& x, T offset) {
  std::vector<T> out(x.values());
  for (auto& v : out) v += offset;
  return make_result<T>(x.shape(), std::move(out), {x}, "add_scalar", [](Node<T>& self) {
    auto& g = self.parents[0]->grad_buffer();
    for (std::size_t i = 0; i < g.size(); ++i) g[i] += self.grad[i];
  });
}

template <typename T>
Tensor<T> mul_scalar(const Tensor<T>& x, const Tensor<T>& s) {
  if (s.numel() != 1) {
    throw DimensionError("mul_scalar: factor must hold one element, got " + shape_str(s.shape()));
  }
  const T k = s.at(0);
  std::vector<T> out(x.values());
  for (auto& v : out) v *= k;
  return make_result<T>(x.shape(), std::move(out), {x, s}, "mul_scalar", [](Node<T>& self) {
    auto& px = *self.parents[0];
    auto& ps = *self.parents[1];
    if (px.requires_grad) {
      auto& g = px.grad_buffer();
      const T k = ps.data[0];
      for (std::size_t i = 0; i < g.size(); ++i) g[i] += self.grad[i] * k;
    }
    if (ps.requires_grad) {
      T acc = 0;
      for (std::size_t i = 0; i < self.grad.size(); ++i) acc += self.grad[i] * px.data[i];
      ps.grad_buffer()[0] += acc;
    }
  });
}

template <typename T>
Tensor<T> add_n(const std::vector<Tensor<T>>& xs) {
  if (xs.empty()) throw DimensionError("add_n: no inputs");
  std::vector<T> out(xs[0].values());
  for (std::size_t k = 1; k < xs.size(); ++k) {
    require_same_shape(xs[0], xs[k], "add_n");
    const auto& v = xs[k].values();
    for (std::size_t i = 0; i < out.size(); ++i) out[i] += v[i];
  }
  return make_result<T>(xs[0].shape(), std::move(out), xs, "add_n", [](Node<T>& self) {
    for (auto& p : self.parents) {
      if (!p->requires_grad) continue;
      auto& g = p->grad_buffer();
      for (std::size_t i = 0; i < g.size(); ++i) g[i] += self.grad[i];
    }
  });
}

template <typename T>
Tensor<T> gelu(const Tensor<T>& x) {
  constexpr T kInvSqrt2 = T(0.70710678118654752440);
  constexpr T kInvSqrt2Pi = T(0.39894228040143267794);
  return unary<T>(
      x, "gelu", [](T v) { return T(0.5) * v * (T(1) + std::erf(v * kInvSqrt2)); },
      [](T v, T) {
        const T cdf = T(0.5) * (T(1) + std::erf(v * kInvSqrt2));
        return cdf + v * kInvSqrt2Pi * std::exp(T(-0.5) * v * v);
      });
}

template <typename T>
Tensor<T> sigmoid(const Tensor<T>& x) {
  return unary<T>(
      x, "sigmoid",
      [](T v) {
        if (v >= 0) return T(1) / (T(1) + std::exp(-v));
        const T e = std::exp(v);
        return e / (T(1) + e);
      },
      [](T, T y) { return y * (T(1) - y); });
}

template <typename T>
Tensor<T> exp(const Tensor<T>& x) {
  return unary<T>(
      x, "exp", [](T v) { return std::exp(v); }, [](T, T y) { return y; });
}

template <typename T>
Tensor<T> abs(const Tensor<T>& x) {
  return unary<T>(
      x, "abs", [](T v) { return std::abs(v); },
      [](T v, T) { return v > 0 ? T(1) : (v < 0 ? T(-1) : T(0)); });
}

template <typename T>
Tensor<T> sum(const Tensor<T>& x) {
  T acc = 0;
  for (T v : x.values()) acc += v;
  return make_result<T>({1}, {acc}, {x}, "sum", [](Node<T>& self) {
    auto& g = self.parents[0]->grad_buffer();
    const T up = self.grad[0];
    for (auto& v : g) v += up;
  });
}

template <typename T>
Tensor<T> mean(const Tensor<T>& x) {
  T acc = 0;
  for (T v : x.values()) acc += v;
  const T n = static_cast<T>(x.numel());
  return make_result<T>({1}, {acc / n}, {x}, "mean", [n](Node<T>& self) {
    auto& g = self.parents[0]->grad_buffer();
    const T up = self.grad[0] / n;
    for (auto& v : g) v += up;
  });
}

template <typename T>
Tensor<T> l1_loss(const Tensor<T>& a, const Tensor<T>& b) {
  require_same_shape(a, b, "l1_loss");
  const auto& x = a.values();
  const auto& y = b.values();
  T acc = 0;
  for (std::size_t i = 0; i < x.size(); ++i) acc += std::abs(x[i] - y[i]);
  const T n = static_cast<T>(x.size());
  return make_result<T>({1}, {acc / n}, {a, b}, "l1_loss", [n](Node<T>& self) {
    auto& pa = *self.parents[0];
    auto& pb = *self.parents[1];
    const T up = self.grad[0] / n;
    for (std::size_t i = 0; i < pa.data.size(); ++i) {
      const T d = pa.data[i] - pb.data[i];
      const T s = d > 0 ? up : (d < 0 ? -up : T(0));
      if (pa.requires_grad) pa.grad_buffer()[i] += s;
      if (pb.requires_grad) pb.grad_buffer()[i] -= s;
    }
  });
}

template <typename T>
Tensor<T> mse_loss(const Tensor<T>& a, const Tensor<T>& b) {
  require_same_shape(a, b, "mse_loss");
  const auto& x = a.values();
  const auto& y = b.values();
  T acc = 0;
  for (std::size_t i = 0; i < x.size(); ++i) acc += (x[i] - y[i]) * (x[i] - y[i]);
  const T n = static_cast<T>(x.size());
  return make_result<T>({1}, {acc / n}, {a, b}, "mse_loss", [n](Node<T>& self) {
    auto& pa = *self.parents[0];
    auto& pb = *self.parents[1];
    const T up = T(2) * self.grad[0] / n;
    for (std::size_t i = 0; i < pa.data.size(); ++i) {
      const T s = up * (pa.data[i] - pb.data[i]);
      if (pa.requires_grad) pa.grad_buffer()[i] += s;
      if (pb.requires_grad) pb.grad_buffer()[i] -= s;
    }
  });
}

template <typename T>
Tensor<T> reshape(const Tensor<T>& x, const Shape& shape) {
  if (shape_numel(shape) != x.numel()) {
    throw DimensionError("reshape: cannot view " + shape_str(x.shape()) + " as " +
                         shape_str(shape));
  }
  return make_result<T>(shape, x.values(), {x}, "reshape", [](Node<T>& self) {
    auto& g = self.parents[0]->grad_buffer();
    for (std::size_t i = 0; i < g.size(); ++i) g[i] += self.grad[i];
  });
}

template <typename T>
Tensor<T> transpose(const Tensor<T>& x) {
  if (x.rank() != 2) throw DimensionError("transpose: rank-2 input required, got " + shape_str(x.shape()));
  const std::size_t rows = x.dim(0), cols = x.dim(1);
  const auto& in = x.values();
  std::vector<T> out(in.size());
  for (std::size_t r = 0; r < rows; ++r)
    for (std::size_t c = 0; c < cols; ++c) out[c * rows + r] = in[r * cols + c];
  return make_result<T>({cols, rows}, std::move(out), {x}, "transpose",
                        [rows, cols](Node<T>& self) {
                          auto& g = self.parents[0]->grad_buffer();
                          for (std::size_t r = 0; r < rows; ++r)
                            for (std::size_t c = 0; c < cols; ++c)
                              g[r * cols + c] += self.grad[c * rows + r];
                        });
}

template <typename T>
Tensor<T> concat(const std::vector<Tensor<T>>& xs, std::size_t axis) {
  if (xs.empty()) throw DimensionError("concat: no inputs");
  const Shape& ref = xs[0].shape();
  if (axis >= ref.size()) throw DimensionError("concat: axis out of range for " + shape_str(ref));
  std::vector<std::size_t> extents;
  Shape out_shape = ref;
  out_shape[axis] = 0;
  for (const auto& x : xs) {
    Shape s = x.shape();
    if (s.size() != ref.size()) throw DimensionError("concat: rank mismatch " + shape_str(ref) + " vs " + shape_str(s));
    for (std::size_t i = 0; i < s.size(); ++i) {
      if (i != axis && s[i] != ref[i]) {
        throw DimensionError("concat: shape mismatch " + shape_str(ref) + " vs " + shape_str(s));
      }
    }
    extents.push_back(s[axis]);
    out_shape[axis] += s[axis];
  }
  const AxisSplit outer = split_at(out_shape, axis);
  std::vector<T> out(shape_numel(out_shape));
  std::size_t offset = 0;
  for (std::size_t k = 0; k < xs.size(); ++k) {
    const auto& v = xs[k].values();
    const std::size_t block = extents[k] * outer.inner;
    for (std::size_t o = 0; o < outer.outer; ++o) {
      std::copy_n(v.begin() + o * block, block,
                  out.begin() + o * outer.extent * outer.inner + offset);
    }
    offset += block;
  }
  return make_result<T>(out_shape, std::move(out), xs, "concat",
                        [outer, extents](Node<T>& self) {
                          std::size_t offset = 0;
                          for (std::size_t k = 0; k < self.parents.size(); ++k) {
                            const std::size_t block = extents[k] * outer.inner;
                            auto& p = *self.parents[k];
                            if (p.requires_grad) {
                              auto& g = p.grad_buffer();
                              for (std::size_t o = 0; o < outer.outer; ++o) {
                                const T* src = self.grad.data() + o * outer.extent * outer.inner + offset;
                                T* dst = g.data() + o * block;
                                for (std::size_t i = 0; i < block; ++i) dst[i] += src[i];
                              }
                            }
                            offset += block;
                          }
                        });
}

template <typename T>
Tensor<T> slice(const Tensor<T>& x, std::size_t axis, std::size_t start, std::size_t length) {
  if (axis >= x.rank() || length == 0 || start + length > x.dim(axis)) {
    throw DimensionError("slice: [" + std::to_string(start) + ", " + std::to_string(start + length) +
                         ") out of range on axis " + std::to_string(axis) + " of " +
                         shape_str(x.shape()));
  }
  const AxisSplit in = split_at(x.shape(), axis);
  Shape out_shape = x.shape();
  out_shape[axis] = length;
  const std::size_t block = length * in.inner;
  const std::size_t offset = start * in.inner;
  const auto& v = x.values();
  std::vector<T> out(in.outer * block);
  for (std::size_t o = 0; o < in.outer; ++o) {
    std::copy_n(v.begin() + o * in.extent * in.inner + offset, block, out.begin() + o * block);
  }
  return make_result<T>(out_shape, std::move(out), {x}, "slice",
                        [in, block, offset](Node<T>& self) {
                          auto& g = self.parents[0]->grad_buffer();
                          for (std::size_t o = 0; o < in.outer; ++o) {
                            T* dst = g.data() + o * in.extent * in.inner + offset;
                            const T* src = self.grad.data() + o * block;
                            for (std::size_t i = 0; i < block; ++i) dst[i] += src[i];
                          }
                        });
}

template <typename T>
std::vector<Tensor<T>> split(const Tensor<T>& x, std::size_t axis,
                             const std::vector<std::size_t>& sizes) {
  if (axis >= x.rank()) throw DimensionError("split: axis out of range for " + shape_str(x.shape()));
  if (std::accumulate(sizes.begin(), sizes.end(), std::size_t{0}) != x.dim(axis)) {
    throw DimensionError("split: sizes do not cover axis " + std::to_string(axis) + " of " +
                         shape_str(x.shape()));
  }
  std::vector<Tensor<T>> parts;
  std::size_t start = 0;
  for (auto s : sizes) {
    parts.push_back(slice(x, axis, start, s));
    start += s;
  }
  return parts;
}

using kernels::gemm_nn;
using kernels::gemm_nt;
using kernels::gemm_tn;

template <typename T>
Tensor<T> matmul(const Tensor<T>& a, const Tensor<T>& b) {
  if (a.rank() != 2 || b.rank() != 2 || a.dim(1) != b.dim(0)) {
    throw DimensionError("matmul: cannot multiply " + shape_str(a.shape()) + " by " +
                         shape_str(b.shape()));
  }
  const std::size_t m = a.dim(0), k = a.dim(1), n = b.dim(1);
  std::vector<T> out(m * n, T(0));
  gemm_nn(a.values().data(), b.values().data(), out.data(), m, k, n);
  return make_result<T>({m, n}, std::move(out), {a, b}, "matmul", [m, k, n](Node<T>& self) {
    auto& pa = *self.parents[0];
    auto& pb = *self.parents[1];
    if (pa.requires_grad) gemm_nt(self.grad.data(), pb.data.data(), pa.grad_buffer().data(), m, k, n);
    if (pb.requires_grad) gemm_tn(pa.data.data(), self.grad.data(), pb.grad_buffer().data(), m, k, n);
  });
}

template <typename T>
Tensor<T> softmax(const Tensor<T>& x, std::size_t axis) {
  if (axis >= x.rank()) throw DimensionError("softmax: axis out of range for " + shape_str(x.shape()));
  const AxisSplit s = split_at(x.shape(), axis);
  const auto& in = x.values();
  std::vector<T> out(in.size());
  for (std::size_t o = 0; o < s.outer; ++o) {
    for (std::size_t i = 0; i < s.inner; ++i) {
      const std::size_t base = o * s.extent * s.inner + i;
      T mx = in[base];
      for (std::size_t k = 1; k < s.extent; ++k) mx = std::max(mx, in[base + k * s.inner]);
      T total = 0;
      for (std::size_t k = 0; k < s.extent; ++k) {
        const T e = std::exp(in[base + k * s.inner] - mx);
        out[base + k * s.inner] = e;
        total += e;
      }
      for (std::size_t k = 0; k < s.extent; ++k) out[base + k * s.inner] /= total;
    }
  }
  return make_result<T>(x.shape(), std::move(out), {x}, "softmax", [s](Node<T>& self) {
    auto& g = self.parents[0]->grad_buffer();
    for (std::size_t o = 0; o < s.outer; ++o) {
      for (std::size_t i = 0; i < s.inner; ++i) {
        const std::size_t base = o * s.extent * s.inner + i;
        T dot = 0;
        for (std::size_t k = 0; k < s.extent; ++k) {
          dot += self.grad[base + k * s.inner] * self.data[base + k * s.inner];
        }
        for (std::size_t k = 0; k < s.extent; ++k) {
          const std::size_t j = base + k * s.inner;
          g[j] += self.data[j] * (self.grad[j] - dot);
        }
      }
    }
  });
}

template <typename T>
Tensor<T> normalize_rows(const Tensor<T>& x, T eps) {
  if (x.rank() != 2) throw DimensionError("normalize_rows: rank-2 input required, got " + shape_str(x.shape()));
  const std::size_t rows = x.dim(0), cols = x.dim(1);
  const auto& in = x.values();
  std::vector<T> out(in.size());
  std::vector<T> norms(rows);
  for (std::size_t r = 0; r < rows; ++r) {
    T ss = 0;
    for (std::size_t c = 0; c < cols; ++c) ss += in[r * cols + c] * in[r * cols + c];
    norms[r] = std::max(std::sqrt(ss), eps);
    for (std::size_t c = 0; c < cols; ++c) out[r * cols + c] = in[r * cols + c] / norms[r];
  }
  return make_result<T>(x.shape(), std::move(out), {x}, "normalize_rows",
                        [rows, cols, norms, eps](Node<T>& self) {
                          auto& g = self.parents[0]->grad_buffer();
                          for (std::size_t r = 0; r < rows; ++r) {
                            const T* y = self.data.data() + r * cols;
                            const T* dy = self.grad.data() + r * cols;
                            T* dx = g.data() + r * cols;
                            if (norms[r] <= eps) {
                              for (std::size_t c = 0; c < cols; ++c) dx[c] += dy[c] / eps;
                              continue;
                            }
                            T dot = 0;
                            for (std::size_t c = 0; c < cols; ++c) dot += y[c] * dy[c];
                            for (std::size_t c = 0; c < cols; ++c) dx[c] += (dy[c] - y[c] * dot) / norms[r];
                          }
                        });
}

template <typename T>
Tensor<T> layer_norm(const Tensor<T>& x, const Tensor<T>& gain, const Tensor<T>& bias, T eps) {
  const std::size_t channels = x.dim(0);
  if (gain.numel() != channels || bias.numel() != channels) {
    throw DimensionError("layer_norm: affine parameters " + shape_str(gain.shape()) + "/" +
                         shape_str(bias.shape()) + " do not match " + shape_str(x.shape()));
  }
  const std::size_t positions = x.numel() / channels;
  const auto& in = x.values();
  const auto& w = gain.values();
  const auto& b = bias.values();
  std::vector<T> xhat(in.size());
  std::vector<T> inv_std(positions);
  std::vector<T> out(in.size());
  for (std::size_t p = 0; p < positions; ++p) {
    T mu = 0;
    for (std::size_t c = 0; c < channels; ++c) mu += in[c * positions + p];
    mu /= static_cast<T>(channels);
    T var = 0;
    for (std::size_t c = 0; c < channels; ++c) {
      const T d = in[c * positions + p] - mu;
      var += d * d;
    }
    var /= static_cast<T>(channels);
    inv_std[p] = T(1) / std::sqrt(var + eps);
    for (std::size_t c = 0; c < channels; ++c) {
      const std::size_t i = c * positions + p;
      xhat[i] = (in[i] - mu) * inv_std[p];
      out[i] = xhat[i] * w[c] + b[c];
    }
  }
  return make_result<T>(
      x.shape(), std::move(out), {x, gain, bias}, "layer_norm",
      [channels, positions, xhat = std::move(xhat), inv_std = std::move(inv_std)](Node<T>& self) {
        auto& px = *self.parents[0];
        auto& pw = *self.parents[1];
        auto& pb = *self.parents[2];
        const auto& dy = self.grad;
        if (pw.requires_grad || pb.requires_grad) {
          for (std::size_t c = 0; c < channels; ++c) {
            T gw = 0, gb = 0;
            for (std::size_t p = 0; p < positions; ++p) {
              const std::size_t i = c * positions + p;
              gw += dy[i] * xhat[i];
              gb += dy[i];
            }
            if (pw.requires_grad) pw.grad_buffer()[c] += gw;
            if (pb.requires_grad) pb.grad_buffer()[c] += gb;
          }
        }
        if (!px.requires_grad) return;
        auto& g = px.grad_buffer();
        const T n = static_cast<T>(channels);
        for (std::size_t p = 0; p < positions; ++p) {
          T mean_d = 0, mean_dx = 0;
          for (std::size_t c = 0; c < channels; ++c) {
            const std::size_t i = c * positions + p;
            const T d = dy[i] * pw.data[c];
            mean_d += d;
            mean_dx += d * xhat[i];
          }
          mean_d /= n;
          mean_dx /= n;
          for (std::size_t c = 0; c < channels; ++c) {
            const std::size_t i = c * positions + p;
            const T d = dy[i] * pw.data[c];
            g[i] += inv_std[p] * (d - mean_d - xhat[i] * mean_dx);
          }
        }
      });
}

template <typename T>
Tensor<T> space_to_depth(const Tensor<T>& x) {
  if (x.rank() != 3 || x.dim(1) % 2 || x.dim(2) % 2) {
    throw DimensionError("space_to_depth: need [C, H, W] with even H, W, got " + shape_str(x.shape()));
  }
  const std::size_t c = x.dim(0), h = x.dim(1), w = x.dim(2);
  const std::size_t oh = h / 2, ow = w / 2;
  // index map out -> in, shared by forward and backward
  std::vector<std::size_t> src(x.numel());
  for (std::size_t ch = 0; ch < c; ++ch)
    for (std::size_t dy = 0; dy < 2; ++dy)
      for (std::size_t dx = 0; dx < 2; ++dx)
        for (std::size_t y = 0; y < oh; ++y)
          for (std::size_t xx = 0; xx < ow; ++xx) {
            const std::size_t oc = ch * 4 + dy * 2 + dx;
            src[(oc * oh + y) * ow + xx] = (ch * h + 2 * y + dy) * w + 2 * xx + dx;
          }
  const auto& in = x.values();
  std::vector<T> out(in.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = in[src[i]];
  return make_result<T>({4 * c, oh, ow}, std::move(out), {x}, "space_to_depth",
                        [src = std::move(src)](Node<T>& self) {
                          auto& g = self.parents[0]->grad_buffer();
                          for (std::size_t i = 0; i < src.size(); ++i) g[src[i]] += self.grad[i];
                        });
}

template <typename T>
Tensor<T> depth_to_space(const Tensor<T>& x) {
  if (x.rank() != 3 || x.dim(0) % 4) {
    throw DimensionError("depth_to_space: need [4C, H, W], got " + shape_str(x.shape()));
  }
  const std::size_t c = x.dim(0) / 4, h = x.dim(1), w = x.dim(2);
  const std::size_t oh = h * 2, ow = w * 2;
  std::vector<std::size_t> src(x.numel());
  for (std::size_t ch = 0; ch < c; ++ch)
    for (std::size_t y = 0; y < oh; ++y)
      for (std::size_t xx = 0; xx < ow; ++xx) {
        const std::size_t ic = ch * 4 + (y % 2) * 2 + (xx % 2);
        src[(ch * oh + y) * ow + xx] = (ic * h + y / 2) * w + xx / 2;
      }
  const auto& in = x.values();
  std::vector<T> out(in.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = in[src[i]];
  return make_result<T>({c, oh, ow}, std::move(out), {x}, "depth_to_space",
                        [src = std::move(src)](Node<T>& self) {
                          auto& g = self.parents[0]->grad_buffer();
                          for (std::size_t i = 0; i < src.size(); ++i) g[src[i]] += self.grad[i];
                        });
}

#define MOFE_INSTANTIATE_OPS(T)                                                              \
  template Tensor<T> add(const Tensor<T>&, const Tensor<T>&);                                \
  template Tensor<T> sub(const Tensor<T>&, const Tensor<T>&);                                \
  template Tensor<T> mul(const Tensor<T>&, const Tensor<T>&);                                \
  template Tensor<T> scale(const Tensor<T>&, T);                                             \
  template Tensor<T> add_scalar(const Tensor<T>&, T);                                        \
  template Tensor<T> mul_scalar(const Tensor<T>&, const Tensor<T>&);                         \
  template Tensor<T> add_n(const std::vector<Tensor<T>>&);                                   \
  template Tensor<T> gelu(const Tensor<T>&);                                                 \
  template Tensor<T> sigmoid(const Tensor<T>&);                                              \
  template Tensor<T> exp(const Tensor<T>&);                                                  \
  template Tensor<T> abs(const Tensor<T>&);                                                  \
  template Tensor<T> sum(const Tensor<T>&);                                                  \
  template Tensor<T> mean(const Tensor<T>&);                                                 \
  template Tensor<T> l1_loss(const Tensor<T>&, const Tensor<T>&);                            \
  template Tensor<T> mse_loss(const Tensor<T>&, const Tensor<T>&);                           \
  template Tensor<T> reshape(const Tensor<T>&, const Shape&);                                \
  template Tensor<T> transpose(const Tensor<T>&);                                            \
  template Tensor<T> concat(const std::vector<Tensor<T>>&, std::size_t);                     \
  template Tensor<T> slice(const Tensor<T>&, std::size_t, std::size_t, std::size_t);         \
  template std::vector<Tensor<T>> split(const Tensor<T>&, std::size_t,                       \
                                        const std::vector<std::size_t>&);                    \
  template Tensor<T> matmul(const Tensor<T>&, const Tensor<T>&);                             \
  template Tensor<T> softmax(const Tensor<T>&, std::size_t);                                 \
  template Tensor<T> normalize_rows(const Tensor<T>&, T);                                    \
  template Tensor<T> layer_norm(const Tensor<T>&, const Tensor<T>&, const Tensor<T>&, T);    \
  template Tensor<T> space_to_depth(const Tensor<T>&);                                       \
  template Tensor<T> depth_to_space(const Tensor<T>&);

MOFE_INSTANTIATE_OPS(float)
MOFE_INSTANTIATE_OPS(double)

}  // namespace mofe
