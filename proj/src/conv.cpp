// Copyright 2026 The mofe-restore Authors
// SPDX-License-Identifier: Apache-2.0

#include <algorithm>
#include <string>
#include <vector>

#include "mofe/errors.hpp"
#include "mofe/ops.hpp"
#include "kernels.hpp"

namespace mofe {

namespace {

struct ConvGeometry {
  std::size_t cin, cout, h, w, k, groups;
  std::size_t cin_per_group() const { return cin / groups; }
  std::size_t cout_per_group() const { return cout / groups; }
  std::size_t plane() const { return h * w; }
};

// Visits every (output row, input row, column span) touched by tap (ky, kx).
// fn(out_offset, in_offset, length) with offsets into a single H*W plane.
template <typename Fn>
inline void for_each_tap_row(const ConvGeometry& g, std::size_t ky, std::size_t kx, Fn&& fn) {
  const long pad = static_cast<long>(g.k / 2);
  const long dy = static_cast<long>(ky) - pad;
  const long dx = static_cast<long>(kx) - pad;
  const long H = static_cast<long>(g.h), W = static_cast<long>(g.w);
  const long y0 = std::max(0L, -dy), y1 = std::min(H, H - dy);
  const long x0 = std::max(0L, -dx), x1 = std::min(W, W - dx);
  if (x1 <= x0) return;
  for (long y = y0; y < y1; ++y) {
    fn(static_cast<std::size_t>(y * W + x0), static_cast<std::size_t>((y + dy) * W + x0 + dx),
       static_cast<std::size_t>(x1 - x0));
  }
}

// Rows (ci, ky, kx) of the unfolded input, each one H*W plane.
template <typename T>
void im2col(const ConvGeometry& g, const T* in, T* col) {
  const std::size_t plane = g.plane();
  for (std::size_t ci = 0; ci < g.cin; ++ci)
    for (std::size_t ky = 0; ky < g.k; ++ky)
      for (std::size_t kx = 0; kx < g.k; ++kx) {
        T* row = col + ((ci * g.k + ky) * g.k + kx) * plane;
        std::fill(row, row + plane, T(0));
        const T* src = in + ci * plane;
        for_each_tap_row(g, ky, kx, [&](std::size_t o, std::size_t i, std::size_t n) {
          std::copy_n(src + i, n, row + o);
        });
      }
}

template <typename T>
void col2im(const ConvGeometry& g, const T* col, T* din) {
  const std::size_t plane = g.plane();
  for (std::size_t ci = 0; ci < g.cin; ++ci)
    for (std::size_t ky = 0; ky < g.k; ++ky)
      for (std::size_t kx = 0; kx < g.k; ++kx) {
        const T* row = col + ((ci * g.k + ky) * g.k + kx) * plane;
        T* dst = din + ci * plane;
        for_each_tap_row(g, ky, kx, [&](std::size_t o, std::size_t i, std::size_t n) {
          for (std::size_t x = 0; x < n; ++x) dst[i + x] += row[o + x];
        });
      }
}

template <typename T>
void conv_forward(const ConvGeometry& g, const T* in, const T* wt, const T* bias, T* out) {
  const std::size_t plane = g.plane();
  for (std::size_t co = 0; co < g.cout; ++co) std::fill(out + co * plane, out + (co + 1) * plane, bias ? bias[co] : T(0));
  if (g.groups == 1) {
    const std::size_t rows = g.cin * g.k * g.k;
    if (g.k == 1) {
      kernels::gemm_nn(wt, in, out, g.cout, rows, plane);
    } else {
      std::vector<T> col(rows * plane);
      im2col(g, in, col.data());
      kernels::gemm_nn(wt, col.data(), out, g.cout, rows, plane);
    }
    return;
  }
  // depthwise
  for (std::size_t c = 0; c < g.cout; ++c) {
    T* oplane = out + c * plane;
    const T* iplane = in + c * plane;
    const T* wk = wt + c * g.k * g.k;
    for (std::size_t ky = 0; ky < g.k; ++ky)
      for (std::size_t kx = 0; kx < g.k; ++kx) {
        const T wv = wk[ky * g.k + kx];
        for_each_tap_row(g, ky, kx, [&](std::size_t o, std::size_t i, std::size_t n) {
          kernels::axpy(wv, iplane + i, oplane + o, n);
        });
      }
  }
}

template <typename T>
void conv_backward(const ConvGeometry& g, const T* in, const T* wt, const T* dout, T* din,
                   T* dw, T* db) {
  const std::size_t plane = g.plane();
  if (db) {
    for (std::size_t co = 0; co < g.cout; ++co) {
      T acc = 0;
      const T* d = dout + co * plane;
      for (std::size_t i = 0; i < plane; ++i) acc += d[i];
      db[co] += acc;
    }
  }
  if (g.groups == 1) {
    const std::size_t rows = g.cin * g.k * g.k;
    if (g.k == 1) {
      if (dw) kernels::gemm_nt(dout, in, dw, g.cout, rows, plane);
      if (din) kernels::gemm_tn(wt, dout, din, g.cout, rows, plane);
      return;
    }
    std::vector<T> col(rows * plane);
    if (dw) {
      im2col(g, in, col.data());
      kernels::gemm_nt(dout, col.data(), dw, g.cout, rows, plane);
    }
    if (din) {
      std::fill(col.begin(), col.end(), T(0));
      kernels::gemm_tn(wt, dout, col.data(), g.cout, rows, plane);
      col2im(g, col.data(), din);
    }
    return;
  }
  const std::size_t kk = g.k * g.k;
  for (std::size_t c = 0; c < g.cout; ++c) {
    const T* dplane = dout + c * plane;
    const T* iplane = in + c * plane;
    T* diplane = din ? din + c * plane : nullptr;
    const T* wk = wt + c * kk;
    T* dwk = dw ? dw + c * kk : nullptr;
    for (std::size_t ky = 0; ky < g.k; ++ky)
      for (std::size_t kx = 0; kx < g.k; ++kx) {
        const T wv = wk[ky * g.k + kx];
        T acc = 0;
        for_each_tap_row(g, ky, kx, [&](std::size_t o, std::size_t i, std::size_t n) {
          if (dwk) acc += kernels::dot(dplane + o, iplane + i, n);
          if (diplane) kernels::axpy(wv, dplane + o, diplane + i, n);
        });
        if (dwk) dwk[ky * g.k + kx] += acc;
      }
  }
}

}  // namespace

template <typename T>
Tensor<T> conv2d(const Tensor<T>& x, const Tensor<T>& weight, const Tensor<T>& bias,
                 std::size_t groups) {
  if (x.rank() != 3) throw DimensionError("conv2d: input must be [C, H, W], got " + shape_str(x.shape()));
  if (weight.rank() != 4) {
    throw DimensionError("conv2d: weight must be [Cout, Cin/groups, k, k], got " + shape_str(weight.shape()));
  }
  const std::size_t k = weight.dim(2);
  if (weight.dim(3) != k || (k != 1 && k != 3)) {
    throw ConfigError("conv2d: unsupported kernel " + std::to_string(weight.dim(2)) + "x" +
                      std::to_string(weight.dim(3)) + " (1x1 or 3x3 only)");
  }
  const ConvGeometry g{x.dim(0), weight.dim(0), x.dim(1), x.dim(2), k, groups};
  if (groups != 1 && groups != g.cin) {
    throw ConfigError("conv2d: groups must be 1 or Cin (" + std::to_string(g.cin) + "), got " +
                      std::to_string(groups));
  }
  if (groups == g.cin && g.cout != g.cin) {
    throw ConfigError("conv2d: depthwise convolution needs Cout == Cin");
  }
  if (weight.dim(1) != g.cin / groups) {
    throw DimensionError("conv2d: weight " + shape_str(weight.shape()) + " does not match input " +
                         shape_str(x.shape()) + " with groups=" + std::to_string(groups));
  }
  if (bias.defined() && bias.numel() != g.cout) {
    throw DimensionError("conv2d: bias " + shape_str(bias.shape()) + " does not match Cout=" +
                         std::to_string(g.cout));
  }
  std::vector<T> out(g.cout * g.plane());
  conv_forward(g, x.values().data(), weight.values().data(),
               bias.defined() ? bias.values().data() : nullptr, out.data());
  std::vector<Tensor<T>> parents{x, weight};
  if (bias.defined()) parents.push_back(bias);
  return make_result<T>({g.cout, g.h, g.w}, std::move(out), std::move(parents), "conv2d",
                        [g](Node<T>& self) {
                          auto& px = *self.parents[0];
                          auto& pw = *self.parents[1];
                          Node<T>* pb = self.parents.size() > 2 ? self.parents[2].get() : nullptr;
                          conv_backward(g, px.data.data(), pw.data.data(), self.grad.data(),
                                        px.requires_grad ? px.grad_buffer().data() : nullptr,
                                        pw.requires_grad ? pw.grad_buffer().data() : nullptr,
                                        pb && pb->requires_grad ? pb->grad_buffer().data() : nullptr);
                        });
}

template Tensor<float> conv2d(const Tensor<float>&, const Tensor<float>&, const Tensor<float>&,
                              std::size_t);
template Tensor<double> conv2d(const Tensor<double>&, const Tensor<double>&,
                               const Tensor<double>&, std::size_t);

}  // namespace mofe
