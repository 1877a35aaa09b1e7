// Copyright 2026 The mofe-restore Authors
// SPDX-License-Identifier: Apache-2.0

// Single-level orthonormal Haar DWT, unnormalized 2D DFT and half-pixel
// bilinear resampling. All three are differentiable.
//
// Haar convention, for every disjoint 2x2 block [[a, b], [c, d]]:
//   ll = (a + b + c + d) / 2     hl = (a - b + c - d) / 2
//   lh = (a + b - c - d) / 2     hh = (a - b - c + d) / 2

#pragma once

#include <cstddef>

#include "mofe/tensor.hpp"

namespace mofe {

template <typename T>
struct SubbandSet {
  Tensor<T> ll, lh, hl, hh;  // each [C, H/2, W/2]
  Shape source_shape;        // [C, H, W]
};

// [C, H, W] -> [4C, H/2, W/2] holding LL, LH, HL, HH as consecutive groups
// of C channels. The high-frequency part is channels [C, 4C).
template <typename T> Tensor<T> dwt_haar_stacked(const Tensor<T>& x);
template <typename T> Tensor<T> idwt_haar_stacked(const Tensor<T>& stacked);

template <typename T> SubbandSet<T> dwt_haar(const Tensor<T>& x);
template <typename T> Tensor<T> idwt_haar(const SubbandSet<T>& s);

template <typename T>
struct SpectrumPair {
  Tensor<T> real, imag;  // each [C, H, W]
};

// X[u, v] = sum_{h, w} x[h, w] exp(-2 pi i (u h / H + v w / W)) per channel.
// Stacked output is [2C, H, W]: real parts then imaginary parts.
template <typename T> Tensor<T> dft2_stacked(const Tensor<T>& x);
template <typename T> SpectrumPair<T> dft2(const Tensor<T>& x);

// align_corners=false: source = (dst + 0.5) * in / out - 0.5, clamped to
// the valid range with edge replication.
template <typename T>
Tensor<T> resize_bilinear(const Tensor<T>& x, std::size_t out_h, std::size_t out_w);

}  // namespace mofe
