// Copyright 2026 The mofe-restore Authors
// SPDX-License-Identifier: Apache-2.0

// Differentiable operations over Tensor<T>. Every op here has a backward
// rule. Broadcasting is limited to a one-element tensor against a full one
// and the per-channel bias inside conv2d.

#pragma once

#include <cstddef>
#include <vector>

#include "mofe/tensor.hpp"

namespace mofe {

// Elementwise, identical shapes.
template <typename T> Tensor<T> add(const Tensor<T>& a, const Tensor<T>& b);
template <typename T> Tensor<T> sub(const Tensor<T>& a, const Tensor<T>& b);
template <typename T> Tensor<T> mul(const Tensor<T>& a, const Tensor<T>& b);
template <typename T> Tensor<T> scale(const Tensor<T>& x, T factor);
template <typename T> Tensor<T> add_scalar(const Tensor<T>& x, T offset);
// x * s where s holds exactly one element.
template <typename T> Tensor<T> mul_scalar(const Tensor<T>& x, const Tensor<T>& s);
template <typename T> Tensor<T> add_n(const std::vector<Tensor<T>>& xs);

template <typename T> Tensor<T> gelu(const Tensor<T>& x);  // erf form
template <typename T> Tensor<T> sigmoid(const Tensor<T>& x);
template <typename T> Tensor<T> exp(const Tensor<T>& x);
template <typename T> Tensor<T> abs(const Tensor<T>& x);

// Reductions to a one-element tensor.
template <typename T> Tensor<T> sum(const Tensor<T>& x);
template <typename T> Tensor<T> mean(const Tensor<T>& x);
template <typename T> Tensor<T> l1_loss(const Tensor<T>& a, const Tensor<T>& b);
template <typename T> Tensor<T> mse_loss(const Tensor<T>& a, const Tensor<T>& b);

// Shape plumbing.
template <typename T> Tensor<T> reshape(const Tensor<T>& x, const Shape& shape);
template <typename T> Tensor<T> transpose(const Tensor<T>& x);  // rank 2
template <typename T> Tensor<T> concat(const std::vector<Tensor<T>>& xs, std::size_t axis);
template <typename T>
Tensor<T> slice(const Tensor<T>& x, std::size_t axis, std::size_t start, std::size_t length);
template <typename T>
std::vector<Tensor<T>> split(const Tensor<T>& x, std::size_t axis,
                             const std::vector<std::size_t>& sizes);

template <typename T> Tensor<T> matmul(const Tensor<T>& a, const Tensor<T>& b);
template <typename T> Tensor<T> softmax(const Tensor<T>& x, std::size_t axis);
// Rows of a [R x D] matrix divided by max(||row||, eps).
template <typename T> Tensor<T> normalize_rows(const Tensor<T>& x, T eps = T(1e-12));

// Normalizes over axis 0 independently at every trailing position, then
// applies per-channel gain and bias. x is [C, ...], gain and bias are [C].
template <typename T>
Tensor<T> layer_norm(const Tensor<T>& x, const Tensor<T>& gain, const Tensor<T>& bias,
                     T eps = T(1e-5));

// Cross-correlation with zero "same" padding. x is [Cin, H, W], weight is
// [Cout, Cin / groups, k, k] with k in {1, 3}; groups is 1 or Cin. bias is
// [Cout] or undefined.
template <typename T>
Tensor<T> conv2d(const Tensor<T>& x, const Tensor<T>& weight, const Tensor<T>& bias,
                 std::size_t groups = 1);

// Pixel unshuffle / shuffle by a factor of two: [C, H, W] <-> [4C, H/2, W/2].
// Output channel 4c + 2*dy + dx holds input channel c at offset (dy, dx).
template <typename T> Tensor<T> space_to_depth(const Tensor<T>& x);
template <typename T> Tensor<T> depth_to_space(const Tensor<T>& x);

}  // namespace mofe
