// Copyright 2026 The mofe-restore Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <vector>

#include "mofe/guidance.hpp"
#include "mofe/image.hpp"
#include "mofe/tensor.hpp"

namespace mofe {

struct LossConfig {
  double lambda_mgl = 0.1;
  double alpha_freq = 0.1;
  void validate() const;
};

// mean|pred - target| + alpha * mean(|dRe| + |dIm|) over the unnormalized
// 2D DFT of both images.
template <typename T>
Tensor<T> rec_loss(const Tensor<T>& pred, const Tensor<T>& target, double alpha_freq);
// Mean of the per-sample losses.
template <typename T>
Tensor<T> rec_loss(const std::vector<Tensor<T>>& preds, const std::vector<Tensor<T>>& targets,
                   double alpha_freq);

// Cosine similarity of every pair of rows of a [B x N] tensor.
template <typename T> Tensor<T> cosine_similarity(const Tensor<T>& rows);

// mean over the B^2 entries of |Sim(E_answer) - Sim(S)|. The embeddings are
// constants; gradients reach only s_batch [B x N].
template <typename T>
Tensor<T> mgl_loss(const Matrix& e_answer, const Tensor<T>& s_batch);

// rec + lambda * mgl
template <typename T>
Tensor<T> total_loss(const Tensor<T>& rec, const Tensor<T>& mgl, const LossConfig& cfg);

inline constexpr double kPsnrCapDb = 100.0;

// 10 log10(1 / MSE) for images in [0, 1]; kPsnrCapDb when MSE is zero.
double psnr(const Image& a, const Image& b);
// Single-scale SSIM: 11x11 Gaussian window (sigma 1.5) over the valid
// region, K1 = 0.01, K2 = 0.03, dynamic range 1, averaged over channels.
double ssim(const Image& a, const Image& b);

}  // namespace mofe
