// Copyright 2026 The mofe-restore Authors
// SPDX-License-Identifier: Apache-2.0

#include "mofe/losses.hpp"

#include <array>
#include <cmath>
#include <string>

#include "mofe/errors.hpp"
#include "mofe/frequency.hpp"
#include "mofe/ops.hpp"

namespace mofe {

void LossConfig::validate() const {
  if (!(lambda_mgl >= 0)) throw ConfigError("lambda_mgl must be >= 0");
  if (!(alpha_freq >= 0)) throw ConfigError("alpha_freq must be >= 0");
}

template <typename T>
Tensor<T> rec_loss(const Tensor<T>& pred, const Tensor<T>& target, double alpha_freq) {
  if (pred.shape() != target.shape()) {
    throw DimensionError("rec_loss: prediction " + shape_str(pred.shape()) + " vs target " +
                         shape_str(target.shape()));
  }
  auto spatial = l1_loss(pred, target);
  if (alpha_freq == 0.0) return spatial;
  // The DFT is linear, so transforming the difference gives dRe and dIm.
  // Their stacked mean is half of mean(|dRe| + |dIm|).
  auto spectrum = dft2_stacked(sub(pred, target));
  auto freq = scale(mean(abs(spectrum)), static_cast<T>(2.0 * alpha_freq));
  return add(spatial, freq);
}

template <typename T>
Tensor<T> rec_loss(const std::vector<Tensor<T>>& preds, const std::vector<Tensor<T>>& targets,
                   double alpha_freq) {
  if (preds.empty() || preds.size() != targets.size()) {
    throw DimensionError("rec_loss: batch sizes " + std::to_string(preds.size()) + " and " +
                         std::to_string(targets.size()));
  }
  std::vector<Tensor<T>> terms;
  for (std::size_t i = 0; i < preds.size(); ++i) terms.push_back(rec_loss(preds[i], targets[i], alpha_freq));
  auto total = terms.size() == 1 ? terms[0] : add_n(terms);
  return scale(total, T(1) / static_cast<T>(preds.size()));
}

template <typename T>
Tensor<T> cosine_similarity(const Tensor<T>& rows) {
  if (rows.rank() != 2) throw DimensionError("cosine_similarity: expected [B x N], got " + shape_str(rows.shape()));
  const auto& v = rows.values();
  for (std::size_t r = 0; r < rows.dim(0); ++r) {
    bool zero = true;
    for (std::size_t c = 0; c < rows.dim(1) && zero; ++c) zero = v[r * rows.dim(1) + c] == T(0);
    if (zero) throw ContractError("cosine_similarity: row " + std::to_string(r) + " is zero");
  }
  auto n = normalize_rows(rows);
  // pin the diagonal to exactly 1; its derivative is zero anyway
  const std::size_t b = rows.dim(0);
  std::vector<T> off(b * b, T(1)), eye(b * b, T(0));
  for (std::size_t i = 0; i < b; ++i) {
    off[i * b + i] = T(0);
    eye[i * b + i] = T(1);
  }
  return add(mul(matmul(n, transpose(n)), Tensor<T>::from_data({b, b}, std::move(off))),
             Tensor<T>::from_data({b, b}, std::move(eye)));
}

template <typename T>
Tensor<T> mgl_loss(const Matrix& e_answer, const Tensor<T>& s_batch) {
  if (s_batch.rank() != 2 || s_batch.dim(0) != e_answer.rows || e_answer.rows == 0) {
    throw DimensionError("mgl_loss: router batch " + shape_str(s_batch.shape()) + " vs " +
                         std::to_string(e_answer.rows) + " embeddings");
  }
  const Matrix sim_e = pairwise_cosine(e_answer);
  auto target = Tensor<T>::from_data({sim_e.rows, sim_e.cols},
                                     std::vector<T>(sim_e.data.begin(), sim_e.data.end()));
  return l1_loss(cosine_similarity(s_batch), target);
}

template <typename T>
Tensor<T> total_loss(const Tensor<T>& rec, const Tensor<T>& mgl, const LossConfig& cfg) {
  return add(rec, scale(mgl, static_cast<T>(cfg.lambda_mgl)));
}

double psnr(const Image& a, const Image& b) {
  if (!a.same_shape(b)) throw DimensionError("psnr: image shapes differ");
  double se = 0;
  for (std::size_t i = 0; i < a.data.size(); ++i) {
    const double d = static_cast<double>(a.data[i]) - b.data[i];
    se += d * d;
  }
  const double mse = se / static_cast<double>(a.data.size());
  if (mse == 0.0) return kPsnrCapDb;
  return 10.0 * std::log10(1.0 / mse);
}

namespace {

constexpr std::size_t kWindow = 11;

std::array<double, kWindow> gaussian_taps() {
  std::array<double, kWindow> g{};
  double total = 0;
  for (std::size_t i = 0; i < kWindow; ++i) {
    const double x = static_cast<double>(i) - 5.0;
    g[i] = std::exp(-x * x / (2.0 * 1.5 * 1.5));
    total += g[i];
  }
  for (auto& v : g) v /= total;
  return g;
}

// Separable valid-region filter of one plane.
std::vector<double> filter_valid(const std::vector<double>& plane, std::size_t h, std::size_t w,
                                 const std::array<double, kWindow>& g) {
  const std::size_t oh = h - kWindow + 1, ow = w - kWindow + 1;
  std::vector<double> rows(h * ow);
  for (std::size_t y = 0; y < h; ++y)
    for (std::size_t x = 0; x < ow; ++x) {
      double acc = 0;
      for (std::size_t k = 0; k < kWindow; ++k) acc += g[k] * plane[y * w + x + k];
      rows[y * ow + x] = acc;
    }
  std::vector<double> out(oh * ow);
  for (std::size_t y = 0; y < oh; ++y)
    for (std::size_t x = 0; x < ow; ++x) {
      double acc = 0;
      for (std::size_t k = 0; k < kWindow; ++k) acc += g[k] * rows[(y + k) * ow + x];
      out[y * ow + x] = acc;
    }
  return out;
}

}  // namespace

double ssim(const Image& a, const Image& b) {
  if (!a.same_shape(b)) throw DimensionError("ssim: image shapes differ");
  if (a.height < kWindow || a.width < kWindow) {
    throw ContractError("ssim: image " + std::to_string(a.height) + "x" + std::to_string(a.width) +
                        " is smaller than the 11x11 window");
  }
  constexpr double c1 = (0.01 * 1.0) * (0.01 * 1.0);
  constexpr double c2 = (0.03 * 1.0) * (0.03 * 1.0);
  const auto g = gaussian_taps();
  const std::size_t h = a.height, w = a.width, plane = h * w;
  double total = 0;
  for (std::size_t c = 0; c < a.channels; ++c) {
    std::vector<double> x(plane), y(plane), xx(plane), yy(plane), xy(plane);
    for (std::size_t i = 0; i < plane; ++i) {
      x[i] = a.data[c * plane + i];
      y[i] = b.data[c * plane + i];
      xx[i] = x[i] * x[i];
      yy[i] = y[i] * y[i];
      xy[i] = x[i] * y[i];
    }
    const auto mx = filter_valid(x, h, w, g), my = filter_valid(y, h, w, g);
    const auto sxx = filter_valid(xx, h, w, g), syy = filter_valid(yy, h, w, g), sxy = filter_valid(xy, h, w, g);
    double acc = 0;
    for (std::size_t i = 0; i < mx.size(); ++i) {
      const double vx = sxx[i] - mx[i] * mx[i];
      const double vy = syy[i] - my[i] * my[i];
      const double cxy = sxy[i] - mx[i] * my[i];
      acc += ((2 * mx[i] * my[i] + c1) * (2 * cxy + c2)) /
             ((mx[i] * mx[i] + my[i] * my[i] + c1) * (vx + vy + c2));
    }
    total += acc / static_cast<double>(mx.size());
  }
  return total / static_cast<double>(a.channels);
}

#define MOFE_INSTANTIATE_LOSSES(T)                                                          \
  template Tensor<T> rec_loss(const Tensor<T>&, const Tensor<T>&, double);                  \
  template Tensor<T> rec_loss(const std::vector<Tensor<T>>&, const std::vector<Tensor<T>>&, \
                              double);                                                      \
  template Tensor<T> cosine_similarity(const Tensor<T>&);                                   \
  template Tensor<T> mgl_loss(const Matrix&, const Tensor<T>&);                             \
  template Tensor<T> total_loss(const Tensor<T>&, const Tensor<T>&, const LossConfig&);

MOFE_INSTANTIATE_LOSSES(float)
MOFE_INSTANTIATE_LOSSES(double)

}  // namespace mofe
