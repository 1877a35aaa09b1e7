// Copyright 2026 The mofe-restore Authors
// SPDX-License-Identifier: Apache-2.0

#include <cmath>
#include <numbers>

#include <gtest/gtest.h>

#include "mofe/errors.hpp"
#include "mofe/losses.hpp"
#include "mofe/ops.hpp"
#include "mofe/random.hpp"

using namespace mofe;
using Td = Tensor<double>;

namespace {

Td random(const Shape& s, std::uint64_t seed, double lo = 0, double hi = 1) {
  Rng rng(seed);
  std::vector<double> v(shape_numel(s));
  for (auto& x : v) x = rng.uniform(lo, hi);
  return Td::from_data(s, v);
}

Image random_image(std::size_t c, std::size_t h, std::size_t w, std::uint64_t seed) {
  Rng rng(seed);
  Image img(c, h, w);
  for (auto& v : img.data) v = static_cast<float>(rng.uniform());
  return img;
}

// l1 + alpha * mean(|Re| + |Im|) of the transform of the difference.
double rec_oracle(const Td& p, const Td& t, double alpha) {
  const std::size_t c = p.dim(0), h = p.dim(1), w = p.dim(2);
  double l1 = 0, freq = 0;
  for (std::size_t i = 0; i < p.numel(); ++i) l1 += std::abs(p.at(i) - t.at(i));
  for (std::size_t ch = 0; ch < c; ++ch)
    for (std::size_t u = 0; u < h; ++u)
      for (std::size_t v = 0; v < w; ++v) {
        double re = 0, im = 0;
        for (std::size_t y = 0; y < h; ++y)
          for (std::size_t x = 0; x < w; ++x) {
            const std::size_t k = (ch * h + y) * w + x;
            const double d = p.at(k) - t.at(k);
            const double ang = -2 * std::numbers::pi * (double(u * y) / h + double(v * x) / w);
            re += d * std::cos(ang);
            im += d * std::sin(ang);
          }
        freq += std::abs(re) + std::abs(im);
      }
  const double n = static_cast<double>(p.numel());
  return l1 / n + alpha * freq / n;
}

// Direct 2D-window SSIM over the valid region.
double ssim_oracle(const Image& a, const Image& b) {
  const int r = 5;
  double g[11][11], gs = 0;
  for (int y = -r; y <= r; ++y)
    for (int x = -r; x <= r; ++x) gs += g[y + r][x + r] = std::exp(-(x * x + y * y) / (2 * 1.5 * 1.5));
  for (auto& row : g)
    for (auto& v : row) v /= gs;
  const double c1 = 0.01 * 0.01, c2 = 0.03 * 0.03;
  double total = 0;
  for (std::size_t c = 0; c < a.channels; ++c) {
    double acc = 0;
    std::size_t n = 0;
    for (std::size_t y = r; y + r < a.height; ++y)
      for (std::size_t x = r; x + r < a.width; ++x) {
        double ma = 0, mb = 0, saa = 0, sbb = 0, sab = 0;
        for (int dy = -r; dy <= r; ++dy)
          for (int dx = -r; dx <= r; ++dx) {
            const double wv = g[dy + r][dx + r];
            const double va = a.at(c, y + dy, x + dx), vb = b.at(c, y + dy, x + dx);
            ma += wv * va;
            mb += wv * vb;
            saa += wv * va * va;
            sbb += wv * vb * vb;
            sab += wv * va * vb;
          }
        const double va = saa - ma * ma, vb = sbb - mb * mb, cov = sab - ma * mb;
        acc += ((2 * ma * mb + c1) * (2 * cov + c2)) / ((ma * ma + mb * mb + c1) * (va + vb + c2));
        ++n;
      }
    total += acc / n;
  }
  return total / a.channels;
}

}  // namespace

TEST(RecLoss, ZeroForIdenticalImages) {
  auto p = random({3, 6, 6}, 1);
  EXPECT_EQ(rec_loss(p, p.clone(), 0.1).item(), 0.0);
}

TEST(RecLoss, ConstantOffsetWithoutFrequencyTerm) {
  auto t = random({3, 4, 4}, 2);
  auto p = add_scalar(t, 0.1);
  EXPECT_NEAR(rec_loss(p, t, 0.0).item(), 0.1, 1e-12);
  // Constant offset d: only the DC term is nonzero, |DC| = HW * d.
  EXPECT_NEAR(rec_loss(p, t, 1.0).item(), 0.1 + 0.1, 1e-12);
}

TEST(RecLoss, MatchesScalarOracle) {
  auto p = random({3, 6, 5}, 3), t = random({3, 6, 5}, 4);
  for (double alpha : {0.0, 0.1, 0.7}) {
    EXPECT_NEAR(rec_loss(p, t, alpha).item(), rec_oracle(p, t, alpha), 1e-10);
  }
  Tensor<float> pf = Tensor<float>::from_data(p.shape(), std::vector<float>(p.values().begin(), p.values().end()));
  Tensor<float> tf = Tensor<float>::from_data(t.shape(), std::vector<float>(t.values().begin(), t.values().end()));
  EXPECT_NEAR(rec_loss(pf, tf, 0.1).item(), rec_oracle(p, t, 0.1), 1e-5);
}

TEST(RecLoss, BatchIsMeanOfSamples) {
  auto p1 = random({3, 4, 4}, 5), t1 = random({3, 4, 4}, 6);
  auto p2 = random({3, 4, 4}, 7), t2 = random({3, 4, 4}, 8);
  const double both = rec_loss<double>({p1, p2}, {t1, t2}, 0.1).item();
  EXPECT_NEAR(both, 0.5 * (rec_loss(p1, t1, 0.1).item() + rec_loss(p2, t2, 0.1).item()), 1e-12);
  EXPECT_THROW(rec_loss(p1, random({3, 4, 2}, 9), 0.1), DimensionError);
}

TEST(MglLoss, SingleSampleIsZero) {
  Matrix e{1, 4, {1, 2, 3, 4}};
  EXPECT_EQ(mgl_loss(e, Td::from_data({1, 3}, {0.2, 0.4, 0.9})).item(), 0.0);
}

TEST(MglLoss, IdentityAgainstAllOnes) {
  // Orthogonal embeddings (Sim = I) with identical router rows (Sim = 1).
  Matrix e{2, 2, {1, 0, 0, 1}};
  auto s = Td::from_data({2, 2}, {0.5, 0.5, 0.5, 0.5});
  EXPECT_NEAR(mgl_loss(e, s).item(), 0.5, 1e-12);
}

TEST(MglLoss, ZeroWhenSimilaritiesAgree) {
  Matrix e{2, 2, {0.3, 0, 0, 2}};
  auto s = Td::from_data({2, 3}, {0.9, 0, 0, 0, 0.2, 0.7});
  EXPECT_NEAR(mgl_loss(e, s).item(), 0.0, 1e-12);
}

TEST(MglLoss, PermutationInvariantAndBounded) {
  Rng rng(10);
  Matrix e{4, 6, {}};
  for (int i = 0; i < 24; ++i) e.data.push_back(rng.uniform(-1, 1));
  auto s = random({4, 3}, 11, 0.01, 1);
  const double base = mgl_loss(e, s).item();
  EXPECT_GE(base, 0.0);
  EXPECT_LE(base, 2.0);
  const std::size_t perm[4] = {2, 0, 3, 1};
  Matrix ep{4, 6, {}};
  std::vector<double> sp;
  for (std::size_t i : perm) {
    for (std::size_t c = 0; c < 6; ++c) ep.data.push_back(e(i, c));
    for (std::size_t c = 0; c < 3; ++c) sp.push_back(s.at(i * 3 + c));
  }
  EXPECT_NEAR(mgl_loss(ep, Td::from_data({4, 3}, sp)).item(), base, 1e-12);
}

TEST(MglLoss, GradientsReachOnlyRouterWeights) {
  Matrix e{3, 2, {1, 0, 0, 1, 1, 1}};
  auto s = random({3, 2}, 12, 0.1, 1);
  s.set_requires_grad(true);
  mgl_loss(e, s).backward();
  EXPECT_TRUE(s.has_grad());
  EXPECT_THROW(mgl_loss(Matrix{2, 2, {1, 0, 0, 1}}, random({3, 2}, 13)), DimensionError);
}

TEST(CosineSimilarity, ZeroRowIsContractError) {
  EXPECT_THROW(cosine_similarity(Td::from_data({2, 2}, {1, 1, 0, 0})), ContractError);
}

TEST(TotalLoss, LinearCombination) {
  LossConfig cfg;
  cfg.lambda_mgl = 0.1;
  EXPECT_NEAR(total_loss(Td::scalar(1.0), Td::scalar(0.5), cfg).item(), 1.05, 1e-15);
  cfg.lambda_mgl = -1;
  EXPECT_THROW(cfg.validate(), ConfigError);
}

TEST(Psnr, CapAndHandValue) {
  auto a = random_image(3, 8, 8, 14);
  EXPECT_EQ(psnr(a, a), kPsnrCapDb);
  Image z(3, 8, 8, 0.2f), o(3, 8, 8, 0.3f);
  EXPECT_NEAR(psnr(z, o), 20.0, 1e-4);
  auto b = random_image(3, 8, 8, 15);
  EXPECT_EQ(psnr(a, b), psnr(b, a));
  EXPECT_THROW(psnr(a, Image(3, 8, 4)), DimensionError);
}

TEST(Ssim, IdentityOracleAndSymmetry) {
  auto a = random_image(3, 24, 20, 16);
  EXPECT_NEAR(ssim(a, a), 1.0, 1e-12);
  auto b = a;
  Rng rng(17);
  for (auto& v : b.data) v = std::clamp(v + static_cast<float>(rng.uniform(-0.1, 0.1)), 0.0f, 1.0f);
  EXPECT_NEAR(ssim(a, b), ssim_oracle(a, b), 1e-6);
  EXPECT_NEAR(ssim(a, b), ssim(b, a), 1e-12);
  EXPECT_LT(ssim(a, b), 1.0);
}

TEST(Ssim, InvertedImageIsNegative) {
  auto a = random_image(1, 16, 16, 18);
  auto inv = a;
  for (auto& v : inv.data) v = 1.0f - v;
  EXPECT_LT(ssim(a, inv), 0.0);
}

TEST(Ssim, TooSmallImagesRejected) {
  EXPECT_THROW(ssim(Image(3, 10, 32), Image(3, 10, 32)), ContractError);
}
