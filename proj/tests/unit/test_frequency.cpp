// Copyright 2026 The mofe-restore Authors
// SPDX-License-Identifier: Apache-2.0

#include <cmath>
#include <complex>
#include <numbers>

#include <gtest/gtest.h>

#include "mofe/errors.hpp"
#include "mofe/frequency.hpp"
#include "mofe/random.hpp"

using namespace mofe;
using Td = Tensor<double>;

namespace {

Td random(const Shape& s, std::uint64_t seed) {
  Rng rng(seed);
  std::vector<double> v(shape_numel(s));
  for (auto& x : v) x = rng.uniform(-1, 1);
  return Td::from_data(s, v);
}

double energy(const Td& t) {
  double e = 0;
  for (double v : t.values()) e += v * v;
  return e;
}

// Plain O(N^4) transform of one channel.
std::vector<std::complex<double>> naive_dft(const std::vector<double>& x, std::size_t h, std::size_t w) {
  std::vector<std::complex<double>> out(h * w);
  for (std::size_t u = 0; u < h; ++u)
    for (std::size_t v = 0; v < w; ++v) {
      std::complex<double> acc = 0;
      for (std::size_t y = 0; y < h; ++y)
        for (std::size_t xx = 0; xx < w; ++xx) {
          const double ang = -2 * std::numbers::pi * (double(u * y) / h + double(v * xx) / w);
          acc += x[y * w + xx] * std::polar(1.0, ang);
        }
      out[u * w + v] = acc;
    }
  return out;
}

}  // namespace

TEST(Haar, ConstantImageHasOnlyLowBand) {
  auto s = dwt_haar(Td::full({2, 4, 6}, 0.3));
  for (double v : s.ll.values()) EXPECT_NEAR(v, 0.6, 1e-15);
  for (const auto* band : {&s.lh, &s.hl, &s.hh})
    for (double v : band->values()) EXPECT_EQ(v, 0.0);
}

TEST(Haar, HandExample) {
  auto s = dwt_haar(Td::from_data({1, 2, 2}, {1, 2, 3, 4}));
  EXPECT_DOUBLE_EQ(s.ll.item(), 5.0);
  EXPECT_DOUBLE_EQ(s.hl.item(), -1.0);
  EXPECT_DOUBLE_EQ(s.lh.item(), -2.0);
  EXPECT_DOUBLE_EQ(s.hh.item(), 0.0);
  auto back = idwt_haar(s);
  EXPECT_EQ(back.values(), (std::vector<double>{1, 2, 3, 4}));
}

TEST(Haar, StackedOrderIsLlLhHlHh) {
  auto x = random({2, 4, 4}, 1);
  auto s = dwt_haar(x);
  auto st = dwt_haar_stacked(x);
  ASSERT_EQ(st.shape(), (Shape{8, 2, 2}));
  const Td* bands[4] = {&s.ll, &s.lh, &s.hl, &s.hh};
  for (std::size_t b = 0; b < 4; ++b)
    for (std::size_t i = 0; i < 8; ++i) EXPECT_EQ(st.at(b * 8 + i), bands[b]->at(i));
}

TEST(Haar, RoundTripAndEnergy) {
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    auto x = random({3, 8, 10}, seed + 10);
    auto st = dwt_haar_stacked(x);
    EXPECT_NEAR(energy(st), energy(x), 1e-10);
    auto back = idwt_haar_stacked(st);
    for (std::size_t i = 0; i < x.numel(); ++i) EXPECT_NEAR(back.at(i), x.at(i), 1e-12);
  }
}

TEST(Haar, OddSizesRejected) {
  EXPECT_THROW(dwt_haar(Td::zeros({1, 3, 4})), DimensionError);
  EXPECT_THROW(dwt_haar(Td::zeros({1, 4, 5})), DimensionError);
  EXPECT_THROW(idwt_haar_stacked(Td::zeros({6, 2, 2})), DimensionError);
}

TEST(Dft, ConstantImageIsPureDc) {
  auto s = dft2(Td::full({1, 4, 4}, 2.0));
  EXPECT_NEAR(s.real.at(0), 32.0, 1e-12);
  for (std::size_t i = 1; i < 16; ++i) {
    EXPECT_NEAR(s.real.at(i), 0.0, 1e-12);
    EXPECT_NEAR(s.imag.at(i), 0.0, 1e-12);
  }
}

TEST(Dft, ImpulseHasFlatSpectrum) {
  std::vector<double> v(36, 0.0);
  v[0] = 1.0;
  auto s = dft2(Td::from_data({1, 6, 6}, v));
  for (std::size_t i = 0; i < 36; ++i) {
    EXPECT_NEAR(s.real.at(i), 1.0, 1e-12);
    EXPECT_NEAR(s.imag.at(i), 0.0, 1e-12);
  }
}

TEST(Dft, MatchesNaiveTransform) {
  const std::size_t h = 6, w = 5;
  auto x = random({2, h, w}, 20);
  auto s = dft2(x);
  for (std::size_t c = 0; c < 2; ++c) {
    std::vector<double> ch(x.values().begin() + c * h * w, x.values().begin() + (c + 1) * h * w);
    auto ref = naive_dft(ch, h, w);
    for (std::size_t i = 0; i < h * w; ++i) {
      EXPECT_NEAR(s.real.at(c * h * w + i), ref[i].real(), 1e-10);
      EXPECT_NEAR(s.imag.at(c * h * w + i), ref[i].imag(), 1e-10);
    }
  }
  auto st = dft2_stacked(x);
  ASSERT_EQ(st.shape(), (Shape{4, h, w}));
  for (std::size_t i = 0; i < 2 * h * w; ++i) {
    EXPECT_EQ(st.at(i), s.real.at(i));
    EXPECT_EQ(st.at(2 * h * w + i), s.imag.at(i));
  }
}

TEST(Dft, RealInputIsConjugateSymmetric) {
  const std::size_t h = 8, w = 8;
  auto s = dft2(random({1, h, w}, 21));
  for (std::size_t u = 0; u < h; ++u)
    for (std::size_t v = 0; v < w; ++v) {
      const std::size_t m = ((h - u) % h) * w + (w - v) % w;
      EXPECT_NEAR(s.real.at(u * w + v), s.real.at(m), 1e-10);
      EXPECT_NEAR(s.imag.at(u * w + v), -s.imag.at(m), 1e-10);
    }
}

TEST(Resize, SameSizeCopiesAndConstantStaysConstant) {
  auto x = random({2, 5, 7}, 30);
  EXPECT_EQ(resize_bilinear(x, 5, 7).values(), x.values());
  auto c = resize_bilinear(Td::full({1, 3, 3}, 0.7), 8, 5);
  for (double v : c.values()) EXPECT_NEAR(v, 0.7, 1e-15);
}

TEST(Resize, HalfPixelUpsampleOfRamp) {
  // rows [0, 1] upsampled to width 4: source x = (j + 0.5) / 2 - 0.5 clamped to [0, 1]
  auto y = resize_bilinear(Td::from_data({1, 2, 2}, {0, 1, 0, 1}), 4, 4);
  const double expect[4] = {0.0, 0.25, 0.75, 1.0};
  for (std::size_t r = 0; r < 4; ++r)
    for (std::size_t j = 0; j < 4; ++j) EXPECT_NEAR(y.at(r * 4 + j), expect[j], 1e-15);
}

TEST(Resize, DownsampleByTwoAveragesPairs) {
  auto x = random({1, 4, 4}, 31);
  auto y = resize_bilinear(x, 2, 2);
  for (std::size_t r = 0; r < 2; ++r)
    for (std::size_t c = 0; c < 2; ++c) {
      const double avg = (x.at(2 * r * 4 + 2 * c) + x.at(2 * r * 4 + 2 * c + 1) +
                          x.at((2 * r + 1) * 4 + 2 * c) + x.at((2 * r + 1) * 4 + 2 * c + 1)) / 4;
      EXPECT_NEAR(y.at(r * 2 + c), avg, 1e-12);
    }
}
