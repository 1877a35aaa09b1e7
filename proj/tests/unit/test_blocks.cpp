// Copyright 2026 The mofe-restore Authors
// SPDX-License-Identifier: Apache-2.0

#include <cmath>

#include <gtest/gtest.h>

#include "mofe/blocks.hpp"
#include "mofe/errors.hpp"
#include "mofe/ops.hpp"
#include "mofe/random.hpp"

using namespace mofe;
using Td = Tensor<double>;
using Tf = Tensor<float>;

namespace {

template <typename T = double>
Tensor<T> random(const Shape& s, std::uint64_t seed, double lo = -1, double hi = 1) {
  Rng rng(seed);
  std::vector<T> v(shape_numel(s));
  for (auto& x : v) x = static_cast<T>(rng.uniform(lo, hi));
  return Tensor<T>::from_data(s, v);
}

void fill(Tensor<double> t, double v) {
  for (auto& x : t.data()) x = v;
}

}  // namespace

TEST(Mdta, ZeroOutputProjectionIsExactIdentity) {
  ParamFactory<float> pf(1);
  MdtaBlock<float> b(pf, "mdta", 8, 8, 2);
  b.zero_output_projection();
  auto x = random<float>({8, 6, 4}, 2);
  EXPECT_EQ(b.forward(x, x).values(), x.values());
}

TEST(Mdta, ZeroValuePathIsExactIdentity) {
  ParamFactory<float> pf(3);
  MdtaBlock<float> b(pf, "mdta", 8, 8, 2);
  for (auto& v : b.out_proj().bias.data()) v = 0;
  b.zero_value_path();
  auto x = random<float>({8, 4, 4}, 4);
  EXPECT_EQ(b.forward(x, x).values(), x.values());
}

TEST(Mdta, AttentionRowsAreDistributions) {
  ParamFactory<double> pf(5);
  MdtaBlock<double> b(pf, "mdta", 8, 4, 2);
  auto x = random({8, 4, 4}, 6), kv = random({4, 4, 4}, 7);
  auto att = b.attention(x, kv);
  ASSERT_EQ(att.size(), 2u);
  ASSERT_EQ(att[0].shape(), (Shape{4, 2}));
  for (const auto& a : att)
    for (std::size_t r = 0; r < 4; ++r) EXPECT_NEAR(a.at(2 * r) + a.at(2 * r + 1), 1.0, 1e-12);
  EXPECT_EQ(b.forward(x, kv).shape(), x.shape());
}

TEST(Mdta, HeadsMustDivideChannels) {
  ParamFactory<double> pf(8);
  EXPECT_THROW(MdtaBlock<double>(pf, "m", 6, 6, 4), ConfigError);
}

TEST(Gdfn, ZeroProjectionIsIdentityAndHiddenWidth) {
  ParamFactory<float> pf(9);
  GdfnBlock<float> g(pf, "gdfn", 48, 2.66);
  EXPECT_EQ(g.hidden(), 128u);  // round(2.66 * 48)
  g.zero_output_projection();
  auto x = random<float>({48, 4, 4}, 10);
  EXPECT_EQ(g.forward(x).values(), x.values());
}

TEST(Mgfb, ZeroOutputAndValuePathsAreIdentity) {
  ParamFactory<float> pf1(11), pf2(11);
  MgfbBlock<float> a(pf1, "mgfb", 8, 16, 4), m(pf2, "mgfb", 8, 16, 4);
  auto f = random<float>({8, 4, 4}, 12), e = random<float>({16}, 13);
  EXPECT_NE(a.forward(f, e).values(), f.values());
  a.zero_output_projection();
  EXPECT_EQ(a.forward(f, e).values(), f.values());
  m.zero_value_projection();
  EXPECT_EQ(m.forward(f, e).values(), f.values());
}

TEST(Mgfb, AttentionOverTokensSumsToOne) {
  ParamFactory<double> pf(14);
  MgfbBlock<double> m(pf, "mgfb", 8, 16, 4);
  auto a = m.attention(random({8, 3, 5}, 15), random({16}, 16));
  ASSERT_EQ(a.shape(), (Shape{15, 4}));
  for (std::size_t r = 0; r < 15; ++r) {
    double s = 0;
    for (std::size_t k = 0; k < 4; ++k) s += a.at(r * 4 + k);
    EXPECT_NEAR(s, 1.0, 1e-12);
  }
}

TEST(Mgfb, EmbeddingMustSplitIntoTokens) {
  ParamFactory<double> pf(17);
  EXPECT_THROW(MgfbBlock<double>(pf, "m", 8, 10, 4), ConfigError);
  MgfbBlock<double> ok(pf, "ok", 8, 16, 4);
  EXPECT_THROW(ok.forward(random({8, 2, 2}, 1), random({12}, 2)), DimensionError);
}

TEST(Router, ZeroWeightsGiveOneHalf) {
  ParamFactory<double> pf(18);
  MofeModule<double> m(pf, "mofe", 8, 4, 16, 2);
  fill(m.router(), 0.0);
  auto w = m.route(random({16}, 19));
  ASSERT_EQ(w.numel(), 4u);
  for (double v : w.values()) EXPECT_DOUBLE_EQ(v, 0.5);
}

TEST(Router, LogitLnThreeGivesThreeQuarters) {
  ParamFactory<double> pf(20);
  MofeModule<double> m(pf, "mofe", 8, 2, 4, 2);
  fill(m.router(), 0.0);
  m.router().data()[0] = std::log(3.0);  // row 0 . e = ln 3 for e = e_0
  auto w = m.route(Td::from_data({4}, {1, 0, 0, 0}));
  EXPECT_NEAR(w.at(0), 0.75, 1e-12);
  EXPECT_DOUBLE_EQ(w.at(1), 0.5);
}

TEST(Router, WeightsAreIndependentNotNormalized) {
  ParamFactory<double> pf(21);
  MofeModule<double> m(pf, "mofe", 8, 5, 16, 2);
  auto w = m.route(scale(random({16}, 22), 4.0));
  double s = 0;
  for (double v : w.values()) {
    EXPECT_GT(v, 0.0);
    EXPECT_LT(v, 1.0);
    s += v;
  }
  EXPECT_GT(std::abs(s - 1.0), 1e-3);
}

TEST(Mofe, MixIsWeightedSumOfExperts) {
  ParamFactory<double> pf(23);
  MofeModule<double> m(pf, "mofe", 8, 3, 16, 2);
  auto hf = m.high_frequency(random({3, 8, 8}, 24, 0, 1), 4, 4);
  ASSERT_EQ(hf.shape(), (Shape{9, 4, 4}));
  auto outs = m.expert_outputs(hf);
  auto w = Td::from_data({3}, {0.2, 0.5, 0.9});
  auto mix = m.mix(outs, w);
  for (std::size_t i = 0; i < mix.numel(); ++i) {
    EXPECT_NEAR(mix.at(i), 0.2 * outs[0].at(i) + 0.5 * outs[1].at(i) + 0.9 * outs[2].at(i), 1e-12);
  }
}

TEST(Mofe, ConstantImageHasNoHighFrequency) {
  ParamFactory<double> pf(25);
  MofeModule<double> m(pf, "mofe", 8, 2, 16, 2);
  auto hf = m.high_frequency(Td::full({3, 16, 12}, 0.4), 4, 3);
  for (double v : hf.values()) EXPECT_NEAR(v, 0.0, 1e-15);
}

TEST(Mofe, ZeroFusionProjectionIsIdentity) {
  ParamFactory<float> pf(26);
  MofeModule<float> m(pf, "mofe", 8, 4, 16, 2);
  m.zero_output_projection();
  auto f = random<float>({8, 4, 4}, 27);
  auto out = m.forward(f, random<float>({3, 8, 8}, 28, 0, 1), random<float>({16}, 29));
  EXPECT_EQ(out.feature.values(), f.values());
  EXPECT_EQ(out.router_weights.numel(), 4u);
}

TEST(Mofe, RejectsNonRgbImage) {
  ParamFactory<double> pf(30);
  MofeModule<double> m(pf, "mofe", 8, 2, 16, 2);
  EXPECT_THROW(m.forward(random({8, 4, 4}, 1), random({1, 8, 8}, 2), random({16}, 3)), ContractError);
  EXPECT_THROW(m.route(random({15}, 4)), DimensionError);
}

TEST(Transformer, ZeroProjectionsAreIdentity) {
  ParamFactory<float> pf(31);
  TransformerBlock<float> b(pf, "blk", 8, 2, 2.66);
  b.zero_output_projection();
  auto x = random<float>({8, 5, 3}, 32);
  EXPECT_EQ(b.forward(x).values(), x.values());
}

TEST(Params, NamesAreScoped) {
  ParamFactory<double> pf(33);
  MofeModule<double> m(pf, "site", 8, 2, 16, 2);
  const auto& ps = pf.parameters();
  ASSERT_FALSE(ps.empty());
  EXPECT_EQ(ps[0].name, "site.expert0.conv1.weight");
  bool saw_router = false;
  for (const auto& p : ps) saw_router |= p.name == "site.router";
  EXPECT_TRUE(saw_router);
}
