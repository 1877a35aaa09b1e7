// Copyright 2026 The mofe-restore Authors
// SPDX-License-Identifier: Apache-2.0

#include <chrono>
#include <filesystem>
#include <fstream>
#include <set>

#include <gtest/gtest.h>

#include "mofe/errors.hpp"
#include "mofe/model.hpp"
#include "mofe/ops.hpp"
#include "mofe/random.hpp"

using namespace mofe;
namespace fs = std::filesystem;
using Tf = Tensor<float>;

namespace {

Tf random_image(std::size_t h, std::size_t w, std::uint64_t seed) {
  Rng rng(seed);
  std::vector<float> v(3 * h * w);
  for (auto& x : v) x = static_cast<float>(rng.uniform());
  return Tf::from_data({3, h, w}, v);
}

GuidanceTensors<float> random_guidance(const ModelConfig& c, std::uint64_t seed) {
  Rng rng(seed);
  auto vec = [&](std::size_t n) {
    std::vector<float> v(n);
    for (auto& x : v) x = static_cast<float>(rng.uniform(-1, 1));
    return Tf::from_data({n}, v);
  };
  return {vec(c.dim_image), vec(c.dim_joint), vec(c.dim_answer)};
}

std::string tmp_path(const std::string& name) {
  fs::create_directories(MOFE_TEST_TMP);
  return (fs::path(MOFE_TEST_TMP) / name).string();
}

}  // namespace

TEST(ModelConfig, Profiles) {
  auto p = ModelConfig::paper();
  EXPECT_EQ(p.level_blocks, (std::array<std::size_t, 4>{4, 6, 6, 8}));
  EXPECT_EQ(p.level_heads, (std::array<std::size_t, 4>{1, 2, 4, 8}));
  EXPECT_EQ(p.level_dims, (std::array<std::size_t, 4>{48, 96, 192, 384}));
  EXPECT_EQ(p.refinement_blocks, 4u);
  EXPECT_DOUBLE_EQ(p.gdfn_gamma, 2.66);
  EXPECT_EQ(p.num_experts, 8u);
  EXPECT_EQ(p.enabled_sites(), 6u);
  auto t = ModelConfig::profile("toy");
  EXPECT_EQ(t.level_dims, (std::array<std::size_t, 4>{8, 16, 32, 64}));
  EXPECT_THROW(ModelConfig::profile("huge"), ConfigError);
}

TEST(ModelConfig, ValidationNamesField) {
  auto c = ModelConfig::toy();
  c.level_heads[1] = 3;
  try {
    c.validate();
    FAIL();
  } catch (const ConfigError& e) {
    EXPECT_NE(std::string(e.what()).find("level_dims[1]"), std::string::npos) << e.what();
  }
  c = ModelConfig::toy();
  c.dim_joint = 60;
  c.tokens = 8;
  EXPECT_THROW(c.validate(), ConfigError);
  c = ModelConfig::toy();
  c.num_experts = 0;
  EXPECT_THROW(c.validate(), ConfigError);
}

TEST(ModelConfig, JsonRoundTrip) {
  auto c = ModelConfig::toy();
  c.mofe_sites[2] = false;
  auto back = ModelConfig::from_json(c.to_json());
  EXPECT_EQ(back.to_json(), c.to_json());
  EXPECT_EQ(back.enabled_sites(), 5u);
}

TEST(Model, SameSeedSameParameters) {
  auto a = RestorationModel<float>::build(ModelConfig::toy(), 7);
  auto b = RestorationModel<float>::build(ModelConfig::toy(), 7);
  auto c = RestorationModel<float>::build(ModelConfig::toy(), 8);
  ASSERT_EQ(a.parameters().size(), b.parameters().size());
  bool differs = false;
  for (std::size_t i = 0; i < a.parameters().size(); ++i) {
    EXPECT_EQ(a.parameters()[i].name, b.parameters()[i].name);
    EXPECT_EQ(a.parameters()[i].tensor.values(), b.parameters()[i].tensor.values());
    differs |= a.parameters()[i].tensor.values() != c.parameters()[i].tensor.values();
  }
  EXPECT_TRUE(differs);
}

TEST(Model, OutputShapesAndRouterCount) {
  auto m = RestorationModel<float>::build(ModelConfig::toy(), 1);
  auto g = random_guidance(m.config(), 2);
  for (auto [h, w] : {std::pair<std::size_t, std::size_t>{64, 64}, {128, 96}}) {
    auto out = m.forward(random_image(h, w, 3), g);
    EXPECT_EQ(out.restored.shape(), (Shape{3, h, w}));
    ASSERT_EQ(out.router_weights.size(), 6u);
    for (const auto& r : out.router_weights) EXPECT_EQ(r.numel(), m.config().num_experts);
  }
}

TEST(Model, ToyForwardIsFast) {
  auto m = RestorationModel<float>::build(ModelConfig::toy(), 1);
  auto g = random_guidance(m.config(), 2);
  auto img = random_image(64, 64, 3);
  NoGradGuard guard;
  const auto t0 = std::chrono::steady_clock::now();
  m.forward(img, g);
  const double s = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  EXPECT_LT(s, 1.0);
}

TEST(Model, RejectsSizesNotDivisibleByEight) {
  auto m = RestorationModel<float>::build(ModelConfig::toy(), 1);
  auto g = random_guidance(m.config(), 2);
  try {
    m.forward(random_image(60, 64, 3), g);
    FAIL();
  } catch (const DimensionError& e) {
    EXPECT_NE(std::string(e.what()).find("reflect-pad"), std::string::npos);
  }
  EXPECT_THROW(m.forward(Tf::zeros({1, 8, 8}), g), DimensionError);
}

TEST(Model, ZeroedProjectionsPassInputThroughExactly) {
  auto m = RestorationModel<float>::build(ModelConfig::toy(), 4);
  m.zero_output_projections();
  auto g = random_guidance(m.config(), 5);
  for (auto [h, w] : {std::pair<std::size_t, std::size_t>{8, 8}, {16, 24}, {40, 32}}) {
    auto img = random_image(h, w, h * 100 + w);
    EXPECT_EQ(m.forward(img, g).restored.values(), img.values());
  }
}

TEST(Model, EmbeddingWiring) {
  auto m = RestorationModel<float>::build(ModelConfig::toy(), 1);
  const auto& wiring = m.mgfb_wiring();
  ASSERT_EQ(wiring.size(), 7u);
  for (std::size_t i = 0; i < 4; ++i) EXPECT_EQ(wiring[i].role, EmbeddingRole::kImage) << wiring[i].name;
  for (std::size_t i = 4; i < 7; ++i) EXPECT_EQ(wiring[i].role, EmbeddingRole::kJoint) << wiring[i].name;
  EXPECT_EQ(wiring[3].name, "latent.mgfb");
  EXPECT_EQ(wiring[6].name, "dec1.mgfb");
  auto names = m.mofe_site_names();
  ASSERT_EQ(names.size(), 6u);
  for (std::size_t s = 0; s < 6; ++s) EXPECT_EQ(names[s], kMofeSiteNames[s]);
  for (const auto* mod : m.mofe_modules()) EXPECT_EQ(mod->answer_dim(), m.config().dim_answer);
}

TEST(Model, AnswerEmbeddingOnlyReachesRouters) {
  auto m = RestorationModel<float>::build(ModelConfig::toy(), 1);
  auto g = random_guidance(m.config(), 2);
  auto img = random_image(16, 16, 3);
  auto base = m.forward(img, g);
  auto g2 = g;
  g2.answer = scale(g.answer, 0.5f);
  auto changed = m.forward(img, g2);
  EXPECT_NE(base.restored.values(), changed.restored.values());
  // With every router zeroed the weights no longer depend on E_answer.
  for (auto* mod : m.mofe_modules())
    for (auto& v : mod->router().data()) v = 0;
  EXPECT_EQ(m.forward(img, g).restored.values(), m.forward(img, g2).restored.values());
}

TEST(Model, SitesCanBeDisabled) {
  auto c = ModelConfig::toy();
  c.mofe_sites = {true, false, false, false, false, true};
  auto m = RestorationModel<float>::build(c, 1);
  auto out = m.forward(random_image(16, 16, 2), random_guidance(c, 3));
  EXPECT_EQ(out.router_weights.size(), 2u);
  EXPECT_EQ(m.mofe_site_names(), (std::vector<std::string>{"mofe_down1", "mofe_up1"}));
}

TEST(Model, EveryParameterGetsGradient) {
  auto m = RestorationModel<float>::build(ModelConfig::toy(), 9);
  auto g = random_guidance(m.config(), 10);
  auto out = m.forward(random_image(16, 16, 11), g);
  Tensor<float> loss = mean(abs(out.restored));
  for (const auto& r : out.router_weights) loss = add(loss, sum(r));
  loss.backward();
  for (const auto& p : m.parameters()) {
    ASSERT_TRUE(p.tensor.has_grad()) << p.name;
    bool nonzero = false;
    for (float v : p.tensor.grad()) nonzero |= v != 0.0f;
    EXPECT_TRUE(nonzero) << p.name;
  }
}

TEST(Model, ParameterNamesAreUnique) {
  auto m = RestorationModel<float>::build(ModelConfig::paper(), 1);
  std::set<std::string> names;
  for (const auto& p : m.parameters()) EXPECT_TRUE(names.insert(p.name).second) << p.name;
}

TEST(Checkpoint, RoundTripIsExact) {
  auto m = RestorationModel<float>::build(ModelConfig::toy(), 12);
  const auto path = tmp_path("model_roundtrip.ckpt");
  save_checkpoint(path, m);
  auto loaded = model_from_checkpoint<float>(load_checkpoint(path));
  EXPECT_EQ(loaded.config().to_json(), m.config().to_json());
  ASSERT_EQ(loaded.parameters().size(), m.parameters().size());
  for (std::size_t i = 0; i < m.parameters().size(); ++i) {
    EXPECT_EQ(loaded.parameters()[i].tensor.values(), m.parameters()[i].tensor.values());
  }
  auto g = random_guidance(m.config(), 13);
  auto img = random_image(16, 16, 14);
  EXPECT_EQ(loaded.forward(img, g).restored.values(), m.forward(img, g).restored.values());
}

TEST(Checkpoint, CorruptFilesAreRejected) {
  auto m = RestorationModel<float>::build(ModelConfig::toy(), 12);
  const auto path = tmp_path("model_corrupt.ckpt");
  save_checkpoint(path, m);
  const auto full = fs::file_size(path);
  fs::resize_file(path, full - 10);
  try {
    load_checkpoint(path);
    FAIL();
  } catch (const LoadError& e) {
    EXPECT_EQ(e.kind(), LoadErrorKind::kTruncatedPayload);
  }
  {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    out << "NOTACKPT and some bytes";
  }
  try {
    load_checkpoint(path);
    FAIL();
  } catch (const LoadError& e) {
    EXPECT_EQ(e.kind(), LoadErrorKind::kMalformed);
  }
}

TEST(Checkpoint, LoadValuesChecksShapes) {
  auto m = RestorationModel<float>::build(ModelConfig::toy(), 1);
  std::vector<std::pair<std::string, std::vector<float>>> values;
  for (const auto& p : m.parameters()) values.emplace_back(p.name, p.tensor.values());
  values.back().second.pop_back();
  EXPECT_THROW(m.load_values(values), DataError);
  values.pop_back();
  EXPECT_THROW(m.load_values(values), DataError);
}
