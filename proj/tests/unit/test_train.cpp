// Copyright 2026 The mofe-restore Authors
// SPDX-License-Identifier: Apache-2.0

#include <cmath>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <map>
#include <numbers>
#include <sstream>

#include <gtest/gtest.h>

#include "mofe/errors.hpp"
#include "mofe/train.hpp"

using namespace mofe;
namespace fs = std::filesystem;

namespace {

std::vector<Sample> tiny_samples() {
  return synthesize({procedural_image(48, 1), procedural_image(48, 2)}, {"L", "H+R", "N25"}, 2, 24, 3);
}

std::vector<TrainItem> tiny_items() {
  auto samples = tiny_samples();
  return attach_embeddings(samples, synthetic_store(samples, SynthEmbedOptions{}));
}

TrainConfig tiny_config() {
  TrainConfig c;
  c.schedule = StageSchedule::single(100, 16, 2);
  c.max_steps = 10;
  c.lr = 1e-3;
  c.seed = 5;
  return c;
}

std::string slurp(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), {}};
}

std::vector<std::string> lines(const std::string& text) {
  std::vector<std::string> out;
  std::istringstream in(text);
  for (std::string l; std::getline(in, l);) out.push_back(l);
  return out;
}

std::vector<std::string> fields(const std::string& line) {
  std::vector<std::string> out;
  std::istringstream in(line);
  for (std::string f; std::getline(in, f, ',');) out.push_back(f);
  if (!line.empty() && line.back() == ',') out.emplace_back();
  return out;
}

}  // namespace

TEST(Adam, FirstStepClosedForm) {
  auto p = Tensor<double>::from_data({2}, {0.0, 1.0}, true);
  Adam<double> adam({{"p", p}});
  p.mutable_grad()[0] = 1.0;
  p.mutable_grad()[1] = -3.0;
  adam.step(1e-3);
  // m_hat = g, v_hat = g^2, so the update is lr * g / (|g| + eps).
  EXPECT_NEAR(p.at(0), -1e-3 / (1 + 1e-8), 1e-15);
  EXPECT_NEAR(p.at(0), -9.99999e-4, 1e-9);
  EXPECT_NEAR(p.at(1), 1.0 + 1e-3 * 3 / (3 + 1e-8), 1e-15);
  EXPECT_EQ(adam.steps(), 1u);
}

TEST(Adam, ZeroGradientLeavesParameterUnchanged) {
  auto p = Tensor<float>::from_data({3}, {0.5f, -2.0f, 7.0f}, true);
  Adam<float> adam({{"p", p}});
  p.mutable_grad();
  adam.step(0.1);
  EXPECT_EQ(p.values(), (std::vector<float>{0.5f, -2.0f, 7.0f}));
}

TEST(Adam, TwoStepsMatchScalarReference) {
  auto p = Tensor<double>::from_data({1}, {0.3}, true);
  Adam<double> adam({{"p", p}}, 0.9, 0.999, 1e-8);
  const double grads[2] = {0.7, -0.2};
  double x = 0.3, m = 0, v = 0;
  for (int t = 1; t <= 2; ++t) {
    p.zero_grad();
    p.mutable_grad()[0] = grads[t - 1];
    adam.step(0.01);
    const double g = grads[t - 1];
    m = 0.9 * m + 0.1 * g;
    v = 0.999 * v + 0.001 * g * g;
    x -= 0.01 * (m / (1 - std::pow(0.9, t))) / (std::sqrt(v / (1 - std::pow(0.999, t))) + 1e-8);
    EXPECT_NEAR(p.at(0), x, 1e-12);
  }
}

TEST(Adam, MissingGradientIsNamed) {
  auto a = Tensor<float>::zeros({2}, true), b = Tensor<float>::zeros({2}, true);
  Adam<float> adam({{"a", a}, {"b", b}});
  a.mutable_grad();
  try {
    adam.step(0.1);
    FAIL();
  } catch (const ContractError& e) {
    EXPECT_NE(std::string(e.what()).find("'b'"), std::string::npos);
  }
  EXPECT_EQ(adam.steps(), 0u);
}

TEST(Schedule, CosineValues) {
  EXPECT_DOUBLE_EQ(cosine_lr(0, 100, 2e-4), 2e-4);
  EXPECT_NEAR(cosine_lr(50, 100, 2e-4), 1e-4, 1e-18);
  EXPECT_NEAR(cosine_lr(100, 100, 2e-4), 0.0, 1e-18);
  EXPECT_NEAR(cosine_lr(25, 100, 1.0), 0.5 * (1 + std::cos(std::numbers::pi / 4)), 1e-15);
  EXPECT_THROW(cosine_lr(101, 100, 1.0), ContractError);
}

TEST(Schedule, NamedAndValidation) {
  EXPECT_EQ(StageSchedule::paper_all_in_one().total_epochs(), 150u);
  EXPECT_EQ(StageSchedule::paper_composite().total_epochs(), 250u);
  EXPECT_EQ(StageSchedule::desk().stages[0].patch_size, 32u);
  EXPECT_THROW(StageSchedule::named("forever"), ConfigError);
  StageSchedule gap{{{0, 5, 16, 2}, {6, 8, 16, 2}}};
  EXPECT_THROW(gap.validate(), ConfigError);
  StageSchedule odd{{{0, 5, 20, 2}}};
  EXPECT_THROW(odd.validate(), ConfigError);
  auto back = StageSchedule::from_json(StageSchedule::paper_composite().to_json());
  EXPECT_EQ(back.to_json(), StageSchedule::paper_composite().to_json());
  EXPECT_EQ(StageSchedule::from_json("desk").to_json(), StageSchedule::desk().to_json());
}

TEST(Schedule, PlannedSteps) {
  TrainConfig c;
  EXPECT_EQ(steps_per_epoch(10, 16), 1u);
  EXPECT_EQ(steps_per_epoch(100, 16), 6u);
  // desk over 100 samples: 20*6 + 10*12 + 6*25 + 4*25
  EXPECT_EQ(planned_steps(c, 100), 120u + 120u + 150u + 100u);
  c.max_steps = 7;
  EXPECT_EQ(planned_steps(c, 100), 7u);
}

TEST(Data, PreflightListsMissingIds) {
  auto samples = tiny_samples();
  EmbeddingStore partial(EmbeddingDims{});
  partial.add(samples[0].id, "x", {}, synth_embed(samples[0].mixture, {}, samples[0].id));
  try {
    attach_embeddings(samples, partial);
    FAIL();
  } catch (const DataError& e) {
    const std::string what = e.what();
    EXPECT_NE(what.find("5 record(s)"), std::string::npos) << what;
    EXPECT_NE(what.find(samples[1].id), std::string::npos) << what;
  }
}

TEST(Config, JsonRoundTripAndDefaults) {
  auto c = tiny_config();
  c.loss.lambda_mgl = 0.25;
  c.no_mgl = true;
  auto back = TrainConfig::from_json(c.to_json());
  EXPECT_EQ(back.to_json(), c.to_json());
  auto d = TrainConfig::from_json(nlohmann::json::object());
  EXPECT_DOUBLE_EQ(d.lr, 2e-4);
  EXPECT_DOUBLE_EQ(d.loss.lambda_mgl, 0.1);
  EXPECT_DOUBLE_EQ(d.loss.alpha_freq, 0.1);
  EXPECT_THROW(TrainConfig::from_json({{"lr", -1}}), ConfigError);
  EXPECT_THROW(TrainConfig::from_json({{"lr", "fast"}}), ConfigError);
}

TEST(Train, RepeatedRunsAreIdentical) {
  const auto items = tiny_items();
  auto a = train(tiny_config(), items);
  auto b = train(tiny_config(), items);
  ASSERT_EQ(a.log.size(), 10u);
  EXPECT_EQ(log_csv(a.log), log_csv(b.log));
  for (std::size_t i = 0; i < a.model.parameters().size(); ++i) {
    EXPECT_EQ(a.model.parameters()[i].tensor.values(), b.model.parameters()[i].tensor.values());
  }
  EXPECT_EQ(a.log.front().lr, 1e-3f);
  for (const auto& r : a.log) EXPECT_NEAR(r.total, r.rec + 0.1f * r.mgl, 1e-6f);
}

TEST(Train, NoMglObjectiveIsReconstruction) {
  const auto items = tiny_items();
  auto cfg = tiny_config();
  cfg.no_mgl = true;
  auto r = train(cfg, items);
  for (const auto& row : r.log) {
    EXPECT_EQ(row.total, row.rec);
    EXPECT_GE(row.mgl, 0.0f);
  }
}

TEST(Train, ZeroLambdaMatchesNoMgl) {
  const auto items = tiny_items();
  auto a = tiny_config(), b = tiny_config();
  a.no_mgl = true;
  b.loss.lambda_mgl = 0.0;
  EXPECT_EQ(log_csv(train(a, items).log), log_csv(train(b, items).log));
}

TEST(Train, WritesLogAndCheckpoints) {
  const auto items = tiny_items();
  auto cfg = tiny_config();
  cfg.schedule = StageSchedule{{{0, 1, 16, 2}, {1, 3, 8, 3}}};
  cfg.max_steps.reset();
  cfg.out_dir = (fs::path(MOFE_TEST_TMP) / "train_out").string();
  fs::remove_all(cfg.out_dir);
  auto r = train(cfg, items);
  // 3 steps in stage 0, then 2 epochs of 2 steps
  ASSERT_EQ(r.log.size(), 7u);
  EXPECT_EQ(r.log[3].stage, 1u);
  EXPECT_EQ(r.checkpoints, (std::vector<std::string>{cfg.out_dir + "/stage0.ckpt", cfg.out_dir + "/final.ckpt"}));
  const auto csv = lines(slurp(cfg.out_dir + "/log.csv"));
  EXPECT_EQ(csv[0], "step,stage,lr,rec,mgl,total");
  EXPECT_EQ(csv.size(), 8u);
  auto loaded = model_from_checkpoint<float>(load_checkpoint(cfg.out_dir + "/final.ckpt"));
  EXPECT_EQ(loaded.parameters()[0].tensor.values(), r.model.parameters()[0].tensor.values());
}

TEST(Train, RejectsMismatchedEmbeddings) {
  auto items = tiny_items();
  items[2].guidance.e_answer.pop_back();
  EXPECT_THROW(train(tiny_config(), items), DataError);
  EXPECT_THROW(train(tiny_config(), {}), DataError);
}

TEST(Eval, CleanInputsScorePerfectly) {
  auto items = tiny_items();
  for (auto& it : items) it.degraded = it.clean;
  auto report = evaluate_identity(items);
  ASSERT_EQ(report.rows.size(), 6u);
  for (const auto& r : report.rows) {
    EXPECT_EQ(r.psnr_db, kPsnrCapDb);
    EXPECT_NEAR(r.ssim, 1.0, 1e-12);
  }
  EXPECT_EQ(report.groups.size(), 3u);
}

TEST(Eval, CsvAveragesRecompute) {
  auto items = tiny_items();
  auto model = RestorationModel<float>::build(ModelConfig::toy(), 1);
  auto report = evaluate(model, items);
  const auto rows = lines(report.csv());
  ASSERT_EQ(rows.size(), 1u + 6u + 3u + 1u);
  EXPECT_EQ(rows[0], "sample_id,group,labels,psnr_db,ssim");
  std::map<std::string, std::pair<double, int>> sums;
  double all = 0;
  for (std::size_t i = 1; i <= 6; ++i) {
    const auto f = fields(rows[i]);
    ASSERT_EQ(f.size(), 5u);
    sums[f[1]].first += std::stod(f[3]);
    sums[f[1]].second++;
    all += std::stod(f[3]);
  }
  for (std::size_t i = 7; i < 10; ++i) {
    const auto f = fields(rows[i]);
    EXPECT_EQ(f[0], "avg:" + f[1]);
    EXPECT_NEAR(std::stod(f[3]), sums[f[1]].first / sums[f[1]].second, 1e-9);
  }
  const auto last = fields(rows.back());
  EXPECT_EQ(last[0], "avg:all");
  EXPECT_NEAR(std::stod(last[3]), all / 6, 1e-9);
  EXPECT_EQ(fields(rows[3])[2], "H+R");
}

TEST(Eval, RestoreHandlesOddSizes) {
  auto model = RestorationModel<float>::build(ModelConfig::toy(), 1);
  auto items = tiny_items();
  Image odd = crop(items[0].degraded, 0, 0, 21, 19);
  auto out = restore(model, odd, items[0].guidance);
  EXPECT_EQ(out.height, 21u);
  EXPECT_EQ(out.width, 19u);
  for (float v : out.data) {
    EXPECT_GE(v, 0.0f);
    EXPECT_LE(v, 1.0f);
  }
}

TEST(RouterDump, ShapesAndUnitDiagonal) {
  auto model = RestorationModel<float>::build(ModelConfig::toy(), 1);
  auto items = tiny_items();
  auto dump = router_dump(model, items);
  const auto w = lines(dump.weights_csv);
  ASSERT_EQ(w.size(), 1u + 6u * 6u);
  EXPECT_EQ(w[0], "sample_id,site,w0,w1,w2,w3");
  EXPECT_EQ(fields(w[1])[1], "mofe_down1");
  EXPECT_EQ(fields(w[1]).size(), 6u);
  const auto s = lines(dump.similarity_csv);
  ASSERT_EQ(s.size(), 1u + 7u * 6u);
  for (std::size_t m = 0; m < 7; ++m)
    for (std::size_t r = 0; r < 6; ++r) {
      const auto f = fields(s[1 + m * 6 + r]);
      ASSERT_EQ(f.size(), 8u);
      EXPECT_NEAR(std::stod(f[2 + r]), 1.0, 1e-6);
    }
  EXPECT_EQ(fields(s[1])[0], "answer");
  EXPECT_EQ(fields(s[7])[0], "router:mofe_down1");
  EXPECT_EQ(lines(dump.energy_csv).size(), 1u + 6u * 6u * 4u);

  for (auto& it : items) it.degraded = Image();
  EXPECT_EQ(lines(router_dump(model, items).energy_csv).size(), 1u);
}

TEST(Alignment, RouterOnlyOptimizationReducesLoss) {
  auto model = RestorationModel<float>::build(ModelConfig::toy(), 2);
  auto items = tiny_items();
  std::vector<GuidanceTriplet> batch;
  for (const auto& it : items) batch.push_back(it.guidance);
  const auto before = batch_mgl(model, batch);
  auto* site = model.mofe_modules()[0];
  const auto experts = site->experts()[0].first.weight.values();
  auto r = align_router(*site, batch, 50, 1e-2);
  EXPECT_EQ(r.history.size(), 51u);
  EXPECT_LT(r.final, r.initial);
  EXPECT_EQ(site->experts()[0].first.weight.values(), experts);
  EXPECT_LT(batch_mgl(model, batch), before);
}
