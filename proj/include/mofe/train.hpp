// Copyright 2026 The mofe-restore Authors
// SPDX-License-Identifier: Apache-2.0

// Optimization, evaluation and router analysis.

#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "mofe/degrade.hpp"
#include "mofe/guidance.hpp"
#include "mofe/image.hpp"
#include "mofe/losses.hpp"
#include "mofe/model.hpp"

namespace mofe {

// Bias-corrected Adam over a fixed parameter list.
template <typename T>
class Adam {
 public:
  explicit Adam(std::vector<Parameter<T>> params, double beta1 = 0.9, double beta2 = 0.999,
                double eps = 1e-8);

  // Throws ContractError naming the first parameter without a gradient.
  void step(double lr);
  std::uint64_t steps() const { return t_; }
  const std::vector<std::vector<T>>& first_moment() const { return m_; }
  const std::vector<std::vector<T>>& second_moment() const { return v_; }

 private:
  std::vector<Parameter<T>> params_;
  double beta1_, beta2_, eps_;
  std::uint64_t t_ = 0;
  std::vector<std::vector<T>> m_, v_;
};

// lr0 * 0.5 * (1 + cos(pi * step / total_steps)); ContractError unless
// 0 <= step <= total_steps.
double cosine_lr(std::size_t step, std::size_t total_steps, double lr0);

// Rescales all gradients so their joint L2 norm is at most max_norm.
// Returns the norm before clipping.
template <typename T> double clip_grad_norm(const std::vector<Parameter<T>>& params, double max_norm);

struct Stage {
  std::size_t epoch_start = 0, epoch_end = 0;
  std::size_t patch_size = 0, batch_size = 0;
};

struct StageSchedule {
  std::vector<Stage> stages;

  // (0-20, 32, 16), (20-30, 48, 8), (30-36, 64, 4), (36-40, 64, 4)
  static StageSchedule desk();
  // 150 epochs, 128 -> 224 pixels, batch 64 -> 16.
  static StageSchedule paper_all_in_one();
  // 250 epochs, same resolutions.
  static StageSchedule paper_composite();
  static StageSchedule single(std::size_t epochs, std::size_t patch, std::size_t batch);
  // "desk", "paper-all-in-one" or "paper-composite".
  static StageSchedule named(const std::string& name);

  std::size_t total_epochs() const { return stages.empty() ? 0 : stages.back().epoch_end; }
  // Contiguous from epoch 0, non-empty stages, patch sizes divisible by 8.
  void validate() const;

  nlohmann::json to_json() const;
  static StageSchedule from_json(const nlohmann::json& j);
};

struct TrainItem {
  std::string id;
  std::string combo;
  std::vector<std::string> labels;
  Image clean;
  Image degraded;
  GuidanceTriplet guidance;
};

// Fails with DataError listing missing ids before any image is read.
std::vector<TrainItem> attach_embeddings(const DatasetManifest& dataset, const EmbeddingStore& store);
std::vector<TrainItem> attach_embeddings(const std::vector<Sample>& samples, const EmbeddingStore& store);
// synth_embed for every record, keyed by record id.
EmbeddingStore synthetic_store(const DatasetManifest& dataset, const SynthEmbedOptions& options);
EmbeddingStore synthetic_store(const std::vector<Sample>& samples, const SynthEmbedOptions& options);

struct TrainConfig {
  ModelConfig model = ModelConfig::toy();
  StageSchedule schedule = StageSchedule::desk();
  LossConfig loss;
  double lr = 2e-4;
  std::optional<std::size_t> max_steps;
  double grad_clip = 0;  // 0 disables
  bool no_mgl = false;
  std::uint64_t seed = 0;
  std::string out_dir;  // empty: keep everything in memory
  bool checkpoints = true;

  void validate() const;
  nlohmann::json to_json() const;
  // Missing keys keep their defaults.
  static TrainConfig from_json(const nlohmann::json& j);
};

struct LogRow {
  std::size_t step = 0;
  std::size_t stage = 0;
  float lr = 0, rec = 0, mgl = 0, total = 0;
};

struct TrainResult {
  RestorationModel<float> model;
  std::vector<LogRow> log;
  std::vector<std::string> checkpoints;
};

std::string log_csv(const std::vector<LogRow>& log);

std::size_t steps_per_epoch(std::size_t dataset_size, std::size_t batch_size);
std::size_t planned_steps(const TrainConfig& cfg, std::size_t dataset_size);

// Writes log.csv and checkpoints (stage ends and final) under cfg.out_dir
// when it is set.
TrainResult train(const TrainConfig& cfg, const std::vector<TrainItem>& data);
// Continues from an existing model (e.g. a loaded checkpoint).
TrainResult train(const TrainConfig& cfg, const std::vector<TrainItem>& data, RestorationModel<float> model);

struct EvalRow {
  std::string id;
  std::string group;  // combo code
  std::string labels;  // '+'-joined
  double psnr_db = 0, ssim = 0;
};
struct EvalSummary {
  std::string group;
  std::size_t count = 0;
  double psnr_db = 0, ssim = 0;
};
struct EvalReport {
  std::vector<EvalRow> rows;
  std::vector<EvalSummary> groups;  // first-appearance order
  EvalSummary overall;
  std::string csv() const;
};

// Whole-image restoration with reflect padding to a multiple of 8, output
// clamped to [0, 1].
Image restore(const RestorationModel<float>& model, const Image& degraded, const GuidanceTriplet& g);
EvalReport evaluate(const RestorationModel<float>& model, const std::vector<TrainItem>& data);
// Scores the degraded inputs themselves.
EvalReport evaluate_identity(const std::vector<TrainItem>& data);
EvalReport summarize(std::vector<EvalRow> rows);

struct RouterDump {
  std::string weights_csv;     // sample_id,site,w0..w{N-1}
  std::string similarity_csv;  // matrix,row_id,<ids>
  std::string energy_csv;      // sample_id,site,expert,energy
};

// Unknown ids raise DataError. Energies need the degraded images, so they are
// only emitted for items whose degraded image is non-empty.
RouterDump router_dump(const RestorationModel<float>& model, const std::vector<TrainItem>& items);

struct AlignmentResult {
  double initial = 0, final = 0;
  std::vector<double> history;  // loss before each step, then after the last
};

// Optimizes only the router of `site` under L_MGL on the answer embeddings,
// full batch.
AlignmentResult align_router(MofeModule<float>& site, const std::vector<GuidanceTriplet>& batch,
                             std::size_t steps, double lr);

// Site-averaged L_MGL of the model's routers over one batch of embeddings.
double batch_mgl(const RestorationModel<float>& model, const std::vector<GuidanceTriplet>& batch);

}  // namespace mofe
