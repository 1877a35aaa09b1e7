// Copyright 2026 The mofe-restore Authors
// SPDX-License-Identifier: Apache-2.0

#include "mofe/train.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <numbers>
#include <sstream>

#include "mofe/errors.hpp"
#include "mofe/ops.hpp"
#include "mofe/random.hpp"

namespace mofe {

namespace fs = std::filesystem;
using nlohmann::json;

// ------------------------------------------------------------------ optimizer

template <typename T>
Adam<T>::Adam(std::vector<Parameter<T>> params, double beta1, double beta2, double eps)
    : params_(std::move(params)), beta1_(beta1), beta2_(beta2), eps_(eps) {
  for (const auto& p : params_) {
    m_.emplace_back(p.tensor.numel(), T(0));
    v_.emplace_back(p.tensor.numel(), T(0));
  }
}

template <typename T>
void Adam<T>::step(double lr) {
  for (const auto& p : params_) {
    if (!p.tensor.has_grad()) throw ContractError("adam: parameter '" + p.name + "' has no gradient");
  }
  ++t_;
  const T b1 = static_cast<T>(beta1_), b2 = static_cast<T>(beta2_);
  const T c1 = static_cast<T>(1.0 - std::pow(beta1_, static_cast<double>(t_)));
  const T c2 = static_cast<T>(1.0 - std::pow(beta2_, static_cast<double>(t_)));
  const T rate = static_cast<T>(lr), eps = static_cast<T>(eps_);
  for (std::size_t k = 0; k < params_.size(); ++k) {
    Tensor<T> t = params_[k].tensor;
    auto data = t.data();
    const auto grad = t.grad();
    auto& m = m_[k];
    auto& v = v_[k];
    for (std::size_t i = 0; i < data.size(); ++i) {
      const T g = grad[i];
      m[i] = b1 * m[i] + (T(1) - b1) * g;
      v[i] = b2 * v[i] + (T(1) - b2) * g * g;
      const T mhat = m[i] / c1, vhat = v[i] / c2;
      data[i] -= rate * mhat / (std::sqrt(vhat) + eps);
    }
  }
}

double cosine_lr(std::size_t step, std::size_t total_steps, double lr0) {
  if (step > total_steps) {
    throw ContractError("cosine_lr: step " + std::to_string(step) + " exceeds total " + std::to_string(total_steps));
  }
  if (total_steps == 0) return lr0;
  return lr0 * 0.5 * (1.0 + std::cos(std::numbers::pi * static_cast<double>(step) / static_cast<double>(total_steps)));
}

template <typename T>
double clip_grad_norm(const std::vector<Parameter<T>>& params, double max_norm) {
  double sq = 0;
  for (const auto& p : params)
    for (T g : p.tensor.grad()) sq += static_cast<double>(g) * g;
  const double norm = std::sqrt(sq);
  if (max_norm > 0 && norm > max_norm) {
    const T f = static_cast<T>(max_norm / norm);
    for (auto p : params)
      for (T& g : p.tensor.mutable_grad()) g *= f;
  }
  return norm;
}

// ------------------------------------------------------------------- schedule

StageSchedule StageSchedule::desk() { return {{{0, 20, 32, 16}, {20, 30, 48, 8}, {30, 36, 64, 4}, {36, 40, 64, 4}}}; }

StageSchedule StageSchedule::paper_all_in_one() {
  return {{{0, 70, 128, 64}, {70, 120, 160, 32}, {120, 140, 192, 16}, {140, 150, 224, 16}}};
}

StageSchedule StageSchedule::paper_composite() {
  return {{{0, 130, 128, 64}, {130, 190, 160, 32}, {190, 230, 192, 16}, {230, 250, 224, 16}}};
}

StageSchedule StageSchedule::single(std::size_t epochs, std::size_t patch, std::size_t batch) {
  return {{{0, epochs, patch, batch}}};
}

StageSchedule StageSchedule::named(const std::string& name) {
  if (name == "desk") return desk();
  if (name == "paper-all-in-one") return paper_all_in_one();
  if (name == "paper-composite") return paper_composite();
  throw ConfigError("unknown schedule '" + name + "' (expected desk, paper-all-in-one or paper-composite)");
}

void StageSchedule::validate() const {
  if (stages.empty()) throw ConfigError("schedule: no stages");
  std::size_t expect = 0;
  for (std::size_t i = 0; i < stages.size(); ++i) {
    const auto& s = stages[i];
    const std::string at = "schedule stage " + std::to_string(i);
    if (s.epoch_start != expect) throw ConfigError(at + ": starts at epoch " + std::to_string(s.epoch_start) +
                                                   ", expected " + std::to_string(expect));
    if (s.epoch_end <= s.epoch_start) throw ConfigError(at + ": empty epoch range");
    if (s.patch_size == 0 || s.patch_size % 8) throw ConfigError(at + ": patch size must be a positive multiple of 8");
    if (s.batch_size == 0) throw ConfigError(at + ": batch size must be positive");
    expect = s.epoch_end;
  }
}

json StageSchedule::to_json() const {
  json arr = json::array();
  for (const auto& s : stages)
    arr.push_back({{"epoch_start", s.epoch_start}, {"epoch_end", s.epoch_end},
                   {"patch_size", s.patch_size}, {"batch_size", s.batch_size}});
  return arr;
}

StageSchedule StageSchedule::from_json(const json& j) {
  if (j.is_string()) return named(j.get<std::string>());
  const json& arr = j.is_object() ? j.at("stages") : j;
  StageSchedule out;
  try {
    for (const auto& s : arr)
      out.stages.push_back({s.at("epoch_start").get<std::size_t>(), s.at("epoch_end").get<std::size_t>(),
                            s.at("patch_size").get<std::size_t>(), s.at("batch_size").get<std::size_t>()});
  } catch (const json::exception& e) {
    throw ConfigError(std::string("schedule: ") + e.what());
  }
  out.validate();
  return out;
}

// ----------------------------------------------------------------------- data

namespace {

template <typename Records, typename IdOf>
void preflight(const Records& records, const EmbeddingStore& store, IdOf id_of) {
  std::vector<std::string> missing;
  for (const auto& r : records)
    if (!store.contains(id_of(r))) missing.push_back(id_of(r));
  if (missing.empty()) return;
  std::string msg = std::to_string(missing.size()) + " record(s) have no embeddings: ";
  for (std::size_t i = 0; i < missing.size() && i < 5; ++i) msg += (i ? ", " : "") + missing[i];
  if (missing.size() > 5) msg += ", ...";
  throw DataError(msg);
}

std::string join_labels(const std::vector<std::string>& labels) {
  std::string s;
  for (const auto& l : labels) s += (s.empty() ? "" : "+") + l;
  return s;
}

}  // namespace

std::vector<TrainItem> attach_embeddings(const DatasetManifest& dataset, const EmbeddingStore& store) {
  preflight(dataset.records, store, [](const DatasetRecord& r) { return r.id; });
  std::vector<TrainItem> out;
  for (const auto& r : dataset.records) {
    out.push_back({r.id, r.combo, r.labels, read_ppm(dataset.clean_file(r)), read_ppm(dataset.degraded_file(r)),
                   store.triplet(r.id)});
  }
  return out;
}

std::vector<TrainItem> attach_embeddings(const std::vector<Sample>& samples, const EmbeddingStore& store) {
  preflight(samples, store, [](const Sample& s) { return s.id; });
  std::vector<TrainItem> out;
  for (const auto& s : samples) out.push_back({s.id, s.combo, s.labels, s.clean, s.degraded, store.triplet(s.id)});
  return out;
}

EmbeddingStore synthetic_store(const DatasetManifest& dataset, const SynthEmbedOptions& options) {
  EmbeddingStore store(options.dims);
  for (const auto& r : dataset.records)
    store.add(r.id, r.degraded_path, r.labels, synth_embed(r.mixture, options, r.id));
  return store;
}

EmbeddingStore synthetic_store(const std::vector<Sample>& samples, const SynthEmbedOptions& options) {
  EmbeddingStore store(options.dims);
  for (const auto& s : samples)
    store.add(s.id, "degraded/" + s.id + ".ppm", s.labels, synth_embed(s.mixture, options, s.id));
  return store;
}

// --------------------------------------------------------------------- config

void TrainConfig::validate() const {
  model.validate();
  schedule.validate();
  loss.validate();
  if (!(lr > 0)) throw ConfigError("lr must be positive");
  if (!(grad_clip >= 0)) throw ConfigError("grad_clip must be >= 0");
  if (max_steps && *max_steps == 0) throw ConfigError("max_steps must be positive");
}

json TrainConfig::to_json() const {
  json j{{"model", model.to_json()},
         {"schedule", schedule.to_json()},
         {"loss", {{"lambda_mgl", loss.lambda_mgl}, {"alpha_freq", loss.alpha_freq}}},
         {"lr", lr},
         {"grad_clip", grad_clip},
         {"no_mgl", no_mgl},
         {"seed", seed},
         {"checkpoints", checkpoints}};
  if (max_steps) j["max_steps"] = *max_steps;
  return j;
}

TrainConfig TrainConfig::from_json(const json& j) {
  TrainConfig c;
  try {
    if (j.contains("model")) c.model = ModelConfig::from_json(j.at("model"));
    if (j.contains("schedule")) c.schedule = StageSchedule::from_json(j.at("schedule"));
    if (j.contains("loss")) {
      c.loss.lambda_mgl = j.at("loss").value("lambda_mgl", c.loss.lambda_mgl);
      c.loss.alpha_freq = j.at("loss").value("alpha_freq", c.loss.alpha_freq);
    }
    c.lr = j.value("lr", c.lr);
    if (j.contains("max_steps")) c.max_steps = j.at("max_steps").get<std::size_t>();
    c.grad_clip = j.value("grad_clip", c.grad_clip);
    c.no_mgl = j.value("no_mgl", c.no_mgl);
    c.seed = j.value("seed", c.seed);
    c.checkpoints = j.value("checkpoints", c.checkpoints);
  } catch (const json::exception& e) {
    throw ConfigError(std::string("train config: ") + e.what());
  }
  c.validate();
  return c;
}

// ------------------------------------------------------------------- training

std::string log_csv(const std::vector<LogRow>& log) {
  std::string out = "step,stage,lr,rec,mgl,total\n";
  char line[160];
  for (const auto& r : log) {
    std::snprintf(line, sizeof line, "%zu,%zu,%.9g,%.9g,%.9g,%.9g\n", r.step, r.stage, static_cast<double>(r.lr),
                  static_cast<double>(r.rec), static_cast<double>(r.mgl), static_cast<double>(r.total));
    out += line;
  }
  return out;
}

std::size_t steps_per_epoch(std::size_t dataset_size, std::size_t batch_size) {
  return std::max<std::size_t>(1, dataset_size / batch_size);
}

std::size_t planned_steps(const TrainConfig& cfg, std::size_t dataset_size) {
  std::size_t total = 0;
  for (const auto& s : cfg.schedule.stages)
    total += (s.epoch_end - s.epoch_start) * steps_per_epoch(dataset_size, s.batch_size);
  return cfg.max_steps ? std::min(total, *cfg.max_steps) : total;
}

namespace {

struct Patch {
  Tensor<float> degraded, clean;
};

Patch sample_patch(const TrainItem& item, std::size_t patch, Rng& rng) {
  Image deg = item.degraded, clean = item.clean;
  if (deg.height < patch || deg.width < patch) {
    const std::size_t pb = patch > deg.height ? patch - deg.height : 0;
    const std::size_t pr = patch > deg.width ? patch - deg.width : 0;
    deg = reflect_pad(deg, pb, pr);
    clean = reflect_pad(clean, pb, pr);
  }
  const std::size_t y0 = rng.below(deg.height - patch + 1);
  const std::size_t x0 = rng.below(deg.width - patch + 1);
  deg = crop(deg, y0, x0, patch, patch);
  clean = crop(clean, y0, x0, patch, patch);
  if (rng.coin()) {
    deg = flip_horizontal(deg);
    clean = flip_horizontal(clean);
  }
  return {to_tensor<float>(deg), to_tensor<float>(clean)};
}

Matrix answer_matrix(const std::vector<const GuidanceTriplet*>& batch) {
  Matrix e;
  e.rows = batch.size();
  e.cols = batch.front()->e_answer.size();
  for (const auto* g : batch) e.data.insert(e.data.end(), g->e_answer.begin(), g->e_answer.end());
  return e;
}

// Mean over sites of L_MGL; per-site weights are [N] tensors, one per sample.
Tensor<float> site_mgl(const Matrix& e, const std::vector<std::vector<Tensor<float>>>& per_site, bool detached) {
  if (per_site.empty()) return Tensor<float>::scalar(0.0f);
  std::vector<Tensor<float>> terms;
  for (const auto& ws : per_site) {
    std::vector<Tensor<float>> rows;
    for (const auto& w : ws) {
      auto src = detached ? w.detach() : w;
      rows.push_back(reshape(src, {1, src.numel()}));
    }
    terms.push_back(mgl_loss(e, rows.size() == 1 ? rows[0] : concat(rows, 0)));
  }
  auto total = terms.size() == 1 ? terms[0] : add_n(terms);
  return scale(total, 1.0f / static_cast<float>(terms.size()));
}

void write_text(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw DataError("cannot write '" + path + "'");
  out << text;
}

}  // namespace

TrainResult train(const TrainConfig& cfg, const std::vector<TrainItem>& data) {
  cfg.validate();
  return train(cfg, data, RestorationModel<float>::build(cfg.model, stream_seed(cfg.seed, "init")));
}

TrainResult train(const TrainConfig& cfg, const std::vector<TrainItem>& data, RestorationModel<float> model) {
  cfg.validate();
  if (data.empty()) throw DataError("train: empty dataset");
  const auto& mc = model.config();
  for (const auto& item : data) {
    const auto& g = item.guidance;
    if (g.e_image.size() != mc.dim_image || g.e_joint.size() != mc.dim_joint || g.e_answer.size() != mc.dim_answer) {
      throw DataError("train: embedding dims of '" + item.id + "' do not match the model");
    }
  }
  if (!cfg.out_dir.empty()) fs::create_directories(cfg.out_dir);

  TrainResult result{std::move(model), {}, {}};
  auto& net = result.model;
  Adam<float> adam(net.parameters());
  Rng rng(stream_seed(cfg.seed, "batches"));
  const std::size_t total = planned_steps(cfg, data.size());
  const bool detach_mgl = cfg.no_mgl || cfg.loss.lambda_mgl == 0.0;
  const std::size_t sites = mc.enabled_sites();

  std::vector<std::size_t> order(data.size());
  std::size_t step = 0;
  for (std::size_t si = 0; si < cfg.schedule.stages.size() && step < total; ++si) {
    const Stage& stage = cfg.schedule.stages[si];
    const std::size_t spe = steps_per_epoch(data.size(), stage.batch_size);
    for (std::size_t epoch = stage.epoch_start; epoch < stage.epoch_end && step < total; ++epoch) {
      for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
      for (std::size_t i = order.size(); i > 1; --i) std::swap(order[i - 1], order[rng.below(i)]);
      for (std::size_t b = 0; b < spe && step < total; ++b, ++step) {
        net.zero_grad();
        std::vector<Tensor<float>> preds, targets;
        std::vector<std::vector<Tensor<float>>> weights(sites);
        std::vector<const GuidanceTriplet*> guid;
        for (std::size_t k = 0; k < stage.batch_size; ++k) {
          const TrainItem& item = data[order[(b * stage.batch_size + k) % order.size()]];
          auto patch = sample_patch(item, stage.patch_size, rng);
          auto out = net.forward(patch.degraded, GuidanceTensors<float>::from(item.guidance));
          preds.push_back(out.restored);
          targets.push_back(patch.clean);
          for (std::size_t s = 0; s < sites; ++s) weights[s].push_back(out.router_weights[s]);
          guid.push_back(&item.guidance);
        }
        auto rec = rec_loss(preds, targets, cfg.loss.alpha_freq);
        Tensor<float> mgl, objective;
        if (detach_mgl) {
          NoGradGuard guard;
          mgl = site_mgl(answer_matrix(guid), weights, true);
          objective = rec;
        } else {
          mgl = site_mgl(answer_matrix(guid), weights, false);
          objective = total_loss(rec, mgl, cfg.loss);
        }
        objective.backward();
        if (cfg.grad_clip > 0) clip_grad_norm(net.parameters(), cfg.grad_clip);
        const double lr = cosine_lr(step, total, cfg.lr);
        adam.step(lr);
        result.log.push_back({step, si, static_cast<float>(lr), rec.item(), mgl.item(), objective.item()});
      }
    }
    if (!cfg.out_dir.empty() && cfg.checkpoints && step < total) {
      const auto path = cfg.out_dir + "/stage" + std::to_string(si) + ".ckpt";
      save_checkpoint(path, net);
      result.checkpoints.push_back(path);
    }
  }
  if (!cfg.out_dir.empty()) {
    if (cfg.checkpoints) {
      const auto path = cfg.out_dir + "/final.ckpt";
      save_checkpoint(path, net);
      result.checkpoints.push_back(path);
    }
    write_text(cfg.out_dir + "/log.csv", log_csv(result.log));
  }
  return result;
}

// ----------------------------------------------------------------- evaluation

Image restore(const RestorationModel<float>& model, const Image& degraded, const GuidanceTriplet& g) {
  NoGradGuard guard;
  const std::size_t pb = (8 - degraded.height % 8) % 8, pr = (8 - degraded.width % 8) % 8;
  const Image padded = reflect_pad(degraded, pb, pr);
  const auto out = model.forward(to_tensor<float>(padded), GuidanceTensors<float>::from(g));
  return clamp01(crop(to_image(out.restored), 0, 0, degraded.height, degraded.width));
}

EvalReport summarize(std::vector<EvalRow> rows) {
  EvalReport report;
  std::map<std::string, std::size_t> index;
  for (const auto& r : rows) {
    auto [it, fresh] = index.try_emplace(r.group, report.groups.size());
    if (fresh) report.groups.push_back({r.group, 0, 0, 0});
    auto& g = report.groups[it->second];
    ++g.count;
    g.psnr_db += r.psnr_db;
    g.ssim += r.ssim;
    ++report.overall.count;
    report.overall.psnr_db += r.psnr_db;
    report.overall.ssim += r.ssim;
  }
  for (auto& g : report.groups) {
    g.psnr_db /= static_cast<double>(g.count);
    g.ssim /= static_cast<double>(g.count);
  }
  report.overall.group = "all";
  if (report.overall.count) {
    report.overall.psnr_db /= static_cast<double>(report.overall.count);
    report.overall.ssim /= static_cast<double>(report.overall.count);
  }
  report.rows = std::move(rows);
  return report;
}

std::string EvalReport::csv() const {
  std::string out = "sample_id,group,labels,psnr_db,ssim\n";
  char line[512];
  for (const auto& r : rows) {
    std::snprintf(line, sizeof line, "%s,%s,%s,%.17g,%.17g\n", r.id.c_str(), r.group.c_str(), r.labels.c_str(),
                  r.psnr_db, r.ssim);
    out += line;
  }
  for (const auto& g : groups) {
    std::snprintf(line, sizeof line, "avg:%s,%s,,%.17g,%.17g\n", g.group.c_str(), g.group.c_str(), g.psnr_db, g.ssim);
    out += line;
  }
  std::snprintf(line, sizeof line, "avg:all,all,,%.17g,%.17g\n", overall.psnr_db, overall.ssim);
  out += line;
  return out;
}

namespace {

std::string group_of(const TrainItem& item) {
  if (!item.combo.empty()) return item.combo;
  return item.labels.empty() ? "clean" : join_labels(item.labels);
}

}  // namespace

EvalReport evaluate(const RestorationModel<float>& model, const std::vector<TrainItem>& data) {
  std::vector<EvalRow> rows;
  for (const auto& item : data) {
    const Image out = restore(model, item.degraded, item.guidance);
    rows.push_back({item.id, group_of(item), join_labels(item.labels), psnr(out, item.clean), ssim(out, item.clean)});
  }
  return summarize(std::move(rows));
}

EvalReport evaluate_identity(const std::vector<TrainItem>& data) {
  std::vector<EvalRow> rows;
  for (const auto& item : data) {
    rows.push_back({item.id, group_of(item), join_labels(item.labels), psnr(item.degraded, item.clean),
                    ssim(item.degraded, item.clean)});
  }
  return summarize(std::move(rows));
}

// --------------------------------------------------------------- router dumps

namespace {

std::size_t site_divisor(const std::string& site) {
  for (std::size_t i = 0; i < kMofeSiteCount; ++i) {
    if (site == kMofeSiteNames[i]) return std::array<std::size_t, kMofeSiteCount>{2, 4, 8, 8, 4, 2}[i];
  }
  throw ContractError("unknown mofe site '" + site + "'");
}

std::string similarity_rows(const std::string& name, const Matrix& sim, const std::vector<std::string>& ids) {
  std::string out;
  char cell[40];
  for (std::size_t r = 0; r < sim.rows; ++r) {
    out += name + "," + ids[r];
    for (std::size_t c = 0; c < sim.cols; ++c) {
      std::snprintf(cell, sizeof cell, ",%.9g", sim(r, c));
      out += cell;
    }
    out += '\n';
  }
  return out;
}

}  // namespace

RouterDump router_dump(const RestorationModel<float>& model, const std::vector<TrainItem>& items) {
  if (items.empty()) throw DataError("router_dump: no samples");
  NoGradGuard guard;
  const auto sites = model.mofe_modules();
  RouterDump dump;
  std::vector<std::string> ids;
  Matrix e;
  std::vector<Matrix> s(sites.size());
  const std::size_t n = model.config().num_experts;
  dump.weights_csv = "sample_id,site";
  for (std::size_t i = 0; i < n; ++i) dump.weights_csv += ",w" + std::to_string(i);
  dump.weights_csv += '\n';
  dump.energy_csv = "sample_id,site,expert,energy\n";
  char cell[64];
  for (const auto& item : items) {
    ids.push_back(item.id);
    const auto g = GuidanceTensors<float>::from(item.guidance);
    e.rows++;
    e.cols = item.guidance.e_answer.size();
    e.data.insert(e.data.end(), item.guidance.e_answer.begin(), item.guidance.e_answer.end());
    Image padded;
    Tensor<float> deg;
    if (!item.degraded.data.empty()) {
      padded = reflect_pad(item.degraded, (8 - item.degraded.height % 8) % 8, (8 - item.degraded.width % 8) % 8);
      deg = to_tensor<float>(padded);
    }
    for (std::size_t k = 0; k < sites.size(); ++k) {
      const auto w = sites[k]->route(g.answer);
      dump.weights_csv += item.id + "," + sites[k]->site();
      s[k].rows++;
      s[k].cols = w.numel();
      for (float v : w.values()) {
        std::snprintf(cell, sizeof cell, ",%.9g", static_cast<double>(v));
        dump.weights_csv += cell;
        s[k].data.push_back(v);
      }
      dump.weights_csv += '\n';
      if (!deg.defined()) continue;
      const std::size_t div = site_divisor(sites[k]->site());
      const auto hf = sites[k]->high_frequency(deg, padded.height / div, padded.width / div);
      const auto outs = sites[k]->expert_outputs(hf);
      for (std::size_t x = 0; x < outs.size(); ++x) {
        double sq = 0;
        for (float v : outs[x].values()) sq += static_cast<double>(v) * v;
        std::snprintf(cell, sizeof cell, ",%zu,%.9g\n", x, std::sqrt(sq));
        dump.energy_csv += item.id + "," + sites[k]->site() + cell;
      }
    }
  }
  dump.similarity_csv = "matrix,row_id";
  for (const auto& id : ids) dump.similarity_csv += "," + id;
  dump.similarity_csv += '\n';
  dump.similarity_csv += similarity_rows("answer", pairwise_cosine(e), ids);
  for (std::size_t k = 0; k < sites.size(); ++k)
    dump.similarity_csv += similarity_rows("router:" + sites[k]->site(), pairwise_cosine(s[k]), ids);
  return dump;
}

AlignmentResult align_router(MofeModule<float>& site, const std::vector<GuidanceTriplet>& batch,
                             std::size_t steps, double lr) {
  if (batch.empty()) throw DataError("align_router: empty batch");
  Matrix e;
  e.rows = batch.size();
  e.cols = batch.front().e_answer.size();
  std::vector<Tensor<float>> answers;
  for (const auto& g : batch) {
    e.data.insert(e.data.end(), g.e_answer.begin(), g.e_answer.end());
    answers.push_back(Tensor<float>::from_data({g.e_answer.size()}, g.e_answer));
  }
  auto loss = [&] {
    std::vector<Tensor<float>> rows;
    for (const auto& a : answers) rows.push_back(reshape(site.route(a), {1, site.num_experts()}));
    return mgl_loss(e, concat(rows, 0));
  };
  Tensor<float> router = site.router();
  Adam<float> adam({{site.site() + ".router", router}});
  AlignmentResult result;
  for (std::size_t i = 0; i < steps; ++i) {
    router.zero_grad();
    auto l = loss();
    result.history.push_back(l.item());
    l.backward();
    adam.step(lr);
  }
  {
    NoGradGuard guard;
    result.history.push_back(loss().item());
  }
  result.initial = result.history.front();
  result.final = result.history.back();
  return result;
}

double batch_mgl(const RestorationModel<float>& model, const std::vector<GuidanceTriplet>& batch) {
  if (batch.empty()) throw DataError("batch_mgl: empty batch");
  NoGradGuard guard;
  std::vector<const GuidanceTriplet*> ptrs;
  for (const auto& g : batch) ptrs.push_back(&g);
  const auto sites = model.mofe_modules();
  std::vector<std::vector<Tensor<float>>> weights(sites.size());
  for (const auto& g : batch) {
    const auto a = Tensor<float>::from_data({g.e_answer.size()}, g.e_answer);
    for (std::size_t k = 0; k < sites.size(); ++k) weights[k].push_back(sites[k]->route(a));
  }
  return site_mgl(answer_matrix(ptrs), weights, true).item();
}

template class Adam<float>;
template class Adam<double>;
template double clip_grad_norm(const std::vector<Parameter<float>>&, double);
template double clip_grad_norm(const std::vector<Parameter<double>>&, double);

}  // namespace mofe
