// Copyright 2026 The mofe-restore Authors
// SPDX-License-Identifier: Apache-2.0

// mofe: synthesize data, generate embeddings, train, evaluate and inspect.
//
// Exit codes: 0 success, 1 usage, 2 data or configuration error, 3 internal
// invariant failure (including a failed gradient check).

#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "mofe/degrade.hpp"
#include "mofe/errors.hpp"
#include "mofe/gradcheck.hpp"
#include "mofe/guidance.hpp"
#include "mofe/model.hpp"
#include "mofe/train.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

constexpr int kOk = 0, kUsage = 1, kDataOrConfig = 2, kInternal = 3;

json read_json_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw mofe::ConfigError("cannot open config '" + path + "'");
  try {
    return json::parse(in);
  } catch (const json::exception& e) {
    throw mofe::ConfigError("config '" + path + "': " + e.what());
  }
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw mofe::DataError("cannot write '" + path.string() + "'");
  out << text;
}

std::vector<std::string> split_list(const std::string& s) {
  std::vector<std::string> out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, ',')) {
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

struct Global {
  std::uint64_t seed = 0;
  std::string config;
  json section(const char* name) const {
    if (config.empty()) return json::object();
    const auto doc = read_json_file(config);
    return doc.contains(name) ? doc.at(name) : json::object();
  }
};

struct SynthArgs {
  std::string clean, out;
  std::size_t procedural = 0, per_combo = 2, size = 64;
  std::string combos;
};

int run_synth(const Global& g, const SynthArgs& a) {
  std::string clean = a.clean;
  if (a.procedural > 0) {
    clean = (fs::path(a.out) / "sources").string();
    mofe::write_procedural_corpus(clean, a.procedural, std::max<std::size_t>(a.size * 2, 128), g.seed);
  }
  if (clean.empty()) throw mofe::ConfigError("synth: pass --clean DIR or --procedural N");
  const auto combos = a.combos.empty() ? mofe::default_combos() : split_list(a.combos);
  const auto m = mofe::build_dataset(clean, combos, a.per_combo, a.size, g.seed, a.out);
  std::printf("wrote %zu records to %s\n", m.records.size(), a.out.c_str());
  return kOk;
}

struct EmbedArgs {
  std::string data, out;
  std::size_t dim_image = 64, dim_joint = 64, dim_answer = 64;
  double noise = 0.01;
};

int run_embed(const Global& g, const EmbedArgs& a) {
  const auto dataset = mofe::load_dataset(a.data);
  mofe::SynthEmbedOptions opt{{a.dim_image, a.dim_joint, a.dim_answer}, g.seed, a.noise};
  auto store = mofe::synthetic_store(dataset, opt);
  store.extra()["generator"] = "synthetic";
  store.write(a.out);
  std::printf("wrote %zu embeddings to %s\n", store.size(), a.out.c_str());
  return kOk;
}

struct TrainArgs {
  std::string data, embeddings, out, profile, schedule, init;
  bool no_mgl = false;
  std::optional<double> lambda, alpha, lr, grad_clip;
  std::optional<std::size_t> max_steps;
};

int run_train(const Global& g, const TrainArgs& a) {
  json base = g.section("train");
  if (!base.contains("seed")) base["seed"] = g.seed;
  auto cfg = mofe::TrainConfig::from_json(base);
  if (!a.profile.empty()) cfg.model = mofe::ModelConfig::profile(a.profile);
  if (!a.schedule.empty()) cfg.schedule = mofe::StageSchedule::named(a.schedule);
  if (a.no_mgl) cfg.no_mgl = true;
  if (a.lambda) cfg.loss.lambda_mgl = *a.lambda;
  if (a.alpha) cfg.loss.alpha_freq = *a.alpha;
  if (a.lr) cfg.lr = *a.lr;
  if (a.grad_clip) cfg.grad_clip = *a.grad_clip;
  if (a.max_steps) cfg.max_steps = *a.max_steps;
  cfg.out_dir = a.out;
  cfg.validate();

  const auto dataset = mofe::load_dataset(a.data);
  const auto store = mofe::read_store(a.embeddings);
  const auto items = mofe::attach_embeddings(dataset, store);
  fs::create_directories(a.out);
  write_text(fs::path(a.out) / "config.json", cfg.to_json().dump(2) + "\n");
  std::printf("training on %zu records for %zu steps\n", items.size(), mofe::planned_steps(cfg, items.size()));
  auto result = a.init.empty()
                    ? mofe::train(cfg, items)
                    : mofe::train(cfg, items, mofe::model_from_checkpoint<float>(mofe::load_checkpoint(a.init)));
  if (!result.log.empty()) {
    const auto& last = result.log.back();
    std::printf("final step %zu: rec %.6g mgl %.6g total %.6g\n", last.step, static_cast<double>(last.rec),
                static_cast<double>(last.mgl), static_cast<double>(last.total));
  }
  for (const auto& c : result.checkpoints) std::printf("checkpoint %s\n", c.c_str());
  return kOk;
}

struct EvalArgs {
  std::string data, embeddings, checkpoint, out;
};

int run_eval(const Global&, const EvalArgs& a) {
  const auto dataset = mofe::load_dataset(a.data);
  const auto items = mofe::attach_embeddings(dataset, mofe::read_store(a.embeddings));
  const auto model = mofe::model_from_checkpoint<float>(mofe::load_checkpoint(a.checkpoint));
  const auto report = mofe::evaluate(model, items);
  fs::create_directories(a.out);
  write_text(fs::path(a.out) / "report.csv", report.csv());
  std::printf("overall PSNR %.3f dB, SSIM %.4f over %zu records\n", report.overall.psnr_db, report.overall.ssim,
              report.overall.count);
  return kOk;
}

struct DumpArgs {
  std::string data, embeddings, checkpoint, out, ids;
};

int run_router_dump(const Global&, const DumpArgs& a) {
  const auto store = mofe::read_store(a.embeddings);
  const auto model = mofe::model_from_checkpoint<float>(mofe::load_checkpoint(a.checkpoint));
  std::vector<std::string> ids = split_list(a.ids);
  if (ids.empty())
    for (const auto& r : store.records()) ids.push_back(r.id);
  std::vector<mofe::TrainItem> items;
  std::optional<mofe::DatasetManifest> dataset;
  if (!a.data.empty()) dataset = mofe::load_dataset(a.data);
  for (const auto& id : ids) {
    mofe::TrainItem item;
    item.id = id;
    item.guidance = store.triplet(id);
    if (dataset) {
      const auto it = std::find_if(dataset->records.begin(), dataset->records.end(),
                                   [&](const mofe::DatasetRecord& r) { return r.id == id; });
      if (it == dataset->records.end()) throw mofe::DataError("router-dump: id '" + id + "' not in dataset");
      item.degraded = mofe::read_ppm(dataset->degraded_file(*it));
    }
    items.push_back(std::move(item));
  }
  const auto dump = mofe::router_dump(model, items);
  fs::create_directories(a.out);
  write_text(fs::path(a.out) / "router_weights.csv", dump.weights_csv);
  write_text(fs::path(a.out) / "similarity.csv", dump.similarity_csv);
  if (dataset) write_text(fs::path(a.out) / "expert_energy.csv", dump.energy_csv);
  std::printf("dumped %zu samples x %zu sites to %s\n", items.size(), model.mofe_modules().size(), a.out.c_str());
  return kOk;
}

struct GradcheckArgs {
  std::string profile = "toy";
  bool skip_backbone = false;
};

int run_gradcheck(const Global& g, const GradcheckArgs& a) {
  if (a.profile != "toy") {
    throw mofe::ConfigError("gradcheck: only the toy profile is checked (got '" + a.profile + "')");
  }
  mofe::GradcheckOptions opt;
  opt.seed = g.seed;
  opt.include_backbone = !a.skip_backbone;
  const auto rows = mofe::run_gradcheck(opt);
  std::fputs(mofe::gradcheck_table(rows).c_str(), stdout);
  for (const auto& r : rows)
    if (!r.passed) return kInternal;
  return kOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"mofe: frequency-expert image restoration toolkit"};
  app.require_subcommand(1);
  Global g;
  app.add_option("--seed", g.seed, "Seed for all randomness")->capture_default_str();
  app.add_option("--config", g.config, "JSON config file")->check(CLI::ExistingFile);

  SynthArgs synth;
  auto* s = app.add_subcommand("synth", "Build a degraded dataset from clean images");
  s->add_option("--clean", synth.clean, "Directory of clean .ppm images");
  s->add_option("--procedural", synth.procedural, "Generate N procedural clean images under <out>/sources");
  s->add_option("--out", synth.out, "Output dataset directory")->required();
  s->add_option("--per-combo", synth.per_combo, "Records per combination")->capture_default_str();
  s->add_option("--size", synth.size, "Patch size in pixels")->capture_default_str();
  s->add_option("--combos", synth.combos, "Comma-separated combination codes, e.g. L,H+R,N25");

  EmbedArgs embed;
  auto* e = app.add_subcommand("embed-synthetic", "Write a synthetic embedding store for a dataset");
  e->add_option("--data", embed.data, "Dataset directory")->required();
  e->add_option("--out", embed.out, "Output store directory")->required();
  e->add_option("--dim-image", embed.dim_image)->capture_default_str();
  e->add_option("--dim-joint", embed.dim_joint)->capture_default_str();
  e->add_option("--dim-answer", embed.dim_answer)->capture_default_str();
  e->add_option("--noise", embed.noise, "Per-sample noise sigma")->capture_default_str();

  TrainArgs tr;
  auto* t = app.add_subcommand("train", "Train a restoration model");
  t->add_option("--data", tr.data)->required();
  t->add_option("--embeddings", tr.embeddings)->required();
  t->add_option("--out", tr.out, "Directory for log.csv and checkpoints")->required();
  t->add_option("--profile", tr.profile, "toy or paper");
  t->add_option("--schedule", tr.schedule, "desk, paper-all-in-one or paper-composite");
  t->add_option("--init", tr.init, "Checkpoint to start from");
  t->add_flag("--no-mgl", tr.no_mgl, "Log L_MGL but leave it out of the objective");
  t->add_option("--lambda", tr.lambda);
  t->add_option("--alpha-freq", tr.alpha);
  t->add_option("--lr", tr.lr);
  t->add_option("--grad-clip", tr.grad_clip);
  t->add_option("--max-steps", tr.max_steps);

  EvalArgs ev;
  auto* v = app.add_subcommand("eval", "Score a checkpoint on a dataset");
  v->add_option("--data", ev.data)->required();
  v->add_option("--embeddings", ev.embeddings)->required();
  v->add_option("--checkpoint", ev.checkpoint)->required();
  v->add_option("--out", ev.out)->required();

  DumpArgs dump;
  auto* d = app.add_subcommand("router-dump", "Dump router weights, similarity matrices and expert energies");
  d->add_option("--embeddings", dump.embeddings)->required();
  d->add_option("--checkpoint", dump.checkpoint)->required();
  d->add_option("--out", dump.out)->required();
  d->add_option("--data", dump.data, "Dataset directory, needed for expert energies");
  d->add_option("--ids", dump.ids, "Comma-separated ids (default: all in the store)");

  GradcheckArgs gc;
  auto* c = app.add_subcommand("gradcheck", "Finite-difference check of every block");
  c->add_option("--profile", gc.profile)->capture_default_str();
  c->add_flag("--skip-backbone", gc.skip_backbone);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& err) {
    const int code = app.exit(err);
    return code == 0 ? kOk : kUsage;
  }

  try {
    if (s->parsed()) return run_synth(g, synth);
    if (e->parsed()) return run_embed(g, embed);
    if (t->parsed()) return run_train(g, tr);
    if (v->parsed()) return run_eval(g, ev);
    if (d->parsed()) return run_router_dump(g, dump);
    if (c->parsed()) return run_gradcheck(g, gc);
  } catch (const mofe::ConfigError& err) {
    std::fprintf(stderr, "configuration error: %s\n", err.what());
    return kDataOrConfig;
  } catch (const mofe::DataError& err) {
    std::fprintf(stderr, "data error: %s\n", err.what());
    return kDataOrConfig;
  } catch (const std::exception& err) {
    std::fprintf(stderr, "internal error: %s\n", err.what());
    return kInternal;
  }
  return kUsage;
}
