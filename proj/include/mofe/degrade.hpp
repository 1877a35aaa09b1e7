// Copyright 2026 The mofe-restore Authors
// SPDX-License-Identifier: Apache-2.0

// Composite degradation synthesis and dataset manifests.
//
// A dataset directory holds manifest.json, clean/<id>.ppm and
// degraded/<id>.ppm. Paths in the manifest are relative to the directory.

#pragma once

#include <cstdint>
#include <string>
#include <variant>
#include <vector>

#include <nlohmann/json.hpp>

#include "mofe/guidance.hpp"
#include "mofe/image.hpp"

namespace mofe {

struct LowLight {
  double gamma = 2.5;  // out = in^gamma
};
struct Haze {
  double beta = 1.0;      // t = exp(-beta * depth)
  double airlight = 0.8;  // A
};
struct Rain {
  std::size_t count = 0;
  double length = 10.0;    // pixels
  double angle_deg = 0.0;  // from vertical
  double opacity = 0.4;
};
struct Snow {
  std::size_t count = 0;
  double radius_min = 1.0, radius_max = 2.0;
  double opacity = 0.7;
};
struct GaussNoise {
  double sigma = 25.0;  // in 8-bit units; applied as sigma / 255
};

using DegradationOp = std::variant<LowLight, Haze, Rain, Snow, GaussNoise>;

struct DegradationRecipe {
  std::vector<DegradationOp> ops;  // applied in order
  std::uint64_t seed = 0;
};

// "L", "H", "R", "S" or "N".
std::string op_label(const DegradationOp& op);
std::vector<std::string> recipe_labels(const DegradationRecipe& recipe);
MixtureVector recipe_mixture(const DegradationRecipe& recipe);
nlohmann::json recipe_to_json(const DegradationRecipe& recipe);
DegradationRecipe recipe_from_json(const nlohmann::json& j);

// Throws ContractError if any input value lies outside [0, 1]. The output is
// clipped to [0, 1].
Image apply_recipe(const Image& clean, const DegradationRecipe& recipe);

// A combination code is '+'-joined tokens from {L, H, R, S, N<sigma>},
// e.g. "L+H+R" or "N25". Throws ConfigError on anything else.
struct Combo {
  std::string code;
  std::vector<std::string> labels;
  double noise_sigma = 0;  // only meaningful when labels contain "N"
};
Combo parse_combo(const std::string& code);
// L, H, R, S, L+H, L+R, L+S, H+R, H+S, L+H+R, L+H+S.
std::vector<std::string> standard_combos();
// standard_combos() plus N15, N25, N50.
std::vector<std::string> default_combos();

// Random operator parameters for a combo, scaled to image `size`.
DegradationRecipe sample_recipe(const Combo& combo, std::size_t size, std::uint64_t seed);

// Smooth shapes, gradients and stripes; deterministic in seed.
Image procedural_image(std::size_t size, std::uint64_t seed);
// Writes `count` procedural images as <dir>/clean_NNN.ppm.
void write_procedural_corpus(const std::string& dir, std::size_t count, std::size_t size,
                             std::uint64_t seed);

struct Sample {
  std::string id;
  std::string combo;
  std::vector<std::string> labels;
  DegradationRecipe recipe;
  MixtureVector mixture;
  Image clean;
  Image degraded;
};

// `per_combo` samples per combo with ids "<code>_<index>". Each sample draws
// its source image, crop and recipe from a stream keyed by its id.
std::vector<Sample> synthesize(const std::vector<Image>& sources, const std::vector<std::string>& combos,
                               std::size_t per_combo, std::size_t size, std::uint64_t seed);

struct DatasetRecord {
  std::string id;
  std::string combo;
  std::string clean_path;
  std::string degraded_path;
  std::vector<std::string> labels;
  DegradationRecipe recipe;
  MixtureVector mixture;
};

struct DatasetManifest {
  std::string root;
  std::uint64_t seed = 0;
  std::size_t size = 0;
  std::vector<DatasetRecord> records;

  std::string clean_file(const DatasetRecord& r) const { return root + "/" + r.clean_path; }
  std::string degraded_file(const DatasetRecord& r) const { return root + "/" + r.degraded_path; }
};

// Reads every *.ppm in clean_dir (sorted by name). ConfigError if none.
std::vector<Image> load_clean_dir(const std::string& clean_dir);
DatasetManifest build_dataset(const std::string& clean_dir, const std::vector<std::string>& combos,
                              std::size_t per_combo, std::size_t size, std::uint64_t seed,
                              const std::string& out_dir);
DatasetManifest write_dataset(const std::vector<Sample>& samples, std::size_t size, std::uint64_t seed,
                              const std::string& out_dir);
// Checks unique ids and that every referenced file exists (DataError).
DatasetManifest load_dataset(const std::string& dir);

}  // namespace mofe
