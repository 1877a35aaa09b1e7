// Copyright 2026 The mofe-restore Authors
// SPDX-License-Identifier: Apache-2.0

// Four-level encoder/decoder restoration network.
//
//   patch embed -> [MGFB(E_image) -> blocks] x4 levels with downsampling,
//   MoFE after each downsampler and before each upsampler, decoder levels
//   [blocks -> MGFB(E_joint)] with skip concatenation, a refinement stack and
//   an output conv added to the degraded input.
//
// Downsampling is pixel-unshuffle then a 1x1 conv; upsampling is a 1x1 conv
// then pixel-shuffle.

#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "mofe/blocks.hpp"
#include "mofe/guidance.hpp"
#include "mofe/tensor.hpp"

namespace mofe {

inline constexpr std::size_t kMofeSiteCount = 6;
// Site order used everywhere router weights are listed.
inline constexpr std::array<const char*, kMofeSiteCount> kMofeSiteNames = {
    "mofe_down1", "mofe_down2", "mofe_down3", "mofe_up3", "mofe_up2", "mofe_up1"};

struct ModelConfig {
  std::array<std::size_t, 4> level_blocks{4, 6, 6, 8};
  std::array<std::size_t, 4> level_heads{1, 2, 4, 8};
  std::array<std::size_t, 4> level_dims{48, 96, 192, 384};
  std::size_t refinement_blocks = 4;
  double gdfn_gamma = 2.66;
  std::size_t num_experts = 8;
  std::size_t dim_image = 64, dim_joint = 64, dim_answer = 64;
  std::size_t tokens = 8;
  std::array<bool, kMofeSiteCount> mofe_sites{true, true, true, true, true, true};

  static ModelConfig paper();
  static ModelConfig toy();
  // "paper" or "toy"; throws ConfigError otherwise.
  static ModelConfig profile(const std::string& name);

  // Throws ConfigError naming the first violated field.
  void validate() const;
  std::size_t enabled_sites() const;

  nlohmann::json to_json() const;
  static ModelConfig from_json(const nlohmann::json& j);
};

enum class EmbeddingRole { kImage, kJoint, kAnswer };
const char* role_name(EmbeddingRole role);

struct BlockWiring {
  std::string name;
  EmbeddingRole role;
};

template <typename T>
struct GuidanceTensors {
  Tensor<T> image, joint, answer;
  static GuidanceTensors from(const GuidanceTriplet& g);
};

template <typename T>
struct ForwardResult {
  Tensor<T> restored;                      // [3, H, W], not clamped
  std::vector<Tensor<T>> router_weights;  // one [N] per enabled site, site order
};

template <typename T>
class RestorationModel {
 public:
  static RestorationModel build(const ModelConfig& config, std::uint64_t seed);

  ForwardResult<T> forward(const Tensor<T>& i_deg, const GuidanceTensors<T>& g) const;

  const ModelConfig& config() const { return config_; }
  const std::vector<Parameter<T>>& parameters() const { return params_; }
  void zero_grad();

  // Which embedding each MGFB consumes, in forward order.
  const std::vector<BlockWiring>& mgfb_wiring() const { return wiring_; }
  std::vector<std::string> mofe_site_names() const;
  // Enabled MoFE modules in site order.
  std::vector<const MofeModule<T>*> mofe_modules() const;
  std::vector<MofeModule<T>*> mofe_modules();

  // Zeroes every block's output projection and the output conv.
  void zero_output_projections();

  // Copies values by parameter name; shapes must match exactly.
  void load_values(const std::vector<std::pair<std::string, std::vector<float>>>& values);

 private:
  struct Level {
    MgfbBlock<T> mgfb;
    std::vector<TransformerBlock<T>> blocks;
  };

  Tensor<T> run_blocks(const Level& level, const Tensor<T>& x) const;

  ModelConfig config_;
  Conv2d<T> patch_embed_;
  std::array<Level, 4> encoder_;  // encoder_[3] is the latent level
  std::array<Conv2d<T>, 3> down_;
  std::array<Conv2d<T>, 3> up_;
  std::array<Conv2d<T>, 2> reduce_;  // decoder levels 3 and 2
  std::array<Level, 3> decoder_;     // levels 3, 2, 1
  std::vector<TransformerBlock<T>> refinement_;
  Conv2d<T> output_;
  std::array<std::vector<MofeModule<T>>, kMofeSiteCount> mofe_;  // zero or one per site
  std::vector<BlockWiring> wiring_;
  std::vector<Parameter<T>> params_;
};

// Header magic, uint64 LE header length, JSON header {format, version,
// dtype, config, params: [{name, shape, offset}]}, then the f32le payload in
// header order.
void save_checkpoint(const std::string& path, const ModelConfig& config,
                     const std::vector<std::pair<std::string, std::vector<float>>>& values,
                     const std::vector<Shape>& shapes);
template <typename T>
void save_checkpoint(const std::string& path, const RestorationModel<T>& model);

struct Checkpoint {
  ModelConfig config;
  std::vector<std::pair<std::string, std::vector<float>>> values;
  std::vector<Shape> shapes;
};
Checkpoint load_checkpoint(const std::string& path);

template <typename T>
RestorationModel<T> model_from_checkpoint(const Checkpoint& ckpt);

}  // namespace mofe
