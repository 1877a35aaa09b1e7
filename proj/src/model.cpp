// Copyright 2026 The mofe-restore Authors
// SPDX-License-Identifier: Apache-2.0

#include "mofe/model.hpp"

#include <algorithm>
#include <unordered_map>

#include "binary_io.hpp"
#include "mofe/errors.hpp"
#include "mofe/ops.hpp"

namespace mofe {

namespace {
constexpr char kCheckpointMagic[8] = {'M', 'O', 'F', 'E', 'C', 'K', 'P', '1'};
constexpr int kCheckpointVersion = 1;
}  // namespace

const char* role_name(EmbeddingRole role) {
  switch (role) {
    case EmbeddingRole::kImage: return "image";
    case EmbeddingRole::kJoint: return "joint";
    case EmbeddingRole::kAnswer: return "answer";
  }
  return "?";
}

ModelConfig ModelConfig::paper() { return ModelConfig{}; }

ModelConfig ModelConfig::toy() {
  ModelConfig c;
  c.level_blocks = {1, 1, 1, 1};
  c.level_heads = {1, 1, 2, 2};
  c.level_dims = {8, 16, 32, 64};
  c.refinement_blocks = 1;
  c.gdfn_gamma = 2.0;
  c.num_experts = 4;
  return c;
}

ModelConfig ModelConfig::profile(const std::string& name) {
  if (name == "paper") return paper();
  if (name == "toy") return toy();
  throw ConfigError("unknown model profile '" + name + "' (expected paper or toy)");
}

void ModelConfig::validate() const {
  for (std::size_t i = 0; i < 4; ++i) {
    const std::string at = "[" + std::to_string(i) + "]";
    if (level_dims[i] == 0) throw ConfigError("level_dims" + at + " must be positive");
    if (level_heads[i] == 0) throw ConfigError("level_heads" + at + " must be positive");
    if (level_dims[i] % level_heads[i]) {
      throw ConfigError("level_dims" + at + "=" + std::to_string(level_dims[i]) +
                        " is not divisible by level_heads" + at + "=" + std::to_string(level_heads[i]));
    }
  }
  if (!(gdfn_gamma > 0)) throw ConfigError("gdfn_gamma must be positive");
  if (num_experts < 1) throw ConfigError("num_experts must be >= 1");
  if (tokens == 0) throw ConfigError("tokens must be positive");
  if (dim_image == 0 || dim_image % tokens) {
    throw ConfigError("dim_image=" + std::to_string(dim_image) + " must be a positive multiple of tokens=" +
                      std::to_string(tokens));
  }
  if (dim_joint == 0 || dim_joint % tokens) {
    throw ConfigError("dim_joint=" + std::to_string(dim_joint) + " must be a positive multiple of tokens=" +
                      std::to_string(tokens));
  }
  if (dim_answer == 0) throw ConfigError("dim_answer must be positive");
}

std::size_t ModelConfig::enabled_sites() const {
  return static_cast<std::size_t>(std::count(mofe_sites.begin(), mofe_sites.end(), true));
}

nlohmann::json ModelConfig::to_json() const {
  return {{"level_blocks", level_blocks}, {"level_heads", level_heads},
          {"level_dims", level_dims},     {"refinement_blocks", refinement_blocks},
          {"gdfn_gamma", gdfn_gamma},     {"num_experts", num_experts},
          {"dim_image", dim_image},       {"dim_joint", dim_joint},
          {"dim_answer", dim_answer},     {"tokens", tokens},
          {"mofe_sites", mofe_sites}};
}

ModelConfig ModelConfig::from_json(const nlohmann::json& j) {
  ModelConfig c;
  if (j.contains("profile")) c = profile(j.at("profile").get<std::string>());
  try {
    if (j.contains("level_blocks")) c.level_blocks = j.at("level_blocks").get<std::array<std::size_t, 4>>();
    if (j.contains("level_heads")) c.level_heads = j.at("level_heads").get<std::array<std::size_t, 4>>();
    if (j.contains("level_dims")) c.level_dims = j.at("level_dims").get<std::array<std::size_t, 4>>();
    c.refinement_blocks = j.value("refinement_blocks", c.refinement_blocks);
    c.gdfn_gamma = j.value("gdfn_gamma", c.gdfn_gamma);
    c.num_experts = j.value("num_experts", c.num_experts);
    c.dim_image = j.value("dim_image", c.dim_image);
    c.dim_joint = j.value("dim_joint", c.dim_joint);
    c.dim_answer = j.value("dim_answer", c.dim_answer);
    c.tokens = j.value("tokens", c.tokens);
    if (j.contains("mofe_sites")) c.mofe_sites = j.at("mofe_sites").get<std::array<bool, kMofeSiteCount>>();
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("model config: ") + e.what());
  }
  return c;
}

template <typename T>
GuidanceTensors<T> GuidanceTensors<T>::from(const GuidanceTriplet& g) {
  auto convert = [](const std::vector<float>& v) {
    return Tensor<T>::from_data({v.size()}, std::vector<T>(v.begin(), v.end()));
  };
  return {convert(g.e_image), convert(g.e_joint), convert(g.e_answer)};
}

template <typename T>
RestorationModel<T> RestorationModel<T>::build(const ModelConfig& config, std::uint64_t seed) {
  config.validate();
  RestorationModel m;
  m.config_ = config;
  ParamFactory<T> pf(seed);
  const auto& dims = config.level_dims;
  const auto& heads = config.level_heads;
  const double gamma = config.gdfn_gamma;
  const std::size_t n = config.num_experts;

  auto make_level = [&](const std::string& name, std::size_t channels, std::size_t head_count,
                        std::size_t blocks, std::size_t embed_dim, EmbeddingRole role) {
    Level level;
    typename ParamFactory<T>::Scope scope(pf, name);
    level.mgfb = MgfbBlock<T>(pf, "mgfb", channels, embed_dim, config.tokens);
    for (std::size_t b = 0; b < blocks; ++b) {
      level.blocks.emplace_back(pf, "block" + std::to_string(b), channels, head_count, gamma);
    }
    m.wiring_.push_back({name + ".mgfb", role});
    return level;
  };
  auto make_mofe = [&](std::size_t site, std::size_t channels, std::size_t head_count) {
    if (!config.mofe_sites[site]) return;
    m.mofe_[site].emplace_back(pf, kMofeSiteNames[site], channels, n, config.dim_answer, head_count);
  };

  m.patch_embed_ = Conv2d<T>::make(pf, "patch_embed", 3, dims[0], 3);
  for (std::size_t l = 0; l < 4; ++l) {
    const std::string name = l < 3 ? "enc" + std::to_string(l + 1) : "latent";
    m.encoder_[l] = make_level(name, dims[l], heads[l], config.level_blocks[l], config.dim_image,
                               EmbeddingRole::kImage);
    if (l < 3) {
      m.down_[l] = Conv2d<T>::make(pf, "down" + std::to_string(l + 1), 4 * dims[l], dims[l + 1], 1);
      make_mofe(l, dims[l + 1], heads[l + 1]);
    }
  }
  // Decoder: levels 3, 2, 1. Level 1 keeps the concatenated 2 * dims[0].
  for (std::size_t d = 0; d < 3; ++d) {
    const std::size_t level = 2 - d;  // index into dims of the target level
    const std::size_t site = 3 + d;
    make_mofe(site, dims[level + 1], heads[level + 1]);
    m.up_[d] = Conv2d<T>::make(pf, "up" + std::to_string(level + 1), dims[level + 1], 4 * dims[level], 1);
    std::size_t channels = dims[level];
    if (level > 0) {
      m.reduce_[d] = Conv2d<T>::make(pf, "reduce" + std::to_string(level + 1), 2 * dims[level], dims[level], 1);
    } else {
      channels = 2 * dims[0];
    }
    Level dec;
    {
      typename ParamFactory<T>::Scope scope(pf, "dec" + std::to_string(level + 1));
      for (std::size_t b = 0; b < config.level_blocks[level]; ++b) {
        dec.blocks.emplace_back(pf, "block" + std::to_string(b), channels, heads[level], gamma);
      }
      dec.mgfb = MgfbBlock<T>(pf, "mgfb", channels, config.dim_joint, config.tokens);
    }
    m.wiring_.push_back({"dec" + std::to_string(level + 1) + ".mgfb", EmbeddingRole::kJoint});
    m.decoder_[d] = std::move(dec);
  }
  {
    typename ParamFactory<T>::Scope scope(pf, "refine");
    for (std::size_t b = 0; b < config.refinement_blocks; ++b) {
      m.refinement_.emplace_back(pf, "block" + std::to_string(b), 2 * dims[0], heads[0], gamma);
    }
  }
  m.output_ = Conv2d<T>::make(pf, "output", 2 * dims[0], 3, 3);
  m.params_ = pf.take();
  return m;
}

template <typename T>
Tensor<T> RestorationModel<T>::run_blocks(const Level& level, const Tensor<T>& x) const {
  Tensor<T> y = x;
  for (const auto& b : level.blocks) y = b.forward(y);
  return y;
}

template <typename T>
ForwardResult<T> RestorationModel<T>::forward(const Tensor<T>& i_deg, const GuidanceTensors<T>& g) const {
  if (i_deg.rank() != 3 || i_deg.dim(0) != 3) {
    throw DimensionError("forward: expected a [3, H, W] image, got " + shape_str(i_deg.shape()));
  }
  if (i_deg.dim(1) % 8 || i_deg.dim(2) % 8) {
    throw DimensionError("forward: H and W must be divisible by 8, got " + shape_str(i_deg.shape()) +
                         "; reflect-pad the input to the next multiple of 8 and crop the output");
  }
  ForwardResult<T> result;
  auto apply_mofe = [&](std::size_t site, const Tensor<T>& x) {
    if (mofe_[site].empty()) return x;
    auto out = mofe_[site][0].forward(x, i_deg, g.answer);
    result.router_weights.push_back(out.router_weights);
    return out.feature;
  };

  std::array<Tensor<T>, 3> skips;
  Tensor<T> x = patch_embed_(i_deg);
  for (std::size_t l = 0; l < 4; ++l) {
    x = run_blocks(encoder_[l], encoder_[l].mgfb.forward(x, g.image));
    if (l < 3) {
      skips[l] = x;
      x = apply_mofe(l, down_[l](space_to_depth(x)));
    }
  }
  for (std::size_t d = 0; d < 3; ++d) {
    const std::size_t level = 2 - d;
    x = apply_mofe(3 + d, x);
    x = concat<T>({depth_to_space(up_[d](x)), skips[level]}, 0);
    if (level > 0) x = reduce_[d](x);
    x = decoder_[d].mgfb.forward(run_blocks(decoder_[d], x), g.joint);
  }
  for (const auto& b : refinement_) x = b.forward(x);
  result.restored = add(i_deg, output_(x));
  return result;
}

template <typename T>
void RestorationModel<T>::zero_grad() {
  for (auto& p : params_) p.tensor.zero_grad();
}

template <typename T>
std::vector<std::string> RestorationModel<T>::mofe_site_names() const {
  std::vector<std::string> names;
  for (std::size_t s = 0; s < kMofeSiteCount; ++s) {
    if (!mofe_[s].empty()) names.emplace_back(kMofeSiteNames[s]);
  }
  return names;
}

template <typename T>
std::vector<const MofeModule<T>*> RestorationModel<T>::mofe_modules() const {
  std::vector<const MofeModule<T>*> out;
  for (const auto& site : mofe_) {
    if (!site.empty()) out.push_back(&site[0]);
  }
  return out;
}

template <typename T>
std::vector<MofeModule<T>*> RestorationModel<T>::mofe_modules() {
  std::vector<MofeModule<T>*> out;
  for (auto& site : mofe_) {
    if (!site.empty()) out.push_back(&site[0]);
  }
  return out;
}

template <typename T>
void RestorationModel<T>::zero_output_projections() {
  for (auto& level : encoder_) {
    level.mgfb.zero_output_projection();
    for (auto& b : level.blocks) b.zero_output_projection();
  }
  for (auto& level : decoder_) {
    level.mgfb.zero_output_projection();
    for (auto& b : level.blocks) b.zero_output_projection();
  }
  for (auto& b : refinement_) b.zero_output_projection();
  for (auto& site : mofe_) {
    for (auto& m : site) m.zero_output_projection();
  }
  output_.zero();
}

template <typename T>
void RestorationModel<T>::load_values(
    const std::vector<std::pair<std::string, std::vector<float>>>& values) {
  std::unordered_map<std::string, const std::vector<float>*> by_name;
  for (const auto& [name, v] : values) by_name.emplace(name, &v);
  for (auto& p : params_) {
    auto it = by_name.find(p.name);
    if (it == by_name.end()) throw DataError("checkpoint is missing parameter '" + p.name + "'");
    if (it->second->size() != p.tensor.numel()) {
      throw DataError("checkpoint parameter '" + p.name + "' has " + std::to_string(it->second->size()) +
                      " values, model expects " + std::to_string(p.tensor.numel()));
    }
    auto dst = p.tensor.data();
    std::copy(it->second->begin(), it->second->end(), dst.begin());
  }
  if (by_name.size() != params_.size()) {
    throw DataError("checkpoint has " + std::to_string(by_name.size()) + " parameters, model has " +
                    std::to_string(params_.size()));
  }
}

void save_checkpoint(const std::string& path, const ModelConfig& config,
                     const std::vector<std::pair<std::string, std::vector<float>>>& values,
                     const std::vector<Shape>& shapes) {
  nlohmann::json params = nlohmann::json::array();
  std::string payload;
  for (std::size_t i = 0; i < values.size(); ++i) {
    params.push_back({{"name", values[i].first}, {"shape", shapes[i]}, {"offset", payload.size()}});
    for (float v : values[i].second) detail::append_f32le(payload, v);
  }
  const nlohmann::json header = {{"format", "mofe-checkpoint"},
                                 {"version", kCheckpointVersion},
                                 {"dtype", "f32le"},
                                 {"config", config.to_json()},
                                 {"params", params}};
  const std::string text = header.dump();
  std::string bytes(kCheckpointMagic, sizeof(kCheckpointMagic));
  detail::append_u64le(bytes, text.size());
  bytes += text;
  bytes += payload;
  detail::write_file(path, bytes);
}

template <typename T>
void save_checkpoint(const std::string& path, const RestorationModel<T>& model) {
  std::vector<std::pair<std::string, std::vector<float>>> values;
  std::vector<Shape> shapes;
  for (const auto& p : model.parameters()) {
    values.emplace_back(p.name, std::vector<float>(p.tensor.values().begin(), p.tensor.values().end()));
    shapes.push_back(p.tensor.shape());
  }
  save_checkpoint(path, model.config(), values, shapes);
}

Checkpoint load_checkpoint(const std::string& path) {
  const std::string bytes = detail::read_file(path);
  if (bytes.size() < 16 || !std::equal(kCheckpointMagic, kCheckpointMagic + 8, bytes.begin())) {
    throw LoadError(LoadErrorKind::kMalformed, path + ": not a checkpoint (bad magic)");
  }
  const std::uint64_t header_len = detail::read_u64le(bytes.data() + 8);
  if (16 + header_len > bytes.size()) {
    throw LoadError(LoadErrorKind::kTruncatedPayload, path + ": header runs past end of file");
  }
  Checkpoint ckpt;
  try {
    const auto header = nlohmann::json::parse(bytes.substr(16, header_len));
    if (header.at("version").get<int>() != kCheckpointVersion) {
      throw LoadError(LoadErrorKind::kVersionMismatch, path + ": unsupported checkpoint version");
    }
    ckpt.config = ModelConfig::from_json(header.at("config"));
    const std::size_t base = 16 + header_len;
    for (const auto& p : header.at("params")) {
      const Shape shape = p.at("shape").get<Shape>();
      const std::size_t offset = p.at("offset").get<std::size_t>();
      const std::size_t count = shape_numel(shape);
      if (base + offset + 4 * count > bytes.size()) {
        throw LoadError(LoadErrorKind::kTruncatedPayload,
                        path + ": payload too short for parameter " + p.at("name").get<std::string>());
      }
      std::vector<float> v(count);
      for (std::size_t i = 0; i < count; ++i) v[i] = detail::read_f32le(bytes.data() + base + offset + 4 * i);
      ckpt.values.emplace_back(p.at("name").get<std::string>(), std::move(v));
      ckpt.shapes.push_back(shape);
    }
  } catch (const nlohmann::json::exception& e) {
    throw LoadError(LoadErrorKind::kMalformed, path + ": " + e.what());
  }
  return ckpt;
}

template <typename T>
RestorationModel<T> model_from_checkpoint(const Checkpoint& ckpt) {
  auto model = RestorationModel<T>::build(ckpt.config, 0);
  model.load_values(ckpt.values);
  return model;
}

template struct GuidanceTensors<float>;
template struct GuidanceTensors<double>;
template class RestorationModel<float>;
template class RestorationModel<double>;
template void save_checkpoint(const std::string&, const RestorationModel<float>&);
template void save_checkpoint(const std::string&, const RestorationModel<double>&);
template RestorationModel<float> model_from_checkpoint(const Checkpoint&);
template RestorationModel<double> model_from_checkpoint(const Checkpoint&);

}  // namespace mofe
