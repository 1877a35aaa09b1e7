// Copyright 2026 The mofe-restore Authors
// SPDX-License-Identifier: Apache-2.0

// Network building blocks: channel ("transposed") attention, the gated
// depthwise feed-forward, embedding cross-attention fusion and the
// mixture of high-frequency experts with its sigmoid router.
//
// Every block adds its output to the input through a residual, and exposes
// zero_output_projection() which turns it into an exact passthrough.

#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include "mofe/params.hpp"
#include "mofe/tensor.hpp"

namespace mofe {

template <typename T>
struct Conv2d {
  Tensor<T> weight;
  Tensor<T> bias;
  std::size_t groups = 1;

  static Conv2d make(ParamFactory<T>& pf, const std::string& name, std::size_t cin,
                     std::size_t cout, std::size_t kernel, std::size_t groups = 1);
  Tensor<T> operator()(const Tensor<T>& x) const;
  void zero();
};

template <typename T>
struct LayerNorm {
  Tensor<T> gain;  // starts at 1
  Tensor<T> bias;

  static LayerNorm make(ParamFactory<T>& pf, const std::string& name, std::size_t channels);
  Tensor<T> operator()(const Tensor<T>& x) const;
};

// Multi-Dconv head transposed attention. Attention is C x C' per head,
// computed between L2-normalized rows of Q [C/heads x HW] and K
// [C'/heads x HW], scaled by a learnable per-head temperature stored as a
// log so that it stays positive.
template <typename T>
class MdtaBlock {
 public:
  MdtaBlock() = default;
  MdtaBlock(ParamFactory<T>& pf, const std::string& name, std::size_t channels,
            std::size_t kv_channels, std::size_t heads);

  // q_src + out_proj(attention . V)
  Tensor<T> forward(const Tensor<T>& q_src, const Tensor<T>& kv_src) const;
  // out_proj(attention . V), without the residual.
  Tensor<T> delta(const Tensor<T>& q_src, const Tensor<T>& kv_src) const;
  // Softmax attention per head, each [C/heads x C'/heads].
  std::vector<Tensor<T>> attention(const Tensor<T>& q_src, const Tensor<T>& kv_src) const;

  void zero_output_projection() { out_proj_.zero(); }
  // Zeroes the value projections, so attention . V vanishes.
  void zero_value_path();
  std::size_t heads() const { return heads_; }
  std::size_t channels() const { return channels_; }
  const Tensor<T>& log_temperature() const { return log_temperature_; }
  Conv2d<T>& out_proj() { return out_proj_; }

 private:
  struct Projected {
    Tensor<T> q, k, v;  // [C x HW], [C' x HW], [C' x HW]
  };
  Projected project(const Tensor<T>& q_src, const Tensor<T>& kv_src) const;
  std::vector<Tensor<T>> head_attention(const Projected& p) const;

  std::size_t channels_ = 0, kv_channels_ = 0, heads_ = 1;
  Conv2d<T> q_proj_, q_dw_, k_proj_, k_dw_, v_proj_, v_dw_, out_proj_;
  Tensor<T> log_temperature_;  // [heads]
};

// Gated-dconv feed-forward: x + proj(gelu(a) * b), [a, b] = dw(expand(x)).
template <typename T>
class GdfnBlock {
 public:
  GdfnBlock() = default;
  GdfnBlock(ParamFactory<T>& pf, const std::string& name, std::size_t channels, double gamma);

  Tensor<T> forward(const Tensor<T>& x) const;
  Tensor<T> delta(const Tensor<T>& x) const;
  void zero_output_projection() { proj_out_.zero(); }
  std::size_t hidden() const { return hidden_; }

 private:
  std::size_t hidden_ = 0;
  Conv2d<T> proj_in_, dw_, proj_out_;
};

// Cross-attention from feature pixels (queries) to an embedding that is
// cut into `tokens` keys/values of width D / tokens.
template <typename T>
class MgfbBlock {
 public:
  MgfbBlock() = default;
  MgfbBlock(ParamFactory<T>& pf, const std::string& name, std::size_t channels,
            std::size_t embed_dim, std::size_t tokens);

  Tensor<T> forward(const Tensor<T>& f, const Tensor<T>& e) const;
  Tensor<T> delta(const Tensor<T>& f, const Tensor<T>& e) const;
  Tensor<T> attention(const Tensor<T>& f, const Tensor<T>& e) const;  // [HW x tokens]

  void zero_output_projection();
  void zero_value_projection();
  std::size_t tokens() const { return tokens_; }
  std::size_t embed_dim() const { return embed_dim_; }

 private:
  Tensor<T> queries(const Tensor<T>& f) const;
  Tensor<T> token_matrix(const Tensor<T>& e) const;

  std::size_t channels_ = 0, embed_dim_ = 0, tokens_ = 1, width_ = 0;
  Tensor<T> w_q_, w_k_, w_v_, w_out_;  // [C x d], [D/k x d], [D/k x d], [d x C]
};

template <typename T>
struct FrequencyExpert {
  Conv2d<T> first, second;  // 3x3 -> GELU -> 3x3, width preserved
  Tensor<T> operator()(const Tensor<T>& x) const;
  void zero();
};

template <typename T>
struct MofeOutput {
  Tensor<T> feature;         // [C, H, W]
  Tensor<T> router_weights;  // [N], every entry in (0, 1)
};

// Mixture of frequency experts. The degraded image is resampled to twice the
// feature resolution, Haar-decomposed, and its LH/HL/HH subbands are mixed by
// experts weighted with sigmoid(W_r e_answer). The projected mixture is fused
// into the feature by an MDTA block with the feature as query.
template <typename T>
class MofeModule {
 public:
  MofeModule() = default;
  MofeModule(ParamFactory<T>& pf, const std::string& name, std::size_t channels,
             std::size_t num_experts, std::size_t answer_dim, std::size_t heads,
             std::size_t image_channels = 3);

  MofeOutput<T> forward(const Tensor<T>& f, const Tensor<T>& i_deg, const Tensor<T>& e_answer) const;
  Tensor<T> route(const Tensor<T>& e_answer) const;
  // Concatenated LH, HL, HH of the degraded image at the feature resolution.
  Tensor<T> high_frequency(const Tensor<T>& i_deg, std::size_t height, std::size_t width) const;
  std::vector<Tensor<T>> expert_outputs(const Tensor<T>& f_hf) const;
  Tensor<T> mix(const std::vector<Tensor<T>>& expert_out, const Tensor<T>& weights) const;

  std::size_t num_experts() const { return experts_.size(); }
  std::size_t answer_dim() const { return answer_dim_; }
  const std::string& site() const { return site_; }
  Tensor<T>& router() { return router_; }
  const Tensor<T>& router() const { return router_; }
  std::vector<FrequencyExpert<T>>& experts() { return experts_; }
  Conv2d<T>& projection() { return proj_; }
  MdtaBlock<T>& fusion() { return fusion_; }

  void zero_output_projection() { fusion_.zero_output_projection(); }

 private:
  std::string site_;
  std::size_t image_channels_ = 3, answer_dim_ = 0;
  std::vector<FrequencyExpert<T>> experts_;
  Tensor<T> router_;  // [N x D_answer], no bias
  Conv2d<T> proj_;
  MdtaBlock<T> fusion_;
};

// Pre-norm transformer block: x + MDTA(LN(x)), then + GDFN(LN(x)).
template <typename T>
class TransformerBlock {
 public:
  TransformerBlock() = default;
  TransformerBlock(ParamFactory<T>& pf, const std::string& name, std::size_t channels,
                   std::size_t heads, double gamma);
  Tensor<T> forward(const Tensor<T>& x) const;
  void zero_output_projection();

 private:
  LayerNorm<T> norm1_, norm2_;
  MdtaBlock<T> attn_;
  GdfnBlock<T> ffn_;
};

}  // namespace mofe
