// Copyright 2026 The mofe-restore Authors
// SPDX-License-Identifier: Apache-2.0

#include "mofe/blocks.hpp"

#include <algorithm>
#include <cmath>

#include "mofe/errors.hpp"
#include "mofe/frequency.hpp"
#include "mofe/ops.hpp"

namespace mofe {

namespace {

template <typename T>
void fill_zero(Tensor<T>& t) {
  if (!t.defined()) return;
  auto d = t.data();
  std::fill(d.begin(), d.end(), T(0));
}

template <typename T>
Tensor<T> flatten_spatial(const Tensor<T>& x) {
  return reshape(x, {x.dim(0), x.dim(1) * x.dim(2)});
}

}  // namespace

template <typename T>
Conv2d<T> Conv2d<T>::make(ParamFactory<T>& pf, const std::string& name, std::size_t cin,
                          std::size_t cout, std::size_t kernel, std::size_t groups) {
  typename ParamFactory<T>::Scope scope(pf, name);
  const std::size_t per_group = cin / groups;
  Conv2d c;
  c.groups = groups;
  c.weight = pf.uniform("weight", {cout, per_group, kernel, kernel}, per_group * kernel * kernel);
  c.bias = pf.zeros("bias", {cout});
  return c;
}

template <typename T>
Tensor<T> Conv2d<T>::operator()(const Tensor<T>& x) const {
  return conv2d(x, weight, bias, groups);
}

template <typename T>
void Conv2d<T>::zero() {
  fill_zero(weight);
  fill_zero(bias);
}

template <typename T>
LayerNorm<T> LayerNorm<T>::make(ParamFactory<T>& pf, const std::string& name, std::size_t channels) {
  typename ParamFactory<T>::Scope scope(pf, name);
  LayerNorm n;
  n.gain = pf.constant("gain", {channels}, T(1));
  n.bias = pf.zeros("bias", {channels});
  return n;
}

template <typename T>
Tensor<T> LayerNorm<T>::operator()(const Tensor<T>& x) const {
  return layer_norm(x, gain, bias);
}

// ---------------------------------------------------------------- MDTA

template <typename T>
MdtaBlock<T>::MdtaBlock(ParamFactory<T>& pf, const std::string& name, std::size_t channels,
                        std::size_t kv_channels, std::size_t heads)
    : channels_(channels), kv_channels_(kv_channels), heads_(heads) {
  if (heads == 0 || channels % heads || kv_channels % heads) {
    throw ConfigError("mdta '" + name + "': channels " + std::to_string(channels) + "/" +
                      std::to_string(kv_channels) + " not divisible by heads " +
                      std::to_string(heads));
  }
  typename ParamFactory<T>::Scope scope(pf, name);
  q_proj_ = Conv2d<T>::make(pf, "q_proj", channels, channels, 1);
  q_dw_ = Conv2d<T>::make(pf, "q_dw", channels, channels, 3, channels);
  k_proj_ = Conv2d<T>::make(pf, "k_proj", kv_channels, kv_channels, 1);
  k_dw_ = Conv2d<T>::make(pf, "k_dw", kv_channels, kv_channels, 3, kv_channels);
  v_proj_ = Conv2d<T>::make(pf, "v_proj", kv_channels, kv_channels, 1);
  v_dw_ = Conv2d<T>::make(pf, "v_dw", kv_channels, kv_channels, 3, kv_channels);
  out_proj_ = Conv2d<T>::make(pf, "out_proj", channels, channels, 1);
  log_temperature_ = pf.zeros("log_temperature", {heads});
}

template <typename T>
typename MdtaBlock<T>::Projected MdtaBlock<T>::project(const Tensor<T>& q_src,
                                                       const Tensor<T>& kv_src) const {
  if (q_src.rank() != 3 || kv_src.rank() != 3 || q_src.dim(1) != kv_src.dim(1) ||
      q_src.dim(2) != kv_src.dim(2)) {
    throw DimensionError("mdta: spatial mismatch between query " + shape_str(q_src.shape()) +
                         " and key/value " + shape_str(kv_src.shape()));
  }
  return {flatten_spatial(q_dw_(q_proj_(q_src))), flatten_spatial(k_dw_(k_proj_(kv_src))),
          flatten_spatial(v_dw_(v_proj_(kv_src)))};
}

template <typename T>
std::vector<Tensor<T>> MdtaBlock<T>::head_attention(const Projected& p) const {
  const std::size_t cq = channels_ / heads_, ck = kv_channels_ / heads_;
  const Tensor<T> temperature = exp(log_temperature_);
  std::vector<Tensor<T>> maps;
  maps.reserve(heads_);
  for (std::size_t h = 0; h < heads_; ++h) {
    auto q = normalize_rows(slice(p.q, 0, h * cq, cq));
    auto k = normalize_rows(slice(p.k, 0, h * ck, ck));
    auto logits = mul_scalar(matmul(q, transpose(k)), slice(temperature, 0, h, 1));
    maps.push_back(softmax(logits, 1));
  }
  return maps;
}

template <typename T>
std::vector<Tensor<T>> MdtaBlock<T>::attention(const Tensor<T>& q_src, const Tensor<T>& kv_src) const {
  return head_attention(project(q_src, kv_src));
}

template <typename T>
Tensor<T> MdtaBlock<T>::delta(const Tensor<T>& q_src, const Tensor<T>& kv_src) const {
  const Projected p = project(q_src, kv_src);
  const auto maps = head_attention(p);
  const std::size_t ck = kv_channels_ / heads_;
  std::vector<Tensor<T>> heads;
  heads.reserve(heads_);
  for (std::size_t h = 0; h < heads_; ++h) {
    heads.push_back(matmul(maps[h], slice(p.v, 0, h * ck, ck)));
  }
  auto merged = heads_ == 1 ? heads[0] : concat(heads, 0);
  return out_proj_(reshape(merged, q_src.shape()));
}

template <typename T>
Tensor<T> MdtaBlock<T>::forward(const Tensor<T>& q_src, const Tensor<T>& kv_src) const {
  return add(q_src, delta(q_src, kv_src));
}

template <typename T>
void MdtaBlock<T>::zero_value_path() {
  v_proj_.zero();
  v_dw_.zero();
}

// ---------------------------------------------------------------- GDFN

template <typename T>
GdfnBlock<T>::GdfnBlock(ParamFactory<T>& pf, const std::string& name, std::size_t channels,
                        double gamma) {
  hidden_ = static_cast<std::size_t>(std::lround(gamma * static_cast<double>(channels)));
  if (hidden_ == 0) throw ConfigError("gdfn '" + name + "': hidden width rounds to zero");
  typename ParamFactory<T>::Scope scope(pf, name);
  proj_in_ = Conv2d<T>::make(pf, "proj_in", channels, 2 * hidden_, 1);
  dw_ = Conv2d<T>::make(pf, "dw", 2 * hidden_, 2 * hidden_, 3, 2 * hidden_);
  proj_out_ = Conv2d<T>::make(pf, "proj_out", hidden_, channels, 1);
}

template <typename T>
Tensor<T> GdfnBlock<T>::delta(const Tensor<T>& x) const {
  auto gates = split(dw_(proj_in_(x)), 0, {hidden_, hidden_});
  return proj_out_(mul(gelu(gates[0]), gates[1]));
}

template <typename T>
Tensor<T> GdfnBlock<T>::forward(const Tensor<T>& x) const {
  return add(x, delta(x));
}

// ---------------------------------------------------------------- MGFB

template <typename T>
MgfbBlock<T>::MgfbBlock(ParamFactory<T>& pf, const std::string& name, std::size_t channels,
                        std::size_t embed_dim, std::size_t tokens)
    : channels_(channels), embed_dim_(embed_dim), tokens_(tokens), width_(channels) {
  if (tokens == 0 || embed_dim % tokens) {
    throw ConfigError("mgfb '" + name + "': embedding dimension " + std::to_string(embed_dim) +
                      " is not divisible by token count " + std::to_string(tokens));
  }
  const std::size_t token_width = embed_dim / tokens;
  typename ParamFactory<T>::Scope scope(pf, name);
  w_q_ = pf.uniform("w_q", {channels, width_}, channels);
  w_k_ = pf.uniform("w_k", {token_width, width_}, token_width);
  w_v_ = pf.uniform("w_v", {token_width, width_}, token_width);
  w_out_ = pf.uniform("w_out", {width_, channels}, width_);
}

template <typename T>
Tensor<T> MgfbBlock<T>::queries(const Tensor<T>& f) const {
  if (f.rank() != 3 || f.dim(0) != channels_) {
    throw DimensionError("mgfb: expected [" + std::to_string(channels_) + ", H, W] feature, got " +
                         shape_str(f.shape()));
  }
  return matmul(transpose(flatten_spatial(f)), w_q_);  // [HW x d]
}

template <typename T>
Tensor<T> MgfbBlock<T>::token_matrix(const Tensor<T>& e) const {
  if (e.numel() != embed_dim_) {
    throw DimensionError("mgfb: embedding has " + std::to_string(e.numel()) + " values, expected " +
                         std::to_string(embed_dim_));
  }
  return reshape(e, {tokens_, embed_dim_ / tokens_});
}

template <typename T>
Tensor<T> MgfbBlock<T>::attention(const Tensor<T>& f, const Tensor<T>& e) const {
  auto q = queries(f);
  auto k = matmul(token_matrix(e), w_k_);
  const T inv_sqrt_d = T(1) / std::sqrt(static_cast<T>(width_));
  return softmax(scale(matmul(q, transpose(k)), inv_sqrt_d), 1);
}

template <typename T>
Tensor<T> MgfbBlock<T>::delta(const Tensor<T>& f, const Tensor<T>& e) const {
  auto weights = attention(f, e);
  auto v = matmul(token_matrix(e), w_v_);
  auto mixed = matmul(matmul(weights, v), w_out_);  // [HW x C]
  return reshape(transpose(mixed), f.shape());
}

template <typename T>
Tensor<T> MgfbBlock<T>::forward(const Tensor<T>& f, const Tensor<T>& e) const {
  return add(f, delta(f, e));
}

template <typename T>
void MgfbBlock<T>::zero_output_projection() {
  fill_zero(w_out_);
}

template <typename T>
void MgfbBlock<T>::zero_value_projection() {
  fill_zero(w_v_);
}

// ---------------------------------------------------------------- MoFE

template <typename T>
Tensor<T> FrequencyExpert<T>::operator()(const Tensor<T>& x) const {
  return second(gelu(first(x)));
}

template <typename T>
void FrequencyExpert<T>::zero() {
  first.zero();
  second.zero();
}

template <typename T>
MofeModule<T>::MofeModule(ParamFactory<T>& pf, const std::string& name, std::size_t channels,
                          std::size_t num_experts, std::size_t answer_dim, std::size_t heads,
                          std::size_t image_channels)
    : site_(name), image_channels_(image_channels), answer_dim_(answer_dim) {
  if (num_experts == 0) throw ConfigError("mofe '" + name + "': needs at least one expert");
  if (answer_dim == 0) throw ConfigError("mofe '" + name + "': answer embedding dimension is zero");
  const std::size_t hf = 3 * image_channels;
  typename ParamFactory<T>::Scope scope(pf, name);
  for (std::size_t i = 0; i < num_experts; ++i) {
    typename ParamFactory<T>::Scope expert_scope(pf, "expert" + std::to_string(i));
    FrequencyExpert<T> e;
    e.first = Conv2d<T>::make(pf, "conv1", hf, hf, 3);
    e.second = Conv2d<T>::make(pf, "conv2", hf, hf, 3);
    experts_.push_back(std::move(e));
  }
  router_ = pf.uniform("router", {num_experts, answer_dim}, answer_dim);
  proj_ = Conv2d<T>::make(pf, "proj", hf, channels, 1);
  fusion_ = MdtaBlock<T>(pf, "fusion", channels, channels, heads);
}

template <typename T>
Tensor<T> MofeModule<T>::route(const Tensor<T>& e_answer) const {
  if (e_answer.numel() != answer_dim_) {
    throw DimensionError("router '" + site_ + "': answer embedding has " +
                         std::to_string(e_answer.numel()) + " values, expected " +
                         std::to_string(answer_dim_));
  }
  auto logits = matmul(router_, reshape(e_answer, {answer_dim_, 1}));
  return sigmoid(reshape(logits, {experts_.size()}));
}

template <typename T>
Tensor<T> MofeModule<T>::high_frequency(const Tensor<T>& i_deg, std::size_t height,
                                        std::size_t width) const {
  if (i_deg.rank() != 3 || i_deg.dim(0) != image_channels_) {
    throw ContractError("mofe '" + site_ + "': degraded image must be [" +
                        std::to_string(image_channels_) + ", H, W], got " + shape_str(i_deg.shape()));
  }
  auto resized = resize_bilinear(i_deg, 2 * height, 2 * width);
  return slice(dwt_haar_stacked(resized), 0, image_channels_, 3 * image_channels_);
}

template <typename T>
std::vector<Tensor<T>> MofeModule<T>::expert_outputs(const Tensor<T>& f_hf) const {
  std::vector<Tensor<T>> out;
  out.reserve(experts_.size());
  for (const auto& e : experts_) out.push_back(e(f_hf));
  return out;
}

template <typename T>
Tensor<T> MofeModule<T>::mix(const std::vector<Tensor<T>>& expert_out, const Tensor<T>& weights) const {
  std::vector<Tensor<T>> terms;
  terms.reserve(expert_out.size());
  for (std::size_t i = 0; i < expert_out.size(); ++i) {
    terms.push_back(mul_scalar(expert_out[i], slice(weights, 0, i, 1)));
  }
  return terms.size() == 1 ? terms[0] : add_n(terms);
}

template <typename T>
MofeOutput<T> MofeModule<T>::forward(const Tensor<T>& f, const Tensor<T>& i_deg,
                                     const Tensor<T>& e_answer) const {
  if (f.rank() != 3) throw DimensionError("mofe: feature must be [C, H, W], got " + shape_str(f.shape()));
  auto f_hf = high_frequency(i_deg, f.dim(1), f.dim(2));
  auto weights = route(e_answer);
  auto mixture = mix(expert_outputs(f_hf), weights);
  auto projected = proj_(mixture);
  return {fusion_.forward(f, projected), weights};
}

// ---------------------------------------------------------------- transformer

template <typename T>
TransformerBlock<T>::TransformerBlock(ParamFactory<T>& pf, const std::string& name,
                                      std::size_t channels, std::size_t heads, double gamma) {
  typename ParamFactory<T>::Scope scope(pf, name);
  norm1_ = LayerNorm<T>::make(pf, "norm1", channels);
  attn_ = MdtaBlock<T>(pf, "attn", channels, channels, heads);
  norm2_ = LayerNorm<T>::make(pf, "norm2", channels);
  ffn_ = GdfnBlock<T>(pf, "ffn", channels, gamma);
}

template <typename T>
Tensor<T> TransformerBlock<T>::forward(const Tensor<T>& x) const {
  auto n1 = norm1_(x);
  auto y = add(x, attn_.delta(n1, n1));
  return add(y, ffn_.delta(norm2_(y)));
}

template <typename T>
void TransformerBlock<T>::zero_output_projection() {
  attn_.zero_output_projection();
  ffn_.zero_output_projection();
}

#define MOFE_INSTANTIATE_BLOCKS(T)     \
  template struct Conv2d<T>;           \
  template struct LayerNorm<T>;        \
  template class MdtaBlock<T>;         \
  template class GdfnBlock<T>;         \
  template class MgfbBlock<T>;         \
  template struct FrequencyExpert<T>;  \
  template class MofeModule<T>;        \
  template class TransformerBlock<T>;

MOFE_INSTANTIATE_BLOCKS(float)
MOFE_INSTANTIATE_BLOCKS(double)

}  // namespace mofe
