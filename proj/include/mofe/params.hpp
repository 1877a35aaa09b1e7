// Copyright 2026 The mofe-restore Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "mofe/random.hpp"
#include "mofe/tensor.hpp"

namespace mofe {

// Creates and registers trainable tensors in construction order. Weights are
// uniform in +-1/sqrt(fan_in); biases start at zero. Scopes prefix names with
// the module path, e.g. "enc1.block0.attn.q_proj.weight".
template <typename T>
class ParamFactory {
 public:
  explicit ParamFactory(std::uint64_t seed) : rng_(seed) {}

  class Scope {
   public:
    Scope(ParamFactory& f, const std::string& name) : f_(f), saved_(f.prefix_) {
      f_.prefix_ += name + ".";
    }
    ~Scope() { f_.prefix_ = saved_; }
    Scope(const Scope&) = delete;
    Scope& operator=(const Scope&) = delete;

   private:
    ParamFactory& f_;
    std::string saved_;
  };

  Tensor<T> uniform(const std::string& name, const Shape& shape, std::size_t fan_in);
  Tensor<T> constant(const std::string& name, const Shape& shape, T value);
  Tensor<T> zeros(const std::string& name, const Shape& shape) { return constant(name, shape, T(0)); }

  const std::vector<Parameter<T>>& parameters() const { return params_; }
  std::vector<Parameter<T>> take() { return std::move(params_); }

 private:
  Tensor<T> add(const std::string& name, Tensor<T> t);

  Rng rng_;
  std::string prefix_;
  std::vector<Parameter<T>> params_;
};

}  // namespace mofe
