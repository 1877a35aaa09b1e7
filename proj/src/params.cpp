// Copyright 2026 The mofe-restore Authors
// SPDX-License-Identifier: Apache-2.0

#include "mofe/params.hpp"

#include <cmath>

#include "mofe/errors.hpp"

namespace mofe {

template <typename T>
Tensor<T> ParamFactory<T>::uniform(const std::string& name, const Shape& shape, std::size_t fan_in) {
  const double bound = 1.0 / std::sqrt(static_cast<double>(fan_in));
  std::vector<T> data(shape_numel(shape));
  for (auto& v : data) v = static_cast<T>(rng_.uniform(-bound, bound));
  return add(name, Tensor<T>::from_data(shape, std::move(data), true));
}

template <typename T>
Tensor<T> ParamFactory<T>::constant(const std::string& name, const Shape& shape, T value) {
  return add(name, Tensor<T>::full(shape, value, true));
}

template <typename T>
Tensor<T> ParamFactory<T>::add(const std::string& name, Tensor<T> t) {
  const std::string full = prefix_ + name;
  for (const auto& p : params_) {
    if (p.name == full) throw ConfigError("duplicate parameter name '" + full + "'");
  }
  params_.push_back({full, t});
  return t;
}

template class ParamFactory<float>;
template class ParamFactory<double>;

}  // namespace mofe
