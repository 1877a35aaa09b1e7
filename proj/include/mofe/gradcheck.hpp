// Copyright 2026 The mofe-restore Authors
// SPDX-License-Identifier: Apache-2.0

// Central finite-difference verification of every differentiable op and
// block, run in double precision at small sizes.

#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "mofe/tensor.hpp"

namespace mofe {

struct GradcheckOptions {
  double step = 1e-5;
  double tolerance = 1e-4;        // on |analytic - numeric| / max(1, |numeric|)
  std::size_t samples_per_tensor = 6;
  std::uint64_t seed = 0;
  bool include_backbone = true;   // toy-profile network at 16x16
};

struct GradcheckRow {
  std::string name;
  std::size_t tensors = 0;
  std::size_t entries = 0;
  double max_rel_error = 0;
  bool passed = false;
  double seconds = 0;
};

// Checks d(loss)/d(t) for each target against central differences at up to
// `samples` randomly chosen entries of each target.
GradcheckRow check_gradients(const std::string& name, const std::function<Tensor<double>()>& loss,
                             const std::vector<Tensor<double>>& targets, const GradcheckOptions& options);

std::vector<GradcheckRow> run_gradcheck(const GradcheckOptions& options = {});
std::string gradcheck_table(const std::vector<GradcheckRow>& rows);

}  // namespace mofe
