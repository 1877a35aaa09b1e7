// Copyright 2026 The mofe-restore Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <stdexcept>
#include <string>

namespace mofe {

// Shapes that do not agree (matmul inner dims, odd sizes for the DWT, ...).
class DimensionError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// A model, loss or schedule configuration that violates its invariants.
class ConfigError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// A caller broke a precondition (backward on a non-scalar, zero row, ...).
class ContractError : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

// Missing ids, unreadable images, inconsistent manifests.
class DataError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

enum class LoadErrorKind { kVersionMismatch, kTruncatedPayload, kDuplicateId, kMalformed };

// Raised by the embedding store and checkpoint readers before any record is
// served.
class LoadError : public DataError {
 public:
  LoadError(LoadErrorKind kind, const std::string& what) : DataError(what), kind_(kind) {}
  LoadErrorKind kind() const noexcept { return kind_; }

 private:
  LoadErrorKind kind_;
};

}  // namespace mofe
