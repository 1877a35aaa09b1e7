// Copyright 2026 The mofe-restore Authors
// SPDX-License-Identifier: Apache-2.0

// Per-image guidance embeddings and the on-disk store shared with external
// extractors.
//
// Store layout (a directory):
//   manifest.json  {"version": 1, "dim_image", "dim_joint", "dim_answer",
//                   "count", "dtype": "f32le",
//                   "records": [{"id", "image_path", "labels", "byte_offset"}]}
//   payload.bin    count records of little-endian float32, each
//                  E_image then E_joint then E_answer, no padding.
// Unknown manifest keys (e.g. "model") are preserved but not interpreted.

#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <string>
#include <unordered_map>
#include <vector>

#include <nlohmann/json.hpp>

namespace mofe {

struct GuidanceTriplet {
  std::vector<float> e_image;
  std::vector<float> e_joint;
  std::vector<float> e_answer;
};

struct EmbeddingDims {
  std::size_t image = 64, joint = 64, answer = 64;
  std::size_t total() const { return image + joint + answer; }
};

// Degradation intensities for (low-light, haze, rain, snow, noise), each in
// [0, 1]. All zero means clean.
struct MixtureVector {
  std::array<double, 5> intensity{};
  bool clean() const;
};

struct StoreRecord {
  std::string id;
  std::string image_path;
  std::vector<std::string> labels;
  std::uint64_t byte_offset = 0;
};

class EmbeddingStore {
 public:
  EmbeddingStore() = default;
  explicit EmbeddingStore(EmbeddingDims dims) : dims_(dims) {}

  // Throws DataError on a duplicate id or wrong dimensions.
  void add(const std::string& id, const std::string& image_path,
           const std::vector<std::string>& labels, const GuidanceTriplet& g);

  const EmbeddingDims& dims() const { return dims_; }
  std::size_t size() const { return records_.size(); }
  const std::vector<StoreRecord>& records() const { return records_; }
  bool contains(const std::string& id) const { return index_.count(id) != 0; }
  // Throws DataError for an unknown id.
  GuidanceTriplet triplet(const std::string& id) const;
  const std::vector<float>& payload() const { return payload_; }
  nlohmann::json& extra() { return extra_; }
  const nlohmann::json& extra() const { return extra_; }

  // Writes manifest.json and payload.bin into `dir` (created if missing).
  void write(const std::string& dir) const;
  // Validates the manifest against the payload before returning; throws
  // LoadError with a kind per failure.
  static EmbeddingStore read(const std::string& dir);

 private:
  EmbeddingDims dims_;
  std::vector<StoreRecord> records_;
  std::vector<float> payload_;
  std::unordered_map<std::string, std::size_t> index_;
  nlohmann::json extra_ = nlohmann::json::object();
};

inline void write_store(const std::string& dir, const EmbeddingStore& store) { store.write(dir); }
inline EmbeddingStore read_store(const std::string& dir) { return EmbeddingStore::read(dir); }

struct SynthEmbedOptions {
  EmbeddingDims dims;
  std::uint64_t seed = 0;
  double noise_sigma = 0.01;
};

// Deterministic stand-in for multimodal embeddings: for each role,
// normalize(M_role * mix + eps), with M_role a Gaussian [D x 5] matrix drawn
// from `seed` and eps ~ N(0, sigma^2) drawn from a stream keyed by
// (seed, sample_id, role). A clean mixture maps to the reserved unit
// direction e_0 before noise is added.
GuidanceTriplet synth_embed(const MixtureVector& mix, const SynthEmbedOptions& options,
                            const std::string& sample_id);

struct Matrix {
  std::size_t rows = 0, cols = 0;
  std::vector<double> data;
  double operator()(std::size_t r, std::size_t c) const { return data[r * cols + c]; }
  double& operator()(std::size_t r, std::size_t c) { return data[r * cols + c]; }
};

// Cosine similarity between every pair of rows. Throws ContractError on a
// zero row, naming its index.
Matrix pairwise_cosine(const Matrix& rows);

}  // namespace mofe
