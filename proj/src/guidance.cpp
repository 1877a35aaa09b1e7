// Copyright 2026 The mofe-restore Authors
// SPDX-License-Identifier: Apache-2.0

#include "mofe/guidance.hpp"

#include <cmath>
#include <filesystem>
#include <unordered_set>

#include "binary_io.hpp"
#include "mofe/errors.hpp"
#include "mofe/random.hpp"

namespace mofe {

namespace fs = std::filesystem;

namespace {

constexpr int kStoreVersion = 1;
constexpr const char* kManifestName = "manifest.json";
constexpr const char* kPayloadName = "payload.bin";

void require_finite(const std::vector<float>& v, const std::string& what) {
  for (float x : v) {
    if (!std::isfinite(x)) throw DataError(what + " contains a non-finite value");
  }
}

}  // namespace

bool MixtureVector::clean() const {
  for (double v : intensity) {
    if (v != 0.0) return false;
  }
  return true;
}

void EmbeddingStore::add(const std::string& id, const std::string& image_path,
                         const std::vector<std::string>& labels, const GuidanceTriplet& g) {
  if (contains(id)) throw DataError("embedding store: duplicate id '" + id + "'");
  if (g.e_image.size() != dims_.image || g.e_joint.size() != dims_.joint ||
      g.e_answer.size() != dims_.answer) {
    throw DataError("embedding store: record '" + id + "' has dims (" +
                    std::to_string(g.e_image.size()) + "," + std::to_string(g.e_joint.size()) +
                    "," + std::to_string(g.e_answer.size()) + "), store expects (" +
                    std::to_string(dims_.image) + "," + std::to_string(dims_.joint) + "," +
                    std::to_string(dims_.answer) + ")");
  }
  require_finite(g.e_image, "record '" + id + "'");
  require_finite(g.e_joint, "record '" + id + "'");
  require_finite(g.e_answer, "record '" + id + "'");
  StoreRecord rec{id, image_path, labels, payload_.size() * sizeof(float)};
  payload_.insert(payload_.end(), g.e_image.begin(), g.e_image.end());
  payload_.insert(payload_.end(), g.e_joint.begin(), g.e_joint.end());
  payload_.insert(payload_.end(), g.e_answer.begin(), g.e_answer.end());
  index_.emplace(id, records_.size());
  records_.push_back(std::move(rec));
}

GuidanceTriplet EmbeddingStore::triplet(const std::string& id) const {
  auto it = index_.find(id);
  if (it == index_.end()) throw DataError("embedding store: unknown id '" + id + "'");
  const std::size_t base = it->second * dims_.total();
  const float* p = payload_.data() + base;
  GuidanceTriplet g;
  g.e_image.assign(p, p + dims_.image);
  p += dims_.image;
  g.e_joint.assign(p, p + dims_.joint);
  p += dims_.joint;
  g.e_answer.assign(p, p + dims_.answer);
  return g;
}

void EmbeddingStore::write(const std::string& dir) const {
  fs::create_directories(dir);
  nlohmann::json manifest = extra_;
  manifest["version"] = kStoreVersion;
  manifest["dim_image"] = dims_.image;
  manifest["dim_joint"] = dims_.joint;
  manifest["dim_answer"] = dims_.answer;
  manifest["count"] = records_.size();
  manifest["dtype"] = "f32le";
  nlohmann::json recs = nlohmann::json::array();
  for (const auto& r : records_) {
    recs.push_back({{"id", r.id}, {"image_path", r.image_path}, {"labels", r.labels},
                    {"byte_offset", r.byte_offset}});
  }
  manifest["records"] = std::move(recs);
  std::string payload;
  payload.reserve(payload_.size() * 4);
  for (float v : payload_) detail::append_f32le(payload, v);
  detail::write_file((fs::path(dir) / kPayloadName).string(), payload);
  detail::write_file((fs::path(dir) / kManifestName).string(), manifest.dump(1) + "\n");
}

EmbeddingStore EmbeddingStore::read(const std::string& dir) {
  const std::string manifest_path = (fs::path(dir) / kManifestName).string();
  nlohmann::json m;
  try {
    m = nlohmann::json::parse(detail::read_file(manifest_path));
  } catch (const nlohmann::json::exception& e) {
    throw LoadError(LoadErrorKind::kMalformed, manifest_path + ": " + e.what());
  }
  try {
    const int version = m.at("version").get<int>();
    if (version != kStoreVersion) {
      throw LoadError(LoadErrorKind::kVersionMismatch,
                      manifest_path + ": store version " + std::to_string(version) +
                          ", reader supports " + std::to_string(kStoreVersion));
    }
    if (m.at("dtype").get<std::string>() != "f32le") {
      throw LoadError(LoadErrorKind::kMalformed,
                      manifest_path + ": dtype must be f32le, got " + m.at("dtype").dump());
    }
    EmbeddingStore store({m.at("dim_image").get<std::size_t>(), m.at("dim_joint").get<std::size_t>(),
                          m.at("dim_answer").get<std::size_t>()});
    const auto count = m.at("count").get<std::size_t>();
    const auto& recs = m.at("records");
    if (recs.size() != count) {
      throw LoadError(LoadErrorKind::kMalformed, manifest_path + ": count " + std::to_string(count) +
                                                     " but " + std::to_string(recs.size()) + " records");
    }
    const std::uint64_t record_bytes = store.dims_.total() * 4;
    std::unordered_set<std::string> ids;
    std::vector<StoreRecord> records;
    for (std::size_t i = 0; i < recs.size(); ++i) {
      StoreRecord r;
      r.id = recs[i].at("id").get<std::string>();
      r.image_path = recs[i].value("image_path", std::string());
      r.labels = recs[i].value("labels", std::vector<std::string>{});
      r.byte_offset = recs[i].at("byte_offset").get<std::uint64_t>();
      if (!ids.insert(r.id).second) {
        throw LoadError(LoadErrorKind::kDuplicateId, manifest_path + ": duplicate id '" + r.id + "'");
      }
      if (r.byte_offset != i * record_bytes) {
        throw LoadError(LoadErrorKind::kMalformed,
                        manifest_path + ": record '" + r.id + "' byte_offset " +
                            std::to_string(r.byte_offset) + ", expected " +
                            std::to_string(i * record_bytes));
      }
      records.push_back(std::move(r));
    }
    const std::string payload_path = (fs::path(dir) / kPayloadName).string();
    const std::string bytes = detail::read_file(payload_path);
    const std::uint64_t expected = count * record_bytes;
    if (bytes.size() < expected) {
      throw LoadError(LoadErrorKind::kTruncatedPayload,
                      payload_path + ": truncated payload, expected " + std::to_string(expected) +
                          " bytes, found " + std::to_string(bytes.size()));
    }
    if (bytes.size() > expected) {
      throw LoadError(LoadErrorKind::kMalformed,
                      payload_path + ": payload has " + std::to_string(bytes.size()) +
                          " bytes, expected " + std::to_string(expected));
    }
    store.payload_.resize(expected / 4);
    for (std::size_t i = 0; i < store.payload_.size(); ++i) {
      store.payload_[i] = detail::read_f32le(bytes.data() + 4 * i);
      if (!std::isfinite(store.payload_[i])) {
        throw LoadError(LoadErrorKind::kMalformed,
                        payload_path + ": non-finite value in record '" +
                            records[i / store.dims_.total()].id + "'");
      }
    }
    for (std::size_t i = 0; i < records.size(); ++i) store.index_.emplace(records[i].id, i);
    store.records_ = std::move(records);
    for (const auto& [key, value] : m.items()) {
      static const std::unordered_set<std::string> known{
          "version", "dim_image", "dim_joint", "dim_answer", "count", "dtype", "records"};
      if (!known.count(key)) store.extra_[key] = value;
    }
    return store;
  } catch (const nlohmann::json::exception& e) {
    throw LoadError(LoadErrorKind::kMalformed, manifest_path + ": " + e.what());
  }
}

GuidanceTriplet synth_embed(const MixtureVector& mix, const SynthEmbedOptions& options,
                            const std::string& sample_id) {
  const EmbeddingDims& dims = options.dims;
  if (dims.image < 5 || dims.joint < 5 || dims.answer < 5) {
    throw ConfigError("synth_embed: every embedding dimension must be >= 5");
  }
  static constexpr std::array<const char*, 3> kRoles = {"image", "joint", "answer"};
  const std::array<std::size_t, 3> role_dims = {dims.image, dims.joint, dims.answer};
  std::array<std::vector<float>, 3> out;
  for (std::size_t role = 0; role < 3; ++role) {
    const std::size_t d = role_dims[role];
    Rng matrix_rng(stream_seed(options.seed, std::string("matrix:") + kRoles[role]));
    std::vector<double> m(d * 5);
    for (auto& v : m) v = matrix_rng.normal();
    std::vector<double> v(d, 0.0);
    if (mix.clean()) {
      v[0] = 1.0;
    } else {
      for (std::size_t r = 0; r < d; ++r)
        for (std::size_t c = 0; c < 5; ++c) v[r] += m[r * 5 + c] * mix.intensity[c];
    }
    if (options.noise_sigma > 0) {
      Rng noise_rng(stream_seed(options.seed, std::string("noise:") + kRoles[role] + ":" + sample_id));
      for (auto& x : v) x += options.noise_sigma * noise_rng.normal();
    }
    double norm = 0;
    for (double x : v) norm += x * x;
    norm = std::sqrt(norm);
    out[role].resize(d);
    if (norm == 0.0) {
      out[role][0] = 1.0f;
      continue;
    }
    for (std::size_t r = 0; r < d; ++r) out[role][r] = static_cast<float>(v[r] / norm);
  }
  return {std::move(out[0]), std::move(out[1]), std::move(out[2])};
}

Matrix pairwise_cosine(const Matrix& rows) {
  std::vector<double> norms(rows.rows);
  for (std::size_t i = 0; i < rows.rows; ++i) {
    double ss = 0;
    for (std::size_t c = 0; c < rows.cols; ++c) ss += rows(i, c) * rows(i, c);
    if (ss == 0.0) throw ContractError("pairwise_cosine: row " + std::to_string(i) + " is zero");
    norms[i] = std::sqrt(ss);
  }
  Matrix sim{rows.rows, rows.rows, std::vector<double>(rows.rows * rows.rows)};
  for (std::size_t i = 0; i < rows.rows; ++i) {
    sim(i, i) = 1.0;
    for (std::size_t j = i + 1; j < rows.rows; ++j) {
      double dot = 0;
      for (std::size_t c = 0; c < rows.cols; ++c) dot += rows(i, c) * rows(j, c);
      sim(i, j) = sim(j, i) = dot / (norms[i] * norms[j]);
    }
  }
  return sim;
}

}  // namespace mofe
