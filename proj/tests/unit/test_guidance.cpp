// Copyright 2026 The mofe-restore Authors
// SPDX-License-Identifier: Apache-2.0

#include <cmath>
#include <filesystem>
#include <fstream>

#include <gtest/gtest.h>
#include <nlohmann/json.hpp>

#include "mofe/errors.hpp"
#include "mofe/guidance.hpp"

using namespace mofe;
namespace fs = std::filesystem;

namespace {

std::string fresh_dir(const std::string& name) {
  const auto p = fs::path(MOFE_TEST_TMP) / name;
  fs::remove_all(p);
  fs::create_directories(p);
  return p.string();
}

GuidanceTriplet triplet(float base, std::size_t d = 8) {
  GuidanceTriplet g;
  for (std::size_t i = 0; i < d; ++i) {
    g.e_image.push_back(base + 0.01f * i);
    g.e_joint.push_back(-base - 0.02f * i);
    g.e_answer.push_back(base * 0.5f + 0.03f * i);
  }
  return g;
}

EmbeddingStore small_store() {
  EmbeddingStore s(EmbeddingDims{8, 8, 8});
  s.add("a", "degraded/a.ppm", {"L"}, triplet(0.1f));
  s.add("b", "degraded/b.ppm", {"H", "R"}, triplet(0.2f));
  s.add("c", "degraded/c.ppm", {}, triplet(0.3f));
  return s;
}

nlohmann::json read_json(const std::string& path) {
  std::ifstream in(path);
  return nlohmann::json::parse(in);
}

void write_json(const std::string& path, const nlohmann::json& j) {
  std::ofstream out(path, std::ios::trunc);
  out << j.dump(2);
}

double norm(const std::vector<float>& v) {
  double s = 0;
  for (float x : v) s += double(x) * x;
  return std::sqrt(s);
}

}  // namespace

TEST(Store, RoundTripIsBitExact) {
  const auto dir = fresh_dir("store_roundtrip");
  auto s = small_store();
  s.extra()["model"] = "some-extractor";
  write_store(dir, s);
  auto back = read_store(dir);
  EXPECT_EQ(back.size(), 3u);
  EXPECT_EQ(back.dims().total(), 24u);
  EXPECT_EQ(back.payload(), s.payload());
  for (const auto& r : s.records()) {
    const auto a = s.triplet(r.id), b = back.triplet(r.id);
    EXPECT_EQ(a.e_image, b.e_image);
    EXPECT_EQ(a.e_joint, b.e_joint);
    EXPECT_EQ(a.e_answer, b.e_answer);
  }
  EXPECT_EQ(back.records()[1].labels, (std::vector<std::string>{"H", "R"}));
  EXPECT_EQ(back.records()[2].byte_offset, 2u * 24 * 4);
  EXPECT_EQ(back.extra().at("model"), "some-extractor");
  EXPECT_EQ(back.triplet("a").e_image[0], 0.1f);
}

TEST(Store, ManifestLayout) {
  const auto dir = fresh_dir("store_layout");
  write_store(dir, small_store());
  auto m = read_json(dir + "/manifest.json");
  EXPECT_EQ(m.at("version"), 1);
  EXPECT_EQ(m.at("dtype"), "f32le");
  EXPECT_EQ(m.at("count"), 3);
  EXPECT_EQ(m.at("dim_answer"), 8);
  EXPECT_EQ(m.at("records")[1].at("id"), "b");
  EXPECT_EQ(m.at("records")[1].at("byte_offset"), 96);
  EXPECT_EQ(fs::file_size(dir + "/payload.bin"), 3u * 24 * 4);
}

TEST(Store, TruncatedPayloadNamesByteCounts) {
  const auto dir = fresh_dir("store_truncated");
  write_store(dir, small_store());
  fs::resize_file(dir + "/payload.bin", 280);
  try {
    read_store(dir);
    FAIL();
  } catch (const LoadError& e) {
    EXPECT_EQ(e.kind(), LoadErrorKind::kTruncatedPayload);
    const std::string what = e.what();
    EXPECT_NE(what.find("288"), std::string::npos) << what;
    EXPECT_NE(what.find("280"), std::string::npos) << what;
  }
}

TEST(Store, VersionMismatch) {
  const auto dir = fresh_dir("store_version");
  write_store(dir, small_store());
  auto m = read_json(dir + "/manifest.json");
  m["version"] = 2;
  write_json(dir + "/manifest.json", m);
  try {
    read_store(dir);
    FAIL();
  } catch (const LoadError& e) {
    EXPECT_EQ(e.kind(), LoadErrorKind::kVersionMismatch);
  }
}

TEST(Store, DuplicateIdOnDiskAndInMemory) {
  const auto dir = fresh_dir("store_dup");
  write_store(dir, small_store());
  auto m = read_json(dir + "/manifest.json");
  m["records"][2]["id"] = "a";
  write_json(dir + "/manifest.json", m);
  try {
    read_store(dir);
    FAIL();
  } catch (const LoadError& e) {
    EXPECT_EQ(e.kind(), LoadErrorKind::kDuplicateId);
  }
  auto s = small_store();
  EXPECT_THROW(s.add("a", "x.ppm", {}, triplet(0.5f)), DataError);
  EXPECT_THROW(s.add("z", "x.ppm", {}, triplet(0.5f, 7)), DataError);
  EXPECT_THROW(s.triplet("missing"), DataError);
}

TEST(Store, MissingOrBrokenManifestIsMalformed) {
  const auto dir = fresh_dir("store_broken");
  {
    std::ofstream out(dir + "/manifest.json");
    out << "{ not json";
  }
  try {
    read_store(dir);
    FAIL();
  } catch (const LoadError& e) {
    EXPECT_EQ(e.kind(), LoadErrorKind::kMalformed);
  }
}

TEST(SynthEmbed, DeterministicUnitNorm) {
  SynthEmbedOptions opt;
  opt.seed = 3;
  MixtureVector mix;
  mix.intensity = {0.5, 0, 0.2, 0, 0};
  auto a = synth_embed(mix, opt, "x");
  auto b = synth_embed(mix, opt, "x");
  EXPECT_EQ(a.e_answer, b.e_answer);
  EXPECT_EQ(a.e_image.size(), 64u);
  for (const auto* v : {&a.e_image, &a.e_joint, &a.e_answer}) EXPECT_NEAR(norm(*v), 1.0, 1e-6);
  auto other = synth_embed(mix, opt, "y");
  EXPECT_NE(other.e_answer, a.e_answer);
}

TEST(SynthEmbed, CleanMapsToReservedDirection) {
  SynthEmbedOptions opt;
  opt.noise_sigma = 0;
  auto g = synth_embed(MixtureVector{}, opt, "clean");
  EXPECT_EQ(g.e_answer[0], 1.0f);
  for (std::size_t i = 1; i < g.e_answer.size(); ++i) EXPECT_EQ(g.e_answer[i], 0.0f);
}

TEST(SynthEmbed, SimilarMixturesAreCloser) {
  SynthEmbedOptions opt;
  MixtureVector low, low2, rain;
  low.intensity = {0.6, 0, 0, 0, 0};
  low2.intensity = {0.7, 0, 0, 0, 0};
  rain.intensity = {0, 0, 0.6, 0, 0};
  auto a = synth_embed(low, opt, "a").e_answer, b = synth_embed(low2, opt, "b").e_answer,
       c = synth_embed(rain, opt, "c").e_answer;
  Matrix m{3, a.size(), {}};
  for (const auto* v : {&a, &b, &c}) m.data.insert(m.data.end(), v->begin(), v->end());
  auto sim = pairwise_cosine(m);
  EXPECT_GT(sim(0, 1), 0.99);
  EXPECT_LT(sim(0, 2), sim(0, 1));
}

TEST(SynthEmbed, SmallDimsRejected) {
  SynthEmbedOptions opt;
  opt.dims = EmbeddingDims{4, 8, 8};
  EXPECT_THROW(synth_embed(MixtureVector{}, opt, "x"), ConfigError);
}

TEST(PairwiseCosine, HandValues) {
  auto s = pairwise_cosine(Matrix{2, 2, {1, 0, 1, 1}});
  EXPECT_DOUBLE_EQ(s(0, 0), 1.0);
  EXPECT_NEAR(s(0, 1), std::sqrt(0.5), 1e-12);
  EXPECT_EQ(s(0, 1), s(1, 0));
  auto o = pairwise_cosine(Matrix{2, 3, {1, 0, 0, 0, 2, 0}});
  EXPECT_EQ(o(0, 1), 0.0);
}

TEST(PairwiseCosine, ScaleInvariantAndSymmetric) {
  Matrix m{3, 4, {0.3, -1, 2, 0.5, 1, 1, -1, 0.2, -0.4, 0.9, 0.1, 3}};
  Matrix scaled = m;
  for (std::size_t c = 0; c < 4; ++c) {
    scaled(0, c) *= 7;
    scaled(2, c) *= 0.01;
  }
  auto a = pairwise_cosine(m), b = pairwise_cosine(scaled);
  for (std::size_t i = 0; i < 3; ++i)
    for (std::size_t j = 0; j < 3; ++j) {
      EXPECT_NEAR(a(i, j), b(i, j), 1e-12);
      EXPECT_EQ(a(i, j), a(j, i));
    }
}

TEST(PairwiseCosine, ZeroRowIsContractError) {
  try {
    pairwise_cosine(Matrix{2, 2, {1, 0, 0, 0}});
    FAIL();
  } catch (const ContractError& e) {
    EXPECT_NE(std::string(e.what()).find("row 1"), std::string::npos);
  }
}
