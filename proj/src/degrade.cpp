// Copyright 2026 The mofe-restore Authors
// SPDX-License-Identifier: Apache-2.0

#include "mofe/degrade.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <numbers>
#include <set>

#include "mofe/errors.hpp"
#include "mofe/random.hpp"

namespace mofe {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

template <class... Fs> struct Overloaded : Fs... { using Fs::operator()...; };
template <class... Fs> Overloaded(Fs...) -> Overloaded<Fs...>;

double clamp01d(double v) { return std::clamp(v, 0.0, 1.0); }

void add_layer(Image& img, const std::vector<float>& layer) {
  const std::size_t plane = img.height * img.width;
  for (std::size_t c = 0; c < img.channels; ++c)
    for (std::size_t i = 0; i < plane; ++i) img.data[c * plane + i] += layer[i];
}

void apply_op(Image& img, const LowLight& op, Rng&) {
  for (auto& v : img.data) v = static_cast<float>(std::pow(static_cast<double>(v), op.gamma));
}

void apply_op(Image& img, const Haze& op, Rng&) {
  for (std::size_t y = 0; y < img.height; ++y) {
    const double depth = img.height > 1 ? 0.5 + static_cast<double>(y) / static_cast<double>(img.height - 1) : 1.0;
    const double t = std::exp(-op.beta * depth);
    for (std::size_t c = 0; c < img.channels; ++c)
      for (std::size_t x = 0; x < img.width; ++x) {
        float& v = img.at(c, y, x);
        v = static_cast<float>(v * t + op.airlight * (1.0 - t));
      }
  }
}

void apply_op(Image& img, const Rain& op, Rng& rng) {
  const double h = static_cast<double>(img.height), w = static_cast<double>(img.width);
  const double a = op.angle_deg * std::numbers::pi / 180.0;
  const double dx = std::sin(a), dy = std::cos(a);
  std::vector<float> layer(img.height * img.width, 0.0f);
  for (std::size_t s = 0; s < op.count; ++s) {
    const double cx = rng.uniform(0, w), cy = rng.uniform(0, h);
    const double half = 0.5 * op.length * rng.uniform(0.7, 1.3);
    const double x0 = cx - dx * half, y0 = cy - dy * half;
    const double x1 = cx + dx * half, y1 = cy + dy * half;
    const long bx0 = std::max(0L, static_cast<long>(std::floor(std::min(x0, x1) - 1)));
    const long bx1 = std::min(static_cast<long>(w) - 1, static_cast<long>(std::ceil(std::max(x0, x1) + 1)));
    const long by0 = std::max(0L, static_cast<long>(std::floor(std::min(y0, y1) - 1)));
    const long by1 = std::min(static_cast<long>(h) - 1, static_cast<long>(std::ceil(std::max(y0, y1) + 1)));
    const double len2 = (x1 - x0) * (x1 - x0) + (y1 - y0) * (y1 - y0);
    for (long y = by0; y <= by1; ++y)
      for (long x = bx0; x <= bx1; ++x) {
        const double px = x + 0.5, py = y + 0.5;
        double u = len2 > 0 ? ((px - x0) * (x1 - x0) + (py - y0) * (y1 - y0)) / len2 : 0.0;
        u = clamp01d(u);
        const double ex = px - (x0 + u * (x1 - x0)), ey = py - (y0 + u * (y1 - y0));
        const double cover = std::max(0.0, 1.0 - std::sqrt(ex * ex + ey * ey));
        float& l = layer[static_cast<std::size_t>(y) * img.width + static_cast<std::size_t>(x)];
        l = std::max(l, static_cast<float>(op.opacity * cover));
      }
  }
  add_layer(img, layer);
}

void apply_op(Image& img, const Snow& op, Rng& rng) {
  std::vector<float> layer(img.height * img.width, 0.0f);
  for (std::size_t s = 0; s < op.count; ++s) {
    const double cx = rng.uniform(0, static_cast<double>(img.width));
    const double cy = rng.uniform(0, static_cast<double>(img.height));
    const double r = rng.uniform(op.radius_min, op.radius_max);
    const long x0 = std::max(0L, static_cast<long>(std::floor(cx - r)));
    const long x1 = std::min(static_cast<long>(img.width) - 1, static_cast<long>(std::ceil(cx + r)));
    const long y0 = std::max(0L, static_cast<long>(std::floor(cy - r)));
    const long y1 = std::min(static_cast<long>(img.height) - 1, static_cast<long>(std::ceil(cy + r)));
    for (long y = y0; y <= y1; ++y)
      for (long x = x0; x <= x1; ++x) {
        const double ex = x + 0.5 - cx, ey = y + 0.5 - cy;
        const double q = (ex * ex + ey * ey) / (r * r);
        if (q >= 1.0) continue;
        float& l = layer[static_cast<std::size_t>(y) * img.width + static_cast<std::size_t>(x)];
        l = std::max(l, static_cast<float>(op.opacity * (1.0 - q)));
      }
  }
  add_layer(img, layer);
}

void apply_op(Image& img, const GaussNoise& op, Rng& rng) {
  const double s = op.sigma / 255.0;
  for (auto& v : img.data) v = static_cast<float>(v + s * rng.normal());
}

}  // namespace

std::string op_label(const DegradationOp& op) {
  return std::visit(Overloaded{[](const LowLight&) { return std::string("L"); },
                               [](const Haze&) { return std::string("H"); },
                               [](const Rain&) { return std::string("R"); },
                               [](const Snow&) { return std::string("S"); },
                               [](const GaussNoise&) { return std::string("N"); }},
                    op);
}

std::vector<std::string> recipe_labels(const DegradationRecipe& recipe) {
  std::vector<std::string> out;
  for (const auto& op : recipe.ops) {
    auto l = op_label(op);
    if (std::find(out.begin(), out.end(), l) == out.end()) out.push_back(l);
  }
  return out;
}

MixtureVector recipe_mixture(const DegradationRecipe& recipe) {
  MixtureVector m;
  for (const auto& op : recipe.ops) {
    std::visit(Overloaded{[&](const LowLight& o) { m.intensity[0] = clamp01d((o.gamma - 1.0) / 2.0); },
                          [&](const Haze& o) { m.intensity[1] = clamp01d(o.beta / 1.5); },
                          [&](const Rain& o) { m.intensity[2] = clamp01d(o.opacity / 0.5); },
                          [&](const Snow& o) { m.intensity[3] = clamp01d(o.opacity / 0.8); },
                          [&](const GaussNoise& o) { m.intensity[4] = clamp01d(o.sigma / 50.0); }},
               op);
  }
  return m;
}

json recipe_to_json(const DegradationRecipe& recipe) {
  json ops = json::array();
  for (const auto& op : recipe.ops) {
    ops.push_back(std::visit(
        Overloaded{[](const LowLight& o) { return json{{"type", "low_light"}, {"gamma", o.gamma}}; },
                   [](const Haze& o) { return json{{"type", "haze"}, {"beta", o.beta}, {"airlight", o.airlight}}; },
                   [](const Rain& o) {
                     return json{{"type", "rain"}, {"count", o.count}, {"length", o.length},
                                 {"angle_deg", o.angle_deg}, {"opacity", o.opacity}};
                   },
                   [](const Snow& o) {
                     return json{{"type", "snow"}, {"count", o.count}, {"radius_min", o.radius_min},
                                 {"radius_max", o.radius_max}, {"opacity", o.opacity}};
                   },
                   [](const GaussNoise& o) { return json{{"type", "gauss_noise"}, {"sigma", o.sigma}}; }},
        op));
  }
  return json{{"seed", recipe.seed}, {"ops", ops}};
}

DegradationRecipe recipe_from_json(const json& j) {
  DegradationRecipe r;
  try {
    r.seed = j.at("seed").get<std::uint64_t>();
    for (const auto& o : j.at("ops")) {
      const auto type = o.at("type").get<std::string>();
      if (type == "low_light") {
        r.ops.push_back(LowLight{o.at("gamma").get<double>()});
      } else if (type == "haze") {
        r.ops.push_back(Haze{o.at("beta").get<double>(), o.at("airlight").get<double>()});
      } else if (type == "rain") {
        r.ops.push_back(Rain{o.at("count").get<std::size_t>(), o.at("length").get<double>(),
                             o.at("angle_deg").get<double>(), o.at("opacity").get<double>()});
      } else if (type == "snow") {
        r.ops.push_back(Snow{o.at("count").get<std::size_t>(), o.at("radius_min").get<double>(),
                             o.at("radius_max").get<double>(), o.at("opacity").get<double>()});
      } else if (type == "gauss_noise") {
        r.ops.push_back(GaussNoise{o.at("sigma").get<double>()});
      } else {
        throw DataError("unknown degradation type '" + type + "'");
      }
    }
  } catch (const json::exception& e) {
    throw DataError(std::string("malformed recipe: ") + e.what());
  }
  return r;
}

Image apply_recipe(const Image& clean, const DegradationRecipe& recipe) {
  for (std::size_t i = 0; i < clean.data.size(); ++i) {
    const float v = clean.data[i];
    if (!(v >= 0.0f && v <= 1.0f)) {
      throw ContractError("apply_recipe: input value " + std::to_string(v) + " at index " +
                          std::to_string(i) + " is outside [0, 1]");
    }
  }
  Image out = clean;
  for (std::size_t k = 0; k < recipe.ops.size(); ++k) {
    Rng rng(stream_seed(recipe.seed, "op" + std::to_string(k)));
    std::visit([&](const auto& op) { apply_op(out, op, rng); }, recipe.ops[k]);
    for (auto& v : out.data) v = std::clamp(v, 0.0f, 1.0f);
  }
  return out;
}

Combo parse_combo(const std::string& code) {
  Combo c;
  c.code = code;
  std::size_t start = 0;
  while (start <= code.size()) {
    const std::size_t end = std::min(code.find('+', start), code.size());
    const std::string tok = code.substr(start, end - start);
    if (tok == "L" || tok == "H" || tok == "R" || tok == "S") {
      c.labels.push_back(tok);
    } else if (tok.size() > 1 && tok[0] == 'N') {
      char* rest = nullptr;
      const double sigma = std::strtod(tok.c_str() + 1, &rest);
      if (*rest != '\0' || !(sigma > 0)) throw ConfigError("bad noise token '" + tok + "' in combo '" + code + "'");
      c.labels.push_back("N");
      c.noise_sigma = sigma;
    } else {
      throw ConfigError("bad token '" + tok + "' in combo '" + code + "'");
    }
    start = end + 1;
  }
  std::set<std::string> uniq(c.labels.begin(), c.labels.end());
  if (uniq.size() != c.labels.size()) throw ConfigError("repeated label in combo '" + code + "'");
  return c;
}

std::vector<std::string> standard_combos() {
  return {"L", "H", "R", "S", "L+H", "L+R", "L+S", "H+R", "H+S", "L+H+R", "L+H+S"};
}

std::vector<std::string> default_combos() {
  auto c = standard_combos();
  c.insert(c.end(), {"N15", "N25", "N50"});
  return c;
}

DegradationRecipe sample_recipe(const Combo& combo, std::size_t size, std::uint64_t seed) {
  Rng rng(stream_seed(seed, "params"));
  const double scale = static_cast<double>(size) / 64.0;
  DegradationRecipe r;
  r.seed = seed;
  for (const auto& l : combo.labels) {
    if (l == "L") {
      r.ops.push_back(LowLight{rng.uniform(2.0, 3.0)});
    } else if (l == "H") {
      r.ops.push_back(Haze{rng.uniform(0.6, 1.4), rng.uniform(0.7, 0.9)});
    } else if (l == "R") {
      const auto count = static_cast<std::size_t>(std::lround(rng.uniform(25, 45) * scale * scale));
      r.ops.push_back(Rain{count, rng.uniform(6, 14) * scale, rng.uniform(-20, 20), rng.uniform(0.3, 0.5)});
    } else if (l == "S") {
      const auto count = static_cast<std::size_t>(std::lround(rng.uniform(30, 60) * scale * scale));
      r.ops.push_back(Snow{count, 0.8 * scale, 2.2 * scale, rng.uniform(0.5, 0.8)});
    } else {
      r.ops.push_back(GaussNoise{combo.noise_sigma});
    }
  }
  return r;
}

Image procedural_image(std::size_t size, std::uint64_t seed) {
  Rng rng(stream_seed(seed, "procedural"));
  Image img(3, size, size);
  const double n = static_cast<double>(size);
  double c0[3], c1[3];
  for (int c = 0; c < 3; ++c) {
    c0[c] = rng.uniform(0.15, 0.85);
    c1[c] = rng.uniform(0.15, 0.85);
  }
  const double ang = rng.uniform(0, 2 * std::numbers::pi);
  const double gx = std::cos(ang), gy = std::sin(ang);
  const double freq = rng.uniform(2, 6) * 2 * std::numbers::pi / n;
  const double fang = rng.uniform(0, std::numbers::pi);
  const double fx = std::cos(fang) * freq, fy = std::sin(fang) * freq;
  const double amp = rng.uniform(0.03, 0.1);
  for (std::size_t y = 0; y < size; ++y)
    for (std::size_t x = 0; x < size; ++x) {
      const double u = clamp01d(0.5 + ((x / n - 0.5) * gx + (y / n - 0.5) * gy));
      const double stripe = amp * std::sin(fx * x + fy * y);
      for (std::size_t c = 0; c < 3; ++c) img.at(c, y, x) = static_cast<float>(c0[c] + (c1[c] - c0[c]) * u + stripe);
    }
  const auto shapes = 3 + rng.below(4);
  for (std::uint64_t s = 0; s < shapes; ++s) {
    const bool disc = rng.coin();
    const double cx = rng.uniform(0, n), cy = rng.uniform(0, n);
    const double rx = rng.uniform(0.08, 0.3) * n, ry = rng.uniform(0.08, 0.3) * n;
    double col[3];
    for (auto& v : col) v = rng.uniform(0.05, 0.95);
    for (std::size_t y = 0; y < size; ++y)
      for (std::size_t x = 0; x < size; ++x) {
        const double ex = (x + 0.5 - cx) / rx, ey = (y + 0.5 - cy) / ry;
        // signed distance in units of the smaller half-axis, soft over ~1 px
        const double d = disc ? (std::sqrt(ex * ex + ey * ey) - 1.0) : (std::max(std::abs(ex), std::abs(ey)) - 1.0);
        const double alpha = clamp01d(0.5 - d * std::min(rx, ry));
        if (alpha <= 0) continue;
        for (std::size_t c = 0; c < 3; ++c) {
          float& v = img.at(c, y, x);
          v = static_cast<float>(v * (1 - alpha) + col[c] * alpha);
        }
      }
  }
  for (auto& v : img.data) v = std::clamp(v, 0.0f, 1.0f);
  return img;
}

void write_procedural_corpus(const std::string& dir, std::size_t count, std::size_t size, std::uint64_t seed) {
  fs::create_directories(dir);
  for (std::size_t i = 0; i < count; ++i) {
    char name[32];
    std::snprintf(name, sizeof name, "clean_%03zu.ppm", i);
    write_ppm(dir + "/" + name, procedural_image(size, stream_seed(seed, name)));
  }
}

std::vector<Sample> synthesize(const std::vector<Image>& sources, const std::vector<std::string>& combos,
                               std::size_t per_combo, std::size_t size, std::uint64_t seed) {
  if (sources.empty()) throw ConfigError("synthesize: no clean source images");
  if (size == 0) throw ConfigError("synthesize: size must be positive");
  std::vector<Combo> parsed;
  for (const auto& c : combos) parsed.push_back(parse_combo(c));
  std::vector<Sample> out;
  for (const auto& combo : parsed) {
    for (std::size_t i = 0; i < per_combo; ++i) {
      char idx[32];
      std::snprintf(idx, sizeof idx, "_%03zu", i);
      Sample s;
      s.id = combo.code + idx;
      s.combo = combo.code;
      Rng rng(stream_seed(seed, "record:" + s.id));
      Image src = sources[rng.below(sources.size())];
      if (src.height < size || src.width < size) src = resize(src, std::max(src.height, size), std::max(src.width, size));
      const std::size_t y0 = rng.below(src.height - size + 1), x0 = rng.below(src.width - size + 1);
      s.clean = quantize8(crop(src, y0, x0, size, size));
      s.recipe = sample_recipe(combo, size, stream_seed(seed, "recipe:" + s.id));
      s.labels = recipe_labels(s.recipe);
      s.mixture = recipe_mixture(s.recipe);
      s.degraded = quantize8(apply_recipe(s.clean, s.recipe));
      out.push_back(std::move(s));
    }
  }
  return out;
}

std::vector<Image> load_clean_dir(const std::string& clean_dir) {
  std::vector<std::string> files;
  if (fs::is_directory(clean_dir)) {
    for (const auto& e : fs::directory_iterator(clean_dir))
      if (e.is_regular_file() && e.path().extension() == ".ppm") files.push_back(e.path().string());
  }
  if (files.empty()) throw ConfigError("clean directory '" + clean_dir + "' has no .ppm images");
  std::sort(files.begin(), files.end());
  std::vector<Image> images;
  for (const auto& f : files) images.push_back(read_ppm(f));
  return images;
}

DatasetManifest build_dataset(const std::string& clean_dir, const std::vector<std::string>& combos,
                              std::size_t per_combo, std::size_t size, std::uint64_t seed,
                              const std::string& out_dir) {
  const auto sources = load_clean_dir(clean_dir);
  return write_dataset(synthesize(sources, combos, per_combo, size, seed), size, seed, out_dir);
}

DatasetManifest write_dataset(const std::vector<Sample>& samples, std::size_t size, std::uint64_t seed,
                              const std::string& out_dir) {
  fs::create_directories(fs::path(out_dir) / "clean");
  fs::create_directories(fs::path(out_dir) / "degraded");
  DatasetManifest m;
  m.root = out_dir;
  m.seed = seed;
  m.size = size;
  json records = json::array();
  for (const auto& s : samples) {
    DatasetRecord r{s.id, s.combo, "clean/" + s.id + ".ppm", "degraded/" + s.id + ".ppm", s.labels, s.recipe, s.mixture};
    write_ppm(m.clean_file(r), s.clean);
    write_ppm(m.degraded_file(r), s.degraded);
    records.push_back({{"id", r.id},
                       {"combo", r.combo},
                       {"clean_path", r.clean_path},
                       {"degraded_path", r.degraded_path},
                       {"labels", r.labels},
                       {"recipe", recipe_to_json(r.recipe)},
                       {"mixture", r.mixture.intensity}});
    m.records.push_back(std::move(r));
  }
  const json doc{{"version", 1}, {"seed", seed}, {"size", size}, {"records", records}};
  std::ofstream out(fs::path(out_dir) / "manifest.json", std::ios::trunc);
  if (!out) throw DataError("cannot write manifest in '" + out_dir + "'");
  out << doc.dump(1) << '\n';
  return m;
}

DatasetManifest load_dataset(const std::string& dir) {
  const auto path = fs::path(dir) / "manifest.json";
  std::ifstream in(path);
  if (!in) throw DataError("no dataset manifest at '" + path.string() + "'");
  DatasetManifest m;
  m.root = dir;
  std::set<std::string> seen;
  try {
    const json doc = json::parse(in);
    if (doc.at("version").get<int>() != 1) throw DataError("unsupported dataset manifest version");
    m.seed = doc.at("seed").get<std::uint64_t>();
    m.size = doc.at("size").get<std::size_t>();
    for (const auto& j : doc.at("records")) {
      DatasetRecord r;
      r.id = j.at("id").get<std::string>();
      r.combo = j.value("combo", std::string());
      r.clean_path = j.at("clean_path").get<std::string>();
      r.degraded_path = j.at("degraded_path").get<std::string>();
      r.labels = j.at("labels").get<std::vector<std::string>>();
      r.recipe = recipe_from_json(j.at("recipe"));
      r.mixture.intensity = j.at("mixture").get<std::array<double, 5>>();
      if (!seen.insert(r.id).second) throw DataError("duplicate dataset id '" + r.id + "'");
      for (const auto& f : {m.clean_file(r), m.degraded_file(r)})
        if (!fs::exists(f)) throw DataError("record '" + r.id + "' references missing file '" + f + "'");
      m.records.push_back(std::move(r));
    }
  } catch (const json::exception& e) {
    throw DataError("malformed dataset manifest '" + path.string() + "': " + e.what());
  }
  return m;
}

}  // namespace mofe
