// Copyright 2026 The mofe-restore Authors
// SPDX-License-Identifier: Apache-2.0

#include "mofe/gradcheck.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>

#include "mofe/blocks.hpp"
#include "mofe/frequency.hpp"
#include "mofe/guidance.hpp"
#include "mofe/losses.hpp"
#include "mofe/model.hpp"
#include "mofe/ops.hpp"
#include "mofe/params.hpp"
#include "mofe/random.hpp"

namespace mofe {

namespace {

using D = Tensor<double>;

D random_tensor(const Shape& shape, Rng& rng, double lo = -1, double hi = 1, bool grad = true) {
  std::vector<double> v(shape_numel(shape));
  for (auto& x : v) x = rng.uniform(lo, hi);
  return D::from_data(shape, std::move(v), grad);
}

// Replaces zero/one initial values so that biases and gains are exercised.
void perturb(const std::vector<Parameter<double>>& params, Rng& rng) {
  for (auto p : params)
    for (auto& x : p.tensor.data()) x += rng.uniform(-0.2, 0.2);
}

std::vector<D> tensors_of(const std::vector<Parameter<double>>& params) {
  std::vector<D> out;
  for (const auto& p : params) out.push_back(p.tensor);
  return out;
}

// sum(y * w) with a fixed random weighting, so that every output entry
// contributes with a distinct factor.
D project(const D& y, std::uint64_t seed) {
  Rng rng(seed);
  return sum(mul(y, random_tensor(y.shape(), rng, -1, 1, false)));
}

}  // namespace

GradcheckRow check_gradients(const std::string& name, const std::function<D()>& loss,
                             const std::vector<D>& targets, const GradcheckOptions& options) {
  const auto start = std::chrono::steady_clock::now();
  GradcheckRow row;
  row.name = name;
  row.tensors = targets.size();
  for (auto t : targets) t.zero_grad();
  loss().backward();
  Rng rng(stream_seed(options.seed, "gradcheck:" + name));
  bool ok = true;
  for (auto t : targets) {
    const std::vector<double> analytic(t.grad().begin(), t.grad().end());
    std::vector<std::size_t> idx;
    if (t.numel() <= options.samples_per_tensor) {
      for (std::size_t i = 0; i < t.numel(); ++i) idx.push_back(i);
    } else {
      for (std::size_t k = 0; k < options.samples_per_tensor; ++k) idx.push_back(rng.below(t.numel()));
    }
    NoGradGuard guard;
    for (std::size_t i : idx) {
      auto data = t.data();
      const double saved = data[i];
      data[i] = saved + options.step;
      const double up = loss().item();
      data[i] = saved - options.step;
      const double down = loss().item();
      data[i] = saved;
      const double numeric = (up - down) / (2 * options.step);
      const double a = analytic.empty() ? 0.0 : analytic[i];
      const double err = std::abs(a - numeric) / std::max(1.0, std::abs(numeric));
      if (!(err <= options.tolerance)) ok = false;
      row.max_rel_error = std::max(row.max_rel_error, std::isfinite(err) ? err : INFINITY);
      ++row.entries;
    }
  }
  row.passed = ok;
  row.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return row;
}

std::vector<GradcheckRow> run_gradcheck(const GradcheckOptions& opt) {
  std::vector<GradcheckRow> rows;
  Rng rng(stream_seed(opt.seed, "gradcheck-inputs"));
  std::uint64_t salt = 0;
  auto weights_seed = [&] { return stream_seed(opt.seed, "weights" + std::to_string(salt++)); };

  {
    ParamFactory<double> pf(1);
    auto conv = Conv2d<double>::make(pf, "conv", 3, 4, 3);
    perturb(pf.parameters(), rng);
    auto x = random_tensor({3, 6, 5}, rng);
    const auto ws = weights_seed();
    auto targets = tensors_of(pf.parameters());
    targets.push_back(x);
    rows.push_back(check_gradients("conv3x3", [&] { return project(conv(x), ws); }, targets, opt));
  }
  {
    ParamFactory<double> pf(2);
    auto dense = Conv2d<double>::make(pf, "pw", 4, 6, 1);
    auto dw = Conv2d<double>::make(pf, "dw", 6, 6, 3, 6);
    perturb(pf.parameters(), rng);
    auto x = random_tensor({4, 5, 6}, rng);
    const auto ws = weights_seed();
    auto targets = tensors_of(pf.parameters());
    targets.push_back(x);
    rows.push_back(check_gradients("conv1x1+depthwise", [&] { return project(dw(dense(x)), ws); }, targets, opt));
  }
  {
    ParamFactory<double> pf(3);
    auto ln = LayerNorm<double>::make(pf, "ln", 6);
    perturb(pf.parameters(), rng);
    auto x = random_tensor({6, 4, 4}, rng);
    const auto ws = weights_seed();
    auto targets = tensors_of(pf.parameters());
    targets.push_back(x);
    rows.push_back(check_gradients("layer_norm", [&] { return project(ln(x), ws); }, targets, opt));
  }
  {
    auto a = random_tensor({5, 7}, rng), b = random_tensor({7, 4}, rng);
    const auto ws = weights_seed();
    rows.push_back(check_gradients(
        "matmul+softmax+normalize",
        [&] { return project(softmax(normalize_rows(matmul(a, b)), 1), ws); }, {a, b}, opt));
  }
  {
    auto x = random_tensor({4, 6, 6}, rng);
    const auto ws = weights_seed();
    rows.push_back(check_gradients(
        "gelu+sigmoid+shuffle",
        [&] { return project(depth_to_space(sigmoid(space_to_depth(gelu(x)))), ws); }, {x}, opt));
  }
  {
    ParamFactory<double> pf(4);
    MdtaBlock<double> mdta(pf, "mdta", 8, 8, 2);
    perturb(pf.parameters(), rng);
    auto x = random_tensor({8, 5, 4}, rng);
    const auto ws = weights_seed();
    auto targets = tensors_of(pf.parameters());
    targets.push_back(x);
    rows.push_back(check_gradients("mdta", [&] { return project(mdta.forward(x, x), ws); }, targets, opt));
  }
  {
    ParamFactory<double> pf(5);
    GdfnBlock<double> gdfn(pf, "gdfn", 8, 2.0);
    perturb(pf.parameters(), rng);
    auto x = random_tensor({8, 5, 4}, rng);
    const auto ws = weights_seed();
    auto targets = tensors_of(pf.parameters());
    targets.push_back(x);
    rows.push_back(check_gradients("gdfn", [&] { return project(gdfn.forward(x), ws); }, targets, opt));
  }
  {
    ParamFactory<double> pf(6);
    MgfbBlock<double> mgfb(pf, "mgfb", 8, 16, 4);
    perturb(pf.parameters(), rng);
    auto f = random_tensor({8, 4, 4}, rng);
    auto e = random_tensor({16}, rng);
    const auto ws = weights_seed();
    auto targets = tensors_of(pf.parameters());
    targets.push_back(f);
    targets.push_back(e);
    rows.push_back(check_gradients("mgfb", [&] { return project(mgfb.forward(f, e), ws); }, targets, opt));
  }
  {
    ParamFactory<double> pf(7);
    MofeModule<double> mofe(pf, "mofe", 8, 4, 16, 2);
    perturb(pf.parameters(), rng);
    auto f = random_tensor({8, 4, 4}, rng);
    auto img = random_tensor({3, 8, 8}, rng, 0, 1);
    auto e = random_tensor({16}, rng);
    const auto ws = weights_seed();
    auto targets = tensors_of(pf.parameters());
    targets.push_back(f);
    targets.push_back(img);
    targets.push_back(e);
    rows.push_back(check_gradients("mofe", [&] { return project(mofe.forward(f, img, e).feature, ws); }, targets, opt));
  }
  {
    ParamFactory<double> pf(8);
    TransformerBlock<double> block(pf, "block", 8, 2, 2.0);
    perturb(pf.parameters(), rng);
    auto x = random_tensor({8, 4, 4}, rng);
    const auto ws = weights_seed();
    auto targets = tensors_of(pf.parameters());
    targets.push_back(x);
    rows.push_back(check_gradients("transformer_block", [&] { return project(block.forward(x), ws); }, targets, opt));
  }
  {
    auto x = random_tensor({3, 8, 6}, rng);
    auto s = random_tensor({12, 3, 4}, rng);
    const auto w1 = weights_seed(), w2 = weights_seed();
    rows.push_back(check_gradients("dwt_haar", [&] { return project(dwt_haar_stacked(x), w1); }, {x}, opt));
    rows.push_back(check_gradients("idwt_haar", [&] { return project(idwt_haar_stacked(s), w2); }, {s}, opt));
  }
  {
    auto x = random_tensor({3, 8, 8}, rng);
    const auto ws = weights_seed();
    rows.push_back(check_gradients("dft2", [&] { return project(dft2_stacked(x), ws); }, {x}, opt));
  }
  {
    auto x = random_tensor({3, 5, 7}, rng);
    const auto ws = weights_seed();
    rows.push_back(check_gradients("resize_bilinear", [&] { return project(resize_bilinear(x, 8, 6), ws); }, {x}, opt));
  }
  {
    auto pred = random_tensor({3, 8, 8}, rng, 0, 1);
    auto target = random_tensor({3, 8, 8}, rng, 0, 1, false);
    rows.push_back(check_gradients("rec_loss", [&] { return rec_loss(pred, target, 0.1); }, {pred}, opt));
  }
  {
    Matrix e{5, 6, {}};
    for (std::size_t i = 0; i < 30; ++i) e.data.push_back(rng.uniform(-1, 1));
    auto logits = random_tensor({5, 4}, rng, -2, 2);
    rows.push_back(check_gradients("mgl_loss", [&] { return mgl_loss(e, sigmoid(logits)); }, {logits}, opt));
  }
  if (opt.include_backbone) {
    auto model = RestorationModel<double>::build(ModelConfig::toy(), stream_seed(opt.seed, "backbone"));
    perturb(model.parameters(), rng);
    const auto& c = model.config();
    auto img = random_tensor({3, 16, 16}, rng, 0, 1);
    GuidanceTensors<double> g{random_tensor({c.dim_image}, rng), random_tensor({c.dim_joint}, rng),
                              random_tensor({c.dim_answer}, rng)};
    auto targets = tensors_of(model.parameters());
    targets.insert(targets.end(), {img, g.image, g.joint, g.answer});
    GradcheckOptions sparse = opt;
    sparse.samples_per_tensor = 1;
    const auto ws = weights_seed();
    rows.push_back(check_gradients("backbone_toy", [&] { return project(model.forward(img, g).restored, ws); },
                                   targets, sparse));
  }
  return rows;
}

std::string gradcheck_table(const std::vector<GradcheckRow>& rows) {
  std::string out;
  char line[200];
  std::snprintf(line, sizeof line, "%-26s %8s %8s %14s %9s  %s\n", "block", "tensors", "entries", "max_rel_err",
                "seconds", "result");
  out += line;
  for (const auto& r : rows) {
    std::snprintf(line, sizeof line, "%-26s %8zu %8zu %14.3e %9.3f  %s\n", r.name.c_str(), r.tensors, r.entries,
                  r.max_rel_error, r.seconds, r.passed ? "PASS" : "FAIL");
    out += line;
  }
  return out;
}

}  // namespace mofe
