// Copyright 2026 The mofe-restore Authors
// SPDX-License-Identifier: Apache-2.0

#include "mofe/frequency.hpp"

#include <cmath>
#include <numbers>
#include <string>

#include "mofe/errors.hpp"
#include "mofe/ops.hpp"

namespace mofe {

namespace {

template <typename T>
void require_chw(const Tensor<T>& x, const char* op) {
  if (x.rank() != 3) {
    throw DimensionError(std::string(op) + ": expected [C, H, W], got " + shape_str(x.shape()));
  }
}

}  // namespace

template <typename T>
Tensor<T> dwt_haar_stacked(const Tensor<T>& x) {
  require_chw(x, "dwt_haar");
  const std::size_t c = x.dim(0), h = x.dim(1), w = x.dim(2);
  if (h % 2 || w % 2) {
    throw DimensionError("dwt_haar: H and W must be even, got " + shape_str(x.shape()) +
                         " (pad or resize first)");
  }
  const std::size_t oh = h / 2, ow = w / 2, band = c * oh * ow;
  const auto& in = x.values();
  std::vector<T> out(4 * band);
  for (std::size_t ch = 0; ch < c; ++ch) {
    for (std::size_t y = 0; y < oh; ++y) {
      const T* r0 = in.data() + (ch * h + 2 * y) * w;
      const T* r1 = r0 + w;
      const std::size_t o = (ch * oh + y) * ow;
      for (std::size_t xx = 0; xx < ow; ++xx) {
        const T a = r0[2 * xx], b = r0[2 * xx + 1], cc = r1[2 * xx], d = r1[2 * xx + 1];
        out[o + xx] = T(0.5) * (a + b + cc + d);
        out[band + o + xx] = T(0.5) * (a + b - cc - d);
        out[2 * band + o + xx] = T(0.5) * (a - b + cc - d);
        out[3 * band + o + xx] = T(0.5) * (a - b - cc + d);
      }
    }
  }
  return make_result<T>({4 * c, oh, ow}, std::move(out), {x}, "dwt_haar",
                        [c, h, w, oh, ow, band](Node<T>& self) {
                          auto& g = self.parents[0]->grad_buffer();
                          const T* dg = self.grad.data();
                          for (std::size_t ch = 0; ch < c; ++ch) {
                            for (std::size_t y = 0; y < oh; ++y) {
                              T* r0 = g.data() + (ch * h + 2 * y) * w;
                              T* r1 = r0 + w;
                              const std::size_t o = (ch * oh + y) * ow;
                              for (std::size_t xx = 0; xx < ow; ++xx) {
                                const T ll = dg[o + xx], lh = dg[band + o + xx];
                                const T hl = dg[2 * band + o + xx], hh = dg[3 * band + o + xx];
                                r0[2 * xx] += T(0.5) * (ll + lh + hl + hh);
                                r0[2 * xx + 1] += T(0.5) * (ll + lh - hl - hh);
                                r1[2 * xx] += T(0.5) * (ll - lh + hl - hh);
                                r1[2 * xx + 1] += T(0.5) * (ll - lh - hl + hh);
                              }
                            }
                          }
                        });
}

template <typename T>
Tensor<T> idwt_haar_stacked(const Tensor<T>& stacked) {
  require_chw(stacked, "idwt_haar");
  if (stacked.dim(0) % 4) {
    throw DimensionError("idwt_haar: channel count must be a multiple of 4, got " +
                         shape_str(stacked.shape()));
  }
  const std::size_t c = stacked.dim(0) / 4, oh = stacked.dim(1), ow = stacked.dim(2);
  const std::size_t h = oh * 2, w = ow * 2, band = c * oh * ow;
  const auto& in = stacked.values();
  std::vector<T> out(c * h * w);
  for (std::size_t ch = 0; ch < c; ++ch) {
    for (std::size_t y = 0; y < oh; ++y) {
      T* r0 = out.data() + (ch * h + 2 * y) * w;
      T* r1 = r0 + w;
      const std::size_t o = (ch * oh + y) * ow;
      for (std::size_t xx = 0; xx < ow; ++xx) {
        const T ll = in[o + xx], lh = in[band + o + xx];
        const T hl = in[2 * band + o + xx], hh = in[3 * band + o + xx];
        r0[2 * xx] = T(0.5) * (ll + lh + hl + hh);
        r0[2 * xx + 1] = T(0.5) * (ll + lh - hl - hh);
        r1[2 * xx] = T(0.5) * (ll - lh + hl - hh);
        r1[2 * xx + 1] = T(0.5) * (ll - lh - hl + hh);
      }
    }
  }
  return make_result<T>({c, h, w}, std::move(out), {stacked}, "idwt_haar",
                        [c, h, w, oh, ow, band](Node<T>& self) {
                          auto& g = self.parents[0]->grad_buffer();
                          const T* dg = self.grad.data();
                          for (std::size_t ch = 0; ch < c; ++ch) {
                            for (std::size_t y = 0; y < oh; ++y) {
                              const T* r0 = dg + (ch * h + 2 * y) * w;
                              const T* r1 = r0 + w;
                              const std::size_t o = (ch * oh + y) * ow;
                              for (std::size_t xx = 0; xx < ow; ++xx) {
                                const T a = r0[2 * xx], b = r0[2 * xx + 1];
                                const T cc = r1[2 * xx], d = r1[2 * xx + 1];
                                g[o + xx] += T(0.5) * (a + b + cc + d);
                                g[band + o + xx] += T(0.5) * (a + b - cc - d);
                                g[2 * band + o + xx] += T(0.5) * (a - b + cc - d);
                                g[3 * band + o + xx] += T(0.5) * (a - b - cc + d);
                              }
                            }
                          }
                        });
}

template <typename T>
SubbandSet<T> dwt_haar(const Tensor<T>& x) {
  auto stacked = dwt_haar_stacked(x);
  const std::size_t c = x.dim(0);
  auto parts = split(stacked, 0, {c, c, c, c});
  return {parts[0], parts[1], parts[2], parts[3], x.shape()};
}

template <typename T>
Tensor<T> idwt_haar(const SubbandSet<T>& s) {
  const Shape& ref = s.ll.shape();
  for (const auto* band : {&s.lh, &s.hl, &s.hh}) {
    if (band->shape() != ref) {
      throw DimensionError("idwt_haar: inconsistent subband shapes " + shape_str(ref) + " vs " +
                           shape_str(band->shape()));
    }
  }
  if (!s.source_shape.empty() &&
      (s.source_shape.size() != 3 || s.source_shape[0] != ref[0] ||
       s.source_shape[1] != 2 * ref[1] || s.source_shape[2] != 2 * ref[2])) {
    throw DimensionError("idwt_haar: subbands " + shape_str(ref) + " do not match source " +
                         shape_str(s.source_shape));
  }
  return idwt_haar_stacked(concat<T>({s.ll, s.lh, s.hl, s.hh}, 0));
}

namespace {

// cos / sin of 2 pi u h / n for all u, h; symmetric in (u, h).
template <typename T>
void twiddles(std::size_t n, std::vector<T>& cs, std::vector<T>& sn) {
  cs.resize(n * n);
  sn.resize(n * n);
  for (std::size_t u = 0; u < n; ++u) {
    for (std::size_t h = 0; h < n; ++h) {
      const double angle = 2.0 * std::numbers::pi * static_cast<double>((u * h) % n) /
                           static_cast<double>(n);
      cs[u * n + h] = static_cast<T>(std::cos(angle));
      sn[u * n + h] = static_cast<T>(std::sin(angle));
    }
  }
}

}  // namespace

template <typename T>
Tensor<T> dft2_stacked(const Tensor<T>& x) {
  require_chw(x, "dft2");
  const std::size_t c = x.dim(0), h = x.dim(1), w = x.dim(2);
  std::vector<T> ch_, sh_, cw_, sw_;
  twiddles(h, ch_, sh_);
  twiddles(w, cw_, sw_);
  const std::size_t plane = h * w;
  const auto& in = x.values();
  std::vector<T> out(2 * c * plane, T(0));
  std::vector<T> ac(plane), as(plane);
  for (std::size_t ch = 0; ch < c; ++ch) {
    const T* xp = in.data() + ch * plane;
    // rows: ac[r][v] = sum_w x[r][w] cos(v w), as likewise with sin
    for (std::size_t r = 0; r < h; ++r) {
      for (std::size_t v = 0; v < w; ++v) {
        T sc = 0, ss = 0;
        for (std::size_t k = 0; k < w; ++k) {
          sc += xp[r * w + k] * cw_[v * w + k];
          ss += xp[r * w + k] * sw_[v * w + k];
        }
        ac[r * w + v] = sc;
        as[r * w + v] = ss;
      }
    }
    T* re = out.data() + ch * plane;
    T* im = out.data() + (c + ch) * plane;
    for (std::size_t u = 0; u < h; ++u) {
      for (std::size_t r = 0; r < h; ++r) {
        const T cu = ch_[u * h + r], su = sh_[u * h + r];
        for (std::size_t v = 0; v < w; ++v) {
          re[u * w + v] += cu * ac[r * w + v] - su * as[r * w + v];
          im[u * w + v] -= su * ac[r * w + v] + cu * as[r * w + v];
        }
      }
    }
  }
  return make_result<T>(
      {2 * c, h, w}, std::move(out), {x}, "dft2",
      [c, h, w, ch_ = std::move(ch_), sh_ = std::move(sh_), cw_ = std::move(cw_),
       sw_ = std::move(sw_)](Node<T>& self) {
        const std::size_t plane = h * w;
        auto& g = self.parents[0]->grad_buffer();
        std::vector<T> dac(plane), das(plane);
        for (std::size_t ch = 0; ch < c; ++ch) {
          const T* gr = self.grad.data() + ch * plane;
          const T* gi = self.grad.data() + (c + ch) * plane;
          std::fill(dac.begin(), dac.end(), T(0));
          std::fill(das.begin(), das.end(), T(0));
          for (std::size_t u = 0; u < h; ++u) {
            for (std::size_t r = 0; r < h; ++r) {
              const T cu = ch_[u * h + r], su = sh_[u * h + r];
              for (std::size_t v = 0; v < w; ++v) {
                dac[r * w + v] += cu * gr[u * w + v] - su * gi[u * w + v];
                das[r * w + v] -= su * gr[u * w + v] + cu * gi[u * w + v];
              }
            }
          }
          T* dx = g.data() + ch * plane;
          for (std::size_t r = 0; r < h; ++r) {
            for (std::size_t v = 0; v < w; ++v) {
              const T a = dac[r * w + v], b = das[r * w + v];
              for (std::size_t k = 0; k < w; ++k) {
                dx[r * w + k] += a * cw_[v * w + k] + b * sw_[v * w + k];
              }
            }
          }
        }
      });
}

template <typename T>
SpectrumPair<T> dft2(const Tensor<T>& x) {
  auto stacked = dft2_stacked(x);
  auto parts = split(stacked, 0, {x.dim(0), x.dim(0)});
  return {parts[0], parts[1]};
}

namespace {

struct Tap {
  std::size_t lo, hi;
  double frac;  // weight of hi
};

std::vector<Tap> half_pixel_taps(std::size_t in, std::size_t out) {
  std::vector<Tap> taps(out);
  const double scale = static_cast<double>(in) / static_cast<double>(out);
  for (std::size_t i = 0; i < out; ++i) {
    double src = (static_cast<double>(i) + 0.5) * scale - 0.5;
    if (src < 0) src = 0;
    auto lo = static_cast<std::size_t>(src);
    if (lo > in - 1) lo = in - 1;
    const std::size_t hi = lo + 1 < in ? lo + 1 : lo;
    taps[i] = {lo, hi, src - static_cast<double>(lo)};
  }
  return taps;
}

}  // namespace

template <typename T>
Tensor<T> resize_bilinear(const Tensor<T>& x, std::size_t out_h, std::size_t out_w) {
  require_chw(x, "resize_bilinear");
  if (out_h == 0 || out_w == 0) throw DimensionError("resize_bilinear: output size must be >= 1");
  const std::size_t c = x.dim(0), h = x.dim(1), w = x.dim(2);
  if (h == out_h && w == out_w) return reshape(x, x.shape());
  auto ty = half_pixel_taps(h, out_h);
  auto tx = half_pixel_taps(w, out_w);
  const auto& in = x.values();
  std::vector<T> out(c * out_h * out_w);
  for (std::size_t ch = 0; ch < c; ++ch) {
    const T* p = in.data() + ch * h * w;
    for (std::size_t y = 0; y < out_h; ++y) {
      const T fy = static_cast<T>(ty[y].frac);
      const T* r0 = p + ty[y].lo * w;
      const T* r1 = p + ty[y].hi * w;
      for (std::size_t xx = 0; xx < out_w; ++xx) {
        const T fx = static_cast<T>(tx[xx].frac);
        const T top = r0[tx[xx].lo] * (T(1) - fx) + r0[tx[xx].hi] * fx;
        const T bot = r1[tx[xx].lo] * (T(1) - fx) + r1[tx[xx].hi] * fx;
        out[(ch * out_h + y) * out_w + xx] = top * (T(1) - fy) + bot * fy;
      }
    }
  }
  return make_result<T>({c, out_h, out_w}, std::move(out), {x}, "resize_bilinear",
                        [c, h, w, out_h, out_w, ty = std::move(ty), tx = std::move(tx)](Node<T>& self) {
                          auto& g = self.parents[0]->grad_buffer();
                          for (std::size_t ch = 0; ch < c; ++ch) {
                            T* p = g.data() + ch * h * w;
                            for (std::size_t y = 0; y < out_h; ++y) {
                              const T fy = static_cast<T>(ty[y].frac);
                              T* r0 = p + ty[y].lo * w;
                              T* r1 = p + ty[y].hi * w;
                              for (std::size_t xx = 0; xx < out_w; ++xx) {
                                const T fx = static_cast<T>(tx[xx].frac);
                                const T d = self.grad[(ch * out_h + y) * out_w + xx];
                                r0[tx[xx].lo] += d * (T(1) - fy) * (T(1) - fx);
                                r0[tx[xx].hi] += d * (T(1) - fy) * fx;
                                r1[tx[xx].lo] += d * fy * (T(1) - fx);
                                r1[tx[xx].hi] += d * fy * fx;
                              }
                            }
                          }
                        });
}

#define MOFE_INSTANTIATE_FREQ(T)                                          \
  template Tensor<T> dwt_haar_stacked(const Tensor<T>&);                  \
  template Tensor<T> idwt_haar_stacked(const Tensor<T>&);                 \
  template SubbandSet<T> dwt_haar(const Tensor<T>&);                      \
  template Tensor<T> idwt_haar(const SubbandSet<T>&);                     \
  template Tensor<T> dft2_stacked(const Tensor<T>&);                      \
  template SpectrumPair<T> dft2(const Tensor<T>&);                        \
  template Tensor<T> resize_bilinear(const Tensor<T>&, std::size_t, std::size_t);

MOFE_INSTANTIATE_FREQ(float)
MOFE_INSTANTIATE_FREQ(double)

}  // namespace mofe
