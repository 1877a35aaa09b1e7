// Copyright 2026 The mofe-restore Authors
// SPDX-License-Identifier: Apache-2.0

// Planar float images in [0, 1] and their on-disk form.
//
// Files are binary PPM (P6, maxval 255): 8 bits per channel, RGB interleaved,
// rows top to bottom. Decoding maps byte b to b / 255.0f; encoding maps v to
// round(clamp(v, 0, 1) * 255).

#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include "mofe/tensor.hpp"

namespace mofe {

struct Image {
  std::size_t channels = 3, height = 0, width = 0;
  std::vector<float> data;  // [C, H, W]

  Image() = default;
  Image(std::size_t c, std::size_t h, std::size_t w, float fill = 0.0f)
      : channels(c), height(h), width(w), data(c * h * w, fill) {}

  float& at(std::size_t c, std::size_t y, std::size_t x) { return data[(c * height + y) * width + x]; }
  float at(std::size_t c, std::size_t y, std::size_t x) const { return data[(c * height + y) * width + x]; }
  std::size_t size() const { return data.size(); }
  bool same_shape(const Image& o) const {
    return channels == o.channels && height == o.height && width == o.width;
  }
};

Image read_ppm(const std::string& path);
void write_ppm(const std::string& path, const Image& image);
// Image after an 8-bit encode/decode round trip.
Image quantize8(const Image& image);

Image crop(const Image& image, std::size_t y0, std::size_t x0, std::size_t h, std::size_t w);
Image flip_horizontal(const Image& image);
// Mirror padding without edge repetition (abc|ba style).
Image reflect_pad(const Image& image, std::size_t bottom, std::size_t right);
Image clamp01(const Image& image);
Image resize(const Image& image, std::size_t h, std::size_t w);  // half-pixel bilinear

template <typename T> Tensor<T> to_tensor(const Image& image);
template <typename T> Image to_image(const Tensor<T>& t);

}  // namespace mofe
