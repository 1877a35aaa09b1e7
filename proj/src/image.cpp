// Copyright 2026 The mofe-restore Authors
// SPDX-License-Identifier: Apache-2.0

#include "mofe/image.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>

#include "mofe/errors.hpp"
#include "mofe/frequency.hpp"

namespace mofe {

namespace {

void skip_ws_and_comments(std::istream& in) {
  for (;;) {
    int c = in.peek();
    if (c == '#') {
      std::string line;
      std::getline(in, line);
    } else if (std::isspace(c)) {
      in.get();
    } else {
      return;
    }
  }
}

std::size_t reflect_index(long i, long n) {
  if (n == 1) return 0;
  const long period = 2 * (n - 1);
  i %= period;
  if (i < 0) i += period;
  return static_cast<std::size_t>(i < n ? i : period - i);
}

}  // namespace

Image read_ppm(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open image '" + path + "'");
  std::string magic;
  in >> magic;
  if (magic != "P6") throw DataError("'" + path + "' is not a binary PPM (P6)");
  std::size_t w = 0, h = 0, maxval = 0;
  skip_ws_and_comments(in);
  in >> w;
  skip_ws_and_comments(in);
  in >> h;
  skip_ws_and_comments(in);
  in >> maxval;
  in.get();  // single whitespace before the raster
  if (!in || w == 0 || h == 0 || maxval != 255) {
    throw DataError("'" + path + "': unsupported PPM header (need maxval 255)");
  }
  std::vector<unsigned char> raster(w * h * 3);
  in.read(reinterpret_cast<char*>(raster.data()), static_cast<std::streamsize>(raster.size()));
  if (in.gcount() != static_cast<std::streamsize>(raster.size())) {
    throw DataError("'" + path + "': truncated raster");
  }
  Image img(3, h, w);
  for (std::size_t y = 0; y < h; ++y)
    for (std::size_t x = 0; x < w; ++x)
      for (std::size_t c = 0; c < 3; ++c) img.at(c, y, x) = raster[(y * w + x) * 3 + c] / 255.0f;
  return img;
}

void write_ppm(const std::string& path, const Image& image) {
  if (image.channels != 3) throw DimensionError("write_ppm: need a 3-channel image");
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw DataError("cannot write image '" + path + "'");
  out << "P6\n" << image.width << ' ' << image.height << "\n255\n";
  std::vector<unsigned char> raster(image.width * image.height * 3);
  for (std::size_t y = 0; y < image.height; ++y)
    for (std::size_t x = 0; x < image.width; ++x)
      for (std::size_t c = 0; c < 3; ++c) {
        const float v = std::clamp(image.at(c, y, x), 0.0f, 1.0f);
        raster[(y * image.width + x) * 3 + c] = static_cast<unsigned char>(std::lround(v * 255.0f));
      }
  out.write(reinterpret_cast<const char*>(raster.data()), static_cast<std::streamsize>(raster.size()));
  if (!out) throw DataError("short write to '" + path + "'");
}

Image quantize8(const Image& image) {
  Image out = image;
  for (auto& v : out.data) v = static_cast<float>(std::lround(std::clamp(v, 0.0f, 1.0f) * 255.0f)) / 255.0f;
  return out;
}

Image crop(const Image& image, std::size_t y0, std::size_t x0, std::size_t h, std::size_t w) {
  if (y0 + h > image.height || x0 + w > image.width) {
    throw DimensionError("crop: window exceeds image bounds");
  }
  Image out(image.channels, h, w);
  for (std::size_t c = 0; c < image.channels; ++c)
    for (std::size_t y = 0; y < h; ++y)
      std::copy_n(&image.data[(c * image.height + y0 + y) * image.width + x0], w,
                  &out.data[(c * h + y) * w]);
  return out;
}

Image flip_horizontal(const Image& image) {
  Image out(image.channels, image.height, image.width);
  for (std::size_t c = 0; c < image.channels; ++c)
    for (std::size_t y = 0; y < image.height; ++y)
      for (std::size_t x = 0; x < image.width; ++x)
        out.at(c, y, x) = image.at(c, y, image.width - 1 - x);
  return out;
}

Image reflect_pad(const Image& image, std::size_t bottom, std::size_t right) {
  Image out(image.channels, image.height + bottom, image.width + right);
  for (std::size_t c = 0; c < image.channels; ++c)
    for (std::size_t y = 0; y < out.height; ++y) {
      const std::size_t sy = reflect_index(static_cast<long>(y), static_cast<long>(image.height));
      for (std::size_t x = 0; x < out.width; ++x) {
        out.at(c, y, x) = image.at(c, sy, reflect_index(static_cast<long>(x), static_cast<long>(image.width)));
      }
    }
  return out;
}

Image clamp01(const Image& image) {
  Image out = image;
  for (auto& v : out.data) v = std::clamp(v, 0.0f, 1.0f);
  return out;
}

Image resize(const Image& image, std::size_t h, std::size_t w) {
  NoGradGuard guard;
  return to_image(resize_bilinear(to_tensor<float>(image), h, w));
}

template <typename T>
Tensor<T> to_tensor(const Image& image) {
  return Tensor<T>::from_data({image.channels, image.height, image.width},
                              std::vector<T>(image.data.begin(), image.data.end()));
}

template <typename T>
Image to_image(const Tensor<T>& t) {
  if (t.rank() != 3) throw DimensionError("to_image: expected [C, H, W], got " + shape_str(t.shape()));
  Image img(t.dim(0), t.dim(1), t.dim(2));
  const auto& v = t.values();
  for (std::size_t i = 0; i < v.size(); ++i) img.data[i] = static_cast<float>(v[i]);
  return img;
}

template Tensor<float> to_tensor(const Image&);
template Tensor<double> to_tensor(const Image&);
template Image to_image(const Tensor<float>&);
template Image to_image(const Tensor<double>&);

}  // namespace mofe
