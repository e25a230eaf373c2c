#pragma once

#include "gavatar/types.hpp"

#include <vector>

namespace gavatar {

/// H x W x 3 image, pixel-major with interleaved channels.
template <typename S> struct Image {
  int width = 0;
  int height = 0;
  std::vector<S> data;

  Image() = default;
  Image(int w, int h, S fill = S(0))
      : width(w), height(h), data(static_cast<size_t>(w) * h * 3, fill) {}

  static Image filled(int w, int h, const Vec3d& rgb) {
    Image img(w, h);
    for (size_t p = 0; p < static_cast<size_t>(w) * h; ++p)
      for (int c = 0; c < 3; ++c) img.data[p * 3 + c] = S(rgb[c]);
    return img;
  }

  size_t pixels() const { return static_cast<size_t>(width) * height; }
  S& at(int x, int y, int c) { return data[(static_cast<size_t>(y) * width + x) * 3 + c]; }
  S at(int x, int y, int c) const { return data[(static_cast<size_t>(y) * width + x) * 3 + c]; }
  bool same_shape(const Image& o) const { return width == o.width && height == o.height; }

  template <typename T> Image<T> cast() const {
    Image<T> out(width, height);
    for (size_t i = 0; i < data.size(); ++i) out.data[i] = static_cast<T>(data[i]);
    return out;
  }
};

}  // namespace gavatar
