#pragma once

#include <array>
#include <cstdint>
#include <vector>

namespace debiaskit {

using Rgb = std::array<std::uint8_t, 3>;

// 8-bit RGB raster, row-major.
struct Canvas {
  int width = 0;
  int height = 0;
  std::vector<std::uint8_t> pixels;  // height * width * 3

  Canvas() = default;
  Canvas(int w, int h, Rgb fill = {0, 0, 0}) : width(w), height(h) {
    pixels.resize(static_cast<size_t>(w) * static_cast<size_t>(h) * 3);
    for (size_t i = 0; i < pixels.size(); i += 3) {
      pixels[i] = fill[0];
      pixels[i + 1] = fill[1];
      pixels[i + 2] = fill[2];
    }
  }

  std::uint8_t* at(int x, int y) {
    return pixels.data() + (static_cast<size_t>(y) * static_cast<size_t>(width) +
                            static_cast<size_t>(x)) * 3;
  }
  const std::uint8_t* at(int x, int y) const {
    return pixels.data() + (static_cast<size_t>(y) * static_cast<size_t>(width) +
                            static_cast<size_t>(x)) * 3;
  }

  Rgb get(int x, int y) const {
    const std::uint8_t* p = at(x, y);
    return {p[0], p[1], p[2]};
  }

  void set(int x, int y, Rgb c) {
    std::uint8_t* p = at(x, y);
    p[0] = c[0];
    p[1] = c[1];
    p[2] = c[2];
  }

  bool operator==(const Canvas& o) const {
    return width == o.width && height == o.height && pixels == o.pixels;
  }
};

}  // namespace debiaskit
