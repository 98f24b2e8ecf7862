#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "dewarp/errors.hpp"

namespace dewarp {

// Interleaved float image, values in [0,1], 1 (gray) or 3 (RGB) channels.
struct Image {
  int h = 0, w = 0, c = 0;
  std::vector<float> px;

  Image() = default;
  Image(int h_, int w_, int c_, float fill = 0.0f)
      : h(h_), w(w_), c(c_), px(static_cast<std::size_t>(h_) * w_ * c_, fill) {
    if (h_ < 1 || w_ < 1 || (c_ != 1 && c_ != 3))
      throw DimensionError("Image: bad dims " + std::to_string(h_) + "x" + std::to_string(w_) +
                           "x" + std::to_string(c_));
  }

  bool empty() const { return px.empty(); }
  std::size_t size() const { return px.size(); }

  float& at(int y, int x, int ch) { return px[(static_cast<std::size_t>(y) * w + x) * c + ch]; }
  float at(int y, int x, int ch) const {
    return px[(static_cast<std::size_t>(y) * w + x) * c + ch];
  }

  // snap every value to the 8-bit lattice (k/255); PNG round-trips become
  // bit-exact afterwards
  void quantize8() {
    for (auto& v : px) {
      int q = static_cast<int>(v * 255.0f + 0.5f);
      if (q < 0) q = 0;
      if (q > 255) q = 255;
      v = static_cast<float>(q) / 255.0f;
    }
  }
};

// 8-bit PNG io (gray or RGB); DataError on unreadable/corrupt files.
Image read_png(const std::string& path);
void write_png(const std::string& path, const Image& img);

Image to_gray(const Image& img);  // ITU-R 601 luma
Image resize_bilinear(const Image& img, int out_h, int out_w);

// mean structural-similarity helpers live in metrics.hpp; basic image math here
double max_abs_diff(const Image& a, const Image& b);

}  // namespace dewarp
