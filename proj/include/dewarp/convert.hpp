#pragma once

#include <algorithm>

#include "dewarp/grid.hpp"
#include "dewarp/image.hpp"
#include "dewarp/tensor.hpp"

namespace dewarp {

// interleaved [0,1] image -> (1,c,h,w) planar tensor
inline Tensor image_to_tensor(const Image& img) {
  Tensor t = Tensor::zeros(Shape(1, img.c, img.h, img.w));
  float* d = t.data();
  for (int c = 0; c < img.c; ++c)
    for (int y = 0; y < img.h; ++y)
      for (int x = 0; x < img.w; ++x) *d++ = img.at(y, x, c);
  return t;
}

inline Tensor batch_images(const std::vector<const Image*>& imgs) {
  if (imgs.empty()) throw UsageError("batch_images: empty batch");
  const Image& first = *imgs[0];
  Tensor t = Tensor::zeros(Shape(static_cast<int>(imgs.size()), first.c, first.h, first.w));
  float* d = t.data();
  for (const Image* img : imgs) {
    if (img->h != first.h || img->w != first.w || img->c != first.c)
      throw DimensionError("batch_images: inconsistent sizes");
    for (int c = 0; c < img->c; ++c)
      for (int y = 0; y < img->h; ++y)
        for (int x = 0; x < img->w; ++x) *d++ = img->at(y, x, c);
  }
  return t;
}

inline Image tensor_to_image(const Tensor& t, int n = 0) {
  const Shape& s = t.shape();
  Image img(s.h, s.w, s.c == 1 ? 1 : 3);
  for (int c = 0; c < img.c; ++c)
    for (int y = 0; y < s.h; ++y)
      for (int x = 0; x < s.w; ++x)
        img.at(y, x, c) = std::clamp(t.at(n, std::min(c, s.c - 1), y, x), 0.0f, 1.0f);
  return img;
}

// (n,2,h,w) grid tensor (channel 0 = x, 1 = y) -> interleaved WarpGrid
inline WarpGrid tensor_to_grid(const Tensor& t, int n = 0) {
  const Shape& s = t.shape();
  if (s.c != 2) throw DimensionError("tensor_to_grid: expected 2 channels, got " + s.str());
  WarpGrid g(s.h, s.w);
  for (int i = 0; i < s.h; ++i)
    for (int j = 0; j < s.w; ++j) {
      g.x(i, j) = t.at(n, 0, i, j);
      g.y(i, j) = t.at(n, 1, i, j);
    }
  return g;
}

inline Tensor grid_to_tensor(const WarpGrid& g) {
  Tensor t = Tensor::zeros(Shape(1, 2, g.h, g.w));
  float* d = t.data();
  for (int i = 0; i < g.h; ++i)
    for (int j = 0; j < g.w; ++j) *d++ = g.x(i, j);
  for (int i = 0; i < g.h; ++i)
    for (int j = 0; j < g.w; ++j) *d++ = g.y(i, j);
  return t;
}

inline Tensor batch_grids(const std::vector<const WarpGrid*>& grids) {
  if (grids.empty()) throw UsageError("batch_grids: empty batch");
  const WarpGrid& first = *grids[0];
  Tensor t = Tensor::zeros(Shape(static_cast<int>(grids.size()), 2, first.h, first.w));
  float* d = t.data();
  for (const WarpGrid* g : grids) {
    if (g->h != first.h || g->w != first.w) throw DimensionError("batch_grids: size mismatch");
    for (int i = 0; i < g->h; ++i)
      for (int j = 0; j < g->w; ++j) *d++ = g->x(i, j);
    for (int i = 0; i < g->h; ++i)
      for (int j = 0; j < g->w; ++j) *d++ = g->y(i, j);
  }
  return t;
}

}  // namespace dewarp
