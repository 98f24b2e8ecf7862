#pragma once

#include <array>
#include <string>
#include <vector>

#include "dewarp/errors.hpp"
#include "dewarp/image.hpp"

namespace dewarp {

// Dense backward map: entry (i,j) holds the normalized source coordinate to
// read when producing output pixel (i,j). Coordinates use align-corners-true
// normalization: -1 is the center of the left/top border pixel, +1 the
// center of the right/bottom one, so the identity grid is exactly
// representable. Values outside [-1,1] read as "off document" and sample to
// the fill color. Storage is row-major, channel-interleaved (x then y).
struct WarpGrid {
  int h = 0, w = 0;
  std::vector<float> xy;

  WarpGrid() = default;
  WarpGrid(int h_, int w_) : h(h_), w(w_), xy(static_cast<std::size_t>(h_) * w_ * 2, 0.0f) {
    if (h_ < 1 || w_ < 1) throw DimensionError("WarpGrid: dims must be >= 1");
  }

  static WarpGrid identity(int h, int w);

  float& x(int i, int j) { return xy[(static_cast<std::size_t>(i) * w + j) * 2]; }
  float& y(int i, int j) { return xy[(static_cast<std::size_t>(i) * w + j) * 2 + 1]; }
  float x(int i, int j) const { return xy[(static_cast<std::size_t>(i) * w + j) * 2]; }
  float y(int i, int j) const { return xy[(static_cast<std::size_t>(i) * w + j) * 2 + 1]; }

  bool all_finite() const;

  // continuous bilinear evaluation of the coordinate field at fractional
  // lattice position (fi, fj), taps clamped to the border
  std::array<float, 2> eval(float fi, float fj) const;
};

// Resample `source` through `grid`: output(i,j) = bilinear read of source at
// the denormalized grid coordinate. Taps outside the source blend toward
// `fill` (one value per channel; pass {v} for gray).
Image grid_sample(const Image& source, const WarpGrid& grid,
                  const std::vector<float>& fill = {0.0f, 0.0f, 0.0f});

// Bilinear resize of the coordinate field itself; normalized values keep
// their meaning for the same source image at any resolution.
WarpGrid upsample_grid(const WarpGrid& grid, int target_h, int target_w);

// result(i,j) = inner evaluated bilinearly at outer(i,j)
WarpGrid compose(const WarpGrid& outer, const WarpGrid& inner);

struct InverseGrid {
  WarpGrid grid;                 // hole-filled everywhere
  std::vector<std::uint8_t> covered;  // 1 where forward splats landed (pre-fill)
  double interior_hole_fraction = 0.0;
};

// Invert a forward map by splatting each (target <- source) pair into the
// inverse lattice with bilinear weights, normalizing by accumulated weight,
// then filling holes by Jacobi neighbor averaging (max 500 iterations,
// converged when the largest update drops below 1e-4).
//
// Degenerate warps are detected on interior holes: pixels with no splat
// support inside the morphological closure of the supported region. More
// than 5% interior holes raises DegenerateWarpError.
InverseGrid invert_grid_full(const WarpGrid& forward);
WarpGrid invert_grid(const WarpGrid& forward);

double max_coord_diff(const WarpGrid& a, const WarpGrid& b);

// Grid file format: magic "WGRD", u16 version, u32 H, u32 W, then H*W*2
// float32 little-endian, row-major, channel-interleaved (x then y).
void write_wgrd(const std::string& path, const WarpGrid& grid);
WarpGrid read_wgrd(const std::string& path);

}  // namespace dewarp
