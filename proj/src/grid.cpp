#include "dewarp/grid.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>

namespace dewarp {

static_assert(std::endian::native == std::endian::little,
              "grid io assumes a little-endian host");

WarpGrid WarpGrid::identity(int h, int w) {
  WarpGrid g(h, w);
  for (int i = 0; i < h; ++i) {
    const float ny = h > 1 ? 2.0f * i / (h - 1) - 1.0f : 0.0f;
    for (int j = 0; j < w; ++j) {
      g.x(i, j) = w > 1 ? 2.0f * j / (w - 1) - 1.0f : 0.0f;
      g.y(i, j) = ny;
    }
  }
  return g;
}

bool WarpGrid::all_finite() const {
  for (float v : xy)
    if (!std::isfinite(v)) return false;
  return true;
}

std::array<float, 2> WarpGrid::eval(float fi, float fj) const {
  const float ci = std::clamp(fi, 0.0f, static_cast<float>(h - 1));
  const float cj = std::clamp(fj, 0.0f, static_cast<float>(w - 1));
  const int i0 = std::min(static_cast<int>(ci), h - 1);
  const int j0 = std::min(static_cast<int>(cj), w - 1);
  const int i1 = std::min(i0 + 1, h - 1);
  const int j1 = std::min(j0 + 1, w - 1);
  const float ti = ci - i0;
  const float tj = cj - j0;
  std::array<float, 2> out;
  for (int ch = 0; ch < 2; ++ch) {
    const float v00 = xy[(static_cast<std::size_t>(i0) * w + j0) * 2 + ch];
    const float v01 = xy[(static_cast<std::size_t>(i0) * w + j1) * 2 + ch];
    const float v10 = xy[(static_cast<std::size_t>(i1) * w + j0) * 2 + ch];
    const float v11 = xy[(static_cast<std::size_t>(i1) * w + j1) * 2 + ch];
    out[ch] = (v00 * (1 - tj) + v01 * tj) * (1 - ti) + (v10 * (1 - tj) + v11 * tj) * ti;
  }
  return out;
}

Image grid_sample(const Image& source, const WarpGrid& grid, const std::vector<float>& fill) {
  if (source.empty()) throw UsageError("grid_sample: empty source image");
  if (!grid.all_finite()) throw UsageError("grid_sample: non-finite grid coordinates");
  Image out(grid.h, grid.w, source.c);
  const int sh = source.h, sw = source.w, c = source.c;
  for (int i = 0; i < grid.h; ++i) {
    for (int j = 0; j < grid.w; ++j) {
      // align-corners-true denormalization
      const float px = (grid.x(i, j) + 1.0f) * 0.5f * (sw - 1);
      const float py = (grid.y(i, j) + 1.0f) * 0.5f * (sh - 1);
      const int x0 = static_cast<int>(std::floor(px));
      const int y0 = static_cast<int>(std::floor(py));
      const float tx = px - x0;
      const float ty = py - y0;
      for (int ch = 0; ch < c; ++ch) {
        const float fv = ch < static_cast<int>(fill.size()) ? fill[ch] : 0.0f;
        auto tap = [&](int y, int x) -> float {
          if (y < 0 || y >= sh || x < 0 || x >= sw) return fv;
          return source.at(y, x, ch);
        };
        const float top = tap(y0, x0) * (1 - tx) + tap(y0, x0 + 1) * tx;
        const float bot = tap(y0 + 1, x0) * (1 - tx) + tap(y0 + 1, x0 + 1) * tx;
        out.at(i, j, ch) = top * (1 - ty) + bot * ty;
      }
    }
  }
  return out;
}

WarpGrid upsample_grid(const WarpGrid& grid, int target_h, int target_w) {
  if (target_h < 2 || target_w < 2) throw UsageError("upsample_grid: target dims must be >= 2");
  WarpGrid out(target_h, target_w);
  // align-corners-true lattice mapping keeps the identity grid exact
  const float si = static_cast<float>(grid.h - 1) / (target_h - 1);
  const float sj = static_cast<float>(grid.w - 1) / (target_w - 1);
  for (int i = 0; i < target_h; ++i) {
    for (int j = 0; j < target_w; ++j) {
      const auto v = grid.eval(i * si, j * sj);
      out.x(i, j) = v[0];
      out.y(i, j) = v[1];
    }
  }
  return out;
}

WarpGrid compose(const WarpGrid& outer, const WarpGrid& inner) {
  WarpGrid out(outer.h, outer.w);
  for (int i = 0; i < outer.h; ++i) {
    for (int j = 0; j < outer.w; ++j) {
      // denormalize the outer coordinate onto the inner lattice
      const float fj = (outer.x(i, j) + 1.0f) * 0.5f * (inner.w - 1);
      const float fi = (outer.y(i, j) + 1.0f) * 0.5f * (inner.h - 1);
      const auto v = inner.eval(fi, fj);
      out.x(i, j) = v[0];
      out.y(i, j) = v[1];
    }
  }
  return out;
}

InverseGrid invert_grid_full(const WarpGrid& forward) {
  const int h = forward.h, w = forward.w;
  InverseGrid result;
  result.grid = WarpGrid(h, w);
  std::vector<double> accx(static_cast<std::size_t>(h) * w, 0.0);
  std::vector<double> accy(accx.size(), 0.0);
  std::vector<double> wsum(accx.size(), 0.0);

  // splat: forward(i,j) lands at a fractional position of the inverse
  // lattice and deposits the source's normalized coordinate there
  for (int i = 0; i < h; ++i) {
    const float sy = h > 1 ? 2.0f * i / (h - 1) - 1.0f : 0.0f;
    for (int j = 0; j < w; ++j) {
      const float sx = w > 1 ? 2.0f * j / (w - 1) - 1.0f : 0.0f;
      const float px = (forward.x(i, j) + 1.0f) * 0.5f * (w - 1);
      const float py = (forward.y(i, j) + 1.0f) * 0.5f * (h - 1);
      const int x0 = static_cast<int>(std::floor(px));
      const int y0 = static_cast<int>(std::floor(py));
      const float tx = px - x0;
      const float ty = py - y0;
      const float wts[4] = {(1 - tx) * (1 - ty), tx * (1 - ty), (1 - tx) * ty, tx * ty};
      const int xs[4] = {x0, x0 + 1, x0, x0 + 1};
      const int ys[4] = {y0, y0, y0 + 1, y0 + 1};
      for (int t = 0; t < 4; ++t) {
        if (xs[t] < 0 || xs[t] >= w || ys[t] < 0 || ys[t] >= h || wts[t] <= 0.0f) continue;
        const std::size_t idx = static_cast<std::size_t>(ys[t]) * w + xs[t];
        accx[idx] += static_cast<double>(wts[t]) * sx;
        accy[idx] += static_cast<double>(wts[t]) * sy;
        wsum[idx] += wts[t];
      }
    }
  }

  result.covered.assign(wsum.size(), 0);
  for (std::size_t i = 0; i < wsum.size(); ++i) result.covered[i] = wsum[i] > 1e-12 ? 1 : 0;

  // interior holes: unsupported pixels inside the closure of the support
  {
    auto dilate = [&](const std::vector<std::uint8_t>& m, int r) {
      std::vector<std::uint8_t> out(m.size(), 0);
      for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x) {
          bool on = false;
          for (int dy = -r; dy <= r && !on; ++dy)
            for (int dx = -r; dx <= r && !on; ++dx) {
              const int yy = y + dy, xx = x + dx;
              if (yy >= 0 && yy < h && xx >= 0 && xx < w &&
                  m[static_cast<std::size_t>(yy) * w + xx])
                on = true;
            }
          out[static_cast<std::size_t>(y) * w + x] = on ? 1 : 0;
        }
      return out;
    };
    auto erode = [&](const std::vector<std::uint8_t>& m, int r) {
      std::vector<std::uint8_t> out(m.size(), 0);
      for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x) {
          bool on = true;
          for (int dy = -r; dy <= r && on; ++dy)
            for (int dx = -r; dx <= r && on; ++dx) {
              const int yy = y + dy, xx = x + dx;
              if (yy < 0 || yy >= h || xx < 0 || xx >= w ||
                  !m[static_cast<std::size_t>(yy) * w + xx])
                on = false;
            }
          out[static_cast<std::size_t>(y) * w + x] = on ? 1 : 0;
        }
      return out;
    };
    const auto closed = erode(dilate(result.covered, 2), 2);
    std::size_t closed_count = 0, interior_holes = 0;
    for (std::size_t i = 0; i < closed.size(); ++i) {
      if (!closed[i]) continue;
      ++closed_count;
      if (!result.covered[i]) ++interior_holes;
    }
    result.interior_hole_fraction =
        closed_count ? static_cast<double>(interior_holes) / closed_count : 0.0;
    if (result.interior_hole_fraction > 0.05)
      throw DegenerateWarpError("invert_grid: " +
                                std::to_string(100.0 * result.interior_hole_fraction) +
                                "% interior holes after splatting");
  }

  std::vector<float> vx(wsum.size(), 0.0f), vy(wsum.size(), 0.0f);
  std::vector<std::uint8_t> known = result.covered;
  for (std::size_t i = 0; i < wsum.size(); ++i) {
    if (known[i]) {
      vx[i] = static_cast<float>(accx[i] / wsum[i]);
      vy[i] = static_cast<float>(accy[i] / wsum[i]);
    }
  }

  // Jacobi hole fill: every unknown pixel takes the mean of its defined
  // 4-neighbors, sweeping until converged
  std::size_t unknown_count = 0;
  for (auto k : known)
    if (!k) ++unknown_count;
  if (unknown_count > 0) {
    std::vector<std::uint8_t> defined = known;
    std::vector<float> nvx = vx, nvy = vy;
    for (int iter = 0; iter < 500; ++iter) {
      float max_update = 0.0f;
      bool any_undefined = false;
      std::vector<std::uint8_t> ndefined = defined;
      for (int y = 0; y < h; ++y) {
        for (int x = 0; x < w; ++x) {
          const std::size_t idx = static_cast<std::size_t>(y) * w + x;
          if (known[idx]) continue;
          float sx = 0.0f, sy = 0.0f;
          int cnt = 0;
          const int nb[4][2] = {{y - 1, x}, {y + 1, x}, {y, x - 1}, {y, x + 1}};
          for (auto& n : nb) {
            if (n[0] < 0 || n[0] >= h || n[1] < 0 || n[1] >= w) continue;
            const std::size_t nidx = static_cast<std::size_t>(n[0]) * w + n[1];
            if (!defined[nidx]) continue;
            sx += vx[nidx];
            sy += vy[nidx];
            ++cnt;
          }
          if (cnt == 0) {
            any_undefined = true;
            continue;
          }
          const float ux = sx / cnt, uy = sy / cnt;
          if (defined[idx])
            max_update = std::max({max_update, std::abs(ux - vx[idx]), std::abs(uy - vy[idx])});
          else
            max_update = 1.0f;
          nvx[idx] = ux;
          nvy[idx] = uy;
          ndefined[idx] = 1;
        }
      }
      vx.swap(nvx);
      vy.swap(nvy);
      defined.swap(ndefined);
      nvx = vx;
      nvy = vy;
      if (!any_undefined && max_update < 1e-4f) break;
    }
  }

  for (int i = 0; i < h; ++i)
    for (int j = 0; j < w; ++j) {
      result.grid.x(i, j) = vx[static_cast<std::size_t>(i) * w + j];
      result.grid.y(i, j) = vy[static_cast<std::size_t>(i) * w + j];
    }
  return result;
}

WarpGrid invert_grid(const WarpGrid& forward) { return invert_grid_full(forward).grid; }

double max_coord_diff(const WarpGrid& a, const WarpGrid& b) {
  if (a.h != b.h || a.w != b.w) throw DimensionError("max_coord_diff: size mismatch");
  double m = 0.0;
  for (std::size_t i = 0; i < a.xy.size(); ++i)
    m = std::max(m, std::abs(static_cast<double>(a.xy[i]) - b.xy[i]));
  return m;
}

inline constexpr std::uint16_t kGridVersion = 1;

void write_wgrd(const std::string& path, const WarpGrid& grid) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw DataError("write_wgrd: cannot write " + path);
  out.write("WGRD", 4);
  const std::uint16_t version = kGridVersion;
  const std::uint32_t h = grid.h, w = grid.w;
  out.write(reinterpret_cast<const char*>(&version), sizeof(version));
  out.write(reinterpret_cast<const char*>(&h), sizeof(h));
  out.write(reinterpret_cast<const char*>(&w), sizeof(w));
  out.write(reinterpret_cast<const char*>(grid.xy.data()),
            static_cast<std::streamsize>(grid.xy.size() * sizeof(float)));
  if (!out) throw DataError("write_wgrd: write failed for " + path);
}

WarpGrid read_wgrd(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("read_wgrd: cannot open " + path);
  char magic[4];
  in.read(magic, 4);
  if (!in || std::memcmp(magic, "WGRD", 4) != 0)
    throw DataError("read_wgrd: magic mismatch in " + path);
  std::uint16_t version;
  std::uint32_t h, w;
  in.read(reinterpret_cast<char*>(&version), sizeof(version));
  in.read(reinterpret_cast<char*>(&h), sizeof(h));
  in.read(reinterpret_cast<char*>(&w), sizeof(w));
  if (!in) throw DataError("read_wgrd: truncated header in " + path);
  if (version != kGridVersion) throw DataError("read_wgrd: unsupported version");
  if (h < 1 || w < 1 || h > 1u << 20 || w > 1u << 20)
    throw DataError("read_wgrd: implausible dims");
  WarpGrid grid(static_cast<int>(h), static_cast<int>(w));
  in.read(reinterpret_cast<char*>(grid.xy.data()),
          static_cast<std::streamsize>(grid.xy.size() * sizeof(float)));
  if (!in) throw DataError("read_wgrd: truncated payload in " + path);
  return grid;
}

}  // namespace dewarp
