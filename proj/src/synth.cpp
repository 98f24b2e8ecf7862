#include "dewarp/synth.hpp"

#include <algorithm>
#include <cmath>

#include "dewarp/metrics.hpp"

namespace dewarp {

namespace {

std::vector<std::uint8_t> dilate_mask(const std::vector<std::uint8_t>& m, int h, int w) {
  std::vector<std::uint8_t> out(m.size(), 0);
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) {
      bool on = false;
      for (int dy = -1; dy <= 1 && !on; ++dy)
        for (int dx = -1; dx <= 1 && !on; ++dx) {
          const int yy = y + dy, xx = x + dx;
          if (yy >= 0 && yy < h && xx >= 0 && xx < w && m[static_cast<std::size_t>(yy) * w + xx])
            on = true;
        }
      out[static_cast<std::size_t>(y) * w + x] = on ? 1 : 0;
    }
  return out;
}

std::vector<std::uint8_t> erode_mask(const std::vector<std::uint8_t>& m, int h, int w, int r) {
  std::vector<std::uint8_t> out(m.size(), 0);
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) {
      bool on = true;
      for (int dy = -r; dy <= r && on; ++dy)
        for (int dx = -r; dx <= r && on; ++dx) {
          const int yy = y + dy, xx = x + dx;
          if (yy < 0 || yy >= h || xx < 0 || xx >= w || !m[static_cast<std::size_t>(yy) * w + xx])
            on = false;
        }
      out[static_cast<std::size_t>(y) * w + x] = on ? 1 : 0;
    }
  return out;
}

}  // namespace

Image edge_ground_truth(const Image& warped, const std::vector<std::uint8_t>& doc_mask,
                        double sobel_threshold) {
  const int h = warped.h, w = warped.w;
  if (doc_mask.size() != static_cast<std::size_t>(h) * w)
    throw DimensionError("edge_ground_truth: mask size mismatch");
  Image out(h, w, 1, 0.0f);

  // (a) 1-pixel document boundary, dilated once
  std::vector<std::uint8_t> boundary(doc_mask.size(), 0);
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) {
      const std::size_t idx = static_cast<std::size_t>(y) * w + x;
      if (!doc_mask[idx]) continue;
      const int nb[4][2] = {{y - 1, x}, {y + 1, x}, {y, x - 1}, {y, x + 1}};
      for (auto& n : nb) {
        if (n[0] < 0 || n[0] >= h || n[1] < 0 || n[1] >= w ||
            !doc_mask[static_cast<std::size_t>(n[0]) * w + n[1]]) {
          boundary[idx] = 1;
          break;
        }
      }
    }
  boundary = dilate_mask(boundary, h, w);

  // (b) Sobel edges inside the document region (eroded so the page/texture
  // contrast at the boundary does not set the threshold)
  const Image gray = to_gray(warped);
  const auto interior = erode_mask(doc_mask, h, w, 2);
  std::vector<float> mag(doc_mask.size(), 0.0f);
  float max_mag = 0.0f;
  for (int y = 1; y + 1 < h; ++y)
    for (int x = 1; x + 1 < w; ++x) {
      const std::size_t idx = static_cast<std::size_t>(y) * w + x;
      if (!interior[idx]) continue;
      const float gx = (gray.at(y - 1, x + 1, 0) + 2.0f * gray.at(y, x + 1, 0) +
                        gray.at(y + 1, x + 1, 0)) -
                       (gray.at(y - 1, x - 1, 0) + 2.0f * gray.at(y, x - 1, 0) +
                        gray.at(y + 1, x - 1, 0));
      const float gy = (gray.at(y + 1, x - 1, 0) + 2.0f * gray.at(y + 1, x, 0) +
                        gray.at(y + 1, x + 1, 0)) -
                       (gray.at(y - 1, x - 1, 0) + 2.0f * gray.at(y - 1, x, 0) +
                        gray.at(y - 1, x + 1, 0));
      mag[idx] = std::sqrt(gx * gx + gy * gy);
      max_mag = std::max(max_mag, mag[idx]);
    }
  const float thr = static_cast<float>(sobel_threshold) * max_mag;

  for (std::size_t i = 0; i < doc_mask.size(); ++i) {
    const bool edge = boundary[i] || (max_mag > 0.0f && mag[i] >= thr && mag[i] > 0.0f);
    out.px[i] = edge ? 1.0f : 0.0f;
  }
  return out;
}

DocumentSample synthesize_sample(const Image& flat_page, const Image& texture,
                                 const WarpSpec& spec) {
  if (flat_page.empty()) throw UsageError("synthesize_sample: empty flat page");
  if (texture.empty()) throw UsageError("synthesize_sample: empty texture");
  const int size = spec.size;

  DocumentSample sample;
  sample.seed = spec.rng_seed;
  Rng rng(spec.rng_seed);

  SparseMesh mesh = SparseMesh::regular(spec.mesh_rows, spec.mesh_cols);
  const int n_perturb =
      spec.num_perturbations < 0 ? 1 + static_cast<int>(rng.uniform_int(4)) : spec.num_perturbations;
  for (int k = 0; k < n_perturb; ++k) {
    const PerturbKind kind = spec.kinds[rng.uniform_int(spec.kinds.size())];
    sample.kinds_drawn.push_back(kind);
    mesh = perturb_mesh(mesh, kind, rng, spec.ranges);
  }

  // affine placement: page covers a fraction of the frame, slight rotation
  const double frac = rng.uniform(spec.min_doc_fraction, spec.max_doc_fraction);
  const double theta =
      rng.uniform(-spec.max_rotation_deg, spec.max_rotation_deg) * (3.14159265358979323846 / 180.0);
  const float ct = static_cast<float>(std::cos(theta) * frac);
  const float st = static_cast<float>(std::sin(theta) * frac);
  for (int r = 0; r < mesh.rows; ++r)
    for (int c = 0; c < mesh.cols; ++c) {
      const float px = mesh.x(r, c), py = mesh.y(r, c);
      mesh.x(r, c) = ct * px - st * py;
      mesh.y(r, c) = st * px + ct * py;
    }

  // shrink-to-fit keeps the whole page visible so the dewarp target is
  // always recoverable from the warped frame
  const float max_abs = mesh.max_abs_coord();
  if (max_abs > 0.98f) {
    const float s = 0.98f / max_abs;
    for (auto& v : mesh.pos) v *= s;
  }

  const WarpGrid forward = densify(mesh, size, size);
  sample.gt_grid = forward;  // backward dewarp map == forward flat->frame map

  const InverseGrid inv = invert_grid_full(forward);

  sample.flat = resize_bilinear(flat_page, size, size);
  sample.flat.quantize8();
  const Image tex = [&] {
    Image t = resize_bilinear(texture, size, size);
    t.quantize8();
    return t;
  }();

  // document region: closure of the splat support
  sample.doc_mask = dilate_mask(inv.covered, size, size);
  sample.doc_mask = erode_mask(sample.doc_mask, size, size, 1);

  sample.warped = Image(size, size, 3);
  for (int y = 0; y < size; ++y) {
    for (int x = 0; x < size; ++x) {
      const std::size_t idx = static_cast<std::size_t>(y) * size + x;
      if (!sample.doc_mask[idx]) {
        for (int ch = 0; ch < 3; ++ch) sample.warped.at(y, x, ch) = tex.at(y, x, ch);
        continue;
      }
      // read the page at the inverse-map coordinate; off-page taps blend
      // toward the local texture pixel
      const float nx = inv.grid.x(y, x);
      const float ny = inv.grid.y(y, x);
      const float px = (nx + 1.0f) * 0.5f * (size - 1);
      const float py = (ny + 1.0f) * 0.5f * (size - 1);
      const int x0 = static_cast<int>(std::floor(px));
      const int y0 = static_cast<int>(std::floor(py));
      const float tx = px - x0;
      const float ty = py - y0;
      for (int ch = 0; ch < 3; ++ch) {
        auto tap = [&](int yy, int xx) -> float {
          if (yy < 0 || yy >= size || xx < 0 || xx >= size) return tex.at(y, x, ch);
          return sample.flat.at(yy, xx, ch);
        };
        const float top = tap(y0, x0) * (1 - tx) + tap(y0, x0 + 1) * tx;
        const float bot = tap(y0 + 1, x0) * (1 - tx) + tap(y0 + 1, x0 + 1) * tx;
        sample.warped.at(y, x, ch) = top * (1 - ty) + bot * ty;
      }
    }
  }
  sample.warped.quantize8();

  sample.edge_mask = edge_ground_truth(sample.warped, sample.doc_mask, spec.sobel_threshold);

  const Image recon = grid_sample(sample.warped, sample.gt_grid);
  sample.recon_ssim = ssim(recon, sample.flat);
  return sample;
}

Image builtin_page(std::uint64_t seed, int size) {
  Rng rng(seed);
  Image page(size, size, 3, 0.96f);

  auto fill_rect = [&](int y0, int x0, int y1, int x1, float r, float g, float b) {
    y0 = std::clamp(y0, 0, size - 1);
    x0 = std::clamp(x0, 0, size - 1);
    y1 = std::clamp(y1, 0, size - 1);
    x1 = std::clamp(x1, 0, size - 1);
    for (int y = y0; y <= y1; ++y)
      for (int x = x0; x <= x1; ++x) {
        page.at(y, x, 0) = r;
        page.at(y, x, 1) = g;
        page.at(y, x, 2) = b;
      }
  };

  const int margin = std::max(4, size / 12);
  const int line_h = std::max(2, size / 48);
  const int gap = std::max(2, line_h + line_h / 2);

  // a figure block on roughly a third of the pages
  int fig_top = -1, fig_bot = -1;
  if (rng.uniform() < 0.35) {
    const int fh = size / 5 + static_cast<int>(rng.uniform_int(size / 6));
    fig_top = margin + static_cast<int>(rng.uniform_int(std::max(1, size / 2)));
    fig_bot = std::min(size - margin - 1, fig_top + fh);
    const float shade = static_cast<float>(rng.uniform(0.55, 0.8));
    fill_rect(fig_top, margin, fig_bot, size - margin - 1, shade, shade, shade);
    fill_rect(fig_top, margin, fig_top + 1, size - margin - 1, 0.15f, 0.15f, 0.15f);
    fill_rect(fig_bot - 1, margin, fig_bot, size - margin - 1, 0.15f, 0.15f, 0.15f);
  }

  // text-like word runs
  for (int y = margin; y + line_h < size - margin; y += line_h + gap) {
    if (fig_top >= 0 && y + line_h >= fig_top - gap && y <= fig_bot + gap) continue;
    if (rng.uniform() < 0.12) continue;  // paragraph break
    int x = margin + static_cast<int>(rng.uniform_int(std::max(1, size / 24)));
    const int xmax = size - margin - static_cast<int>(rng.uniform_int(std::max(1, size / 10)));
    while (x < xmax) {
      const int word = std::max(2, static_cast<int>(rng.uniform_int(size / 12)) + size / 48);
      const float shade = static_cast<float>(rng.uniform(0.05, 0.3));
      fill_rect(y, x, y + line_h - 1, std::min(x + word, xmax), shade, shade, shade);
      x += word + std::max(2, size / 64);
    }
  }

  // one or two horizontal rules
  const int rules = 1 + static_cast<int>(rng.uniform_int(2));
  for (int i = 0; i < rules; ++i) {
    const int y = margin + static_cast<int>(rng.uniform_int(std::max(1, size - 2 * margin)));
    fill_rect(y, margin, y + std::max(1, size / 128), size - margin - 1, 0.1f, 0.1f, 0.1f);
  }

  page.quantize8();
  return page;
}

Image builtin_texture(std::uint64_t seed, int size) {
  Rng rng(seed);
  // two octaves of value noise
  auto octave = [&](int cells) {
    std::vector<float> knots((cells + 1) * (cells + 1));
    for (auto& v : knots) v = static_cast<float>(rng.uniform());
    Image img(size, size, 1);
    for (int y = 0; y < size; ++y)
      for (int x = 0; x < size; ++x) {
        const float fy = static_cast<float>(y) / (size - 1) * cells;
        const float fx = static_cast<float>(x) / (size - 1) * cells;
        const int y0 = std::min(static_cast<int>(fy), cells - 1);
        const int x0 = std::min(static_cast<int>(fx), cells - 1);
        const float ty = fy - y0, tx = fx - x0;
        const float v00 = knots[y0 * (cells + 1) + x0];
        const float v01 = knots[y0 * (cells + 1) + x0 + 1];
        const float v10 = knots[(y0 + 1) * (cells + 1) + x0];
        const float v11 = knots[(y0 + 1) * (cells + 1) + x0 + 1];
        img.at(y, x, 0) = (v00 * (1 - tx) + v01 * tx) * (1 - ty) + (v10 * (1 - tx) + v11 * tx) * ty;
      }
    return img;
  };
  const Image coarse = octave(6);
  const Image fine = octave(24);
  const float tint[3] = {1.0f, 0.82f, 0.62f};  // wood-ish
  Image tex(size, size, 3);
  for (int y = 0; y < size; ++y)
    for (int x = 0; x < size; ++x) {
      const float v = 0.12f + 0.3f * (0.7f * coarse.at(y, x, 0) + 0.3f * fine.at(y, x, 0));
      for (int ch = 0; ch < 3; ++ch) tex.at(y, x, ch) = std::min(1.0f, v * tint[ch]);
    }
  tex.quantize8();
  return tex;
}

}  // namespace dewarp
