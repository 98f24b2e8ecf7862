#include "dewarp/mesh.hpp"

#include <algorithm>
#include <cmath>

#include "dewarp/errors.hpp"

namespace dewarp {

std::string to_string(PerturbKind k) { return k == PerturbKind::fold ? "fold" : "curve"; }

PerturbKind perturb_kind_from_string(const std::string& s) {
  if (s == "fold") return PerturbKind::fold;
  if (s == "curve") return PerturbKind::curve;
  throw DataError("unknown perturbation kind: " + s);
}

SparseMesh::SparseMesh(int rows_, int cols_) : rows(rows_), cols(cols_) {
  if (rows_ < 2 || cols_ < 2) throw UsageError("SparseMesh: needs at least 2x2 vertices");
  pos.assign(static_cast<std::size_t>(rows_) * cols_ * 2, 0.0f);
}

SparseMesh SparseMesh::regular(int rows, int cols) {
  SparseMesh m(rows, cols);
  for (int r = 0; r < rows; ++r) {
    const float ny = 2.0f * r / (rows - 1) - 1.0f;
    for (int c = 0; c < cols; ++c) {
      m.x(r, c) = 2.0f * c / (cols - 1) - 1.0f;
      m.y(r, c) = ny;
    }
  }
  return m;
}

bool SparseMesh::foldover_free() const {
  // screen orientation (y down): the rest mesh has positive cross products
  auto cross = [](float ax, float ay, float bx, float by) { return ax * by - ay * bx; };
  for (int r = 0; r + 1 < rows; ++r) {
    for (int c = 0; c + 1 < cols; ++c) {
      const float x00 = x(r, c), y00 = y(r, c);
      const float x01 = x(r, c + 1), y01 = y(r, c + 1);
      const float x10 = x(r + 1, c), y10 = y(r + 1, c);
      const float x11 = x(r + 1, c + 1), y11 = y(r + 1, c + 1);
      const float a1 = cross(x01 - x00, y01 - y00, x11 - x00, y11 - y00);
      const float a2 = cross(x11 - x00, y11 - y00, x10 - x00, y10 - y00);
      if (a1 <= 1e-6f || a2 <= 1e-6f) return false;
    }
  }
  return true;
}

float SparseMesh::max_abs_coord() const {
  float m = 0.0f;
  for (float v : pos) m = std::max(m, std::abs(v));
  return m;
}

double perturb_weight(PerturbKind kind, double d, double alpha, double radius) {
  if (kind == PerturbKind::fold) return alpha / (d + alpha);
  const double t = d / radius;
  return std::max(0.0, 1.0 - std::pow(t, alpha));
}

SparseMesh perturb_mesh_with(const SparseMesh& mesh, PerturbKind kind, const PerturbParams& p) {
  SparseMesh out = mesh;
  const double radius = std::sqrt(2.0);  // half the rest-mesh diagonal
  for (int r = 0; r < mesh.rows; ++r) {
    for (int c = 0; c < mesh.cols; ++c) {
      const double d =
          std::abs((mesh.x(r, c) - p.px) * p.vx + (mesh.y(r, c) - p.py) * p.vy);
      const double w = perturb_weight(kind, d, p.alpha, radius);
      out.x(r, c) += static_cast<float>(w * p.s * p.vx);
      out.y(r, c) += static_cast<float>(w * p.s * p.vy);
    }
  }
  return out;
}

SparseMesh perturb_mesh(const SparseMesh& mesh, PerturbKind kind, Rng& rng,
                        const PerturbRanges& ranges) {
  if (!mesh.foldover_free()) throw UsageError("perturb_mesh: input mesh is folded over");
  PerturbParams p;
  p.px = static_cast<float>(rng.uniform(-1.0, 1.0));
  p.py = static_cast<float>(rng.uniform(-1.0, 1.0));
  const double an = rng.uniform(0.0, 6.283185307179586);
  p.vx = static_cast<float>(std::cos(an));
  p.vy = static_cast<float>(std::sin(an));
  p.s = static_cast<float>(rng.uniform(ranges.displacement_lo, ranges.displacement_hi));
  p.alpha = static_cast<float>(kind == PerturbKind::fold
                                   ? rng.uniform(ranges.fold_alpha_lo, ranges.fold_alpha_hi)
                                   : rng.uniform(ranges.curve_alpha_lo, ranges.curve_alpha_hi));

  // retries shrink the displacement only; no extra randomness is consumed,
  // so a seed fully determines the outcome
  for (int attempt = 0; attempt < 10; ++attempt) {
    SparseMesh candidate = perturb_mesh_with(mesh, kind, p);
    if (candidate.foldover_free()) return candidate;
    p.s *= 0.7f;
  }
  throw DegenerateWarpError("perturb_mesh: fold-over persists after 10 retries");
}

std::array<float, 2> densify_at(const SparseMesh& mesh, float u, float v) {
  // locate the cell containing rest coordinate (u,v)
  const float gc = (u + 1.0f) * 0.5f * (mesh.cols - 1);
  const float gr = (v + 1.0f) * 0.5f * (mesh.rows - 1);
  const int c0 = std::clamp(static_cast<int>(std::floor(gc)), 0, mesh.cols - 2);
  const int r0 = std::clamp(static_cast<int>(std::floor(gr)), 0, mesh.rows - 2);
  const float tc = std::clamp(gc - c0, 0.0f, 1.0f);
  const float tr = std::clamp(gr - r0, 0.0f, 1.0f);
  std::array<float, 2> out;
  const float x00 = mesh.x(r0, c0), x01 = mesh.x(r0, c0 + 1);
  const float x10 = mesh.x(r0 + 1, c0), x11 = mesh.x(r0 + 1, c0 + 1);
  const float y00 = mesh.y(r0, c0), y01 = mesh.y(r0, c0 + 1);
  const float y10 = mesh.y(r0 + 1, c0), y11 = mesh.y(r0 + 1, c0 + 1);
  out[0] = (x00 * (1 - tc) + x01 * tc) * (1 - tr) + (x10 * (1 - tc) + x11 * tc) * tr;
  out[1] = (y00 * (1 - tc) + y01 * tc) * (1 - tr) + (y10 * (1 - tc) + y11 * tc) * tr;
  return out;
}

WarpGrid densify(const SparseMesh& mesh, int h, int w) {
  if (!mesh.foldover_free()) throw DegenerateWarpError("densify: mesh is folded over");
  WarpGrid grid(h, w);
  for (int i = 0; i < h; ++i) {
    const float v = h > 1 ? 2.0f * i / (h - 1) - 1.0f : 0.0f;
    for (int j = 0; j < w; ++j) {
      const float u = w > 1 ? 2.0f * j / (w - 1) - 1.0f : 0.0f;
      const auto p = densify_at(mesh, u, v);
      grid.x(i, j) = p[0];
      grid.y(i, j) = p[1];
    }
  }
  return grid;
}

}  // namespace dewarp
