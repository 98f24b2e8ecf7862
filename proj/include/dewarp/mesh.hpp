#pragma once

#include <string>
#include <vector>

#include "dewarp/grid.hpp"
#include "dewarp/rng.hpp"

namespace dewarp {

enum class PerturbKind { fold, curve };

std::string to_string(PerturbKind k);
PerturbKind perturb_kind_from_string(const std::string& s);

// Control lattice over the flat document, rest positions spanning [-1,1]^2.
// Positions are where each lattice vertex lands in the warped frame.
struct SparseMesh {
  int rows = 0, cols = 0;
  std::vector<float> pos;  // interleaved x,y

  SparseMesh() = default;
  SparseMesh(int rows_, int cols_);

  static SparseMesh regular(int rows, int cols);

  float& x(int r, int c) { return pos[(static_cast<std::size_t>(r) * cols + c) * 2]; }
  float& y(int r, int c) { return pos[(static_cast<std::size_t>(r) * cols + c) * 2 + 1]; }
  float x(int r, int c) const { return pos[(static_cast<std::size_t>(r) * cols + c) * 2]; }
  float y(int r, int c) const { return pos[(static_cast<std::size_t>(r) * cols + c) * 2 + 1]; }

  // every quad cell keeps positive signed area (both triangles)
  bool foldover_free() const;

  float max_abs_coord() const;
};

struct PerturbParams {
  float px = 0, py = 0;  // anchor point
  float vx = 1, vy = 0;  // unit displacement direction
  float s = 0;           // displacement magnitude
  float alpha = 0.5f;    // kernel shape
};

// Deterministic core: every vertex at distance d from the line through the
// anchor orthogonal to v moves by w(d)*s*v.
//   fold kernel  w(d) = alpha / (d + alpha)          (sharp crease, never 0)
//   curve kernel w(d) = max(0, 1 - (d/R)^alpha)      (smooth, 0 beyond d=R)
// R is half the rest-mesh diagonal (sqrt(2) for the [-1,1]^2 lattice).
double perturb_weight(PerturbKind kind, double d, double alpha, double radius);
SparseMesh perturb_mesh_with(const SparseMesh& mesh, PerturbKind kind, const PerturbParams& p);

struct PerturbRanges {
  double fold_alpha_lo = 0.2, fold_alpha_hi = 0.6;
  double curve_alpha_lo = 1.5, curve_alpha_hi = 3.0;
  double displacement_lo = 0.05, displacement_hi = 0.25;
};

// Random perturbation: draws anchor, direction, magnitude and alpha from
// rng, then retries with reduced magnitude (x0.7, up to 10 times) if the
// result folds over. DegenerateWarpError when no magnitude works.
SparseMesh perturb_mesh(const SparseMesh& mesh, PerturbKind kind, Rng& rng,
                        const PerturbRanges& ranges = {});

// Bilinear interpolation of vertex positions onto an h x w lattice: the
// forward map flat -> warped in normalized coordinates.
WarpGrid densify(const SparseMesh& mesh, int h, int w);

// Continuous evaluation of the mesh map at rest coordinate (u,v) in [-1,1].
std::array<float, 2> densify_at(const SparseMesh& mesh, float u, float v);

}  // namespace dewarp
