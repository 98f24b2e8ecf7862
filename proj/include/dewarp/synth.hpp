#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "dewarp/image.hpp"
#include "dewarp/mesh.hpp"

namespace dewarp {

// Everything a seed needs to reproduce one synthetic warp.
struct WarpSpec {
  int num_perturbations = -1;  // -1: draw 1..4 per sample
  std::vector<PerturbKind> kinds = {PerturbKind::fold, PerturbKind::curve};
  std::uint64_t rng_seed = 0;
  PerturbRanges ranges;
  int size = 256;
  int mesh_rows = 21, mesh_cols = 21;
  // affine placement of the page inside the frame before warping
  double min_doc_fraction = 0.70, max_doc_fraction = 0.95;
  double max_rotation_deg = 15.0;
  double sobel_threshold = 0.2;  // fraction of the max gradient magnitude
};

struct DocumentSample {
  Image flat;        // size x size RGB, the placed page's source
  Image warped;      // size x size RGB over background texture
  WarpGrid gt_grid;  // backward dewarp map: sample(warped, gt_grid) ~ flat
  Image edge_mask;   // size x size binary {0,1}
  // generation metadata
  std::uint64_t seed = 0;
  std::vector<PerturbKind> kinds_drawn;
  double recon_ssim = 0.0;  // generator self-check value
  std::vector<std::uint8_t> doc_mask;  // frame-space document mask (not persisted)
};

// Union of the dilated 1-pixel document boundary and Sobel edges (threshold
// = sobel_threshold * max magnitude) inside the document region.
Image edge_ground_truth(const Image& warped, const std::vector<std::uint8_t>& doc_mask,
                        double sobel_threshold = 0.2);

DocumentSample synthesize_sample(const Image& flat_page, const Image& texture,
                                 const WarpSpec& spec);

// Built-in deterministic sources so the pipeline runs with zero external
// data: a text-like page (line blocks, rules, a figure box) and a low
// frequency noise texture.
Image builtin_page(std::uint64_t seed, int size);
Image builtin_texture(std::uint64_t seed, int size);

}  // namespace dewarp
