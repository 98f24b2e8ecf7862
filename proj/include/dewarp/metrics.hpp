#pragma once

#include <array>
#include <string>
#include <vector>

#include "dewarp/grid.hpp"
#include "dewarp/image.hpp"

namespace dewarp {

// Structural similarity with the reference constants: 11x11 Gaussian window
// (sigma 1.5), K1=0.01, K2=0.03, dynamic range 1.0, mean over valid window
// positions. RGB inputs are converted to ITU-R 601 luma first.
struct SsimOptions {
  int window = 11;
  double sigma = 1.5;
  double k1 = 0.01;
  double k2 = 0.03;
  double dynamic_range = 1.0;
  // images smaller than the window fall back to a 3x3 window; below that a
  // UsageError is raised
  bool fallback_small_window = true;
};

double ssim(const Image& a, const Image& b, const SsimOptions& opts = {});

// 5-tap Gaussian low-pass ([1,4,6,4,1]/16, replicated borders) then 2x
// decimation; one pyramid step.
Image pyramid_downsample(const Image& img);

// level j is computed on inputs downsampled j-1 times; level 1 equals
// ssim() on the originals
std::vector<double> pyramid_ssim(const Image& a, const Image& b, int levels = 5,
                                 const SsimOptions& opts = {});

inline constexpr std::array<double, 5> kMsSsimWeights = {0.0448, 0.2856, 0.3001, 0.2363,
                                                         0.1333};

enum class MsSsimMode {
  weighted_average,  // sum(w_j * ssim_j) / sum(w_j); the weights sum to 1.0001
  product,           // prod(max(ssim_j, 1e-6) ^ w_j), canonical exponent form
};

double ms_ssim_from_levels(const std::vector<double>& levels,
                           MsSsimMode mode = MsSsimMode::weighted_average);
double ms_ssim(const Image& a, const Image& b, MsSsimMode mode = MsSsimMode::weighted_average,
               const SsimOptions& opts = {});

// Mean Euclidean distance in pixels between two dewarp grids' source
// coordinates. Normalized offsets convert to pixels at size/2 per axis
// (2 normalized units span the full side).
double local_distortion(const WarpGrid& pred, const WarpGrid& gt);

struct SampleMetrics {
  std::vector<double> ssim_levels;  // 5 entries
  double ms_ssim = 0.0;
  double ld = -1.0;  // < 0 means absent (no ground-truth grid)
};

struct MetricsReport {
  std::vector<SampleMetrics> samples;
  SampleMetrics mean;                 // dataset means (ld averaged where present)
  SampleMetrics baseline_mean;        // identity-grid baseline means
  int skipped = 0;                    // samples without ground truth

  void finalize();  // fills mean from samples
  std::string table() const;
};

void write_metrics_csv(const std::string& path, const MetricsReport& report);

}  // namespace dewarp
