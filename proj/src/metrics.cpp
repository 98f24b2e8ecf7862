#include "dewarp/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numeric>
#include <sstream>

namespace dewarp {

namespace {

std::vector<double> gaussian_kernel(int size, double sigma) {
  std::vector<double> k(size);
  const double c = (size - 1) / 2.0;
  double sum = 0.0;
  for (int i = 0; i < size; ++i) {
    k[i] = std::exp(-0.5 * (i - c) * (i - c) / (sigma * sigma));
    sum += k[i];
  }
  for (auto& v : k) v /= sum;
  return k;
}

// separable valid-region filtering of a single-channel double buffer
struct Plane {
  int h = 0, w = 0;
  std::vector<double> v;
  Plane(int h_, int w_) : h(h_), w(w_), v(static_cast<std::size_t>(h_) * w_, 0.0) {}
  double& at(int y, int x) { return v[static_cast<std::size_t>(y) * w + x]; }
  double at(int y, int x) const { return v[static_cast<std::size_t>(y) * w + x]; }
};

Plane filter_valid(const Plane& in, const std::vector<double>& k) {
  const int win = static_cast<int>(k.size());
  Plane tmp(in.h, in.w - win + 1);
  for (int y = 0; y < in.h; ++y)
    for (int x = 0; x < tmp.w; ++x) {
      double acc = 0.0;
      for (int t = 0; t < win; ++t) acc += k[t] * in.at(y, x + t);
      tmp.at(y, x) = acc;
    }
  Plane out(in.h - win + 1, tmp.w);
  for (int y = 0; y < out.h; ++y)
    for (int x = 0; x < out.w; ++x) {
      double acc = 0.0;
      for (int t = 0; t < win; ++t) acc += k[t] * tmp.at(y + t, x);
      out.at(y, x) = acc;
    }
  return out;
}

Plane to_plane(const Image& img) {
  const Image gray = img.c == 1 ? img : to_gray(img);
  Plane p(gray.h, gray.w);
  for (int y = 0; y < gray.h; ++y)
    for (int x = 0; x < gray.w; ++x) p.at(y, x) = gray.at(y, x, 0);
  return p;
}

}  // namespace

double ssim(const Image& a, const Image& b, const SsimOptions& opts) {
  if (a.h != b.h || a.w != b.w) throw DimensionError("ssim: image size mismatch");
  int win = opts.window;
  if (std::min(a.h, a.w) < win) {
    if (!opts.fallback_small_window)
      throw UsageError("ssim: image smaller than window and fallback disabled");
    win = 3;
    if (std::min(a.h, a.w) < win) throw UsageError("ssim: image smaller than 3x3");
  }
  const auto kernel = gaussian_kernel(win, opts.sigma);
  const Plane pa = to_plane(a);
  const Plane pb = to_plane(b);

  Plane aa(pa.h, pa.w), bb(pa.h, pa.w), ab(pa.h, pa.w);
  for (std::size_t i = 0; i < pa.v.size(); ++i) {
    aa.v[i] = pa.v[i] * pa.v[i];
    bb.v[i] = pb.v[i] * pb.v[i];
    ab.v[i] = pa.v[i] * pb.v[i];
  }
  const Plane mu1 = filter_valid(pa, kernel);
  const Plane mu2 = filter_valid(pb, kernel);
  const Plane m11 = filter_valid(aa, kernel);
  const Plane m22 = filter_valid(bb, kernel);
  const Plane m12 = filter_valid(ab, kernel);

  const double c1 = (opts.k1 * opts.dynamic_range) * (opts.k1 * opts.dynamic_range);
  const double c2 = (opts.k2 * opts.dynamic_range) * (opts.k2 * opts.dynamic_range);

  double acc = 0.0;
  for (std::size_t i = 0; i < mu1.v.size(); ++i) {
    const double u1 = mu1.v[i], u2 = mu2.v[i];
    const double s11 = m11.v[i] - u1 * u1;
    const double s22 = m22.v[i] - u2 * u2;
    const double s12 = m12.v[i] - u1 * u2;
    const double num = (2.0 * u1 * u2 + c1) * (2.0 * s12 + c2);
    const double den = (u1 * u1 + u2 * u2 + c1) * (s11 + s22 + c2);
    acc += num / den;
  }
  return acc / static_cast<double>(mu1.v.size());
}

Image pyramid_downsample(const Image& img) {
  static const double k[5] = {1.0 / 16, 4.0 / 16, 6.0 / 16, 4.0 / 16, 1.0 / 16};
  const int oh = (img.h + 1) / 2, ow = (img.w + 1) / 2;
  Image tmp(img.h, img.w, img.c);
  // horizontal blur, replicated borders
  for (int y = 0; y < img.h; ++y)
    for (int x = 0; x < img.w; ++x)
      for (int ch = 0; ch < img.c; ++ch) {
        double acc = 0.0;
        for (int t = -2; t <= 2; ++t) {
          const int xx = std::clamp(x + t, 0, img.w - 1);
          acc += k[t + 2] * img.at(y, xx, ch);
        }
        tmp.at(y, x, ch) = static_cast<float>(acc);
      }
  Image blur(img.h, img.w, img.c);
  for (int y = 0; y < img.h; ++y)
    for (int x = 0; x < img.w; ++x)
      for (int ch = 0; ch < img.c; ++ch) {
        double acc = 0.0;
        for (int t = -2; t <= 2; ++t) {
          const int yy = std::clamp(y + t, 0, img.h - 1);
          acc += k[t + 2] * tmp.at(yy, x, ch);
        }
        blur.at(y, x, ch) = static_cast<float>(acc);
      }
  Image out(oh, ow, img.c);
  for (int y = 0; y < oh; ++y)
    for (int x = 0; x < ow; ++x)
      for (int ch = 0; ch < img.c; ++ch) out.at(y, x, ch) = blur.at(y * 2, x * 2, ch);
  return out;
}

std::vector<double> pyramid_ssim(const Image& a, const Image& b, int levels,
                                 const SsimOptions& opts) {
  if (levels < 1) throw UsageError("pyramid_ssim: levels must be >= 1");
  std::vector<double> out;
  Image la = a, lb = b;
  for (int j = 0; j < levels; ++j) {
    if (j > 0) {
      la = pyramid_downsample(la);
      lb = pyramid_downsample(lb);
    }
    out.push_back(ssim(la, lb, opts));
  }
  return out;
}

double ms_ssim_from_levels(const std::vector<double>& levels, MsSsimMode mode) {
  if (levels.size() != kMsSsimWeights.size())
    throw UsageError("ms_ssim: expected " + std::to_string(kMsSsimWeights.size()) + " levels");
  const double wsum = std::accumulate(kMsSsimWeights.begin(), kMsSsimWeights.end(), 0.0);
  if (mode == MsSsimMode::weighted_average) {
    double acc = 0.0;
    for (std::size_t j = 0; j < levels.size(); ++j) acc += kMsSsimWeights[j] * levels[j];
    return acc / wsum;
  }
  double logacc = 0.0;
  for (std::size_t j = 0; j < levels.size(); ++j)
    logacc += kMsSsimWeights[j] * std::log(std::max(levels[j], 1e-6));
  return std::exp(logacc);
}

double ms_ssim(const Image& a, const Image& b, MsSsimMode mode, const SsimOptions& opts) {
  return ms_ssim_from_levels(pyramid_ssim(a, b, 5, opts), mode);
}

double local_distortion(const WarpGrid& pred, const WarpGrid& gt) {
  if (pred.h != gt.h || pred.w != gt.w) throw DimensionError("local_distortion: size mismatch");
  const double fx = pred.w / 2.0;
  const double fy = pred.h / 2.0;
  double acc = 0.0;
  for (int i = 0; i < pred.h; ++i)
    for (int j = 0; j < pred.w; ++j) {
      const double dx = (static_cast<double>(pred.x(i, j)) - gt.x(i, j)) * fx;
      const double dy = (static_cast<double>(pred.y(i, j)) - gt.y(i, j)) * fy;
      acc += std::sqrt(dx * dx + dy * dy);
    }
  return acc / (static_cast<double>(pred.h) * pred.w);
}

void MetricsReport::finalize() {
  mean = SampleMetrics{};
  if (samples.empty()) return;
  mean.ssim_levels.assign(samples[0].ssim_levels.size(), 0.0);
  int ld_count = 0;
  double ld_acc = 0.0;
  for (const auto& s : samples) {
    for (std::size_t j = 0; j < mean.ssim_levels.size(); ++j)
      mean.ssim_levels[j] += s.ssim_levels[j];
    mean.ms_ssim += s.ms_ssim;
    if (s.ld >= 0.0) {
      ld_acc += s.ld;
      ++ld_count;
    }
  }
  const double n = static_cast<double>(samples.size());
  for (auto& v : mean.ssim_levels) v /= n;
  mean.ms_ssim /= n;
  mean.ld = ld_count ? ld_acc / ld_count : -1.0;
}

std::string MetricsReport::table() const {
  std::ostringstream ss;
  ss << "samples: " << samples.size();
  if (skipped) ss << " (skipped " << skipped << " without ground truth)";
  ss << "\n";
  auto row = [&](const char* name, const SampleMetrics& m) {
    ss << name << ": ms_ssim=" << m.ms_ssim;
    if (m.ld >= 0.0) ss << " ld_px=" << m.ld;
    ss << " ssim_levels=[";
    for (std::size_t j = 0; j < m.ssim_levels.size(); ++j)
      ss << (j ? ", " : "") << m.ssim_levels[j];
    ss << "]\n";
  };
  row("mean", mean);
  if (!baseline_mean.ssim_levels.empty()) row("identity-baseline", baseline_mean);
  return ss.str();
}

void write_metrics_csv(const std::string& path, const MetricsReport& report) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw DataError("metrics csv: cannot write " + path);
  out << "sample,ssim_l1,ssim_l2,ssim_l3,ssim_l4,ssim_l5,ms_ssim,ld\n";
  auto row = [&](const std::string& name, const SampleMetrics& m) {
    out << name;
    for (std::size_t j = 0; j < 5; ++j) {
      out << ",";
      if (j < m.ssim_levels.size()) out << m.ssim_levels[j];
    }
    out << "," << m.ms_ssim << ",";
    if (m.ld >= 0.0) out << m.ld;
    out << "\n";
  };
  for (std::size_t i = 0; i < report.samples.size(); ++i)
    row(std::to_string(i), report.samples[i]);
  row("mean", report.mean);
  if (!report.baseline_mean.ssim_levels.empty()) row("identity_baseline", report.baseline_mean);
  if (!out) throw DataError("metrics csv: write failed for " + path);
}

}  // namespace dewarp
