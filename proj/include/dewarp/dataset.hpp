#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "dewarp/synth.hpp"

namespace dewarp {

// Generation options. Page and texture sources default to the built-in
// generators; directories of PNGs can stand in for either.
struct DatasetOptions {
  WarpSpec spec;  // rng_seed ignored; per-sample seeds derive from base_seed
  std::uint64_t base_seed = 0;
  std::string pages_dir;     // empty -> builtin pages
  std::string textures_dir;  // empty -> builtin textures
};

struct ManifestEntry {
  int index = 0;
  std::uint64_t seed = 0;
  std::vector<PerturbKind> kinds;
  double recon_ssim = 0.0;
};

struct Manifest {
  DatasetOptions options;
  int count = 0;
  std::vector<ManifestEntry> entries;

  void save(const std::string& path) const;
  static Manifest load(const std::string& path);
};

// Layout inside a dataset directory:
//   warped_%06d.png  flat_%06d.png  grid_%06d.wgrd  edge_%06d.png  manifest.txt
std::string sample_file(const std::string& dir, const char* stem, int index, const char* ext);

void write_sample_files(const std::string& dir, int index, const DocumentSample& sample);
DocumentSample read_sample_files(const std::string& dir, int index);

// Generate `count` samples into `dir` (parallel across indices; sample i is
// fully determined by derive_seed(base_seed, i)). Returns the manifest,
// which is also written to dir/manifest.txt.
Manifest generate_dataset(int count, const DatasetOptions& options, const std::string& dir);

// Rebuild sample `index` from the manifest alone (replay determinism).
DocumentSample regenerate_sample(const Manifest& manifest, int index);

// Reader with an upfront integrity check: a missing file for any index in
// the manifest raises DataError naming the gaps. An empty directory (no
// manifest) reads as an empty dataset.
class DatasetReader {
 public:
  explicit DatasetReader(const std::string& dir);

  int size() const { return manifest_.count; }
  const Manifest& manifest() const { return manifest_; }
  DocumentSample load(int index) const;

 private:
  std::string dir_;
  Manifest manifest_;
};

}  // namespace dewarp
