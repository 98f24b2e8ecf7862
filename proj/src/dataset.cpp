#include "dewarp/dataset.hpp"

#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "dewarp/config.hpp"
#include "dewarp/parallel.hpp"

namespace fs = std::filesystem;

namespace dewarp {

namespace {

std::string kinds_to_string(const std::vector<PerturbKind>& kinds) {
  if (kinds.empty()) return "none";
  std::string out;
  for (std::size_t i = 0; i < kinds.size(); ++i) {
    if (i) out += "+";
    out += to_string(kinds[i]);
  }
  return out;
}

std::vector<PerturbKind> kinds_from_string(const std::string& s) {
  std::vector<PerturbKind> out;
  if (s == "none" || s.empty()) return out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, '+')) out.push_back(perturb_kind_from_string(item));
  return out;
}

std::vector<std::string> list_pngs(const std::string& dir) {
  std::vector<std::string> files;
  if (!fs::is_directory(dir)) throw DataError("not a directory: " + dir);
  for (const auto& e : fs::directory_iterator(dir)) {
    if (e.is_regular_file() && e.path().extension() == ".png") files.push_back(e.path().string());
  }
  std::sort(files.begin(), files.end());
  if (files.empty()) throw DataError("no .png files in " + dir);
  return files;
}

Image pick_source(const std::string& dir, std::uint64_t seed, int size, bool page) {
  if (dir.empty()) return page ? builtin_page(seed, size) : builtin_texture(seed, size);
  const auto files = list_pngs(dir);
  return read_png(files[seed % files.size()]);
}

}  // namespace

void Manifest::save(const std::string& path) const {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw DataError("manifest: cannot write " + path);
  out << "dewarp-dataset v1\n";
  out << "count=" << count << "\n";
  out << "base_seed=" << options.base_seed << "\n";
  out << "size=" << options.spec.size << "\n";
  out << "pages=" << (options.pages_dir.empty() ? "builtin" : options.pages_dir) << "\n";
  out << "textures=" << (options.textures_dir.empty() ? "builtin" : options.textures_dir) << "\n";
  out << "num_perturbations=" << options.spec.num_perturbations << "\n";
  out << "kinds=" << kinds_to_string(options.spec.kinds) << "\n";
  out << "mesh_rows=" << options.spec.mesh_rows << "\n";
  out << "mesh_cols=" << options.spec.mesh_cols << "\n";
  out << "fold_alpha=" << options.spec.ranges.fold_alpha_lo << "," << options.spec.ranges.fold_alpha_hi
      << "\n";
  out << "curve_alpha=" << options.spec.ranges.curve_alpha_lo << ","
      << options.spec.ranges.curve_alpha_hi << "\n";
  out << "displacement=" << options.spec.ranges.displacement_lo << ","
      << options.spec.ranges.displacement_hi << "\n";
  out << "doc_fraction=" << options.spec.min_doc_fraction << "," << options.spec.max_doc_fraction
      << "\n";
  out << "max_rotation_deg=" << options.spec.max_rotation_deg << "\n";
  out << "sobel_threshold=" << options.spec.sobel_threshold << "\n";
  out << "samples:\n";
  for (const auto& e : entries)
    out << e.index << " seed=" << e.seed << " kinds=" << kinds_to_string(e.kinds)
        << " recon_ssim=" << e.recon_ssim << "\n";
  if (!out) throw DataError("manifest: write failed for " + path);
}

Manifest Manifest::load(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DataError("manifest: cannot open " + path);
  std::string line;
  if (!std::getline(in, line) || line != "dewarp-dataset v1")
    throw DataError("manifest: bad header in " + path);

  Manifest m;
  std::ostringstream header;
  while (std::getline(in, line)) {
    if (line == "samples:") break;
    header << line << "\n";
  }
  const KeyValueConfig kv = KeyValueConfig::parse(header.str());
  m.count = static_cast<int>(kv.get_int("count", 0));
  m.options.base_seed = kv.get_u64("base_seed", 0);
  m.options.spec.size = static_cast<int>(kv.get_int("size", 256));
  const std::string pages = kv.get("pages", "builtin");
  const std::string textures = kv.get("textures", "builtin");
  m.options.pages_dir = pages == "builtin" ? "" : pages;
  m.options.textures_dir = textures == "builtin" ? "" : textures;
  m.options.spec.num_perturbations = static_cast<int>(kv.get_int("num_perturbations", -1));
  m.options.spec.kinds = kinds_from_string(kv.get("kinds", "fold+curve"));
  m.options.spec.mesh_rows = static_cast<int>(kv.get_int("mesh_rows", 21));
  m.options.spec.mesh_cols = static_cast<int>(kv.get_int("mesh_cols", 21));
  auto parse_range = [&](const std::string& key, double& lo, double& hi) {
    const std::string v = kv.get(key, "");
    if (v.empty()) return;
    const auto comma = v.find(',');
    if (comma == std::string::npos) throw DataError("manifest: bad range for " + key);
    lo = std::stod(v.substr(0, comma));
    hi = std::stod(v.substr(comma + 1));
  };
  parse_range("fold_alpha", m.options.spec.ranges.fold_alpha_lo, m.options.spec.ranges.fold_alpha_hi);
  parse_range("curve_alpha", m.options.spec.ranges.curve_alpha_lo,
              m.options.spec.ranges.curve_alpha_hi);
  parse_range("displacement", m.options.spec.ranges.displacement_lo,
              m.options.spec.ranges.displacement_hi);
  parse_range("doc_fraction", m.options.spec.min_doc_fraction, m.options.spec.max_doc_fraction);
  m.options.spec.max_rotation_deg = kv.get_double("max_rotation_deg", 15.0);
  m.options.spec.sobel_threshold = kv.get_double("sobel_threshold", 0.2);

  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::istringstream ls(line);
    ManifestEntry e;
    ls >> e.index;
    std::string tok;
    while (ls >> tok) {
      const auto eq = tok.find('=');
      if (eq == std::string::npos) continue;
      const std::string key = tok.substr(0, eq);
      const std::string val = tok.substr(eq + 1);
      if (key == "seed")
        e.seed = std::stoull(val);
      else if (key == "kinds")
        e.kinds = kinds_from_string(val);
      else if (key == "recon_ssim")
        e.recon_ssim = std::stod(val);
    }
    m.entries.push_back(std::move(e));
  }
  if (static_cast<int>(m.entries.size()) != m.count)
    throw DataError("manifest: entry count " + std::to_string(m.entries.size()) +
                    " != declared count " + std::to_string(m.count));
  return m;
}

std::string sample_file(const std::string& dir, const char* stem, int index, const char* ext) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%s_%06d.%s", stem, index, ext);
  return (fs::path(dir) / buf).string();
}

void write_sample_files(const std::string& dir, int index, const DocumentSample& sample) {
  write_png(sample_file(dir, "warped", index, "png"), sample.warped);
  write_png(sample_file(dir, "flat", index, "png"), sample.flat);
  write_wgrd(sample_file(dir, "grid", index, "wgrd"), sample.gt_grid);
  write_png(sample_file(dir, "edge", index, "png"), sample.edge_mask);
}

DocumentSample read_sample_files(const std::string& dir, int index) {
  DocumentSample s;
  s.warped = read_png(sample_file(dir, "warped", index, "png"));
  s.flat = read_png(sample_file(dir, "flat", index, "png"));
  s.gt_grid = read_wgrd(sample_file(dir, "grid", index, "wgrd"));
  s.edge_mask = read_png(sample_file(dir, "edge", index, "png"));
  for (auto& v : s.edge_mask.px) v = v >= 0.5f ? 1.0f : 0.0f;
  return s;
}

DocumentSample regenerate_sample(const Manifest& manifest, int index) {
  const auto& opt = manifest.options;
  const std::uint64_t seed = derive_seed(opt.base_seed, static_cast<std::uint64_t>(index));
  WarpSpec spec = opt.spec;
  spec.rng_seed = seed;
  const Image page = pick_source(opt.pages_dir, derive_seed(seed, 1), spec.size, true);
  const Image texture = pick_source(opt.textures_dir, derive_seed(seed, 2), spec.size, false);
  return synthesize_sample(page, texture, spec);
}

Manifest generate_dataset(int count, const DatasetOptions& options, const std::string& dir) {
  if (count < 0) throw UsageError("generate_dataset: count must be >= 0");
  fs::create_directories(dir);
  Manifest manifest;
  manifest.options = options;
  manifest.count = count;
  manifest.entries.resize(count);

  std::vector<std::string> failures(count);
  parallel_for(static_cast<std::size_t>(count), [&](std::size_t i) {
    try {
      const DocumentSample sample = regenerate_sample(manifest, static_cast<int>(i));
      write_sample_files(dir, static_cast<int>(i), sample);
      ManifestEntry& e = manifest.entries[i];
      e.index = static_cast<int>(i);
      e.seed = sample.seed;
      e.kinds = sample.kinds_drawn;
      e.recon_ssim = sample.recon_ssim;
    } catch (const std::exception& ex) {
      failures[i] = ex.what();
    }
  });
  for (int i = 0; i < count; ++i)
    if (!failures[i].empty())
      throw DataError("generate_dataset: sample " + std::to_string(i) + " failed: " + failures[i]);

  manifest.save((fs::path(dir) / "manifest.txt").string());
  return manifest;
}

DatasetReader::DatasetReader(const std::string& dir) : dir_(dir) {
  const std::string manifest_path = (fs::path(dir) / "manifest.txt").string();
  if (!fs::exists(manifest_path)) {
    // an empty or missing directory is a valid zero-length dataset
    bool empty = !fs::exists(dir) || fs::is_empty(dir);
    if (empty) {
      manifest_.count = 0;
      return;
    }
    throw DataError("dataset: no manifest.txt in non-empty directory " + dir);
  }
  manifest_ = Manifest::load(manifest_path);

  std::string missing;
  int missing_count = 0;
  for (int i = 0; i < manifest_.count; ++i) {
    for (const char* stem : {"warped", "flat", "edge"}) {
      const std::string p = sample_file(dir_, stem, i, "png");
      if (!fs::exists(p)) {
        ++missing_count;
        if (missing.size() < 512) missing += " " + p;
      }
    }
    const std::string g = sample_file(dir_, "grid", i, "wgrd");
    if (!fs::exists(g)) {
      ++missing_count;
      if (missing.size() < 512) missing += " " + g;
    }
  }
  if (missing_count)
    throw DataError("dataset: " + std::to_string(missing_count) + " missing files:" + missing);
}

DocumentSample DatasetReader::load(int index) const {
  if (index < 0 || index >= manifest_.count)
    throw UsageError("dataset: index " + std::to_string(index) + " out of range");
  DocumentSample s = read_sample_files(dir_, index);
  if (index < static_cast<int>(manifest_.entries.size())) {
    s.seed = manifest_.entries[index].seed;
    s.kinds_drawn = manifest_.entries[index].kinds;
    s.recon_ssim = manifest_.entries[index].recon_ssim;
  }
  return s;
}

}  // namespace dewarp
