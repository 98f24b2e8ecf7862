#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "dewarp/errors.hpp"
#include "dewarp/layers.hpp"

namespace dewarp {

// Parameter checkpoint file:
//   magic "GBSU", version u16, then per-parameter records:
//   name length u16, name bytes, rank u8, dims u32 each, float32 LE payload.
// Round-trips bit-exactly.
struct ParamRecord {
  std::string name;
  std::vector<std::uint32_t> dims;
  std::vector<float> values;

  std::size_t numel() const {
    std::size_t n = 1;
    for (auto d : dims) n *= d;
    return n;
  }
};

inline constexpr std::uint16_t kCheckpointVersion = 1;

void write_checkpoint(const std::string& path, const std::vector<ParamRecord>& records);
std::vector<ParamRecord> read_checkpoint(const std::string& path);  // DataError on corruption

// Snapshot named parameters (deduplicated by storage identity so shared
// decoder weights are stored once).
template <typename T>
std::vector<ParamRecord> snapshot_params(const std::vector<NamedParam<T>>& params) {
  std::vector<ParamRecord> records;
  records.reserve(params.size());
  for (const auto& p : params) {
    ParamRecord r;
    r.name = p.name;
    const Shape& s = p.tensor.shape();
    r.dims = {static_cast<std::uint32_t>(s.n), static_cast<std::uint32_t>(s.c),
              static_cast<std::uint32_t>(s.h), static_cast<std::uint32_t>(s.w)};
    r.values.reserve(p.tensor.numel());
    const T* d = p.tensor.data();
    for (std::size_t i = 0; i < p.tensor.numel(); ++i)
      r.values.push_back(static_cast<float>(d[i]));
    records.push_back(std::move(r));
  }
  return records;
}

template <typename T>
void load_params(std::vector<NamedParam<T>>& params, const std::vector<ParamRecord>& records) {
  if (records.size() != params.size())
    throw DataError("checkpoint: parameter count mismatch: file has " +
                    std::to_string(records.size()) + ", model has " +
                    std::to_string(params.size()));
  for (std::size_t i = 0; i < params.size(); ++i) {
    const ParamRecord& r = records[i];
    NamedParam<T>& p = params[i];
    if (r.name != p.name)
      throw DataError("checkpoint: parameter order mismatch at '" + r.name + "' vs '" + p.name +
                      "'");
    if (r.numel() != p.tensor.numel())
      throw DataError("checkpoint: size mismatch for '" + r.name + "'");
    T* d = p.tensor.data();
    for (std::size_t j = 0; j < r.values.size(); ++j) d[j] = static_cast<T>(r.values[j]);
  }
}

}  // namespace dewarp
