#include "dewarp/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>

namespace dewarp {

static_assert(std::endian::native == std::endian::little,
              "checkpoint io assumes a little-endian host");

namespace {

template <typename T>
void put(std::ofstream& out, T v) {
  out.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <typename T>
T get(std::ifstream& in, const char* what) {
  T v{};
  in.read(reinterpret_cast<char*>(&v), sizeof(T));
  if (!in) throw DataError(std::string("checkpoint: truncated while reading ") + what);
  return v;
}

}  // namespace

void write_checkpoint(const std::string& path, const std::vector<ParamRecord>& records) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw DataError("checkpoint: cannot write " + path);
  out.write("GBSU", 4);
  put<std::uint16_t>(out, kCheckpointVersion);
  for (const auto& r : records) {
    if (r.name.size() > 0xffff) throw UsageError("checkpoint: parameter name too long");
    put<std::uint16_t>(out, static_cast<std::uint16_t>(r.name.size()));
    out.write(r.name.data(), static_cast<std::streamsize>(r.name.size()));
    put<std::uint8_t>(out, static_cast<std::uint8_t>(r.dims.size()));
    for (auto d : r.dims) put<std::uint32_t>(out, d);
    if (r.values.size() != r.numel())
      throw UsageError("checkpoint: record '" + r.name + "' dims/payload mismatch");
    out.write(reinterpret_cast<const char*>(r.values.data()),
              static_cast<std::streamsize>(r.values.size() * sizeof(float)));
  }
  if (!out) throw DataError("checkpoint: write failed for " + path);
}

std::vector<ParamRecord> read_checkpoint(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("checkpoint: cannot open " + path);
  char magic[4];
  in.read(magic, 4);
  if (!in || std::memcmp(magic, "GBSU", 4) != 0)
    throw DataError("checkpoint: magic mismatch in " + path);
  const auto version = get<std::uint16_t>(in, "version");
  if (version != kCheckpointVersion)
    throw DataError("checkpoint: unsupported version " + std::to_string(version));

  std::vector<ParamRecord> records;
  for (;;) {
    std::uint16_t name_len;
    in.read(reinterpret_cast<char*>(&name_len), sizeof(name_len));
    if (in.eof()) break;
    if (!in) throw DataError("checkpoint: truncated record header");
    ParamRecord r;
    r.name.resize(name_len);
    in.read(r.name.data(), name_len);
    if (!in) throw DataError("checkpoint: truncated name");
    const auto rank = get<std::uint8_t>(in, "rank");
    r.dims.resize(rank);
    for (auto& d : r.dims) d = get<std::uint32_t>(in, "dim");
    const std::size_t n = r.numel();
    r.values.resize(n);
    in.read(reinterpret_cast<char*>(r.values.data()),
            static_cast<std::streamsize>(n * sizeof(float)));
    if (!in) throw DataError("checkpoint: truncated payload for '" + r.name + "'");
    records.push_back(std::move(r));
  }
  return records;
}

}  // namespace dewarp
