#include "vessel/weight_archive.hpp"

#include <algorithm>
#include <bit>
#include <charconv>
#include <cstring>
#include <fstream>
#include <iterator>
#include <set>

#include <fmt/format.h>
#include <fmt/ranges.h>

#include "vessel/model.hpp"

namespace vessel {

namespace {

constexpr char kMagic[4] = {'V', 'S', 'W', 'A'};
constexpr std::size_t kHeaderSize = 4 + 4 + 8;

void put_u32(std::vector<std::uint8_t>& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}

void put_u64(std::vector<std::uint8_t>& out, std::uint64_t v) {
  for (int i = 0; i < 8; ++i) out.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}

std::uint64_t get_le(std::span<const std::uint8_t> bytes, std::size_t at, std::size_t width) {
  std::uint64_t v = 0;
  for (std::size_t i = 0; i < width; ++i) v |= static_cast<std::uint64_t>(bytes[at + i]) << (8 * i);
  return v;
}

std::uint64_t parse_u64(std::string_view field, std::size_t byte_offset, std::string_view what) {
  std::uint64_t v = 0;
  const auto [ptr, ec] = std::from_chars(field.data(), field.data() + field.size(), v);
  if (ec != std::errc() || ptr != field.data() + field.size() || field.empty()) {
    throw ArchiveError(fmt::format("weight archive: bad {} '{}' at byte {}", what, field, byte_offset));
  }
  return v;
}

std::vector<std::string_view> split(std::string_view s, char sep) {
  std::vector<std::string_view> parts;
  std::size_t start = 0;
  while (true) {
    const auto pos = s.find(sep, start);
    if (pos == std::string_view::npos) {
      parts.push_back(s.substr(start));
      return parts;
    }
    parts.push_back(s.substr(start, pos - start));
    start = pos + 1;
  }
}

}  // namespace

void WeightArchive::add(std::string name, const Tensor& tensor) {
  if (find(name) != nullptr) throw ArchiveError(fmt::format("weight archive: duplicate name '{}'", name));
  if (name.empty() || name.find_first_of("\t\n") != std::string::npos) {
    throw ArchiveError(fmt::format("weight archive: invalid record name '{}'", name));
  }
  ArchiveRecord rec;
  rec.name = std::move(name);
  rec.shape = tensor.shape();
  rec.offset = payload_.size();
  rec.length = tensor.numel() * sizeof(float);
  for (float v : tensor.data()) {
    const auto bits = std::bit_cast<std::uint32_t>(v);
    put_u32(payload_, bits);
  }
  records_.push_back(std::move(rec));
}

const ArchiveRecord* WeightArchive::find(std::string_view name) const {
  for (const auto& r : records_) {
    if (r.name == name) return &r;
  }
  return nullptr;
}

Tensor WeightArchive::tensor(const ArchiveRecord& record) const {
  std::vector<float> values(record.length / sizeof(float));
  for (std::size_t i = 0; i < values.size(); ++i) {
    values[i] = std::bit_cast<float>(static_cast<std::uint32_t>(get_le(payload_, record.offset + 4 * i, 4)));
  }
  return Tensor(record.shape, std::move(values));
}

std::vector<std::uint8_t> WeightArchive::serialize() const {
  std::string manifest;
  for (const auto& r : records_) {
    manifest += fmt::format("{}\t{}\t{}\t{}\t{}\n", r.name, r.dtype, fmt::join(r.shape, ","), r.offset, r.length);
  }
  std::vector<std::uint8_t> out(std::begin(kMagic), std::end(kMagic));
  put_u32(out, kVersion);
  put_u64(out, manifest.size());
  out.insert(out.end(), manifest.begin(), manifest.end());
  out.insert(out.end(), payload_.begin(), payload_.end());
  return out;
}

WeightArchive WeightArchive::parse(std::span<const std::uint8_t> bytes) {
  if (bytes.size() < kHeaderSize) throw ArchiveError("weight archive: truncated header at byte 0");
  if (std::memcmp(bytes.data(), kMagic, 4) != 0) throw ArchiveError("weight archive: bad magic at byte 0");
  const auto version = get_le(bytes, 4, 4);
  if (version != kVersion) throw ArchiveError(fmt::format("weight archive: unsupported version {} at byte 4", version));
  const auto manifest_len = get_le(bytes, 8, 8);
  if (manifest_len > bytes.size() - kHeaderSize) {
    throw ArchiveError(fmt::format("weight archive: manifest length {} exceeds file at byte 8", manifest_len));
  }
  const std::string_view manifest(reinterpret_cast<const char*>(bytes.data() + kHeaderSize), manifest_len);
  const std::size_t payload_start = kHeaderSize + manifest_len;

  WeightArchive archive;
  archive.payload_.assign(bytes.begin() + static_cast<std::ptrdiff_t>(payload_start), bytes.end());
  std::set<std::string, std::less<>> names;

  std::size_t line_start = 0;
  while (line_start < manifest.size()) {
    const auto line_end = manifest.find('\n', line_start);
    const std::size_t at = kHeaderSize + line_start;
    if (line_end == std::string_view::npos) {
      throw ArchiveError(fmt::format("weight archive: unterminated manifest line at byte {}", at));
    }
    const auto fields = split(manifest.substr(line_start, line_end - line_start), '\t');
    if (fields.size() != 5) {
      throw ArchiveError(fmt::format("weight archive: expected 5 fields, found {} at byte {}", fields.size(), at));
    }
    ArchiveRecord rec;
    rec.name = std::string(fields[0]);
    rec.dtype = std::string(fields[1]);
    if (rec.name.empty()) throw ArchiveError(fmt::format("weight archive: empty name at byte {}", at));
    if (rec.dtype != "f32") {
      throw ArchiveError(fmt::format("weight archive: unsupported dtype '{}' for '{}' at byte {}", rec.dtype, rec.name, at));
    }
    if (!fields[2].empty()) {
      for (auto extent : split(fields[2], ',')) {
        const auto e = parse_u64(extent, at, "shape extent");
        if (e == 0) throw ArchiveError(fmt::format("weight archive: zero extent for '{}' at byte {}", rec.name, at));
        rec.shape.push_back(static_cast<std::size_t>(e));
      }
    }
    rec.offset = parse_u64(fields[3], at, "offset");
    rec.length = parse_u64(fields[4], at, "length");
    if (rec.length != shape_numel(rec.shape) * sizeof(float)) {
      throw ArchiveError(fmt::format("weight archive: length {} does not match shape {} for '{}' at byte {}",
                                     rec.length, shape_str(rec.shape), rec.name, at));
    }
    if (rec.offset > archive.payload_.size() || rec.length > archive.payload_.size() - rec.offset) {
      throw ArchiveError(fmt::format("weight archive: record '{}' runs past the payload at byte {}", rec.name, at));
    }
    if (!names.insert(rec.name).second) {
      throw ArchiveError(fmt::format("weight archive: duplicate name '{}' at byte {}", rec.name, at));
    }
    archive.records_.push_back(std::move(rec));
    line_start = line_end + 1;
  }

  std::vector<const ArchiveRecord*> by_offset;
  for (const auto& r : archive.records_) by_offset.push_back(&r);
  std::sort(by_offset.begin(), by_offset.end(), [](auto* a, auto* b) { return a->offset < b->offset; });
  for (std::size_t i = 1; i < by_offset.size(); ++i) {
    if (by_offset[i - 1]->offset + by_offset[i - 1]->length > by_offset[i]->offset) {
      throw ArchiveError(fmt::format("weight archive: records '{}' and '{}' overlap at payload byte {}",
                                     by_offset[i - 1]->name, by_offset[i]->name, payload_start + by_offset[i]->offset));
    }
  }
  return archive;
}

void WeightArchive::write(const std::filesystem::path& path) const {
  const auto bytes = serialize();
  const auto tmp = std::filesystem::path(path.string() + ".tmp");
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw ArchiveError(fmt::format("weight archive: cannot open {} for writing", tmp.string()));
    out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
    if (!out) throw ArchiveError(fmt::format("weight archive: write to {} failed", tmp.string()));
  }
  std::filesystem::rename(tmp, path);
}

WeightArchive WeightArchive::read(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ArchiveError(fmt::format("weight archive: cannot open {}", path.string()));
  std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return parse(bytes);
}

void save_weights(const Model& model, const std::filesystem::path& path) {
  WeightArchive archive;
  for (const auto& p : model.parameters()) archive.add(p.name, p.tensor);
  archive.write(path);
}

LoadReport load_weights(Model& model, const std::filesystem::path& path, bool strict) {
  return load_weights(model, WeightArchive::read(path), strict);
}

LoadReport load_weights(Model& model, const WeightArchive& archive, bool strict) {
  LoadReport report;
  std::set<std::string, std::less<>> model_names;
  for (const auto& p : model.parameters()) model_names.insert(p.name);

  for (const auto& r : archive.records()) {
    if (!model_names.contains(r.name)) {
      if (strict) throw ArchiveError(fmt::format("weight archive: record '{}' is not a model parameter", r.name));
      report.skipped.push_back(r.name);
    }
  }
  for (auto& p : model.parameters()) {
    const auto* rec = archive.find(p.name);
    if (rec == nullptr) {
      if (strict) throw ArchiveError(fmt::format("weight archive: parameter '{}' missing from archive", p.name));
      report.missing.push_back(p.name);
      continue;
    }
    if (rec->shape != p.tensor.shape()) {
      if (strict) {
        throw ArchiveError(fmt::format("weight archive: record '{}' has shape {} but the model expects {}", p.name,
                                       shape_str(rec->shape), shape_str(p.tensor.shape())));
      }
      report.skipped.push_back(p.name);
      continue;
    }
    const auto loaded = archive.tensor(*rec);
    std::copy(loaded.data().begin(), loaded.data().end(), p.tensor.mutable_data().begin());
    report.loaded.push_back(p.name);
  }
  return report;
}

}  // namespace vessel
