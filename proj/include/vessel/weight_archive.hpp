#pragma once

// Named-tensor archive used for checkpoints and encoder weight import.
//
// Layout (all integers little-endian):
//   "VSWA" | u32 version (1) | u64 manifest byte length | manifest | payload
// The manifest is UTF-8, one record per line:
//   name \t dtype \t shape-csv \t offset \t length \n
// dtype is "f32"; offset and length are byte counts relative to the payload
// start; length == product(shape) * 4. Payload values are little-endian
// IEEE-754 binary32.

#include <cstdint>
#include <filesystem>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "vessel/tensor.hpp"

namespace vessel {

class Model;

class ArchiveError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct ArchiveRecord {
  std::string name;
  std::string dtype = "f32";
  Shape shape;
  std::uint64_t offset = 0;
  std::uint64_t length = 0;
};

class WeightArchive {
 public:
  static constexpr std::uint32_t kVersion = 1;

  void add(std::string name, const Tensor& tensor);

  const std::vector<ArchiveRecord>& records() const { return records_; }
  const ArchiveRecord* find(std::string_view name) const;
  Tensor tensor(const ArchiveRecord& record) const;

  std::vector<std::uint8_t> serialize() const;
  // Throws ArchiveError naming the byte offset of the first malformed field.
  static WeightArchive parse(std::span<const std::uint8_t> bytes);

  void write(const std::filesystem::path& path) const;
  static WeightArchive read(const std::filesystem::path& path);

 private:
  std::vector<ArchiveRecord> records_;
  std::vector<std::uint8_t> payload_;
};

struct LoadReport {
  std::vector<std::string> loaded;
  // In the archive but unknown to the model, or shape-mismatched.
  std::vector<std::string> skipped;
  // In the model but absent from the archive.
  std::vector<std::string> missing;
};

void save_weights(const Model& model, const std::filesystem::path& path);
// Non-strict loads match by name and shape and report the rest; strict loads
// throw ArchiveError on any missing, unknown or mismatched name.
LoadReport load_weights(Model& model, const std::filesystem::path& path, bool strict);
LoadReport load_weights(Model& model, const WeightArchive& archive, bool strict);

}  // namespace vessel
