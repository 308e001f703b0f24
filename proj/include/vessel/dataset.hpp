#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "vessel/augment.hpp"
#include "vessel/image.hpp"

namespace vessel {

// Missing, unpaired or undecodable inputs.
class DataError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

enum class Category { none, healthy, diabetic_retinopathy, glaucoma };

std::string_view category_name(Category c);
// From the id suffix: "_h", "_dr", "_g"; anything else is Category::none.
Category category_from_id(std::string_view id);

struct DatasetRecord {
  std::string id;
  std::filesystem::path image_path;
  std::filesystem::path mask_path;
  Category category = Category::none;
};

struct DatasetLayout {
  std::string images_subdir = "images";
  std::string masks_subdir = "masks";
  // Decode every pair to check that dimensions agree.
  bool verify = true;
};

// Pairs root/images/<stem>.* with root/masks/<stem>.*, sorted by id. Orphans
// and dimension mismatches throw DataError naming the stem.
std::vector<DatasetRecord> load_dataset(const std::filesystem::path& root, const DatasetLayout& layout = {});

// pixel > 127 -> 1, else 0.
Image binarize_mask(const Image& gray);
// Mask stored as 0/1 scaled to 0/255 for writing.
Image mask_to_png(const Image& mask);

Sample load_sample(const DatasetRecord& record);

enum class SplitProtocol { drive_fixed, stare_loocv, chase_first20, hrf_5percat, random_15 };

std::string_view protocol_name(SplitProtocol p);
SplitProtocol parse_protocol(std::string_view name);

struct Fold {
  std::vector<std::string> train_ids;
  std::vector<std::string> test_ids;
};

struct SplitPlan {
  SplitProtocol protocol = SplitProtocol::random_15;
  std::vector<Fold> folds;

  // Throws std::logic_error when a fold's train and test overlap.
  void validate() const;
};

// drive_fixed: 40 records, first 20 train / last 20 test.
// stare_loocv: n folds of (n - 1, 1).
// chase_first20: 28 records, first 20 / last 8.
// hrf_5percat: 45 records, 15 per category; first 5 of each category train.
// random_15: round(0.15 n) (at least 1) test records drawn by seed.
// Records are taken in id order. Count mismatches throw DataError.
SplitPlan make_split(const std::vector<DatasetRecord>& records, SplitProtocol protocol, std::uint64_t seed);

}  // namespace vessel
