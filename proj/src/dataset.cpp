#include "vessel/dataset.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <map>
#include <set>

#include <fmt/format.h>
#include <fmt/ranges.h>

#include "vessel/random.hpp"

namespace vessel {

namespace fs = std::filesystem;

std::string_view category_name(Category c) {
  switch (c) {
    case Category::healthy:
      return "healthy";
    case Category::diabetic_retinopathy:
      return "diabetic_retinopathy";
    case Category::glaucoma:
      return "glaucoma";
    case Category::none:
      break;
  }
  return "none";
}

Category category_from_id(std::string_view id) {
  if (id.ends_with("_dr")) return Category::diabetic_retinopathy;
  if (id.ends_with("_h")) return Category::healthy;
  if (id.ends_with("_g")) return Category::glaucoma;
  return Category::none;
}

namespace {

std::map<std::string, fs::path> images_by_stem(const fs::path& dir) {
  if (!fs::is_directory(dir)) throw DataError(fmt::format("missing directory {}", dir.string()));
  std::map<std::string, fs::path> out;
  for (const auto& entry : fs::directory_iterator(dir)) {
    if (!entry.is_regular_file() || !is_image_file(entry.path())) continue;
    const std::string stem = entry.path().stem().string();
    if (!out.emplace(stem, entry.path()).second) {
      throw DataError(fmt::format("duplicate stem '{}' in {}", stem, dir.string()));
    }
  }
  return out;
}

}  // namespace

std::vector<DatasetRecord> load_dataset(const fs::path& root, const DatasetLayout& layout) {
  const auto images = images_by_stem(root / layout.images_subdir);
  const auto masks = images_by_stem(root / layout.masks_subdir);
  std::vector<std::string> orphans;
  for (const auto& [stem, path] : images)
    if (!masks.contains(stem)) orphans.push_back(fmt::format("image '{}' has no mask", stem));
  for (const auto& [stem, path] : masks)
    if (!images.contains(stem)) orphans.push_back(fmt::format("mask '{}' has no image", stem));
  if (!orphans.empty()) throw DataError(fmt::format("unpaired files: {}", fmt::join(orphans, "; ")));

  std::vector<DatasetRecord> records;
  for (const auto& [stem, path] : images) {
    DatasetRecord r{stem, path, masks.at(stem), category_from_id(stem)};
    if (layout.verify) load_sample(r);
    records.push_back(std::move(r));
  }
  return records;
}

Image binarize_mask(const Image& gray) {
  if (gray.channels != 1) throw std::invalid_argument("binarize_mask: expected a single-channel image");
  Image out = gray;
  for (auto& p : out.pixels) p = p > 127 ? 1 : 0;
  return out;
}

Image mask_to_png(const Image& mask) {
  Image out = mask;
  for (auto& p : out.pixels) p = p ? 255 : 0;
  return out;
}

Sample load_sample(const DatasetRecord& record) {
  try {
    Sample s{read_image(record.image_path, PixelFormat::rgb),
             binarize_mask(read_image(record.mask_path, PixelFormat::gray))};
    if (s.image.width != s.mask.width || s.image.height != s.mask.height) {
      throw DataError(fmt::format("'{}': image {}x{} but mask {}x{}", record.id, s.image.width, s.image.height,
                                  s.mask.width, s.mask.height));
    }
    return s;
  } catch (const ImageIoError& e) {
    throw DataError(fmt::format("'{}': {}", record.id, e.what()));
  }
}

namespace {

constexpr std::array<std::pair<SplitProtocol, std::string_view>, 5> kProtocols{{
    {SplitProtocol::drive_fixed, "drive_fixed"},
    {SplitProtocol::stare_loocv, "stare_loocv"},
    {SplitProtocol::chase_first20, "chase_first20"},
    {SplitProtocol::hrf_5percat, "hrf_5percat"},
    {SplitProtocol::random_15, "random_15"},
}};

void require_count(const std::vector<DatasetRecord>& records, std::size_t n, SplitProtocol p) {
  if (records.size() != n) {
    throw DataError(fmt::format("{} expects {} records, got {}", protocol_name(p), n, records.size()));
  }
}

Fold first_n(const std::vector<DatasetRecord>& sorted, std::size_t n) {
  Fold f;
  for (std::size_t i = 0; i < sorted.size(); ++i) (i < n ? f.train_ids : f.test_ids).push_back(sorted[i].id);
  return f;
}

}  // namespace

std::string_view protocol_name(SplitProtocol p) {
  for (const auto& [value, name] : kProtocols)
    if (value == p) return name;
  return "unknown";
}

SplitProtocol parse_protocol(std::string_view name) {
  for (const auto& [value, n] : kProtocols)
    if (n == name) return value;
  throw std::invalid_argument(fmt::format("unknown split protocol '{}'", name));
}

void SplitPlan::validate() const {
  for (std::size_t k = 0; k < folds.size(); ++k) {
    const std::set<std::string> train(folds[k].train_ids.begin(), folds[k].train_ids.end());
    for (const auto& id : folds[k].test_ids) {
      if (train.contains(id)) throw std::logic_error(fmt::format("fold {}: '{}' in both train and test", k, id));
    }
  }
}

SplitPlan make_split(const std::vector<DatasetRecord>& records, SplitProtocol protocol, std::uint64_t seed) {
  std::vector<DatasetRecord> sorted = records;
  std::sort(sorted.begin(), sorted.end(), [](const auto& a, const auto& b) { return a.id < b.id; });
  SplitPlan plan{protocol, {}};
  switch (protocol) {
    case SplitProtocol::drive_fixed:
      require_count(sorted, 40, protocol);
      plan.folds.push_back(first_n(sorted, 20));
      break;
    case SplitProtocol::chase_first20:
      require_count(sorted, 28, protocol);
      plan.folds.push_back(first_n(sorted, 20));
      break;
    case SplitProtocol::stare_loocv:
      if (sorted.size() < 2) throw DataError("stare_loocv needs at least 2 records");
      for (std::size_t k = 0; k < sorted.size(); ++k) {
        Fold f;
        for (std::size_t i = 0; i < sorted.size(); ++i) (i == k ? f.test_ids : f.train_ids).push_back(sorted[i].id);
        plan.folds.push_back(std::move(f));
      }
      break;
    case SplitProtocol::hrf_5percat: {
      require_count(sorted, 45, protocol);
      std::map<Category, std::size_t> taken;
      Fold f;
      for (const auto& r : sorted) {
        if (r.category == Category::none) {
          throw DataError(fmt::format("hrf_5percat: '{}' has no _h/_dr/_g category suffix", r.id));
        }
        (taken[r.category]++ < 5 ? f.train_ids : f.test_ids).push_back(r.id);
      }
      for (Category c : {Category::healthy, Category::diabetic_retinopathy, Category::glaucoma}) {
        if (taken[c] != 15) {
          throw DataError(fmt::format("hrf_5percat expects 15 {} records, got {}", category_name(c), taken[c]));
        }
      }
      plan.folds.push_back(std::move(f));
      break;
    }
    case SplitProtocol::random_15: {
      if (sorted.size() < 2) throw DataError("random_15 needs at least 2 records");
      std::vector<std::size_t> order(sorted.size());
      for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
      deterministic_shuffle(order, seed);
      const auto n_test = std::clamp<std::size_t>(
          static_cast<std::size_t>(std::llround(0.15 * static_cast<double>(sorted.size()))), 1, sorted.size() - 1);
      std::vector<bool> is_test(sorted.size(), false);
      for (std::size_t i = 0; i < n_test; ++i) is_test[order[i]] = true;
      Fold f;
      for (std::size_t i = 0; i < sorted.size(); ++i) (is_test[i] ? f.test_ids : f.train_ids).push_back(sorted[i].id);
      plan.folds.push_back(std::move(f));
      break;
    }
  }
  plan.validate();
  return plan;
}

}  // namespace vessel
