#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "vessel/dataset.hpp"
#include "vessel/metrics.hpp"
#include "vessel/model.hpp"
#include "vessel/preprocess.hpp"
#include "vessel/train.hpp"

namespace vessel {

class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

inline constexpr const char* kEnvPrefix = "VESSEL_";

struct PathsConfig {
  std::filesystem::path data_dir = "data";
  std::string images_subdir = "images";
  std::string masks_subdir = "masks";
  std::filesystem::path out_dir = "out";
  // Where evaluate looks for fold_<k>.vswa; empty means out_dir.
  std::filesystem::path model_dir;
  std::filesystem::path init_weights;
};

// INI file with sections preprocess, augment, model, train, eval, paths.
// Precedence, lowest first: defaults, file, VESSEL_<SECTION>_<KEY> environment
// variables, explicit overrides.
struct RunConfig {
  PreprocessConfig preprocess;
  bool augment = true;
  ModelConfig model;
  TrainConfig train;
  // Mandatory for training and for the random split; there is no default.
  std::optional<std::uint64_t> seed;
  SplitProtocol protocol = SplitProtocol::random_15;
  EvalConfig eval;
  PathsConfig paths;

  // overrides are "section.key=value". Unknown keys and malformed values throw
  // ConfigError.
  static RunConfig load(const std::optional<std::filesystem::path>& file,
                        const std::vector<std::string>& overrides = {});

  void set(const std::string& dotted_key, const std::string& value);
  std::uint64_t require_seed() const;
  std::filesystem::path models() const { return paths.model_dir.empty() ? paths.out_dir : paths.model_dir; }
};

// One line per key: "section.key = default  description".
std::string config_reference();

}  // namespace vessel
