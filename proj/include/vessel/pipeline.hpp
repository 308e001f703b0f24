#pragma once

#include <cstddef>
#include <filesystem>
#include <memory>
#include <vector>

#include "vessel/augment.hpp"
#include "vessel/config.hpp"
#include "vessel/metrics.hpp"
#include "vessel/model.hpp"
#include "vessel/train.hpp"
#include "vessel/weight_archive.hpp"

namespace vessel {

// Finalized examples from already preprocessed samples; with augment each
// sample expands lazily to its 60 variants (index = sample * 60 + variant).
ExampleSource make_example_source(std::shared_ptr<const std::vector<Sample>> samples, bool augment,
                                  std::size_t height, std::size_t width);

// Untaped, dropout-free forward pass.
Tensor predict(const Model& model, const Tensor& input);

struct Segmentation {
  Image mask;  // 0/1 at the input's native size
  Image overlay;
};

Segmentation segment_image(const Model& model, const Image& rgb, const PreprocessConfig& preprocess,
                           double threshold);

// Mean per-image Dice of the model on the samples at network resolution.
double dice_on(const Model& model, const std::vector<Sample>& samples, std::size_t height, std::size_t width,
               double threshold);

struct FoldTrainingResult {
  TrainingLog log;
  LoadReport init;
  double train_dice = 0;
  std::filesystem::path checkpoint;
  std::filesystem::path log_path;
};

std::filesystem::path fold_checkpoint(const std::filesystem::path& dir, std::size_t fold);

// Trains one fold: holds out val_fraction of the fold's training ids,
// optionally loads init weights, fits with checkpointing into out_dir and
// reports the training-set Dice of the best checkpoint.
FoldTrainingResult train_fold(const RunConfig& cfg, const std::vector<DatasetRecord>& records,
                              std::size_t fold_index, const Fold& fold);

}  // namespace vessel
