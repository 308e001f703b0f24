#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "vessel/dataset.hpp"
#include "vessel/preprocess.hpp"
#include "vessel/tensor.hpp"

namespace vessel {

struct ConfusionCounts {
  std::uint64_t tp = 0;
  std::uint64_t fp = 0;
  std::uint64_t tn = 0;
  std::uint64_t fn = 0;

  std::uint64_t total() const { return tp + fp + tn + fn; }
  ConfusionCounts& operator+=(const ConfusionCounts& o);
  bool operator==(const ConfusionCounts&) const = default;
};

// Predictions >= threshold count as vessel. truth holds 0/1.
ConfusionCounts confusion(std::span<const float> prediction, std::span<const std::uint8_t> truth,
                          double threshold = 0.5);
ConfusionCounts confusion(const Tensor& prediction, const Tensor& truth, double threshold = 0.5);

struct MetricsReport {
  double accuracy = 1;
  double sensitivity = 1;
  double specificity = 1;
  double dice = 1;
};

// A ratio whose denominator is empty is 1 (nothing to get wrong).
MetricsReport metrics(const ConfusionCounts& c);
MetricsReport mean(std::span<const MetricsReport> reports);

struct EvalConfig {
  double threshold = 0.5;
  // Sum confusion counts over a fold's images instead of averaging per image.
  bool pooled = false;
  // Upsample predictions to the mask's native size instead of comparing at
  // network resolution.
  bool native_resolution = false;
  std::size_t input_height = 224;
  std::size_t input_width = 224;
  PreprocessConfig preprocess;
};

// Returns [1, 1, H, W] probabilities for a [1, 3, H, W] input with the model
// trained for the given fold. Throws when that model is unavailable.
using FoldPredictor = std::function<Tensor(std::size_t fold, const Tensor& input)>;

struct ImageResult {
  std::size_t fold = 0;
  std::string id;
  ConfusionCounts counts;
  MetricsReport metrics;
};

struct EvaluationReport {
  std::vector<ImageResult> images;
  std::vector<MetricsReport> folds;
  MetricsReport aggregate;

  std::string csv() const;
  std::string table() const;
};

// Per test image: preprocess, finalize to the input size, predict, compare
// with the mask. Fold scores are per-image means (or pooled); the aggregate
// is the unweighted mean over folds.
EvaluationReport evaluate(const FoldPredictor& predict, const SplitPlan& plan,
                          const std::vector<DatasetRecord>& records, const EvalConfig& cfg);

// Probability plane to a 0/1 mask.
Image threshold_mask(std::span<const float> probabilities, std::size_t height, std::size_t width,
                     double threshold);
// Vessel pixels painted red over the image.
Image overlay(const Image& rgb, const Image& mask);

}  // namespace vessel
