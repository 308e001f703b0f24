#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <iterator>
#include <limits>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "vessel/augment.hpp"
#include "vessel/losses.hpp"
#include "vessel/model.hpp"
#include "vessel/optim.hpp"
#include "vessel/random.hpp"

namespace vessel {

struct TrainConfig {
  std::size_t batch_size = 2;
  double val_fraction = 0.15;
  std::uint64_t seed = 0;
  std::size_t max_epochs = 1000;
  double bce_weight = kDefaultBceWeight;
  double jaccard_weight = kDefaultJaccardWeight;
  NAdamConfig optimizer;
  std::size_t lr_patience = 25;
  double lr_factor = 0.5;
  std::size_t stop_patience = 100;
  // Re-split the pooled train + val examples every epoch instead of once.
  bool resample_val_each_epoch = false;
  // Written on every strict val-loss improvement; empty disables.
  std::filesystem::path checkpoint_path;

  void validate() const;
};

struct EpochDecision {
  bool checkpoint = false;
  bool reduce_lr = false;
  bool stop = false;
};

// Checkpoint / LR-reduction / early-stop callbacks. An improvement is a strict
// decrease of the best val loss. The LR counter restarts on improvement and on
// every reduction; the stop counter restarts only on improvement. A stopping
// epoch does not also reduce the LR.
class TrainingMonitor {
 public:
  TrainingMonitor(double lr, std::size_t lr_patience, double lr_factor, std::size_t stop_patience);

  EpochDecision observe(double val_loss);

  double lr() const { return lr_; }
  double best_val_loss() const { return best_; }
  std::size_t epochs_since_improve() const { return since_improve_; }

 private:
  double lr_;
  std::size_t lr_patience_;
  double lr_factor_;
  std::size_t stop_patience_;
  double best_ = std::numeric_limits<double>::infinity();
  std::size_t since_improve_ = 0;
  std::size_t since_lr_change_ = 0;
};

// Shuffles by seed and moves round(fraction * n) (at least 1) items to the
// validation side. Throws std::invalid_argument when fewer than 2 items.
template <typename V>
std::pair<std::vector<V>, std::vector<V>> split_train_val(std::vector<V> items, double fraction, std::uint64_t seed) {
  if (items.size() < 2) throw std::invalid_argument("split_train_val: need at least 2 records");
  if (!(fraction > 0 && fraction < 1)) throw std::invalid_argument("split_train_val: fraction must be in (0, 1)");
  deterministic_shuffle(items, seed);
  const auto n_val = std::clamp<std::size_t>(
      static_cast<std::size_t>(std::llround(fraction * static_cast<double>(items.size()))), 1, items.size() - 1);
  std::vector<V> val(std::make_move_iterator(items.end() - static_cast<std::ptrdiff_t>(n_val)),
                     std::make_move_iterator(items.end()));
  items.resize(items.size() - n_val);
  return {std::move(items), std::move(val)};
}

struct EpochRecord {
  std::size_t epoch = 0;
  double train_loss = 0;
  double val_loss = 0;
  double lr = 0;
  // "checkpoint", "lr_reduced", "early_stop" joined by ';', or empty.
  std::string event;
};

struct TrainingLog {
  std::vector<EpochRecord> epochs;
  double best_val_loss = std::numeric_limits<double>::infinity();
  std::size_t best_epoch = 0;
  bool stopped_early = false;

  std::string csv() const;
  void write_csv(const std::filesystem::path& path) const;
};

// Yields a finalized example on demand so augmented sets never sit in memory
// all at once.
struct ExampleSource {
  std::size_t size = 0;
  std::function<FinalizedSample(std::size_t)> get;

  static ExampleSource from(std::vector<FinalizedSample> examples);
};

struct FitHooks {
  // Replaces the model's val loss; receives the 1-based epoch.
  std::function<double(std::size_t)> val_loss;
  // Called after each epoch is logged.
  std::function<void(const EpochRecord&)> on_epoch;
  // Returning true ends training after this epoch without marking an early stop.
  std::function<bool(const EpochRecord&)> done;
};

// Mean combined loss over the examples, evaluated without dropout.
double evaluate_loss(const Model& model, const ExampleSource& examples, const TrainConfig& cfg);

// Per epoch: shuffled batches of cfg.batch_size through forward, combined
// loss, backward and a NAdam step; then the val loss drives the callbacks.
// A non-finite batch loss throws NumericError naming the epoch and batch.
TrainingLog fit(Model& model, const ExampleSource& train, const ExampleSource& val, const TrainConfig& cfg,
                const FitHooks& hooks = {});

}  // namespace vessel
