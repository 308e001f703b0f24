#include "vessel/train.hpp"

#include <cmath>
#include <fstream>
#include <numeric>

#include <fmt/format.h>
#include <spdlog/spdlog.h>

#include "vessel/ops.hpp"
#include "vessel/weight_archive.hpp"

namespace vessel {

void TrainConfig::validate() const {
  if (batch_size < 1) throw std::invalid_argument("train: batch_size must be >= 1");
  if (!(val_fraction > 0 && val_fraction < 1)) throw std::invalid_argument("train: val_fraction must be in (0, 1)");
  if (bce_weight < 0 || jaccard_weight < 0) throw std::invalid_argument("train: loss weights must be non-negative");
  if (!(optimizer.lr > 0)) throw std::invalid_argument("train: lr must be positive");
  if (!(lr_factor > 0 && lr_factor < 1)) throw std::invalid_argument("train: lr_factor must be in (0, 1)");
  if (lr_patience < 1 || stop_patience < 1) throw std::invalid_argument("train: patience values must be >= 1");
}

TrainingMonitor::TrainingMonitor(double lr, std::size_t lr_patience, double lr_factor, std::size_t stop_patience)
    : lr_(lr), lr_patience_(lr_patience), lr_factor_(lr_factor), stop_patience_(stop_patience) {}

EpochDecision TrainingMonitor::observe(double val_loss) {
  EpochDecision d;
  if (val_loss < best_) {
    best_ = val_loss;
    since_improve_ = 0;
    since_lr_change_ = 0;
    d.checkpoint = true;
    return d;
  }
  ++since_improve_;
  ++since_lr_change_;
  if (since_improve_ >= stop_patience_) {
    d.stop = true;
    return d;
  }
  if (since_lr_change_ >= lr_patience_) {
    lr_ *= lr_factor_;
    since_lr_change_ = 0;
    d.reduce_lr = true;
  }
  return d;
}

std::string TrainingLog::csv() const {
  std::string out = "epoch,train_loss,val_loss,lr,event\n";
  for (const auto& e : epochs) {
    out += fmt::format("{},{:.9g},{:.9g},{:.9g},{}\n", e.epoch, e.train_loss, e.val_loss, e.lr, e.event);
  }
  return out;
}

void TrainingLog::write_csv(const std::filesystem::path& path) const {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error(fmt::format("cannot write training log {}", path.string()));
  out << csv();
}

ExampleSource ExampleSource::from(std::vector<FinalizedSample> examples) {
  auto shared = std::make_shared<const std::vector<FinalizedSample>>(std::move(examples));
  return {shared->size(), [shared](std::size_t i) { return shared->at(i); }};
}

namespace {

struct Batch {
  Tensor images;
  Tensor masks;
};

Batch assemble(const ExampleSource& src, std::span<const std::size_t> indices) {
  std::vector<Tensor> images, masks;
  images.reserve(indices.size());
  masks.reserve(indices.size());
  for (auto i : indices) {
    auto ex = src.get(i);
    images.push_back(std::move(ex.image));
    masks.push_back(std::move(ex.mask));
  }
  return {stack_batch<float>(images), stack_batch<float>(masks)};
}

double mean_loss(const Model& model, const ExampleSource& src, std::span<const std::size_t> indices,
                 const TrainConfig& cfg) {
  if (indices.empty()) return 0.0;
  double total = 0;
  for (std::size_t start = 0; start < indices.size(); start += cfg.batch_size) {
    const auto chunk = indices.subspan(start, std::min(cfg.batch_size, indices.size() - start));
    const Batch b = assemble(src, chunk);
    const Tensor pred = model.forward(b.images, false, 0);
    const double loss = combined_loss<float>({pred, b.masks}, cfg.bce_weight, cfg.jaccard_weight).item();
    total += loss * static_cast<double>(chunk.size());
  }
  return total / static_cast<double>(indices.size());
}

std::vector<std::size_t> iota_indices(std::size_t n) {
  std::vector<std::size_t> v(n);
  std::iota(v.begin(), v.end(), std::size_t{0});
  return v;
}

std::string join_events(const EpochDecision& d) {
  std::string s;
  const auto add = [&s](const char* e) { s += s.empty() ? e : fmt::format(";{}", e); };
  if (d.checkpoint) add("checkpoint");
  if (d.reduce_lr) add("lr_reduced");
  if (d.stop) add("early_stop");
  return s;
}

}  // namespace

double evaluate_loss(const Model& model, const ExampleSource& examples, const TrainConfig& cfg) {
  const auto idx = iota_indices(examples.size);
  return mean_loss(model, examples, idx, cfg);
}

TrainingLog fit(Model& model, const ExampleSource& train, const ExampleSource& val, const TrainConfig& cfg,
                const FitHooks& hooks) {
  cfg.validate();
  if (train.size == 0) throw std::invalid_argument("fit: training set is empty");
  if (val.size == 0 && !hooks.val_loss) throw std::invalid_argument("fit: validation set is empty");

  // Pooled view used when the split is redrawn every epoch: [train..., val...].
  const ExampleSource pooled{train.size + val.size, [&](std::size_t i) {
                               return i < train.size ? train.get(i) : val.get(i - train.size);
                             }};
  const ExampleSource& train_src = cfg.resample_val_each_epoch ? pooled : train;
  const ExampleSource& val_src = cfg.resample_val_each_epoch ? pooled : val;
  std::vector<std::size_t> train_idx = iota_indices(train.size);
  std::vector<std::size_t> val_idx = iota_indices(val.size);

  NAdamState<float> opt{cfg.optimizer, 0, {}, {}};
  TrainingMonitor monitor(cfg.optimizer.lr, cfg.lr_patience, cfg.lr_factor, cfg.stop_patience);
  TrainingLog log;
  model.set_requires_grad(true);

  for (std::size_t epoch = 1; epoch <= cfg.max_epochs; ++epoch) {
    if (cfg.resample_val_each_epoch) {
      std::tie(train_idx, val_idx) =
          split_train_val(iota_indices(pooled.size), cfg.val_fraction, derive_seed(cfg.seed, 2 * epoch));
    }
    std::vector<std::size_t> order = train_idx;
    deterministic_shuffle(order, derive_seed(cfg.seed, 2 * epoch + 1));

    opt.config.lr = monitor.lr();
    double train_total = 0;
    std::size_t batch_no = 0;
    for (std::size_t start = 0; start < order.size(); start += cfg.batch_size, ++batch_no) {
      const auto chunk = std::span<const std::size_t>(order).subspan(
          start, std::min(cfg.batch_size, order.size() - start));
      const Batch b = assemble(train_src, chunk);
      model.zero_grad();
      Tape<float> tape;
      double loss_value = 0;
      try {
        TapeScope<float> scope(tape);
        const std::uint64_t dropout_seed = derive_seed(cfg.seed, (epoch << 32) + batch_no);
        const Tensor pred = model.forward(b.images, true, dropout_seed);
        const Tensor loss = combined_loss<float>({pred, b.masks}, cfg.bce_weight, cfg.jaccard_weight);
        loss_value = loss.item();
        if (!std::isfinite(loss_value)) throw NumericError("training loss is not finite");
        tape.backward(loss);
      } catch (const NumericError& e) {
        throw NumericError(fmt::format("{} at epoch {} batch {}", e.what(), epoch, batch_no + 1));
      }
      nadam_step(opt, model);
      train_total += loss_value * static_cast<double>(chunk.size());
    }

    EpochRecord rec;
    rec.epoch = epoch;
    rec.train_loss = train_total / static_cast<double>(order.size());
    rec.val_loss = hooks.val_loss ? hooks.val_loss(epoch) : mean_loss(model, val_src, val_idx, cfg);
    if (!std::isfinite(rec.val_loss)) throw NumericError(fmt::format("non-finite validation loss at epoch {}", epoch));
    rec.lr = monitor.lr();
    const EpochDecision d = monitor.observe(rec.val_loss);
    rec.event = join_events(d);
    if (d.checkpoint) {
      log.best_val_loss = rec.val_loss;
      log.best_epoch = epoch;
      if (!cfg.checkpoint_path.empty()) save_weights(model, cfg.checkpoint_path);
    }
    spdlog::info("epoch {} train_loss {:.6f} val_loss {:.6f} lr {:.3g}{}", epoch, rec.train_loss, rec.val_loss,
                 rec.lr, rec.event.empty() ? "" : " " + rec.event);
    log.epochs.push_back(rec);
    if (hooks.on_epoch) hooks.on_epoch(rec);
    if (d.stop) {
      log.stopped_early = true;
      break;
    }
    if (hooks.done && hooks.done(rec)) break;
  }
  model.zero_grad();
  return log;
}

}  // namespace vessel
