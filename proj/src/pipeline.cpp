#include "vessel/pipeline.hpp"

#include <map>

#include <fmt/format.h>
#include <fmt/ranges.h>
#include <spdlog/spdlog.h>

#include "vessel/preprocess.hpp"

namespace vessel {

ExampleSource make_example_source(std::shared_ptr<const std::vector<Sample>> samples, bool augment,
                                  std::size_t height, std::size_t width) {
  const std::size_t factor = augment ? kAugmentFactor : 1;
  const std::size_t n = samples->size() * factor;
  return {n, [samples, factor, height, width](std::size_t i) {
            const Sample& s = samples->at(i / factor);
            return factor == 1 ? finalize(s, height, width) : finalize(augment_at(s, i % factor), height, width);
          }};
}

Tensor predict(const Model& model, const Tensor& input) {
  NoGradScope<float> no_grad;
  return model.forward(input, false, 0);
}

namespace {

Tensor as_batch(const Tensor& chw) {
  Shape s{1};
  s.insert(s.end(), chw.shape().begin(), chw.shape().end());
  return Tensor(s, std::vector<float>(chw.data().begin(), chw.data().end()));
}

}  // namespace

Segmentation segment_image(const Model& model, const Image& rgb, const PreprocessConfig& preprocess,
                           double threshold) {
  const auto& mc = model.config();
  const Image conditioned = preprocess_pipeline(rgb, preprocess);
  const Image resized = resize_bilinear(conditioned, mc.input_height, mc.input_width);
  const Tensor prob = predict(model, as_batch(normalize01(resized)));
  const auto native = resize_bilinear(prob.data(), mc.input_height, mc.input_width, rgb.height, rgb.width);
  Segmentation out;
  out.mask = threshold_mask(native, rgb.height, rgb.width, threshold);
  out.overlay = overlay(rgb, out.mask);
  return out;
}

double dice_on(const Model& model, const std::vector<Sample>& samples, std::size_t height, std::size_t width,
               double threshold) {
  std::vector<MetricsReport> reports;
  for (const auto& s : samples) {
    const FinalizedSample fin = finalize(s, height, width);
    const Tensor prob = predict(model, as_batch(fin.image));
    reports.push_back(metrics(confusion(prob.data(), std::vector<std::uint8_t>(fin.mask.data().begin(),
                                                                                  fin.mask.data().end()),
                                        threshold)));
  }
  return mean(reports).dice;
}

std::filesystem::path fold_checkpoint(const std::filesystem::path& dir, std::size_t fold) {
  return dir / fmt::format("fold_{}.vswa", fold);
}

FoldTrainingResult train_fold(const RunConfig& cfg, const std::vector<DatasetRecord>& records,
                              std::size_t fold_index, const Fold& fold) {
  const std::uint64_t seed = cfg.require_seed();
  std::map<std::string, const DatasetRecord*> by_id;
  for (const auto& r : records) by_id[r.id] = &r;
  const auto load = [&](const std::vector<std::string>& ids) {
    auto out = std::make_shared<std::vector<Sample>>();
    for (const auto& id : ids) {
      const auto it = by_id.find(id);
      if (it == by_id.end()) throw DataError(fmt::format("fold {}: unknown id '{}'", fold_index, id));
      Sample s = load_sample(*it->second);
      s.image = preprocess_pipeline(s.image, cfg.preprocess);
      out->push_back(std::move(s));
    }
    return out;
  };

  auto [train_ids, val_ids] = split_train_val(fold.train_ids, cfg.train.val_fraction, derive_seed(seed, 1000 + fold_index));
  spdlog::info("fold {}: {} training, {} validation images", fold_index, train_ids.size(), val_ids.size());
  const auto train_samples = load(train_ids);
  const auto val_samples = load(val_ids);
  const std::size_t h = cfg.model.input_height, w = cfg.model.input_width;
  const ExampleSource train = make_example_source(train_samples, cfg.augment, h, w);
  const ExampleSource val = make_example_source(val_samples, false, h, w);

  ModelConfig mc = cfg.model;
  mc.seed = derive_seed(seed, fold_index);
  Model model(mc);

  FoldTrainingResult result;
  if (!cfg.paths.init_weights.empty()) {
    result.init = load_weights(model, cfg.paths.init_weights, false);
    spdlog::info("init weights: loaded {} [{}]", result.init.loaded.size(), fmt::join(result.init.loaded, ", "));
    spdlog::info("init weights: missing {} [{}]", result.init.missing.size(), fmt::join(result.init.missing, ", "));
    spdlog::info("init weights: skipped {} [{}]", result.init.skipped.size(), fmt::join(result.init.skipped, ", "));
  }

  std::filesystem::create_directories(cfg.paths.out_dir);
  TrainConfig tc = cfg.train;
  tc.seed = derive_seed(seed, 2000 + fold_index);
  result.checkpoint = fold_checkpoint(cfg.paths.out_dir, fold_index);
  result.log_path = cfg.paths.out_dir / fmt::format("fold_{}_log.csv", fold_index);
  tc.checkpoint_path = result.checkpoint;
  std::filesystem::remove(result.checkpoint);

  result.log = fit(model, train, val, tc);
  result.log.write_csv(result.log_path);
  if (std::filesystem::exists(result.checkpoint)) load_weights(model, result.checkpoint, true);
  result.train_dice = dice_on(model, *train_samples, h, w, cfg.eval.threshold);
  spdlog::info("fold {}: best val loss {:.6f} at epoch {}, final train dice {:.4f}", fold_index,
               result.log.best_val_loss, result.log.best_epoch, result.train_dice);
  return result;
}

}  // namespace vessel
