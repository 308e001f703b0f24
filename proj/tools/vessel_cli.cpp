#include <algorithm>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <fmt/format.h>
#include <fmt/ranges.h>
#include <omp.h>
#include <spdlog/spdlog.h>

#include "vessel/augment.hpp"
#include "vessel/config.hpp"
#include "vessel/dataset.hpp"
#include "vessel/metrics.hpp"
#include "vessel/pipeline.hpp"
#include "vessel/preprocess.hpp"
#include "vessel/weight_archive.hpp"

namespace fs = std::filesystem;
using namespace vessel;

namespace {

enum Exit : int { kOk = 0, kUsage = 1, kData = 2, kNumeric = 3 };

struct GlobalOptions {
  std::optional<fs::path> config;
  std::optional<std::uint64_t> seed;
  int threads = 0;
  std::vector<std::string> overrides;
};

RunConfig load_config(const GlobalOptions& g, std::vector<std::string> extra = {}) {
  std::vector<std::string> overrides = g.overrides;
  overrides.insert(overrides.end(), extra.begin(), extra.end());
  RunConfig cfg = RunConfig::load(g.config, overrides);
  if (g.seed) cfg.seed = g.seed;
  return cfg;
}

std::vector<fs::path> image_files(const fs::path& dir) {
  if (!fs::is_directory(dir)) throw DataError(fmt::format("missing directory {}", dir.string()));
  std::vector<fs::path> files;
  for (const auto& e : fs::directory_iterator(dir))
    if (e.is_regular_file() && is_image_file(e.path())) files.push_back(e.path());
  std::sort(files.begin(), files.end());
  return files;
}

int cmd_preprocess(const GlobalOptions& g, const fs::path& in, const fs::path& out) {
  const RunConfig cfg = load_config(g);
  const auto files = image_files(in);
  fs::create_directories(out);
  std::vector<std::string> failed;
  for (const auto& f : files) {
    try {
      const Image img = read_image(f, PixelFormat::rgb);
      const fs::path dst = out / (f.stem().string() + ".png");
      write_png(dst, preprocess_pipeline(img, cfg.preprocess));
      spdlog::info("{} -> {}", f.string(), dst.string());
    } catch (const ImageIoError& e) {
      spdlog::error("{}", e.what());
      failed.push_back(f.filename().string());
    }
  }
  spdlog::info("{} files", files.size() - failed.size());
  if (!failed.empty()) throw DataError(fmt::format("failed to process: {}", fmt::join(failed, ", ")));
  return kOk;
}

int cmd_augment(const GlobalOptions& g, const fs::path& in, const fs::path& out) {
  const RunConfig cfg = load_config(g);
  const auto records = load_dataset(in, {cfg.paths.images_subdir, cfg.paths.masks_subdir, false});
  const fs::path img_dir = out / cfg.paths.images_subdir, mask_dir = out / cfg.paths.masks_subdir;
  fs::create_directories(img_dir);
  fs::create_directories(mask_dir);
  std::size_t written = 0;
  for (const auto& r : records) {
    const auto variants = augment_sample(load_sample(r));
    for (std::size_t i = 0; i < variants.size(); ++i) {
      const std::string name = r.id + augment_suffix(i) + ".png";
      write_png(img_dir / name, variants[i].image);
      write_png(mask_dir / name, mask_to_png(variants[i].mask));
      ++written;
    }
    spdlog::info("{}: {} pairs", r.id, variants.size());
  }
  spdlog::info("{} input pairs -> {} augmented pairs", records.size(), written);
  return kOk;
}

int cmd_train(const GlobalOptions& g, const std::optional<fs::path>& init_weights,
              const std::optional<double>& width_factor, const std::optional<std::size_t>& only_fold) {
  std::vector<std::string> extra;
  if (init_weights) extra.push_back("paths.init_weights=" + init_weights->string());
  if (width_factor) extra.push_back(fmt::format("model.width_factor={}", *width_factor));
  const RunConfig cfg = load_config(g, extra);
  const std::uint64_t seed = cfg.require_seed();
  const auto records = load_dataset(cfg.paths.data_dir, {cfg.paths.images_subdir, cfg.paths.masks_subdir, true});
  const SplitPlan plan = make_split(records, cfg.protocol, seed);
  if (only_fold && *only_fold >= plan.folds.size()) {
    throw ConfigError(fmt::format("--fold {} but the plan has {} folds", *only_fold, plan.folds.size()));
  }
  for (std::size_t k = 0; k < plan.folds.size(); ++k) {
    if (only_fold && k != *only_fold) continue;
    const auto r = train_fold(cfg, records, k, plan.folds[k]);
    spdlog::info("fold {}: checkpoint {}, log {}", k, r.checkpoint.string(), r.log_path.string());
  }
  return kOk;
}

Model load_model(const RunConfig& cfg, const fs::path& archive) {
  if (!fs::exists(archive)) throw ArchiveError(fmt::format("model file {} not found", archive.string()));
  Model model(cfg.model);
  load_weights(model, archive, true);
  return model;
}

int cmd_segment(const GlobalOptions& g, const fs::path& model_path, const fs::path& image, const fs::path& out,
                const std::optional<fs::path>& overlay_path) {
  const RunConfig cfg = load_config(g);
  const Model model = load_model(cfg, model_path);
  const Image rgb = read_image(image, PixelFormat::rgb);
  const Segmentation seg = segment_image(model, rgb, cfg.preprocess, cfg.eval.threshold);
  if (out.has_parent_path()) fs::create_directories(out.parent_path());
  write_png(out, mask_to_png(seg.mask));
  const fs::path ov = overlay_path ? *overlay_path : out.parent_path() / (out.stem().string() + "_overlay.png");
  write_png(ov, seg.overlay);
  spdlog::info("wrote {} and {}", out.string(), ov.string());
  return kOk;
}

int cmd_evaluate(const GlobalOptions& g, const std::optional<fs::path>& output) {
  const RunConfig cfg = load_config(g);
  const std::uint64_t seed = cfg.protocol == SplitProtocol::random_15 ? cfg.require_seed() : cfg.seed.value_or(0);
  const auto records = load_dataset(cfg.paths.data_dir, {cfg.paths.images_subdir, cfg.paths.masks_subdir, true});
  const SplitPlan plan = make_split(records, cfg.protocol, seed);
  std::vector<std::optional<Model>> models(plan.folds.size());
  const FoldPredictor predictor = [&](std::size_t fold, const Tensor& input) {
    if (!models[fold]) models[fold].emplace(load_model(cfg, fold_checkpoint(cfg.models(), fold)));
    return predict(*models[fold], input);
  };
  const EvaluationReport report = evaluate(predictor, plan, records, cfg.eval);
  const fs::path csv_path = output ? *output : cfg.paths.out_dir / "evaluation.csv";
  if (csv_path.has_parent_path()) fs::create_directories(csv_path.parent_path());
  std::ofstream(csv_path, std::ios::binary) << report.csv();
  std::cout << report.table();
  spdlog::info("{} folds, {} images; report {}", report.folds.size(), report.images.size(), csv_path.string());
  return kOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Retinal vessel segmentation: preprocessing, augmentation, training, segmentation, evaluation"};
  app.require_subcommand(1);
  app.footer("Configuration keys (INI sections; override with --set section.key=value or the environment):\n" +
             config_reference());
  GlobalOptions g;
  app.add_option("--config", g.config, "INI configuration file")->check(CLI::ExistingFile);
  app.add_option("--seed", g.seed, "seed, overrides train.seed");
  app.add_option("--threads", g.threads, "OpenMP threads (0: runtime default)")->check(CLI::NonNegativeNumber);
  app.add_option("--set", g.overrides, "section.key=value override, repeatable");
  std::string log_level = "info";
  app.add_option("--log-level", log_level, "trace | debug | info | warn | error");

  fs::path pre_in, pre_out;
  auto* pre = app.add_subcommand("preprocess", "CLAHE, gamma and median filtering of every image in a directory");
  pre->add_option("in_dir", pre_in)->required();
  pre->add_option("out_dir", pre_out)->required();

  fs::path aug_in, aug_out;
  auto* aug = app.add_subcommand("augment", "write the 60 crop/rotation/flip variants of each image/mask pair");
  aug->add_option("in_dir", aug_in, "directory with image and mask subdirectories")->required();
  aug->add_option("out_dir", aug_out)->required();

  std::optional<fs::path> init_weights;
  std::optional<double> width_factor;
  std::optional<std::size_t> fold;
  auto* train = app.add_subcommand("train", "train one model per fold of the configured split");
  train->add_option("--init-weights", init_weights, "archive loaded non-strictly before training");
  train->add_option("--width-factor", width_factor, "channel multiplier, e.g. 0.125");
  train->add_option("--fold", fold, "train only this fold");

  fs::path seg_model, seg_image, seg_out;
  std::optional<fs::path> seg_overlay;
  auto* seg = app.add_subcommand("segment", "write the vessel mask and an overlay for one image");
  seg->add_option("--model", seg_model, "weight archive")->required();
  seg->add_option("image", seg_image)->required();
  seg->add_option("out", seg_out, "mask PNG")->required();
  seg->add_option("--overlay", seg_overlay, "overlay PNG (default: <out>_overlay.png)");

  std::optional<fs::path> eval_out;
  auto* ev = app.add_subcommand("evaluate", "score fold models on their test images");
  ev->add_option("--output", eval_out, "metrics CSV (default: <out_dir>/evaluation.csv)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kOk : kUsage;
  }

  spdlog::set_level(spdlog::level::from_str(log_level));
  if (g.threads > 0) omp_set_num_threads(g.threads);

  try {
    if (*pre) return cmd_preprocess(g, pre_in, pre_out);
    if (*aug) return cmd_augment(g, aug_in, aug_out);
    if (*train) return cmd_train(g, init_weights, width_factor, fold);
    if (*seg) return cmd_segment(g, seg_model, seg_image, seg_out, seg_overlay);
    if (*ev) return cmd_evaluate(g, eval_out);
  } catch (const ConfigError& e) {
    spdlog::error("config: {}", e.what());
    return kUsage;
  } catch (const NumericError& e) {
    spdlog::error("numeric failure: {}", e.what());
    return kNumeric;
  } catch (const std::exception& e) {
    spdlog::error("{}", e.what());
    return kData;
  }
  return kUsage;
}
