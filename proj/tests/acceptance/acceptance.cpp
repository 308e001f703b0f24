#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstring>
#include <functional>
#include <iostream>
#include <map>
#include <memory>
#include <set>
#include <string>
#include <vector>

#include <fmt/format.h>
#include <spdlog/spdlog.h>

#include "../grad_suite.hpp"
#include "../oracles.hpp"
#include "../support.hpp"
#include "vessel/augment.hpp"
#include "vessel/dataset.hpp"
#include "vessel/kernels.hpp"
#include "vessel/losses.hpp"
#include "vessel/metrics.hpp"
#include "vessel/model.hpp"
#include "vessel/ops.hpp"
#include "vessel/pipeline.hpp"
#include "vessel/preprocess.hpp"
#include "vessel/train.hpp"
#include "vessel/weight_archive.hpp"

using namespace vessel;
using Clock = std::chrono::steady_clock;

namespace {

// A failed requirement; the message becomes the FAIL line's detail.
struct Unmet : std::runtime_error {
  using std::runtime_error::runtime_error;
};

void require(bool ok, const std::string& what) {
  if (!ok) throw Unmet(what);
}

double seconds_since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

ModelConfig desk_scale(std::size_t size, std::uint64_t seed = 0) {
  ModelConfig c;
  c.input_height = c.input_width = size;
  c.width_factor = 0.125;
  c.seed = seed;
  return c;
}

std::string gradients() {
  const auto t0 = Clock::now();
  double worst32 = 0, worst64 = 0;
  for (const auto& r : testing::gradient_suite<float>()) {
    require(std::isfinite(r.error) && r.error < 1e-3, fmt::format("float {} error {:.3g}", r.name, r.error));
    worst32 = std::max(worst32, r.error);
  }
  const auto suite64 = testing::gradient_suite<double>();
  for (const auto& r : suite64) {
    require(std::isfinite(r.error) && r.error < 1e-5, fmt::format("double {} error {:.3g}", r.name, r.error));
    worst64 = std::max(worst64, r.error);
  }
  const double elapsed = seconds_since(t0);
  require(elapsed < 60, fmt::format("suite took {:.1f}s", elapsed));
  return fmt::format("{} ops, worst float {:.2g}, worst double {:.2g}, {:.1f}s", suite64.size(), worst32, worst64,
                     elapsed);
}

std::string group_norm_check() {
  const std::size_t n = 2, c = 64, hw = 100, groups = 16, per = c / groups * hw;
  const auto x = testing::random_tensor<float>({n, c, 10, 10}, 4, -4, 6, false);
  const auto p = GroupNormParams<float>::make(c, groups);
  const Tensor y = group_norm(x, p);
  double worst_mean = 0, worst_var = 0;
  for (std::size_t i = 0; i < n * groups; ++i) {
    double s = 0, ss = 0;
    for (std::size_t k = 0; k < per; ++k) s += y.data()[i * per + k];
    const double mu = s / static_cast<double>(per);
    for (std::size_t k = 0; k < per; ++k) ss += std::pow(y.data()[i * per + k] - mu, 2);
    worst_mean = std::max(worst_mean, std::abs(mu));
    worst_var = std::max(worst_var, std::abs(ss / static_cast<double>(per) - 1.0));
  }
  require(worst_mean < 1e-5, fmt::format("group mean {:.3g}", worst_mean));
  require(worst_var < 1e-3, fmt::format("group variance off by {:.3g}", worst_var));

  std::vector<float> ref(x.numel());
  reference::group_norm_forward<float>({n, c, hw, groups}, 1e-5f, x.data(), ref);
  double oracle = 0;
  for (std::size_t i = 0; i < ref.size(); ++i) oracle = std::max(oracle, std::abs(double(ref[i]) - y.data()[i]));
  require(oracle <= 1e-5, fmt::format("oracle difference {:.3g}", oracle));

  const Tensor first = select_batch(x, 0);
  const Tensor alone = group_norm(first, p);
  const Tensor batched = select_batch(y, 0);
  require(std::equal(alone.data().begin(), alone.data().end(), batched.data().begin()), "depends on batch");
  return fmt::format("|mean| {:.2g}, |var-1| {:.2g}, oracle {:.2g}, batch independent", worst_mean, worst_var, oracle);
}

std::string loss_identities() {
  const Tensor64 t({6}, {1, 0, 0, 1, 1, 0});
  const LossInputs<double> perfect{t, t};
  require(bce(perfect).item() < 1e-6, "bce of a perfect prediction");
  require(std::abs(jaccard_loss(perfect).item()) < 1e-7, "jaccard of a perfect prediction");
  require(std::abs(jaccard_loss<double>({Tensor64::zeros({6}), t}).item() - 1.0) < 1e-12, "all-zero jaccard");
  const LossInputs<double> hand{Tensor64({3}, {0.5, 0.25, 0.25}), Tensor64({3}, {1, 0, 0})};
  require(std::abs(jaccard_loss(hand).item() - 2.0 / 3.0) < 1e-9, "hand example 1 - 0.5/1.5");
  require(std::abs(bce<double>({Tensor64({2}, {0.5, 0.5}), Tensor64({2}, {1, 0})}).item() - std::log(2.0)) < 1e-12,
          "bce hand example ln 2");
  require(std::abs(jaccard_loss<double>({Tensor64({3}, {0.2, 0.3, 0.5}), Tensor64::zeros({3})}).item() - 0.5) <
              1e-12,
          "vessel-free target");
  double worst = 0;
  for (std::uint64_t s = 0; s < 500; ++s) {
    const auto p = testing::random_tensor<double>({64}, s, 0, 1, false);
    const auto y = testing::binary_target<double>({64}, s);
    const LossInputs<double> in{p, y};
    const double j = jaccard_loss(in).item();
    require(j >= 0 && j <= 1, fmt::format("jaccard {} outside [0,1]", j));
    worst = std::max(worst, std::abs(combined_loss(in).item() - (0.75 * bce(in).item() + 0.25 * j)));
  }
  require(worst < 1e-12, fmt::format("combined weighting off by {:.3g}", worst));
  return "perfect 0, all-zero 1, Jaccard 2/3 and BCE ln 2 hand examples, range [0,1], 0.75/0.25 weighting";
}

std::string augmentation() {
  Sample s{testing::random_image(10, 8, 3, 1), testing::random_mask(10, 8, 2)};
  const auto out = augment_sample(s);
  require(out.size() == 60, fmt::format("{} variants", out.size()));
  const std::size_t vessels = std::count(s.mask.pixels.begin(), s.mask.pixels.end(), 1);
  for (std::size_t i = 0; i < 60; ++i) {
    const std::size_t c = i / 12;
    require(augment_at(s, i).image == out[i].image, fmt::format("augment_at({}) differs", i));
    if (c == 0) {
      require(std::count(out[i].mask.pixels.begin(), out[i].mask.pixels.end(), 1) == long(vessels),
              "full-frame variant changed the vessel count");
    }
  }
  // Coordinate grid: every variant is a relabelling of source pixels.
  Image grid(10, 8, 3);
  for (std::size_t y = 0; y < 8; ++y)
    for (std::size_t x = 0; x < 10; ++x) {
      grid.at(x, y, 0) = static_cast<std::uint8_t>(x);
      grid.at(x, y, 1) = static_cast<std::uint8_t>(y);
      grid.at(x, y, 2) = static_cast<std::uint8_t>(s.mask.at(x, y));
    }
  for (const auto& v : augment_sample({grid, s.mask})) {
    for (std::size_t y = 0; y < v.image.height; ++y)
      for (std::size_t x = 0; x < v.image.width; ++x)
        require(v.mask.at(x, y) == v.image.at(x, y, 2), "mask does not follow the image transform");
  }
  std::set<std::vector<std::uint8_t>> distinct;
  for (const auto& v : out) distinct.insert(v.image.pixels);
  std::vector<Sample> corpus;
  for (std::size_t i = 0; i < 271; ++i) corpus.push_back({testing::random_image(4, 4, 3, i), testing::random_mask(4, 4, i)});
  const std::size_t expanded = augment_all(corpus).size();
  require(expanded == 16260, fmt::format("271 pairs expanded to {}", expanded));
  return fmt::format("1 -> 60 ({} distinct), 271 -> {}, masks follow the coordinate grid", distinct.size(), expanded);
}

std::string preprocessing() {
  for (std::uint64_t s = 0; s < 100; ++s) {
    const Image img = testing::random_image(32, 32, 1 + s % 3, s);
    require(median_filter5(img) == testing::median5_oracle(img), fmt::format("median differs for image {}", s));
  }
  Image ends(2, 1, 1);
  ends.pixels = {0, 255};
  for (double g : {0.5, 1.2, 2.0}) require(gamma_correct(ends, g) == ends, fmt::format("gamma {} moved endpoints", g));
  const Image flat(48, 48, 3, 90);
  require(clahe(flat, 2.0, 8, 8) == flat, "CLAHE changed a constant image");
  for (std::uint64_t s = 0; s < 5; ++s) {
    Image img = testing::random_image(40, 30, 3, s);
    for (auto& p : img.pixels) p = static_cast<std::uint8_t>(60 + p / 4);
    require(clahe(img, 1000.0, 1, 1) == testing::global_equalization_oracle(img),
            "single-tile unclipped CLAHE is not global equalization");
  }
  return "median matches oracle on 100 images, gamma keeps 0/255, CLAHE degenerate cases exact";
}

std::string metrics_check() {
  for (std::uint64_t s = 0; s < 100; ++s) {
    const auto p = testing::random_tensor<float>({2500}, s, 0, 1, false);
    const Image t = testing::random_mask(50, 50, s + 77, 0.2);
    const std::vector<float> pv(p.data().begin(), p.data().end());
    require(confusion(pv, t.pixels, 0.5) == testing::confusion_oracle(pv, t.pixels, 0.5),
            fmt::format("confusion differs for pair {}", s));
  }
  const MetricsReport hand = metrics({8, 5, 85, 2});
  require(std::abs(hand.accuracy - 0.93) < 1e-12 && std::abs(hand.sensitivity - 0.8) < 1e-12 &&
              std::abs(hand.specificity - 85.0 / 90.0) < 1e-12 && std::abs(hand.dice - 16.0 / 23.0) < 1e-12,
          "hand example");
  std::mt19937_64 rng(1);
  double worst = 0;
  for (int i = 0; i < 10000; ++i) {
    const ConfusionCounts c{1 + rng() % 5000, 1 + rng() % 5000, rng() % 5000, 1 + rng() % 5000};
    const MetricsReport m = metrics(c);
    const double prec = double(c.tp) / double(c.tp + c.fp);
    worst = std::max(worst, std::abs(m.dice - 2 * prec * m.sensitivity / (prec + m.sensitivity)));
  }
  require(worst < 1e-9, fmt::format("Dice identity off by {:.3g}", worst));
  return fmt::format("100 brute-force counts exact, hand example exact, Dice identity {:.2g}", worst);
}

std::string shapes() {
  std::vector<std::string> parts;
  for (std::size_t size : {224u, 64u, 96u}) {
    const Model m(desk_scale(size, 1));
    const Tensor y = m.forward(testing::random_tensor<float>({1, 3, size, size}, size, 0, 1, false), false, 0);
    require(y.shape() == Shape{1, 1, size, size}, fmt::format("{} input gave a wrong output shape", size));
    require(std::all_of(y.data().begin(), y.data().end(), [](float v) { return v > 0 && v < 1; }),
            "output outside (0,1)");
    parts.push_back(fmt::format("{0}x{0}", size));
  }
  return fmt::format("[1,1,S,S] for S in {} ({} params)", fmt::join(parts, ", "),
                     Model(desk_scale(64)).parameter_count());
}

std::string overfit() {
  constexpr std::size_t kSize = 96;
  auto samples = std::make_shared<std::vector<Sample>>();
  for (std::uint64_t i = 0; i < 4; ++i) samples->push_back(testing::synthetic_vessel_pair(kSize, 500 + i));
  const ExampleSource source = make_example_source(samples, false, kSize, kSize);
  Model model(desk_scale(kSize, 7));
  TrainConfig cfg;
  cfg.seed = 7;
  cfg.max_epochs = 300;
  cfg.optimizer.lr = 1e-3;
  double dice = 0;
  std::size_t epochs = 0;
  FitHooks hooks;
  hooks.done = [&](const EpochRecord& r) {
    epochs = r.epoch;
    if (r.epoch % 5 != 0 && r.epoch != cfg.max_epochs) return false;
    dice = dice_on(model, *samples, kSize, kSize, 0.5);
    return dice >= 0.95;
  };
  const auto t0 = Clock::now();
  fit(model, source, source, cfg, hooks);
  const double elapsed = seconds_since(t0);
  require(dice >= 0.95, fmt::format("training Dice {:.4f} after {} epochs", dice, epochs));
  require(elapsed < 900, fmt::format("took {:.0f}s", elapsed));
  return fmt::format("training Dice {:.4f} after {} epochs in {:.0f}s", dice, epochs, elapsed);
}

std::string callbacks() {
  TrainingMonitor m(1e-4, 25, 0.5, 100);
  std::vector<std::size_t> checkpoints, reductions;
  std::size_t stop = 0;
  for (std::size_t epoch = 1; epoch <= 200 && stop == 0; ++epoch) {
    const auto d = m.observe(epoch == 1 ? 3.0 : epoch == 2 ? 2.5 : 2.6);
    if (d.checkpoint) checkpoints.push_back(epoch);
    if (d.reduce_lr) reductions.push_back(epoch);
    if (d.stop) stop = epoch;
  }
  require(checkpoints == std::vector<std::size_t>{1, 2}, "checkpoints");
  require(reductions == std::vector<std::size_t>{27, 52, 77}, fmt::format("reductions {}", fmt::join(reductions, ",")));
  require(stop == 102, fmt::format("stopped at {}", stop));
  require(std::abs(m.lr() - 1.25e-5) < 1e-15, "final lr");
  return "checkpoints 1,2; LR halved at 27,52,77; stop at 102";
}

std::vector<DatasetRecord> fake_records(std::size_t n, std::vector<std::string> suffixes = {""}) {
  std::vector<DatasetRecord> out;
  for (std::size_t i = 0; i < n; ++i) {
    const std::string id = fmt::format("{:02}{}", i, suffixes[i % suffixes.size()]);
    out.push_back({id, id + ".png", id + ".png", category_from_id(id)});
  }
  return out;
}

std::string splits() {
  const auto stare = make_split(fake_records(20), SplitProtocol::stare_loocv, 0);
  require(stare.folds.size() == 20, "STARE fold count");
  std::set<std::string> tested;
  for (const auto& f : stare.folds) {
    require(f.train_ids.size() == 19 && f.test_ids.size() == 1, "STARE fold sizes");
    require(std::find(f.train_ids.begin(), f.train_ids.end(), f.test_ids[0]) == f.train_ids.end(), "STARE leak");
    tested.insert(f.test_ids[0]);
  }
  require(tested.size() == 20, "STARE coverage");
  const auto sizes = [](const SplitPlan& p) { return std::pair(p.folds[0].train_ids.size(), p.folds[0].test_ids.size()); };
  require(sizes(make_split(fake_records(40), SplitProtocol::drive_fixed, 0)) == std::pair<std::size_t, std::size_t>(20, 20),
          "DRIVE 20/20");
  require(sizes(make_split(fake_records(28), SplitProtocol::chase_first20, 0)) == std::pair<std::size_t, std::size_t>(20, 8),
          "CHASE 20/8");
  const auto hrf = make_split(fake_records(45, {"_h", "_dr", "_g"}), SplitProtocol::hrf_5percat, 0);
  require(sizes(hrf) == std::pair<std::size_t, std::size_t>(15, 30), "HRF 15/30");
  std::map<Category, int> per_category;
  for (const auto& id : hrf.folds[0].train_ids) ++per_category[category_from_id(id)];
  require(per_category.size() == 3, "HRF categories");
  for (const auto& [cat, count] : per_category) require(count == 5, "HRF 5 per category");
  const auto records = fake_records(40);
  const auto a = make_split(records, SplitProtocol::random_15, 5), b = make_split(records, SplitProtocol::random_15, 5);
  require(a.folds[0].test_ids == b.folds[0].test_ids && a.folds[0].train_ids == b.folds[0].train_ids,
          "random split not deterministic");
  require(a.folds[0].test_ids.size() == 6, "random split holds out 15%");
  require(make_split(records, SplitProtocol::random_15, 6).folds[0].test_ids != a.folds[0].test_ids,
          "seed does not change the random split");
  return "DRIVE 20/20, STARE 20x(19/1) full coverage, CHASE 20/8, HRF 15/30 (5 per category), random 34/6 seeded";
}

std::string archive() {
  testing::TempDir dir("acceptance");
  Model source(desk_scale(64, 3));
  const auto path = dir.path() / "model.vswa";
  save_weights(source, path);
  Model restored(desk_scale(64, 99));
  load_weights(restored, path, true);
  for (std::size_t i = 0; i < source.parameters().size(); ++i) {
    const auto x = source.parameters()[i].tensor.data(), y = restored.parameters()[i].tensor.data();
    require(std::memcmp(x.data(), y.data(), x.size_bytes()) == 0, "round trip not bit-exact");
  }
  WeightArchive encoder;
  std::size_t encoder_count = 0;
  for (const auto& p : source.parameters()) {
    if (!p.name.starts_with("encoder.")) continue;
    encoder.add(p.name, p.tensor);
    ++encoder_count;
  }
  encoder.add("classifier.fc.weight", Tensor({2}, {1, 2}));
  Model partial(desk_scale(64, 5));
  const LoadReport r = load_weights(partial, encoder, false);
  require(r.loaded.size() == encoder_count, "encoder tensors not all loaded");
  require(r.loaded.size() + r.missing.size() == partial.parameters().size(), "missing list incomplete");
  require(r.skipped == std::vector<std::string>{"classifier.fc.weight"}, "unknown tensor not skipped");
  bool threw = false;
  try {
    load_weights(partial, encoder, true);
  } catch (const ArchiveError&) {
    threw = true;
  }
  require(threw, "strict partial load did not fail");
  return fmt::format("{} tensors bit-exact; partial load {} loaded, {} missing, 1 skipped", source.parameters().size(),
                     r.loaded.size(), r.missing.size());
}

}  // namespace

int main() {
  spdlog::set_level(spdlog::level::warn);
  const std::vector<std::pair<std::string, std::function<std::string()>>> criteria{
      {"gradient check", gradients},
      {"group norm", group_norm_check},
      {"loss identities", loss_identities},
      {"augmentation", augmentation},
      {"preprocessing oracles", preprocessing},
      {"metrics", metrics_check},
      {"model shapes", shapes},
      {"overfit", overfit},
      {"callback trace", callbacks},
      {"split protocols", splits},
      {"weight archive", archive},
  };
  int failed = 0;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    const auto& [name, check] = criteria[i];
    std::string verdict = "PASS", detail;
    try {
      detail = check();
    } catch (const std::exception& e) {
      verdict = "FAIL";
      detail = e.what();
      ++failed;
    }
    std::cout << fmt::format("{} {:>2} {}: {}", verdict, i + 1, name, detail) << std::endl;
  }
  return failed == 0 ? 0 : 1;
}
