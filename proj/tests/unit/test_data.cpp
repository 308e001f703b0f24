#include <doctest.h>

#include <fstream>
#include <numeric>
#include <random>
#include <set>

#include <fmt/format.h>

#include "../oracles.hpp"
#include "../support.hpp"
#include "vessel/dataset.hpp"
#include "vessel/metrics.hpp"

using namespace vessel;
namespace fs = std::filesystem;

namespace {

std::vector<DatasetRecord> fake_records(std::size_t n, const std::vector<std::string>& suffixes = {""}) {
  std::vector<DatasetRecord> out;
  for (std::size_t i = 0; i < n; ++i) {
    const std::string id = fmt::format("{:02}{}", i, suffixes[i % suffixes.size()]);
    out.push_back({id, id + ".png", id + ".png", category_from_id(id)});
  }
  return out;
}

void write_pair(const fs::path& root, const std::string& stem, std::size_t w, std::size_t h, std::uint64_t seed) {
  fs::create_directories(root / "images");
  fs::create_directories(root / "masks");
  write_png(root / "images" / (stem + ".png"), testing::random_image(w, h, 3, seed));
  write_png(root / "masks" / (stem + ".png"), mask_to_png(testing::random_mask(w, h, seed)));
}

}  // namespace

TEST_CASE("load_dataset pairs by stem, sorts and binarizes") {
  testing::TempDir dir("data");
  for (int i : {3, 1, 2}) write_pair(dir.path(), fmt::format("img{}", i), 12, 10, i);
  const auto records = load_dataset(dir.path());
  REQUIRE(records.size() == 3);
  CHECK(records[0].id == "img1");
  CHECK(records[2].id == "img3");
  const Sample s = load_sample(records[0]);
  CHECK(s.image.channels == 3);
  CHECK(s.mask == testing::random_mask(12, 10, 1));
}

TEST_CASE("load_dataset reports orphans and size mismatches") {
  testing::TempDir dir("orphan");
  write_pair(dir.path(), "a", 8, 8, 1);
  write_png(dir.path() / "images" / "lonely.png", testing::random_image(8, 8, 3, 2));
  CHECK_THROWS_WITH_AS(load_dataset(dir.path()), doctest::Contains("'lonely'"), DataError);
  fs::remove(dir.path() / "images" / "lonely.png");
  write_png(dir.path() / "images" / "b.png", testing::random_image(8, 8, 3, 2));
  write_png(dir.path() / "masks" / "b.png", Image(9, 8, 1));
  CHECK_THROWS_WITH_AS(load_dataset(dir.path()), doctest::Contains("'b'"), DataError);
  CHECK_THROWS_AS(load_dataset(dir.path() / "missing"), DataError);
}

TEST_CASE("binarize_mask thresholds above 127") {
  Image m(4, 1, 1);
  m.pixels = {0, 127, 128, 255};
  CHECK(binarize_mask(m).pixels == std::vector<std::uint8_t>{0, 0, 1, 1});
}

TEST_CASE("HRF categories come from the id suffix") {
  CHECK(category_from_id("01_h") == Category::healthy);
  CHECK(category_from_id("01_dr") == Category::diabetic_retinopathy);
  CHECK(category_from_id("12_g") == Category::glaucoma);
  CHECK(category_from_id("12") == Category::none);
}

TEST_CASE("split protocols") {
  const auto stare = make_split(fake_records(20), SplitProtocol::stare_loocv, 0);
  REQUIRE(stare.folds.size() == 20);
  std::multiset<std::string> tested;
  for (const auto& f : stare.folds) {
    CHECK(f.train_ids.size() == 19);
    REQUIRE(f.test_ids.size() == 1);
    tested.insert(f.test_ids[0]);
  }
  CHECK(tested.size() == 20);
  CHECK(std::set<std::string>(tested.begin(), tested.end()).size() == 20);

  const auto chase = make_split(fake_records(28), SplitProtocol::chase_first20, 0);
  REQUIRE(chase.folds.size() == 1);
  CHECK(chase.folds[0].train_ids.size() == 20);
  CHECK(chase.folds[0].test_ids.front() == "20");

  const auto drive = make_split(fake_records(40), SplitProtocol::drive_fixed, 0);
  CHECK(drive.folds[0].train_ids.size() == 20);
  CHECK(drive.folds[0].test_ids.size() == 20);

  const auto hrf = make_split(fake_records(45, {"_h", "_dr", "_g"}), SplitProtocol::hrf_5percat, 0);
  CHECK(hrf.folds[0].train_ids.size() == 15);
  CHECK(hrf.folds[0].test_ids.size() == 30);

  CHECK_THROWS_AS(make_split(fake_records(27), SplitProtocol::chase_first20, 0), DataError);
  CHECK_THROWS_AS(make_split(fake_records(45), SplitProtocol::hrf_5percat, 0), DataError);
}

TEST_CASE("random_15 is seeded and holds out 15 percent") {
  const auto records = fake_records(40);
  const auto a = make_split(records, SplitProtocol::random_15, 9), b = make_split(records, SplitProtocol::random_15, 9);
  CHECK(a.folds[0].test_ids.size() == 6);
  CHECK(a.folds[0].test_ids == b.folds[0].test_ids);
  CHECK(make_split(records, SplitProtocol::random_15, 10).folds[0].test_ids != a.folds[0].test_ids);
  CHECK(parse_protocol("random_15") == SplitProtocol::random_15);
  CHECK_THROWS_AS(parse_protocol("kfold"), std::invalid_argument);
}

TEST_CASE("confusion matches a brute-force count") {
  for (std::uint64_t s = 0; s < 100; ++s) {
    const auto p = testing::random_tensor<float>({2500}, s, 0, 1, false);
    const Image t = testing::random_mask(50, 50, s + 1000, 0.2);
    const std::vector<float> pv(p.data().begin(), p.data().end());
    const auto c = confusion(pv, t.pixels, 0.5);
    REQUIRE(c == testing::confusion_oracle(pv, t.pixels, 0.5));
    REQUIRE(c.total() == 2500);
  }
  CHECK_THROWS_AS(confusion(std::vector<float>(3), std::vector<std::uint8_t>(4)), ShapeError);
}

TEST_CASE("metrics hand example and sentinels") {
  const MetricsReport m = metrics({8, 5, 85, 2});
  CHECK(m.accuracy == doctest::Approx(0.93));
  CHECK(m.sensitivity == doctest::Approx(0.80));
  CHECK(m.specificity == doctest::Approx(85.0 / 90.0));
  CHECK(m.dice == doctest::Approx(16.0 / 23.0));
  const MetricsReport all_vessel = metrics({10, 0, 0, 0});
  CHECK(all_vessel.specificity == 1.0);
  CHECK(all_vessel.dice == 1.0);
  const MetricsReport inverted = metrics({0, 5, 0, 5});
  CHECK(inverted.accuracy == 0.0);
  CHECK(inverted.dice == 0.0);
}

TEST_CASE("Dice is the harmonic mean of precision and sensitivity") {
  std::mt19937_64 rng(5);
  for (int i = 0; i < 1000; ++i) {
    const ConfusionCounts c{1 + rng() % 1000, 1 + rng() % 1000, rng() % 1000, 1 + rng() % 1000};
    const MetricsReport m = metrics(c);
    const double precision = double(c.tp) / double(c.tp + c.fp);
    REQUIRE(std::abs(m.dice - 2 * precision * m.sensitivity / (precision + m.sensitivity)) < 1e-9);
  }
}

TEST_CASE("metrics are invariant to a shared pixel permutation") {
  const auto p = testing::random_tensor<float>({400}, 1, 0, 1, false);
  const Image t = testing::random_mask(20, 20, 2);
  std::vector<float> pv(p.data().begin(), p.data().end());
  std::vector<std::uint8_t> tv = t.pixels;
  const auto before = confusion(pv, tv);
  std::vector<std::size_t> order(400);
  std::iota(order.begin(), order.end(), std::size_t{0});
  deterministic_shuffle(order, 3);
  std::vector<float> pp(400);
  std::vector<std::uint8_t> tp(400);
  for (std::size_t i = 0; i < 400; ++i) {
    pp[i] = pv[order[i]];
    tp[i] = tv[order[i]];
  }
  CHECK(confusion(pp, tp) == before);
}

TEST_CASE("evaluate aggregates per image and per fold") {
  testing::TempDir dir("eval");
  for (int i = 0; i < 4; ++i) write_pair(dir.path(), fmt::format("{:02}", i), 40, 40, i);
  const auto records = load_dataset(dir.path());
  const SplitPlan plan = make_split(records, SplitProtocol::stare_loocv, 0);
  EvalConfig cfg;
  cfg.input_height = cfg.input_width = 32;

  std::size_t calls = 0;
  const FoldPredictor constant = [&](std::size_t, const Tensor& x) {
    ++calls;
    return Tensor::full({1, 1, x.dim(2), x.dim(3)}, 0.9f);
  };
  const auto report = evaluate(constant, plan, records, cfg);
  CHECK(calls == 4);
  CHECK(report.folds.size() == 4);
  CHECK(report.images.size() == 4);
  double mean_dice = 0;
  for (const auto& r : report.images) {
    CHECK(r.metrics.sensitivity == 1.0);
    CHECK(r.counts.total() == 32 * 32);
    mean_dice += r.metrics.dice / 4;
  }
  CHECK(report.aggregate.dice == doctest::Approx(mean_dice).epsilon(1e-12));
  CHECK(report.csv().find("all,aggregate,") != std::string::npos);

  cfg.native_resolution = true;
  const auto native = evaluate(constant, plan, records, cfg);
  CHECK(native.images[0].counts.total() == 40 * 40);

  cfg.pooled = true;
  const SplitPlan one = make_split(records, SplitProtocol::random_15, 1);
  CHECK(evaluate(constant, one, records, cfg).folds.size() == 1);

  const FoldPredictor missing = [](std::size_t k, const Tensor&) -> Tensor {
    throw std::runtime_error(fmt::format("no model for fold {}", k));
  };
  CHECK_THROWS_AS(evaluate(missing, plan, records, cfg), std::runtime_error);
}

TEST_CASE("constant predictor against an all-vessel mask") {
  const std::vector<float> p(100, 0.9f);
  const std::vector<std::uint8_t> t(100, 1);
  const MetricsReport m = metrics(confusion(p, t));
  CHECK(m.sensitivity == 1.0);
  CHECK(m.specificity == 1.0);
  CHECK(m.dice == 1.0);
}

TEST_CASE("mask and overlay rendering") {
  const std::vector<float> p{0.2f, 0.7f, 0.5f, 0.1f};
  const Image m = threshold_mask(p, 2, 2, 0.5);
  CHECK(m.pixels == std::vector<std::uint8_t>{0, 1, 1, 0});
  const Image rgb(2, 2, 3, 100);
  const Image o = overlay(rgb, m);
  CHECK(o.at(1, 0, 0) == 255);
  CHECK(o.at(1, 0, 1) == 0);
  CHECK(o.at(0, 0, 0) == 100);
}
