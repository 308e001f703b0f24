#include <doctest.h>

#include <cmath>
#include <fstream>
#include <numeric>
#include <set>
#include <sstream>

#include "../support.hpp"
#include "vessel/ops.hpp"
#include "vessel/optim.hpp"
#include "vessel/train.hpp"
#include "vessel/weight_archive.hpp"

using namespace vessel;

namespace {

double step_once(NAdamState<double>& s, Tensor64& p, double g) {
  std::vector<Tensor64> params{p};
  const std::vector<double> grad(p.numel(), g);
  const std::vector<std::span<const double>> grads{grad};
  nadam_step<double>(s, params, grads);
  return p.data()[0];
}

ModelConfig tiny(std::size_t size) {
  ModelConfig c;
  c.input_height = c.input_width = size;
  c.width_factor = 0.125;
  c.seed = 11;
  return c;
}

ExampleSource synthetic_source(std::size_t n, std::size_t size, std::uint64_t seed) {
  std::vector<FinalizedSample> out;
  for (std::size_t i = 0; i < n; ++i) out.push_back(finalize(testing::synthetic_vessel_pair(size, seed + i), size, size));
  return ExampleSource::from(std::move(out));
}

}  // namespace

TEST_CASE("NAdam leaves parameters alone under zero gradients") {
  NAdamState<double> s;
  Tensor64 p({3}, {1.0, -2.0, 0.5});
  for (int i = 0; i < 5; ++i) step_once(s, p, 0.0);
  CHECK(p.data()[0] == 1.0);
  CHECK(p.data()[1] == -2.0);
  CHECK(s.t == 5);
}

TEST_CASE("NAdam first two steps match the closed form") {
  NAdamState<double> s;
  Tensor64 p({1}, {1.0});
  const double lr = 1e-4, b1 = 0.9, b2 = 0.999, eps = 1e-8;
  // Step 1: m = 0.1, v = 0.001, m_hat = v_hat = 1.
  double expected = 1.0 - lr * (b1 * 1.0 + (1 - b1) * 1.0 / (1 - b1)) / (1.0 + eps);
  CHECK(step_once(s, p, 1.0) == doctest::Approx(expected).epsilon(1e-15));
  // Step 2 with g = 0.5.
  const double m = b1 * 0.1 + (1 - b1) * 0.5, v = b2 * 0.001 + (1 - b2) * 0.25;
  const double c1 = 1 - b1 * b1, c2 = 1 - b2 * b2;
  expected -= lr * (b1 * m / c1 + (1 - b1) * 0.5 / c1) / (std::sqrt(v / c2) + eps);
  CHECK(step_once(s, p, 0.5) == doctest::Approx(expected).epsilon(1e-15));
}

TEST_CASE("NAdam minimizes x^2 from x = 5") {
  NAdamState<double> s;
  s.config.lr = 1e-2;
  Tensor64 x({1}, {5.0});
  int steps = 0;
  while (std::abs(x.data()[0]) >= 0.1 && steps < 2000) {
    step_once(s, x, 2.0 * x.data()[0]);
    ++steps;
  }
  CHECK(std::abs(x.data()[0]) < 0.1);
  CHECK(steps < 2000);
}

TEST_CASE("NAdam rejects mismatched gradients") {
  NAdamState<double> s;
  std::vector<Tensor64> params{Tensor64({2}, {1, 2})};
  const std::vector<double> g(3, 0.0);
  const std::vector<std::span<const double>> grads{g};
  CHECK_THROWS_AS(nadam_step<double>(s, params, grads), ShapeError);
}

TEST_CASE("callback trace for [3.0, 2.5, 2.6 x 100]") {
  TrainingMonitor m(1e-4, 25, 0.5, 100);
  std::vector<std::size_t> checkpoints, reductions;
  std::size_t stop = 0;
  std::vector<double> lrs;
  for (std::size_t epoch = 1; epoch <= 102; ++epoch) {
    const double val = epoch == 1 ? 3.0 : epoch == 2 ? 2.5 : 2.6;
    lrs.push_back(m.lr());
    const auto d = m.observe(val);
    if (d.checkpoint) checkpoints.push_back(epoch);
    if (d.reduce_lr) reductions.push_back(epoch);
    if (d.stop) {
      stop = epoch;
      break;
    }
  }
  CHECK(checkpoints == std::vector<std::size_t>{1, 2});
  CHECK(reductions == std::vector<std::size_t>{27, 52, 77});
  CHECK(stop == 102);
  CHECK(m.lr() == doctest::Approx(1e-4 / 8));
  for (std::size_t i = 1; i < lrs.size(); ++i) CHECK(lrs[i] <= lrs[i - 1]);
}

TEST_CASE("strictly decreasing val loss never reduces or stops") {
  TrainingMonitor m(1e-3, 2, 0.5, 3);
  for (int e = 0; e < 50; ++e) {
    const auto d = m.observe(10.0 - e * 0.1);
    CHECK(d.checkpoint);
    CHECK_FALSE(d.reduce_lr);
    CHECK_FALSE(d.stop);
  }
  CHECK(m.lr() == 1e-3);
}

TEST_CASE("equal val loss is not an improvement") {
  TrainingMonitor m(1e-3, 25, 0.5, 100);
  CHECK(m.observe(1.0).checkpoint);
  CHECK_FALSE(m.observe(1.0).checkpoint);
  CHECK(m.epochs_since_improve() == 1);
}

TEST_CASE("split_train_val") {
  std::vector<int> ids(100);
  std::iota(ids.begin(), ids.end(), 0);
  const auto [train, val] = split_train_val(ids, 0.15, 42);
  CHECK(train.size() == 85);
  CHECK(val.size() == 15);
  std::set<int> all(train.begin(), train.end());
  for (int v : val) CHECK(all.insert(v).second);
  CHECK(all.size() == 100);
  const auto again = split_train_val(ids, 0.15, 42);
  CHECK(again.first == train);
  CHECK(again.second == val);
  CHECK(split_train_val(ids, 0.15, 43).second != val);
  CHECK(split_train_val(std::vector<int>{1, 2}, 0.15, 1).second.size() == 1);
  CHECK_THROWS_AS(split_train_val(std::vector<int>{1}, 0.15, 1), std::invalid_argument);
}

TEST_CASE("fit logs the scripted callback trace") {
  Model model(tiny(32));
  TrainConfig cfg;
  cfg.seed = 1;
  cfg.max_epochs = 500;
  const auto train = synthetic_source(2, 32, 1);
  FitHooks hooks;
  hooks.val_loss = [](std::size_t epoch) { return epoch == 1 ? 3.0 : epoch == 2 ? 2.5 : 2.6; };
  const TrainingLog log = fit(model, train, {}, cfg, hooks);
  REQUIRE(log.epochs.size() == 102);
  CHECK(log.stopped_early);
  CHECK(log.best_epoch == 2);
  CHECK(log.epochs[0].event == "checkpoint");
  CHECK(log.epochs[1].event == "checkpoint");
  CHECK(log.epochs[26].event == "lr_reduced");
  CHECK(log.epochs[27].lr == doctest::Approx(5e-5));
  CHECK(log.epochs[101].event == "early_stop");
  std::istringstream csv(log.csv());
  std::string header, first;
  std::getline(csv, header);
  std::getline(csv, first);
  CHECK(header == "epoch,train_loss,val_loss,lr,event");
  CHECK(first.starts_with("1,"));
  CHECK(first.ends_with(",3,0.0001,checkpoint"));
}

TEST_CASE("checkpoint holds the best-val model") {
  testing::TempDir dir("fit");
  Model model(tiny(32));
  TrainConfig cfg;
  cfg.seed = 2;
  cfg.max_epochs = 6;
  cfg.optimizer.lr = 1e-3;
  cfg.checkpoint_path = dir.path() / "best.vswa";
  const auto train = synthetic_source(4, 32, 10), val = synthetic_source(2, 32, 20);
  const TrainingLog log = fit(model, train, val, cfg);
  REQUIRE(std::filesystem::exists(cfg.checkpoint_path));
  Model restored(tiny(32));
  load_weights(restored, cfg.checkpoint_path, true);
  CHECK(std::abs(evaluate_loss(restored, val, cfg) - log.best_val_loss) < 1e-6);
  double min_logged = 1e9;
  for (const auto& e : log.epochs) min_logged = std::min(min_logged, e.val_loss);
  CHECK(min_logged == log.best_val_loss);
}

TEST_CASE("training is reproducible from the seed") {
  TrainConfig cfg;
  cfg.seed = 3;
  cfg.max_epochs = 2;
  const auto train = synthetic_source(3, 32, 30), val = synthetic_source(1, 32, 40);
  Model a(tiny(32)), b(tiny(32));
  CHECK(fit(a, train, val, cfg).csv() == fit(b, train, val, cfg).csv());
}

TEST_CASE("loss on a fixed batch decreases over the first 10 steps") {
  Model model(tiny(64));
  model.set_requires_grad(true);
  const auto src = synthetic_source(2, 64, 50);
  const std::vector<Tensor> imgs{src.get(0).image, src.get(1).image}, masks{src.get(0).mask, src.get(1).mask};
  const Tensor x = stack_batch<float>(imgs), y = stack_batch<float>(masks);
  NAdamState<float> opt;
  opt.config.lr = 1e-3;
  double previous = 1e9;
  for (int step = 0; step < 10; ++step) {
    model.zero_grad();
    Tape<float> tape;
    double loss = 0;
    {
      TapeScope<float> scope(tape);
      const Tensor l = combined_loss<float>({model.forward(x, true, step), y});
      loss = l.item();
      tape.backward(l);
    }
    nadam_step(opt, model);
    CHECK(loss < previous);
    previous = loss;
  }
}

TEST_CASE("non-finite losses abort with the epoch and batch") {
  Model model(tiny(32));
  FinalizedSample bad = finalize(testing::synthetic_vessel_pair(32, 1), 32, 32);
  bad.image.mutable_data()[0] = std::nanf("");
  const auto train = ExampleSource::from({bad, bad});
  TrainConfig cfg;
  cfg.max_epochs = 1;
  CHECK_THROWS_WITH_AS(fit(model, train, train, cfg), doctest::Contains("epoch 1 batch 1"), NumericError);
}

TEST_CASE("zero epochs gives an empty log") {
  Model model(tiny(32));
  TrainConfig cfg;
  cfg.max_epochs = 0;
  const auto src = synthetic_source(2, 32, 1);
  const TrainingLog log = fit(model, src, src, cfg);
  CHECK(log.epochs.empty());
  CHECK(log.csv() == "epoch,train_loss,val_loss,lr,event\n");
}

TEST_CASE("per-epoch resampling keeps every example in play") {
  Model model(tiny(32));
  TrainConfig cfg;
  cfg.seed = 4;
  cfg.max_epochs = 2;
  cfg.resample_val_each_epoch = true;
  const auto train = synthetic_source(3, 32, 60), val = synthetic_source(1, 32, 70);
  const TrainingLog log = fit(model, train, val, cfg);
  CHECK(log.epochs.size() == 2);
}
