#include "vessel/metrics.hpp"

#include <map>

#include <fmt/format.h>

#include "vessel/augment.hpp"

namespace vessel {

ConfusionCounts& ConfusionCounts::operator+=(const ConfusionCounts& o) {
  tp += o.tp;
  fp += o.fp;
  tn += o.tn;
  fn += o.fn;
  return *this;
}

ConfusionCounts confusion(std::span<const float> prediction, std::span<const std::uint8_t> truth, double threshold) {
  if (prediction.size() != truth.size()) {
    throw ShapeError(fmt::format("confusion: {} predictions but {} truth pixels", prediction.size(), truth.size()));
  }
  if (!(threshold > 0 && threshold < 1)) throw std::invalid_argument("confusion: threshold must be in (0, 1)");
  ConfusionCounts c;
  for (std::size_t i = 0; i < truth.size(); ++i) {
    const bool p = prediction[i] >= threshold;
    const bool t = truth[i] != 0;
    c.tp += p && t;
    c.fp += p && !t;
    c.tn += !p && !t;
    c.fn += !p && t;
  }
  return c;
}

ConfusionCounts confusion(const Tensor& prediction, const Tensor& truth, double threshold) {
  if (prediction.shape() != truth.shape()) {
    throw ShapeError(fmt::format("confusion: prediction {} vs truth {}", shape_str(prediction.shape()),
                                 shape_str(truth.shape())));
  }
  std::vector<std::uint8_t> t(truth.numel());
  const auto src = truth.data();
  for (std::size_t i = 0; i < t.size(); ++i) t[i] = src[i] >= 0.5f ? 1 : 0;
  return confusion(prediction.data(), t, threshold);
}

namespace {

double ratio(std::uint64_t num, std::uint64_t den) {
  return den == 0 ? 1.0 : static_cast<double>(num) / static_cast<double>(den);
}

}  // namespace

MetricsReport metrics(const ConfusionCounts& c) {
  return {ratio(c.tp + c.tn, c.total()), ratio(c.tp, c.tp + c.fn), ratio(c.tn, c.tn + c.fp),
          ratio(2 * c.tp, 2 * c.tp + c.fp + c.fn)};
}

MetricsReport mean(std::span<const MetricsReport> reports) {
  if (reports.empty()) return {};
  MetricsReport m{0, 0, 0, 0};
  for (const auto& r : reports) {
    m.accuracy += r.accuracy;
    m.sensitivity += r.sensitivity;
    m.specificity += r.specificity;
    m.dice += r.dice;
  }
  const double n = static_cast<double>(reports.size());
  return {m.accuracy / n, m.sensitivity / n, m.specificity / n, m.dice / n};
}

EvaluationReport evaluate(const FoldPredictor& predict, const SplitPlan& plan,
                          const std::vector<DatasetRecord>& records, const EvalConfig& cfg) {
  std::map<std::string, const DatasetRecord*> by_id;
  for (const auto& r : records) by_id[r.id] = &r;

  EvaluationReport report;
  for (std::size_t k = 0; k < plan.folds.size(); ++k) {
    std::vector<MetricsReport> per_image;
    ConfusionCounts pooled;
    for (const auto& id : plan.folds[k].test_ids) {
      const auto it = by_id.find(id);
      if (it == by_id.end()) throw DataError(fmt::format("fold {}: unknown test id '{}'", k, id));
      Sample s = load_sample(*it->second);
      s.image = preprocess_pipeline(s.image, cfg.preprocess);
      const FinalizedSample fin = finalize(s, cfg.input_height, cfg.input_width);
      const Tensor input(Shape{1, 3, cfg.input_height, cfg.input_width},
                         std::vector<float>(fin.image.data().begin(), fin.image.data().end()));
      const Tensor prob = predict(k, input);
      if (prob.shape() != Shape{1, 1, cfg.input_height, cfg.input_width}) {
        throw ShapeError(fmt::format("evaluate: predictor returned {}", shape_str(prob.shape())));
      }
      ConfusionCounts c;
      if (cfg.native_resolution) {
        const auto up = resize_bilinear(prob.data(), cfg.input_height, cfg.input_width, s.mask.height, s.mask.width);
        c = confusion(up, s.mask.pixels, cfg.threshold);
      } else {
        c = confusion(prob, Tensor(Shape{1, 1, cfg.input_height, cfg.input_width},
                                   std::vector<float>(fin.mask.data().begin(), fin.mask.data().end())),
                      cfg.threshold);
      }
      pooled += c;
      per_image.push_back(metrics(c));
      report.images.push_back({k, id, c, per_image.back()});
    }
    report.folds.push_back(cfg.pooled ? metrics(pooled) : mean(per_image));
  }
  report.aggregate = mean(report.folds);
  return report;
}

std::string EvaluationReport::csv() const {
  std::string out = "fold,id,tp,fp,tn,fn,accuracy,sensitivity,specificity,dice\n";
  const auto row = [&out](std::string_view fold, std::string_view id, const ConfusionCounts* c,
                          const MetricsReport& m) {
    out += fmt::format("{},{},", fold, id);
    out += c ? fmt::format("{},{},{},{},", c->tp, c->fp, c->tn, c->fn) : std::string(",,,,");
    out += fmt::format("{:.9f},{:.9f},{:.9f},{:.9f}\n", m.accuracy, m.sensitivity, m.specificity, m.dice);
  };
  for (const auto& r : images) row(std::to_string(r.fold), r.id, &r.counts, r.metrics);
  for (std::size_t k = 0; k < folds.size(); ++k) row(std::to_string(k), "fold_mean", nullptr, folds[k]);
  row("all", "aggregate", nullptr, aggregate);
  return out;
}

std::string EvaluationReport::table() const {
  std::string out = fmt::format("{:<6} {:<24} {:>8} {:>8} {:>8} {:>8}\n", "fold", "image", "Acc", "Sen", "Spec", "DC");
  const auto row = [&out](std::string_view fold, std::string_view id, const MetricsReport& m) {
    out += fmt::format("{:<6} {:<24} {:>8.4f} {:>8.4f} {:>8.4f} {:>8.4f}\n", fold, id, m.accuracy, m.sensitivity,
                       m.specificity, m.dice);
  };
  for (const auto& r : images) row(std::to_string(r.fold), r.id, r.metrics);
  row("all", fmt::format("mean of {} folds", folds.size()), aggregate);
  return out;
}

Image threshold_mask(std::span<const float> probabilities, std::size_t height, std::size_t width, double threshold) {
  if (probabilities.size() != height * width) throw ShapeError("threshold_mask: size does not match height*width");
  Image out(width, height, 1);
  for (std::size_t i = 0; i < probabilities.size(); ++i) out.pixels[i] = probabilities[i] >= threshold ? 1 : 0;
  return out;
}

Image overlay(const Image& rgb, const Image& mask) {
  if (rgb.width != mask.width || rgb.height != mask.height || rgb.channels != 3 || mask.channels != 1) {
    throw ShapeError("overlay: expects an RGB image and a same-sized mask");
  }
  Image out = rgb;
  for (std::size_t y = 0; y < rgb.height; ++y) {
    for (std::size_t x = 0; x < rgb.width; ++x) {
      if (!mask.at(x, y)) continue;
      out.at(x, y, 0) = 255;
      out.at(x, y, 1) = 0;
      out.at(x, y, 2) = 0;
    }
  }
  return out;
}

}  // namespace vessel
