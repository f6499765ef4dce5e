#pragma once

#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include <json.hpp>

#include "pecl/adam.hpp"
#include "pecl/config.hpp"
#include "pecl/metrics.hpp"
#include "pecl/model.hpp"
#include "pecl/rng.hpp"

namespace pecl {

namespace detail {

inline double sigmoid_scalar(double x) {
  return x >= 0.0 ? 1.0 / (1.0 + std::exp(-x))
                  : std::exp(x) / (1.0 + std::exp(x));
}

}  // namespace detail

// Deception probability for one clip under the configured fusion. Score mode
// has no fused head; it mixes the unimodal probabilities with weight w on the
// visual side.
template <typename T>
double clip_score(const PeclModel<T>& m, const ForwardOutput<T>& out,
                  double score_w = 0.5) {
  const ModelConfig& cfg = m.cfg;
  if (cfg.modality == Modality::visual)
    return detail::sigmoid_scalar(static_cast<double>(out.logits_v.item()));
  if (cfg.modality == Modality::audio)
    return detail::sigmoid_scalar(static_cast<double>(out.logits_a.item()));
  if (cfg.fusion == FusionMode::score) {
    auto fused = score_fusion(
        {detail::sigmoid_scalar(static_cast<double>(out.logits_v.item()))},
        {detail::sigmoid_scalar(static_cast<double>(out.logits_a.item()))},
        score_w);
    return fused[0];
  }
  return detail::sigmoid_scalar(static_cast<double>(out.logits_f.at(0, 0)));
}

template <typename T>
MetricsReport evaluate(const PeclModel<T>& m,
                       const std::vector<Example<T>>& data,
                       double score_w = 0.5) {
  if (data.empty()) throw ValueError("evaluate: empty dataset");
  NoGradGuard guard;
  const ModelConfig& cfg = m.cfg;
  const std::size_t k =
      cfg.fusion == FusionMode::pavf && cfg.modality == Modality::both
          ? cfg.effective_aux()
          : 0;

  if (k == 0) {
    std::vector<double> scores;
    std::vector<int> labels;
    scores.reserve(data.size());
    for (const auto& e : data) {
      auto out = forward_clip(m, e.frames, e.wave);
      scores.push_back(clip_score(m, out, score_w));
      labels.push_back(e.label);
    }
    return compute_metrics(scores, labels);
  }

  std::vector<std::vector<double>> scores;
  std::vector<std::vector<int>> targets;
  for (const auto& e : data) {
    if (e.aux.size() < k)
      throw ValueError("evaluate: need " + std::to_string(k) +
                       " auxiliary labels, got " + std::to_string(e.aux.size()));
    auto out = forward_clip(m, e.frames, e.wave);
    std::vector<double> row(k + 1);
    std::vector<int> y(k + 1);
    for (std::size_t t = 0; t <= k; ++t)
      row[t] = detail::sigmoid_scalar(static_cast<double>(out.logits_f.at(0, t)));
    y[0] = e.label;
    for (std::size_t t = 0; t < k; ++t) y[t + 1] = e.aux[t];
    scores.push_back(std::move(row));
    targets.push_back(std::move(y));
  }
  return compute_metrics_multitask(scores, targets);
}

struct EpochRecord {
  std::size_t epoch = 0;  // 1-based
  double loss = 0.0;      // mean total over the epoch's clips
  double loss_audio = 0.0;
  double loss_visual = 0.0;
  double loss_fusion = 0.0;
  bool has_test = false;
  MetricsReport test;

  Json to_json() const {
    Json j;
    j["epoch"] = epoch;
    j["loss"] = loss;
    j["loss_audio"] = loss_audio;
    j["loss_visual"] = loss_visual;
    j["loss_fusion"] = loss_fusion;
    if (has_test) j["test"] = test.to_json();
    return j;
  }
};

struct TrainingLog {
  std::vector<EpochRecord> epochs;

  std::string to_jsonl() const {
    std::string out;
    for (const auto& e : epochs) out += e.to_json().dump() + "\n";
    return out;
  }
};

// Adam over the trainable parameters only, deterministic shuffled batch
// order per epoch, mean loss per batch. Test metrics are computed after each
// epoch when a test set is supplied. The log carries no timing, so rerunning
// a seed reproduces it byte for byte.
template <typename T>
TrainingLog train(PeclModel<T>& m, const std::vector<Example<T>>& train_set,
                  const std::vector<Example<T>>& test_set, std::uint64_t seed,
                  double score_w = 0.5) {
  if (train_set.empty()) throw ValueError("train: empty dataset");
  const OptimSettings& opt = m.cfg.optim;
  if (opt.batch == 0 || opt.epochs == 0)
    throw ConfigError("train: batch and epochs must be positive");

  Adam<T> adam(m.params, AdamConfig{opt.lr, opt.beta1, opt.beta2, opt.eps});
  TrainingLog log;

  std::vector<std::size_t> order(train_set.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;

  for (std::size_t epoch = 1; epoch <= opt.epochs; ++epoch) {
    Rng rng(derive_seed(seed, "shuffle", epoch));
    for (std::size_t i = order.size(); i > 1; --i) {
      auto j = static_cast<std::size_t>(
          rng.uniform(0.0, static_cast<double>(i)));
      if (j >= i) j = i - 1;
      std::swap(order[i - 1], order[j]);
    }

    EpochRecord rec;
    rec.epoch = epoch;
    std::size_t step = 0;
    for (std::size_t start = 0; start < order.size(); start += opt.batch) {
      const std::size_t end = std::min(order.size(), start + opt.batch);
      Tensor<T> sum;
      for (std::size_t i = start; i < end; ++i) {
        const Example<T>& e = train_set[order[i]];
        auto out = forward_clip(m, e.frames, e.wave);
        auto terms = clip_loss_terms(m, out, e.label, e.aux);
        rec.loss_audio += terms.audio;
        rec.loss_visual += terms.visual;
        rec.loss_fusion += terms.fusion;
        sum = sum.defined() ? add(sum, terms.total) : terms.total;
      }
      auto batch_mean =
          scale(sum, static_cast<T>(1.0 / static_cast<double>(end - start)));
      ++step;
      const double value = static_cast<double>(batch_mean.item());
      if (!std::isfinite(value))
        throw NonFiniteError("train: non-finite loss at epoch " +
                             std::to_string(epoch) + ", step " +
                             std::to_string(step));
      batch_mean.backward();
      adam.step();
      m.params.zero_grad();
    }
    const double n = static_cast<double>(train_set.size());
    rec.loss_audio /= n;
    rec.loss_visual /= n;
    rec.loss_fusion /= n;
    rec.loss = rec.loss_audio + rec.loss_visual + rec.loss_fusion;

    if (!test_set.empty()) {
      rec.has_test = true;
      rec.test = evaluate(m, test_set, score_w);
    }
    log.epochs.push_back(std::move(rec));
  }
  return log;
}

}  // namespace pecl
