#pragma once

#include <algorithm>
#include <cstddef>
#include <iomanip>
#include <map>
#include <numeric>
#include <optional>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "pecl/error.hpp"

namespace pecl {

using Json = nlohmann::json;

namespace detail {

inline void check_binary_list(const std::vector<int>& v, const char* what) {
  for (int x : v) {
    if (x != 0 && x != 1)
      throw ValueError(std::string(what) + ": entries must be 0 or 1, got " +
                       std::to_string(x));
  }
}

inline void check_paired(std::size_t a, std::size_t b, const char* op) {
  if (a != b)
    throw ShapeError(std::string(op) + ": lists differ in length (" +
                     std::to_string(a) + " vs " + std::to_string(b) + ")");
  if (a == 0) throw ValueError(std::string(op) + ": empty input");
}

}  // namespace detail

inline double accuracy(const std::vector<int>& pred, const std::vector<int>& y) {
  detail::check_paired(pred.size(), y.size(), "accuracy");
  detail::check_binary_list(pred, "accuracy");
  detail::check_binary_list(y, "accuracy");
  std::size_t hits = 0;
  for (std::size_t i = 0; i < y.size(); ++i) hits += pred[i] == y[i];
  return static_cast<double>(hits) / static_cast<double>(y.size());
}

// Positive class is deception (label 1). Undefined cases collapse to 0.
inline double f1(const std::vector<int>& pred, const std::vector<int>& y) {
  detail::check_paired(pred.size(), y.size(), "f1");
  detail::check_binary_list(pred, "f1");
  detail::check_binary_list(y, "f1");
  std::size_t tp = 0, fp = 0, fn = 0;
  for (std::size_t i = 0; i < y.size(); ++i) {
    if (pred[i] == 1 && y[i] == 1) ++tp;
    if (pred[i] == 1 && y[i] == 0) ++fp;
    if (pred[i] == 0 && y[i] == 1) ++fn;
  }
  const std::size_t denom = 2 * tp + fp + fn;
  if (denom == 0) return 0.0;
  return 2.0 * static_cast<double>(tp) / static_cast<double>(denom);
}

// Probability a random positive outranks a random negative, ties worth 1/2.
// Pair credit is accumulated as an integer (2 per win, 1 per tie) so the
// result is exactly the all-pairs value whatever the walk order.
inline double auc(const std::vector<double>& scores, const std::vector<int>& y) {
  detail::check_paired(scores.size(), y.size(), "auc");
  detail::check_binary_list(y, "auc");
  long long np = 0, nn = 0;
  for (int v : y) (v ? np : nn) += 1;
  if (np == 0 || nn == 0)
    throw ValueError("auc: undefined, input holds a single class");

  std::vector<std::size_t> idx(y.size());
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  std::sort(idx.begin(), idx.end(),
            [&](std::size_t a, std::size_t b) { return scores[a] < scores[b]; });

  long long credit = 0, neg_below = 0;
  std::size_t i = 0;
  while (i < idx.size()) {
    std::size_t j = i;
    long long gp = 0, gn = 0;
    while (j < idx.size() && scores[idx[j]] == scores[idx[i]]) {
      (y[idx[j]] ? gp : gn) += 1;
      ++j;
    }
    credit += gp * (2 * neg_below + gn);
    neg_below += gn;
    i = j;
  }
  return static_cast<double>(credit) /
         (2.0 * static_cast<double>(np) * static_cast<double>(nn));
}

// Chance agreement from marginal products over whatever label alphabet the
// lists use. Both raters constant on one shared label forces p_o = p_e = 1.
inline double cohen_kappa(const std::vector<int>& a, const std::vector<int>& b) {
  detail::check_paired(a.size(), b.size(), "kappa");
  const double n = static_cast<double>(a.size());
  std::map<int, std::size_t> ca, cb;
  std::size_t agree = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    agree += a[i] == b[i];
    ++ca[a[i]];
    ++cb[b[i]];
  }
  const double po = static_cast<double>(agree) / n;
  double pe = 0.0;
  for (const auto& [label, count] : ca) {
    auto it = cb.find(label);
    if (it == cb.end()) continue;
    pe += (static_cast<double>(count) / n) *
          (static_cast<double>(it->second) / n);
  }
  if (pe == 1.0) return 1.0;
  return (po - pe) / (1.0 - pe);
}

struct TaskMetrics {
  std::string name;
  double acc = 0.0;
  double f1 = 0.0;
  std::optional<double> auc;
};

struct MetricsReport {
  double acc = 0.0;
  double f1 = 0.0;
  std::optional<double> auc;
  std::size_t n_items = 0;
  std::vector<TaskMetrics> tasks;  // filled only for multi-task evaluation

  Json to_json() const {
    Json j;
    j["acc"] = acc;
    j["f1"] = f1;
    if (auc)
      j["auc"] = *auc;
    else
      j["auc"] = nullptr;
    j["n_items"] = n_items;
    if (!tasks.empty()) {
      j["tasks"] = Json::array();
      for (const auto& t : tasks) {
        Json e;
        e["name"] = t.name;
        e["acc"] = t.acc;
        e["f1"] = t.f1;
        if (t.auc)
          e["auc"] = *t.auc;
        else
          e["auc"] = nullptr;
        j["tasks"].push_back(e);
      }
    }
    return j;
  }

  std::string to_text() const {
    std::ostringstream os;
    os << "items: " << n_items << "\n";
    os << std::left << std::setw(24) << "metric" << std::right << std::setw(10)
       << "value" << "\n";
    auto row = [&](const std::string& name, double v) {
      os << std::left << std::setw(24) << name << std::right << std::setw(10)
         << std::fixed << std::setprecision(4) << v << "\n";
    };
    row("acc", acc);
    row("f1", f1);
    if (auc)
      row("auc", *auc);
    else
      os << std::left << std::setw(24) << "auc" << std::right << std::setw(10)
         << "n/a" << "\n";
    if (!tasks.empty()) {
      os << std::left << std::setw(24) << "task" << std::right << std::setw(10)
         << "acc" << std::setw(10) << "f1" << std::setw(10) << "auc" << "\n";
      for (const auto& t : tasks) {
        os << std::left << std::setw(24) << t.name << std::right
           << std::setw(10) << std::fixed << std::setprecision(4) << t.acc
           << std::setw(10) << t.f1;
        if (t.auc)
          os << std::setw(10) << *t.auc;
        else
          os << std::setw(10) << "n/a";
        os << "\n";
      }
    }
    return os.str();
  }
};

namespace detail {

// Scores above 1/2 predict deception; an exact 1/2 (zero logit) stays truth.
inline std::vector<int> threshold(const std::vector<double>& scores) {
  std::vector<int> pred(scores.size());
  for (std::size_t i = 0; i < scores.size(); ++i) pred[i] = scores[i] > 0.5;
  return pred;
}

inline std::optional<double> auc_or_undefined(const std::vector<double>& scores,
                                              const std::vector<int>& y) {
  bool has0 = false, has1 = false;
  for (int v : y) (v ? has1 : has0) = true;
  if (!has0 || !has1) return std::nullopt;
  return auc(scores, y);
}

}  // namespace detail

inline MetricsReport compute_metrics(const std::vector<double>& scores,
                                     const std::vector<int>& y) {
  detail::check_paired(scores.size(), y.size(), "metrics");
  MetricsReport r;
  auto pred = detail::threshold(scores);
  r.acc = accuracy(pred, y);
  r.f1 = f1(pred, y);
  r.auc = detail::auc_or_undefined(scores, y);
  r.n_items = y.size();
  return r;
}

// Rows are items, columns are tasks; column 0 is the deception label and also
// fills the report's top-level numbers.
inline MetricsReport compute_metrics_multitask(
    const std::vector<std::vector<double>>& scores,
    const std::vector<std::vector<int>>& targets,
    const std::vector<std::string>& task_names = {}) {
  if (scores.size() != targets.size())
    throw ShapeError("metrics: score and target row counts differ");
  if (scores.empty()) throw ValueError("metrics: empty input");
  const std::size_t k = scores.front().size();
  if (k == 0) throw ValueError("metrics: no tasks");
  for (std::size_t i = 0; i < scores.size(); ++i) {
    if (scores[i].size() != k || targets[i].size() != k)
      throw ShapeError("metrics: ragged task rows at item " +
                       std::to_string(i));
  }
  if (!task_names.empty() && task_names.size() != k)
    throw ShapeError("metrics: task name count does not match task count");

  MetricsReport r;
  r.n_items = scores.size();
  for (std::size_t t = 0; t < k; ++t) {
    std::vector<double> s(scores.size());
    std::vector<int> y(scores.size());
    for (std::size_t i = 0; i < scores.size(); ++i) {
      s[i] = scores[i][t];
      y[i] = targets[i][t];
    }
    TaskMetrics tm;
    tm.name = task_names.empty()
                  ? (t == 0 ? std::string("deception")
                            : "aux" + std::to_string(t - 1))
                  : task_names[t];
    auto pred = detail::threshold(s);
    tm.acc = accuracy(pred, y);
    tm.f1 = f1(pred, y);
    tm.auc = detail::auc_or_undefined(s, y);
    r.tasks.push_back(std::move(tm));
  }
  r.acc = r.tasks.front().acc;
  r.f1 = r.tasks.front().f1;
  r.auc = r.tasks.front().auc;
  return r;
}

// One rater's decisions: item id -> (feature name -> 0/1).
struct AnnotatorTable {
  std::string name;
  std::map<std::string, std::map<std::string, int>> items;
};

struct CalibrationReport {
  std::vector<std::pair<std::string, double>> per_feature;
  std::map<std::string, double> per_group;  // "visual" and "audio" means
  double overall = 0.0;
  std::size_t n_annotators = 0;
  std::size_t n_items = 0;
  std::size_t n_pairs = 0;

  Json to_json() const {
    Json j;
    j["overall"] = overall;
    j["n_annotators"] = n_annotators;
    j["n_items"] = n_items;
    j["n_pairs"] = n_pairs;
    j["per_group"] = Json::object();
    for (const auto& [g, v] : per_group) j["per_group"][g] = v;
    j["per_feature"] = Json::object();
    for (const auto& [f, v] : per_feature) j["per_feature"][f] = v;
    return j;
  }

  std::string to_text() const {
    std::ostringstream os;
    os << "annotators: " << n_annotators << "  items: " << n_items
       << "  pairs: " << n_pairs << "\n";
    os << std::left << std::setw(28) << "feature" << std::right << std::setw(10)
       << "kappa" << "\n";
    for (const auto& [f, v] : per_feature)
      os << std::left << std::setw(28) << f << std::right << std::setw(10)
         << std::fixed << std::setprecision(4) << v << "\n";
    for (const auto& [g, v] : per_group)
      os << std::left << std::setw(28) << (g + " mean") << std::right
         << std::setw(10) << std::fixed << std::setprecision(4) << v << "\n";
    os << std::left << std::setw(28) << "overall" << std::right << std::setw(10)
       << std::fixed << std::setprecision(4) << overall << "\n";
    return os.str();
  }
};

// Pairwise kappa per feature averaged over rater pairs, then group means over
// the features in each modality; overall is the mean over all features, which
// equals the feature-count weighted combination of the two group means.
inline CalibrationReport kappa_calibration(
    const std::vector<AnnotatorTable>& annotators,
    const std::vector<std::string>& visual_features,
    const std::vector<std::string>& audio_features) {
  if (annotators.size() < 2)
    throw ValueError("kappa: calibration needs at least two annotators");
  if (visual_features.empty() && audio_features.empty())
    throw ValueError("kappa: no features configured");

  const auto& ref = annotators.front();
  if (ref.items.empty()) throw ValueError("kappa: annotator '" + ref.name +
                                          "' has no items");
  for (const auto& t : annotators) {
    std::string missing, extra;
    for (const auto& [id, feats] : ref.items)
      if (!t.items.count(id)) missing += (missing.empty() ? "" : ", ") + id;
    for (const auto& [id, feats] : t.items)
      if (!ref.items.count(id)) extra += (extra.empty() ? "" : ", ") + id;
    if (!missing.empty() || !extra.empty()) {
      std::string msg = "kappa: annotator '" + t.name +
                        "' item set differs from '" + ref.name + "'";
      if (!missing.empty()) msg += "; missing items: " + missing;
      if (!extra.empty()) msg += "; extra items: " + extra;
      throw ValueError(msg);
    }
  }

  std::vector<std::string> features = visual_features;
  features.insert(features.end(), audio_features.begin(), audio_features.end());
  for (const auto& t : annotators) {
    for (const auto& [id, feats] : t.items) {
      for (const auto& f : features)
        if (!feats.count(f))
          throw ValueError("kappa: annotator '" + t.name + "' item '" + id +
                           "' lacks feature '" + f + "'");
      for (const auto& [f, v] : feats) {
        if (std::find(features.begin(), features.end(), f) == features.end())
          throw ValueError("kappa: annotator '" + t.name + "' item '" + id +
                           "' has unknown feature '" + f + "'");
        if (v != 0 && v != 1)
          throw ValueError("kappa: annotation values must be 0 or 1");
      }
    }
  }

  CalibrationReport r;
  r.n_annotators = annotators.size();
  r.n_items = ref.items.size();
  r.n_pairs = annotators.size() * (annotators.size() - 1) / 2;

  auto feature_vector = [&](const AnnotatorTable& t, const std::string& f) {
    std::vector<int> v;
    v.reserve(t.items.size());
    for (const auto& [id, feats] : t.items) v.push_back(feats.at(f));
    return v;
  };

  double total = 0.0;
  std::map<std::string, std::pair<double, std::size_t>> group_acc;
  auto group_of = [&](const std::string& f) {
    return std::find(visual_features.begin(), visual_features.end(), f) !=
                   visual_features.end()
               ? std::string("visual")
               : std::string("audio");
  };
  for (const auto& f : features) {
    double sum = 0.0;
    for (std::size_t i = 0; i < annotators.size(); ++i)
      for (std::size_t j = i + 1; j < annotators.size(); ++j)
        sum += cohen_kappa(feature_vector(annotators[i], f),
                           feature_vector(annotators[j], f));
    const double mean = sum / static_cast<double>(r.n_pairs);
    r.per_feature.emplace_back(f, mean);
    auto& [gsum, gcount] = group_acc[group_of(f)];
    gsum += mean;
    ++gcount;
    total += mean;
  }
  for (const auto& [g, acc] : group_acc)
    r.per_group[g] = acc.first / static_cast<double>(acc.second);
  r.overall = total / static_cast<double>(features.size());
  return r;
}

}  // namespace pecl
