#pragma once

#include <algorithm>
#include <cstdint>
#include <fstream>
#include <map>
#include <set>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "pecl/error.hpp"
#include "pecl/rng.hpp"

namespace pecl {

using Json = nlohmann::json;

// Binary behavioral attributes coded per clip. The standard set is 25 facial
// plus 5 vocal features; the compact set drops the last 5 facial ones.
struct FeatureAlphabet {
  std::vector<std::string> visual;
  std::vector<std::string> audio;

  static FeatureAlphabet standard() {
    FeatureAlphabet a;
    a.visual = {
        "v_smile",         "v_laughter",     "v_scowl",
        "v_frown",         "v_raised_brows", "v_lowered_brows",
        "v_gaze_up",       "v_gaze_down",    "v_gaze_side",
        "v_gaze_direct",   "v_blink",        "v_eyes_closed",
        "v_mouth_open",    "v_lip_press",    "v_lip_bite",
        "v_head_nod",      "v_head_shake",   "v_head_tilt",
        "v_head_forward",  "v_head_back",    "v_hand_gesture",
        "v_self_touch",    "v_shrug",        "v_posture_shift",
        "v_face_touch"};
    a.audio = {"a_pitch_raise", "a_loudness", "a_pause", "a_vocal_laughter",
               "a_disfluency"};
    return a;
  }

  static FeatureAlphabet compact() {
    FeatureAlphabet a = standard();
    a.visual.resize(20);
    return a;
  }

  std::vector<std::string> all() const {
    std::vector<std::string> out = visual;
    out.insert(out.end(), audio.begin(), audio.end());
    return out;
  }

  std::size_t size() const { return visual.size() + audio.size(); }
};

enum class Gender { male, female };

inline std::string to_string(Gender g) {
  return g == Gender::male ? "M" : "F";
}

struct ClipRecord {
  std::string clip_id;
  std::string subject_id;
  Gender gender = Gender::male;
  double duration_s = 0.0;
  int label = 0;
  std::map<std::string, int> annotations;
};

// The first `count` alphabet features, in alphabet order, as auxiliary
// training targets.
inline std::vector<int> aux_targets(const ClipRecord& r,
                                    const FeatureAlphabet& alphabet,
                                    std::size_t count) {
  auto names = alphabet.all();
  if (count > names.size())
    throw ValueError("manifest: " + std::to_string(count) +
                     " auxiliary tasks requested but the alphabet has " +
                     std::to_string(names.size()) + " features");
  std::vector<int> out;
  out.reserve(count);
  for (std::size_t i = 0; i < count; ++i) {
    auto it = r.annotations.find(names[i]);
    if (it == r.annotations.end())
      throw ValueError("manifest: clip '" + r.clip_id + "' lacks feature '" +
                       names[i] + "'");
    out.push_back(it->second);
  }
  return out;
}

namespace detail {

[[noreturn]] inline void manifest_error(std::size_t line, const std::string& field,
                                        const std::string& what) {
  throw ValueError("manifest: line " + std::to_string(line) + ", field '" +
                   field + "': " + what);
}

inline ClipRecord parse_record(const Json& j, std::size_t line,
                               const FeatureAlphabet& alphabet) {
  if (!j.is_object()) manifest_error(line, "", "record is not a JSON object");
  static const std::set<std::string> known = {
      "clip_id", "subject_id", "gender", "duration_s", "label", "annotations"};
  for (const auto& [key, value] : j.items())
    if (!known.count(key)) manifest_error(line, key, "unknown field");
  for (const auto& key : known)
    if (!j.contains(key)) manifest_error(line, key, "missing");

  ClipRecord r;
  if (!j["clip_id"].is_string() || j["clip_id"].get<std::string>().empty())
    manifest_error(line, "clip_id", "must be a nonempty string");
  r.clip_id = j["clip_id"].get<std::string>();
  if (!j["subject_id"].is_string() || j["subject_id"].get<std::string>().empty())
    manifest_error(line, "subject_id", "must be a nonempty string");
  r.subject_id = j["subject_id"].get<std::string>();

  if (!j["gender"].is_string()) manifest_error(line, "gender", "must be M or F");
  const std::string g = j["gender"].get<std::string>();
  if (g == "M")
    r.gender = Gender::male;
  else if (g == "F")
    r.gender = Gender::female;
  else
    manifest_error(line, "gender", "must be M or F, got '" + g + "'");

  if (!j["duration_s"].is_number())
    manifest_error(line, "duration_s", "must be a number");
  r.duration_s = j["duration_s"].get<double>();
  if (r.duration_s < 2.0 || r.duration_s > 19.0)
    manifest_error(line, "duration_s",
                   "must lie in [2, 19], got " + std::to_string(r.duration_s));

  if (!j["label"].is_number_integer())
    manifest_error(line, "label", "must be 0 or 1");
  r.label = j["label"].get<int>();
  if (r.label != 0 && r.label != 1)
    manifest_error(line, "label", "must be 0 or 1, got " + std::to_string(r.label));

  if (!j["annotations"].is_object())
    manifest_error(line, "annotations", "must be an object");
  const auto names = alphabet.all();
  const std::set<std::string> expected(names.begin(), names.end());
  for (const auto& [key, value] : j["annotations"].items()) {
    if (!expected.count(key))
      manifest_error(line, "annotations", "unknown feature '" + key + "'");
    if (!value.is_number_integer() ||
        (value.get<int>() != 0 && value.get<int>() != 1))
      manifest_error(line, "annotations",
                     "feature '" + key + "' must be 0 or 1");
    r.annotations[key] = value.get<int>();
  }
  for (const auto& name : expected)
    if (!r.annotations.count(name))
      manifest_error(line, "annotations", "missing feature '" + name + "'");
  return r;
}

}  // namespace detail

inline std::vector<ClipRecord> parse_manifest(
    std::istream& in, const FeatureAlphabet& alphabet) {
  std::vector<ClipRecord> records;
  std::set<std::string> seen;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    Json j = Json::parse(line, nullptr, false);
    if (j.is_discarded())
      detail::manifest_error(lineno, "", "invalid JSON");
    auto r = detail::parse_record(j, lineno, alphabet);
    if (!seen.insert(r.clip_id).second)
      detail::manifest_error(lineno, "clip_id",
                             "duplicate '" + r.clip_id + "'");
    records.push_back(std::move(r));
  }
  return records;
}

inline std::vector<ClipRecord> load_manifest(const std::string& path,
                                             const FeatureAlphabet& alphabet) {
  std::ifstream in(path);
  if (!in) throw ConfigError("manifest: cannot open '" + path + "'");
  return parse_manifest(in, alphabet);
}

inline Json record_to_json(const ClipRecord& r) {
  Json j;
  j["clip_id"] = r.clip_id;
  j["subject_id"] = r.subject_id;
  j["gender"] = to_string(r.gender);
  j["duration_s"] = r.duration_s;
  j["label"] = r.label;
  j["annotations"] = Json::object();
  for (const auto& [name, value] : r.annotations) j["annotations"][name] = value;
  return j;
}

inline void write_manifest(std::ostream& out,
                           const std::vector<ClipRecord>& records) {
  for (const auto& r : records) out << record_to_json(r).dump() << "\n";
}

inline void save_manifest(const std::string& path,
                          const std::vector<ClipRecord>& records) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ConfigError("manifest: cannot write '" + path + "'");
  write_manifest(out, records);
}

struct ProtocolSplit {
  std::string name;
  std::vector<std::string> train;
  std::vector<std::string> test;
};

namespace detail {

struct FoldUnit {
  std::string key;
  std::vector<const ClipRecord*> clips;
  std::size_t dec = 0;
  std::size_t tru = 0;
};

}  // namespace detail

// Subject-disjoint label-stratified folds. Records are sorted by clip_id
// before any seeded draw, so the assignment never depends on input order.
// Units (subjects, or single clips when disjointness is off) are shuffled,
// ordered largest first, then placed greedily on the fold whose class totals
// stay closest to an even share.
inline std::vector<ProtocolSplit> make_folds(
    const std::vector<ClipRecord>& records, std::size_t k, std::uint64_t seed,
    bool subject_disjoint = true) {
  if (k < 2) throw ValueError("folds: need at least 2 folds");
  if (records.empty()) throw ValueError("folds: no records");

  std::vector<const ClipRecord*> sorted;
  sorted.reserve(records.size());
  for (const auto& r : records) sorted.push_back(&r);
  std::sort(sorted.begin(), sorted.end(),
            [](const ClipRecord* a, const ClipRecord* b) {
              return a->clip_id < b->clip_id;
            });
  for (std::size_t i = 1; i < sorted.size(); ++i)
    if (sorted[i]->clip_id == sorted[i - 1]->clip_id)
      throw ValueError("folds: duplicate clip_id '" + sorted[i]->clip_id + "'");

  std::map<std::string, detail::FoldUnit> grouped;
  for (const ClipRecord* r : sorted) {
    const std::string& key = subject_disjoint ? r->subject_id : r->clip_id;
    auto& u = grouped[key];
    u.key = key;
    u.clips.push_back(r);
    (r->label ? u.dec : u.tru) += 1;
  }
  if (grouped.size() < k)
    throw ValueError("folds: " + std::to_string(grouped.size()) +
                     " subjects cannot fill " + std::to_string(k) + " folds");

  std::vector<detail::FoldUnit> units;
  units.reserve(grouped.size());
  for (auto& [key, u] : grouped) units.push_back(std::move(u));
  Rng rng(derive_seed(seed, "folds"));
  for (std::size_t i = units.size(); i > 1; --i) {
    auto j = static_cast<std::size_t>(
        rng.uniform(0.0, static_cast<double>(i)));
    if (j >= i) j = i - 1;
    std::swap(units[i - 1], units[j]);
  }
  std::stable_sort(units.begin(), units.end(),
                   [](const detail::FoldUnit& a, const detail::FoldUnit& b) {
                     return a.clips.size() > b.clips.size();
                   });

  std::size_t total_dec = 0, total_tru = 0;
  for (const auto& u : units) {
    total_dec += u.dec;
    total_tru += u.tru;
  }
  const double wd = total_dec ? 1.0 / static_cast<double>(total_dec) : 0.0;
  const double wt = total_tru ? 1.0 / static_cast<double>(total_tru) : 0.0;

  std::vector<std::vector<const ClipRecord*>> folds(k);
  std::vector<std::size_t> fold_dec(k, 0), fold_tru(k, 0);
  for (const auto& u : units) {
    std::size_t best = 0;
    double best_cost = 0.0;
    std::size_t best_size = 0;
    for (std::size_t f = 0; f < k; ++f) {
      const double cost = (static_cast<double>(fold_dec[f] + u.dec)) * wd +
                          (static_cast<double>(fold_tru[f] + u.tru)) * wt;
      const std::size_t size = folds[f].size();
      if (f == 0 || cost < best_cost ||
          (cost == best_cost && size < best_size)) {
        best = f;
        best_cost = cost;
        best_size = size;
      }
    }
    for (const ClipRecord* r : u.clips) folds[best].push_back(r);
    fold_dec[best] += u.dec;
    fold_tru[best] += u.tru;
  }

  std::vector<ProtocolSplit> splits(k);
  for (std::size_t f = 0; f < k; ++f) {
    splits[f].name = "fold" + std::to_string(f + 1);
    for (std::size_t g = 0; g < k; ++g)
      for (const ClipRecord* r : folds[g])
        (g == f ? splits[f].test : splits[f].train).push_back(r->clip_id);
    std::sort(splits[f].train.begin(), splits[f].train.end());
    std::sort(splits[f].test.begin(), splits[f].test.end());
  }
  return splits;
}

namespace detail {

inline void side_by_fold(const ClipRecord& r, const std::set<std::string>& test_ids,
                         const std::set<std::string>& train_ids,
                         ProtocolSplit& out) {
  if (test_ids.count(r.clip_id))
    out.test.push_back(r.clip_id);
  else if (train_ids.count(r.clip_id))
    out.train.push_back(r.clip_id);
  else
    throw ValueError("protocol: clip '" + r.clip_id +
                     "' is absent from the fold assignment");
}

inline void sort_split(ProtocolSplit& s) {
  std::sort(s.train.begin(), s.train.end());
  std::sort(s.test.begin(), s.test.end());
}

}  // namespace detail

// Short clips live in [2,4] seconds, long clips in [5,10]; both ends closed,
// everything else dropped. Train/test sides inside each bucket follow the
// fold-1 assignment so subjects stay disjoint.
inline std::pair<ProtocolSplit, ProtocolSplit> duration_protocol(
    const std::vector<ClipRecord>& records, const ProtocolSplit& fold1) {
  std::set<std::string> test_ids(fold1.test.begin(), fold1.test.end());
  std::set<std::string> train_ids(fold1.train.begin(), fold1.train.end());
  ProtocolSplit s{"short", {}, {}}, l{"long", {}, {}};
  for (const auto& r : records) {
    if (r.duration_s >= 2.0 && r.duration_s <= 4.0)
      detail::side_by_fold(r, test_ids, train_ids, s);
    else if (r.duration_s >= 5.0 && r.duration_s <= 10.0)
      detail::side_by_fold(r, test_ids, train_ids, l);
  }
  detail::sort_split(s);
  detail::sort_split(l);
  return {s, l};
}

// Within-gender train/test by default. The cross flag flips the semantics to
// train-on-one/test-on-other: the "male" split trains on male clips.
inline std::pair<ProtocolSplit, ProtocolSplit> gender_protocol(
    const std::vector<ClipRecord>& records, const ProtocolSplit& fold1,
    bool cross_gender = false) {
  ProtocolSplit m{"male", {}, {}}, f{"female", {}, {}};
  if (cross_gender) {
    for (const auto& r : records) {
      if (r.gender == Gender::male) {
        m.train.push_back(r.clip_id);
        f.test.push_back(r.clip_id);
      } else {
        f.train.push_back(r.clip_id);
        m.test.push_back(r.clip_id);
      }
    }
  } else {
    std::set<std::string> test_ids(fold1.test.begin(), fold1.test.end());
    std::set<std::string> train_ids(fold1.train.begin(), fold1.train.end());
    for (const auto& r : records)
      detail::side_by_fold(r, test_ids, train_ids,
                           r.gender == Gender::male ? m : f);
  }
  detail::sort_split(m);
  detail::sort_split(f);
  return {m, f};
}

inline Json splits_to_json(const std::vector<ProtocolSplit>& splits) {
  Json j = Json::object();
  for (const auto& s : splits) {
    j[s.name]["train"] = s.train;
    j[s.name]["test"] = s.test;
  }
  return j;
}

inline void save_splits(const std::string& path,
                        const std::vector<ProtocolSplit>& splits) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ConfigError("splits: cannot write '" + path + "'");
  out << splits_to_json(splits).dump(2) << "\n";
}

inline std::vector<ProtocolSplit> load_splits(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("splits: cannot open '" + path + "'");
  Json j = Json::parse(in, nullptr, false);
  if (j.is_discarded() || !j.is_object())
    throw ValueError("splits: '" + path + "' is not a JSON object");
  std::vector<ProtocolSplit> splits;
  for (const auto& [name, body] : j.items()) {
    if (!body.is_object() || !body.contains("train") || !body.contains("test"))
      throw ValueError("splits: entry '" + name + "' needs train and test");
    ProtocolSplit s;
    s.name = name;
    s.train = body["train"].get<std::vector<std::string>>();
    s.test = body["test"].get<std::vector<std::string>>();
    splits.push_back(std::move(s));
  }
  return splits;
}

}  // namespace pecl
