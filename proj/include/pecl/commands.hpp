#ifndef PECL_COMMANDS_HPP
#define PECL_COMMANDS_HPP

#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include "pecl/checkpoint.hpp"
#include "pecl/config.hpp"
#include "pecl/datakit.hpp"
#include "pecl/grad_check.hpp"
#include "pecl/metrics.hpp"
#include "pecl/model.hpp"
#include "pecl/synth.hpp"
#include "pecl/train.hpp"

namespace pecl {

// One fully-resolved run. Every report a command writes embeds this struct
// plus the seed, so a result can always be traced back to its exact inputs.
struct ExperimentConfig {
  ModelConfig model;
  std::string data;        // dataset directory (manifest.jsonl + media/)
  std::string manifest;    // bare manifest path, split command only
  std::string checkpoint;  // eval command only
  std::string protocol = "fold1";
  std::string alphabet = "standard";
  std::string out;
  std::uint64_t seed = 7;
  double score_w = 0.5;    // visual weight under score fusion
  bool cross_gender = false;
  bool folds_by_clip = false;  // drops subject disjointness when set
  SynthSpec synth;
};

inline FeatureAlphabet alphabet_preset(const std::string& name) {
  if (name == "standard") return FeatureAlphabet::standard();
  if (name == "compact") return FeatureAlphabet::compact();
  throw ConfigError("alphabet: unknown preset \"" + name +
                    "\" (expected standard or compact)");
}

inline Json synth_to_json(const SynthSpec& s) {
  Json j;
  j["mode"] = s.mode;
  j["n_clips"] = s.n_clips;
  j["n_subjects"] = s.n_subjects;
  j["noise"] = s.noise;
  j["flip_rate"] = s.flip_rate;
  j["seq_len"] = s.seq_len;
  j["visual"] = {{"frame_h", s.visual.frame_h}, {"frame_w", s.visual.frame_w},
                 {"frame_c", s.visual.frame_c}, {"patch", s.visual.patch},
                 {"inter_dim", s.visual.inter_dim}};
  j["audio"] = {{"channels", s.audio.channels},
                {"kernels", s.audio.kernels},
                {"strides", s.audio.strides}};
  j["counts"] = {{"clips", s.counts.clips},
                 {"subjects", s.counts.subjects},
                 {"male_subjects", s.counts.male_subjects},
                 {"deceptive", s.counts.deceptive}};
  j["render_media"] = s.render_media;
  return j;
}

inline SynthSpec synth_from_json(const Json& j, SynthSpec base) {
  if (!j.is_object()) throw ConfigError("config: \"synth\" must be an object");
  detail::reject_unknown_keys(
      j,
      {"mode", "n_clips", "n_subjects", "noise", "flip_rate", "seq_len",
       "visual", "audio", "counts", "render_media"},
      "synth");
  SynthSpec s = std::move(base);
  detail::maybe(j, "mode", s.mode);
  detail::maybe(j, "n_clips", s.n_clips);
  detail::maybe(j, "n_subjects", s.n_subjects);
  detail::maybe(j, "noise", s.noise);
  detail::maybe(j, "flip_rate", s.flip_rate);
  detail::maybe(j, "seq_len", s.seq_len);
  if (j.contains("visual")) {
    const Json& v = j.at("visual");
    detail::reject_unknown_keys(
        v, {"frame_h", "frame_w", "frame_c", "patch", "inter_dim"},
        "synth.visual");
    detail::maybe(v, "frame_h", s.visual.frame_h);
    detail::maybe(v, "frame_w", s.visual.frame_w);
    detail::maybe(v, "frame_c", s.visual.frame_c);
    detail::maybe(v, "patch", s.visual.patch);
    detail::maybe(v, "inter_dim", s.visual.inter_dim);
  }
  if (j.contains("audio")) {
    const Json& a = j.at("audio");
    detail::reject_unknown_keys(a, {"channels", "kernels", "strides"},
                                "synth.audio");
    detail::maybe(a, "channels", s.audio.channels);
    detail::maybe(a, "kernels", s.audio.kernels);
    detail::maybe(a, "strides", s.audio.strides);
  }
  if (j.contains("counts")) {
    const Json& c = j.at("counts");
    detail::reject_unknown_keys(
        c, {"clips", "subjects", "male_subjects", "deceptive"}, "synth.counts");
    detail::maybe(c, "clips", s.counts.clips);
    detail::maybe(c, "subjects", s.counts.subjects);
    detail::maybe(c, "male_subjects", s.counts.male_subjects);
    detail::maybe(c, "deceptive", s.counts.deceptive);
  }
  detail::maybe(j, "render_media", s.render_media);
  return s;
}

inline Json experiment_to_json(const ExperimentConfig& e) {
  Json j;
  j["model"] = to_json(e.model);
  j["data"] = e.data;
  j["manifest"] = e.manifest;
  j["checkpoint"] = e.checkpoint;
  j["protocol"] = e.protocol;
  j["alphabet"] = e.alphabet;
  j["out"] = e.out;
  j["seed"] = e.seed;
  j["score_w"] = e.score_w;
  j["cross_gender"] = e.cross_gender;
  j["folds_by_clip"] = e.folds_by_clip;
  j["synth"] = synth_to_json(e.synth);
  return j;
}

inline ExperimentConfig experiment_from_json(const Json& j,
                                             ExperimentConfig base) {
  if (!j.is_object()) throw ConfigError("config: top level must be an object");
  detail::reject_unknown_keys(
      j,
      {"model", "data", "manifest", "checkpoint", "protocol", "alphabet",
       "out", "seed", "score_w", "cross_gender", "folds_by_clip", "synth"},
      "experiment config");
  ExperimentConfig e = std::move(base);
  if (j.contains("model")) e.model = config_from_json(j.at("model"), e.model);
  detail::maybe(j, "data", e.data);
  detail::maybe(j, "manifest", e.manifest);
  detail::maybe(j, "checkpoint", e.checkpoint);
  detail::maybe(j, "protocol", e.protocol);
  detail::maybe(j, "alphabet", e.alphabet);
  detail::maybe(j, "out", e.out);
  detail::maybe(j, "seed", e.seed);
  detail::maybe(j, "score_w", e.score_w);
  detail::maybe(j, "cross_gender", e.cross_gender);
  detail::maybe(j, "folds_by_clip", e.folds_by_clip);
  if (j.contains("synth")) e.synth = synth_from_json(j.at("synth"), e.synth);
  return e;
}

// Flag-level overrides. Optionals distinguish "not passed" from a default,
// which matters for eval: --fusion has override semantics there, and a model
// flag switches the config-vs-checkpoint consistency check on.
struct CliOverrides {
  std::optional<std::uint64_t> seed;
  std::optional<std::string> out, data, manifest, checkpoint;
  std::optional<std::string> protocol, alphabet;
  std::optional<std::string> fusion, adapter, placement, multitask;
  std::optional<std::size_t> pavf_count;
  std::optional<double> score_w;
  std::optional<bool> cross_gender;
  std::optional<std::string> synth_mode;
  std::optional<std::size_t> n_clips;
  std::optional<double> noise, flip_rate;
  bool inject_bug = false;
  bool json_output = false;
};

struct ResolvedExperiment {
  ExperimentConfig cfg;
  bool model_given = false;   // config file model section or a model flag
  bool fusion_given = false;  // --fusion flag specifically
};

// Defaults, then the config file, then flags; the merged result is what every
// report echoes. The single top-level seed also becomes the model seed so all
// randomness derives from one value.
inline ResolvedExperiment resolve_experiment(const std::string& config_path,
                                             const CliOverrides& o) {
  ResolvedExperiment r;
  r.cfg.model = desk_config();

  if (!config_path.empty()) {
    std::ifstream in(config_path);
    if (!in) throw ConfigError("config: cannot open " + config_path);
    Json j;
    try {
      in >> j;
    } catch (const Json::exception& e) {
      throw ConfigError("config: " + config_path + ": " + e.what());
    }
    r.model_given = j.is_object() && j.contains("model");
    r.cfg = experiment_from_json(j, std::move(r.cfg));
  }

  if (o.seed) r.cfg.seed = *o.seed;
  if (o.out) r.cfg.out = *o.out;
  if (o.data) r.cfg.data = *o.data;
  if (o.manifest) r.cfg.manifest = *o.manifest;
  if (o.checkpoint) r.cfg.checkpoint = *o.checkpoint;
  if (o.protocol) r.cfg.protocol = *o.protocol;
  if (o.alphabet) r.cfg.alphabet = *o.alphabet;
  if (o.score_w) r.cfg.score_w = *o.score_w;
  if (o.cross_gender) r.cfg.cross_gender = *o.cross_gender;

  if (o.fusion) {
    r.cfg.model.fusion = parse_fusion_mode(*o.fusion);
    r.fusion_given = true;
  }
  if (o.adapter) {
    r.cfg.model.adapter = parse_adapter_kind(*o.adapter);
    r.model_given = true;
  }
  if (o.placement) {
    r.cfg.model.placement = parse_placement(*o.placement);
    r.model_given = true;
  }
  if (o.pavf_count) {
    r.cfg.model.num_pavf = *o.pavf_count;
    r.model_given = true;
  }
  if (o.multitask) {
    if (*o.multitask != "on" && *o.multitask != "off")
      throw ConfigError("multitask: expected on or off, got \"" + *o.multitask +
                        "\"");
    r.cfg.model.multitask = *o.multitask == "on";
    r.model_given = true;
  }

  if (o.synth_mode) r.cfg.synth.mode = *o.synth_mode;
  if (o.n_clips) r.cfg.synth.n_clips = *o.n_clips;
  if (o.noise) r.cfg.synth.noise = *o.noise;
  if (o.flip_rate) r.cfg.synth.flip_rate = *o.flip_rate;

  r.cfg.model.seed = r.cfg.seed;
  r.cfg.model.validate();
  r.cfg.synth.alphabet = alphabet_preset(r.cfg.alphabet);
  if (r.cfg.score_w < 0.0 || r.cfg.score_w > 1.0)
    throw ConfigError("score_w: must lie in [0,1]");
  return r;
}

namespace detail {

inline Json report_envelope(const ExperimentConfig& e,
                            const std::string& command) {
  Json j;
  j["command"] = command;
  j["config"] = experiment_to_json(e);
  j["seed"] = e.seed;
  return j;
}

inline void write_text(const std::filesystem::path& path,
                       const std::string& body) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ConfigError("cannot write " + path.string());
  out << body;
}

inline void write_report(const std::filesystem::path& path, const Json& j) {
  write_text(path, j.dump(2) + "\n");
}

}  // namespace detail

// Expands a protocol name into its train/test splits. Folds always come from
// the same derived seed, so `split`, `train`, and `eval` agree on fold
// membership whenever the manifest and top-level seed agree.
inline std::vector<ProtocolSplit> protocol_splits(
    const std::vector<ClipRecord>& records, const std::string& protocol,
    std::uint64_t seed, bool cross_gender, bool subject_disjoint) {
  auto folds =
      make_folds(records, 3, derive_seed(seed, "folds"), subject_disjoint);
  if (protocol == "fold1") return {folds[0]};
  if (protocol == "fold2") return {folds[1]};
  if (protocol == "fold3") return {folds[2]};
  if (protocol == "duration") {
    auto [s, l] = duration_protocol(records, folds[0]);
    return {s, l};
  }
  if (protocol == "gender") {
    auto [m, f] = gender_protocol(records, folds[0], cross_gender);
    return {m, f};
  }
  if (protocol == "all") {
    std::vector<ProtocolSplit> all = folds;
    auto [s, l] = duration_protocol(records, folds[0]);
    auto [m, f] = gender_protocol(records, folds[0], cross_gender);
    all.push_back(s);
    all.push_back(l);
    all.push_back(m);
    all.push_back(f);
    return all;
  }
  throw ConfigError("protocol: unknown value \"" + protocol +
                    "\" (expected fold1, fold2, fold3, duration, gender)");
}

namespace detail {

inline void check_data_matches_model(const SynthDataset& ds,
                                     const ModelConfig& m) {
  const std::vector<std::size_t> want = {m.seq_len, m.visual.frame_h,
                                         m.visual.frame_w, m.visual.frame_c};
  const std::size_t want_wave = audio_required_length(m.audio, m.seq_len);
  auto fmt = [](const std::vector<std::size_t>& v) {
    std::string s = "[";
    for (std::size_t i = 0; i < v.size(); ++i)
      s += (i ? "," : "") + std::to_string(v[i]);
    return s + "]";
  };
  if (ds.frames_shape != want || ds.wave_len != want_wave) {
    throw ConfigError(
        "data does not match the model tokenizers: dataset frames " +
        fmt(ds.frames_shape) + " wave " + std::to_string(ds.wave_len) +
        " vs model frames " + fmt(want) + " wave " +
        std::to_string(want_wave));
  }
}

template <typename T>
std::vector<Example<T>> pick_examples(
    const std::vector<Example<T>>& all,
    const std::map<std::string, std::size_t>& by_id,
    const std::vector<std::string>& ids, const std::string& where) {
  std::vector<Example<T>> out;
  out.reserve(ids.size());
  for (const auto& id : ids) {
    auto it = by_id.find(id);
    if (it == by_id.end())
      throw ValueError(where + ": split references unknown clip " + id);
    out.push_back(all[it->second]);
  }
  return out;
}

}  // namespace detail

template <typename T>
int run_train(const ExperimentConfig& exp, std::ostream& os) {
  namespace fs = std::filesystem;
  if (exp.data.empty())
    throw ConfigError("train: --data dataset directory required");
  if (exp.out.empty()) throw ConfigError("train: --out directory required");

  const auto alphabet = alphabet_preset(exp.alphabet);
  auto ds = load_dataset(exp.data, alphabet);
  detail::check_data_matches_model(ds, exp.model);
  auto examples =
      dataset_examples<T>(ds, alphabet, exp.model.effective_aux());

  std::vector<ClipRecord> records;
  std::map<std::string, std::size_t> by_id;
  for (std::size_t i = 0; i < ds.clips.size(); ++i) {
    records.push_back(ds.clips[i].record);
    by_id[ds.clips[i].record.clip_id] = i;
  }
  auto splits = protocol_splits(records, exp.protocol, exp.seed,
                                exp.cross_gender, !exp.folds_by_clip);

  fs::create_directories(exp.out);
  detail::write_report(fs::path(exp.out) / "config.json",
                       detail::report_envelope(exp, "train"));

  for (const auto& split : splits) {
    auto train_set =
        detail::pick_examples(examples, by_id, split.train, "train");
    auto test_set = detail::pick_examples(examples, by_id, split.test, "train");
    if (train_set.empty() || test_set.empty())
      throw ValueError("train: protocol split " + split.name +
                       " has an empty train or test side");

    auto m = build_model<T>(exp.model);
    auto log = train(m, train_set, test_set, exp.seed, exp.score_w);

    const fs::path dir = fs::path(exp.out) / split.name;
    fs::create_directories(dir);
    detail::write_text(dir / "train_log.jsonl", log.to_jsonl());
    save_checkpoint(m, (dir / "model.ckpt").string());

    const MetricsReport& final = log.epochs.back().test;
    Json rep = detail::report_envelope(exp, "train");
    rep["split"] = split.name;
    rep["metrics"] = final.to_json();
    detail::write_report(dir / "metrics.json", rep);
    detail::write_text(dir / "metrics.txt",
                       "split: " + split.name + "\n" + final.to_text());

    os << "[train] split " << split.name << " (" << train_set.size()
       << " train / " << test_set.size() << " test)\n"
       << final.to_text();
  }
  os << "artifacts written to " << exp.out << "\n";
  return 0;
}

inline int cmd_train(const ResolvedExperiment& r, std::ostream& os) {
  return r.cfg.model.precision == Precision::f64 ? run_train<double>(r.cfg, os)
                                                 : run_train<float>(r.cfg, os);
}

template <typename T>
int run_eval(const ResolvedExperiment& r, std::ostream& os) {
  namespace fs = std::filesystem;
  const ExperimentConfig& exp = r.cfg;
  auto m = load_checkpoint<T>(exp.checkpoint);

  if (r.model_given) {
    // Training-only knobs may differ; the architecture may not.
    Json want = to_json(exp.model);
    Json have = to_json(m.cfg);
    for (const char* k : {"seed", "optim", "loss_weights", "fusion"}) {
      want.erase(k);
      have.erase(k);
    }
    if (want != have) {
      throw ConfigError("eval: model config does not match the checkpoint\n  requested: " +
                        want.dump() + "\n  checkpoint: " + have.dump());
    }
  }
  if (r.fusion_given && exp.model.fusion != m.cfg.fusion) {
    if (exp.model.fusion == FusionMode::score &&
        m.cfg.modality == Modality::both) {
      m.cfg.fusion = FusionMode::score;  // both unimodal heads always exist
    } else {
      throw ConfigError(
          std::string("eval: fusion ") + to_string(exp.model.fusion) +
          " requested but the checkpoint was trained with fusion " +
          to_string(m.cfg.fusion) + "\n  checkpoint: " + to_json(m.cfg).dump());
    }
  }

  if (exp.data.empty())
    throw ConfigError("eval: --data dataset directory required");
  const auto alphabet = alphabet_preset(exp.alphabet);
  auto ds = load_dataset(exp.data, alphabet);
  detail::check_data_matches_model(ds, m.cfg);
  auto examples = dataset_examples<T>(ds, alphabet, m.cfg.effective_aux());

  std::vector<ClipRecord> records;
  std::map<std::string, std::size_t> by_id;
  for (std::size_t i = 0; i < ds.clips.size(); ++i) {
    records.push_back(ds.clips[i].record);
    by_id[ds.clips[i].record.clip_id] = i;
  }
  auto splits = protocol_splits(records, exp.protocol, exp.seed,
                                exp.cross_gender, !exp.folds_by_clip);

  for (const auto& split : splits) {
    auto test_set = detail::pick_examples(examples, by_id, split.test, "eval");
    if (test_set.empty())
      throw ValueError("eval: protocol split " + split.name +
                       " has an empty test side");
    auto report = evaluate(m, test_set, exp.score_w);

    os << "[eval] split " << split.name << " (" << test_set.size()
       << " test)\n"
       << report.to_text();
    if (!exp.out.empty()) {
      const fs::path dir = fs::path(exp.out) / split.name;
      fs::create_directories(dir);
      Json rep = detail::report_envelope(exp, "eval");
      rep["split"] = split.name;
      rep["metrics"] = report.to_json();
      detail::write_report(dir / "eval_metrics.json", rep);
      detail::write_text(dir / "eval_metrics.txt",
                         "split: " + split.name + "\n" + report.to_text());
    }
  }
  return 0;
}

inline int cmd_eval(const ResolvedExperiment& r, std::ostream& os) {
  if (r.cfg.checkpoint.empty())
    throw ConfigError("eval: --checkpoint required");
  auto header = peek_checkpoint(r.cfg.checkpoint);
  const std::string dtype = header.at("dtype").get<std::string>();
  return dtype == "f64" ? run_eval<double>(r, os) : run_eval<float>(r, os);
}

// Finite-difference sweep over every trainable parameter. Defaults to the
// micro preset with the multitask head attached so all head paths get
// exercised; 64-bit regardless of the configured precision. The inject_bug
// switch scales the loss only while gradients are recorded, so the analytic
// and numeric paths disagree on purpose: a wired-in negative control.
inline int cmd_gradcheck(const ResolvedExperiment& r, bool inject_bug,
                         std::ostream& os) {
  namespace fs = std::filesystem;
  ModelConfig cfg;
  if (r.model_given) {
    cfg = r.cfg.model;
  } else {
    cfg = micro_config();
    cfg.multitask = true;
    cfg.fusion = r.cfg.model.fusion;
  }
  cfg.precision = Precision::f64;
  cfg.seed = r.cfg.seed;
  cfg.validate();

  SynthSpec spec;
  spec.seq_len = cfg.seq_len;
  spec.visual = cfg.visual;
  spec.audio = cfg.audio;
  spec.n_clips = 1;
  auto clips = synth_generate(spec, r.cfg.seed);
  auto ex = to_example<double>(clips[0], spec, cfg.effective_aux());

  auto m = build_model<double>(cfg, InitMode::dense);
  auto objective = [&]() {
    auto loss = clip_loss(m, forward_clip(m, ex.frames, ex.wave), ex.label,
                          ex.aux);
    if (inject_bug && grad_mode()) loss = scale(loss, 1.01);
    return loss;
  };
  auto report = grad_check(objective, m.params.trainable());
  os << report.to_text();

  if (!r.cfg.out.empty()) {
    fs::create_directories(r.cfg.out);
    Json j = detail::report_envelope(r.cfg, "gradcheck");
    j["eps"] = report.eps;
    j["tol"] = report.tol;
    j["pass"] = report.pass;
    Json entries = Json::array();
    for (const auto& e : report.entries) {
      entries.push_back({{"name", e.name},
                         {"max_rel_err", e.max_rel_err},
                         {"count", e.count},
                         {"pass", e.pass}});
    }
    j["parameters"] = entries;
    detail::write_report(fs::path(r.cfg.out) / "gradcheck.json", j);
  }
  return report.pass ? 0 : 3;
}

inline int cmd_params(const ResolvedExperiment& r, bool json_output,
                      std::ostream& os) {
  namespace fs = std::filesystem;
  const ExperimentConfig& exp = r.cfg;
  ParamReport rep = exp.model.precision == Precision::f64
                        ? param_report(build_model<double>(exp.model))
                        : param_report(build_model<float>(exp.model));
  if (json_output) {
    os << rep.to_json().dump(2) << "\n";
  } else {
    os << rep.to_text();
  }
  if (!exp.out.empty()) {
    fs::create_directories(exp.out);
    Json j = detail::report_envelope(exp, "params");
    j["report"] = rep.to_json();
    detail::write_report(fs::path(exp.out) / "params.json", j);
  }
  return 0;
}

inline int cmd_split(const ResolvedExperiment& r, std::ostream& os) {
  namespace fs = std::filesystem;
  const ExperimentConfig& exp = r.cfg;
  if (exp.manifest.empty())
    throw ConfigError("split: --manifest required");
  if (exp.out.empty()) throw ConfigError("split: --out directory required");

  auto records = load_manifest(exp.manifest, alphabet_preset(exp.alphabet));
  auto splits = protocol_splits(records, exp.protocol, exp.seed,
                                exp.cross_gender, !exp.folds_by_clip);
  fs::create_directories(exp.out);
  save_splits((fs::path(exp.out) / "splits.json").string(), splits);
  for (const auto& s : splits) {
    os << s.name << ": " << s.train.size() << " train / " << s.test.size()
       << " test\n";
  }
  os << "splits written to " << (fs::path(exp.out) / "splits.json").string()
     << "\n";
  return 0;
}

namespace detail {

inline AnnotatorTable load_annotator(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("kappa: cannot open " + path);
  Json j;
  try {
    in >> j;
  } catch (const Json::exception& e) {
    throw ConfigError("kappa: " + path + ": " + e.what());
  }
  if (!j.is_object() || !j.contains("items") || !j.at("items").is_object())
    throw ConfigError("kappa: " + path +
                      ": expected {\"name\": ..., \"items\": {clip: {feature: "
                      "0|1}}}");
  AnnotatorTable t;
  t.name = j.value("name", std::filesystem::path(path).stem().string());
  for (auto it = j.at("items").begin(); it != j.at("items").end(); ++it) {
    if (!it.value().is_object())
      throw ConfigError("kappa: " + path + ": item " + it.key() +
                        " must map features to 0/1");
    auto& row = t.items[it.key()];
    for (auto f = it.value().begin(); f != it.value().end(); ++f) {
      if (!f.value().is_number_integer())
        throw ConfigError("kappa: " + path + ": item " + it.key() +
                          " feature " + f.key() + " must be 0 or 1");
      row[f.key()] = f.value().get<int>();
    }
  }
  return t;
}

}  // namespace detail

inline int cmd_kappa(const ResolvedExperiment& r,
                     const std::vector<std::string>& files, std::ostream& os) {
  namespace fs = std::filesystem;
  if (files.size() < 2)
    throw ConfigError("kappa: need at least two annotation files");
  std::vector<AnnotatorTable> tables;
  for (const auto& f : files) tables.push_back(detail::load_annotator(f));
  const auto alphabet = alphabet_preset(r.cfg.alphabet);
  auto rep = kappa_calibration(tables, alphabet.visual, alphabet.audio);
  os << rep.to_text();
  if (!r.cfg.out.empty()) {
    fs::create_directories(r.cfg.out);
    Json j = detail::report_envelope(r.cfg, "kappa");
    j["report"] = rep.to_json();
    detail::write_report(fs::path(r.cfg.out) / "kappa.json", j);
  }
  return 0;
}

inline int cmd_synth(const ResolvedExperiment& r, std::ostream& os) {
  namespace fs = std::filesystem;
  const ExperimentConfig& exp = r.cfg;
  if (exp.out.empty()) throw ConfigError("synth: --out directory required");
  SynthSpec spec = exp.synth;
  spec.validate();
  auto clips = synth_generate(spec, exp.seed);
  write_dataset(exp.out, clips, spec);
  detail::write_report(fs::path(exp.out) / "synth_config.json",
                       detail::report_envelope(exp, "synth"));
  os << "wrote " << clips.size() << " clips to " << exp.out << "\n";
  return 0;
}

}  // namespace pecl

#endif  // PECL_COMMANDS_HPP
