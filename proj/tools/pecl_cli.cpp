#include <cstdint>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "pecl/commands.hpp"

namespace {

// One bag of raw flag values shared by every subcommand; exactly one
// subcommand parses, and presence is queried through the parsed App.
struct RawFlags {
  std::string config, out, data, manifest, checkpoint;
  std::string protocol, alphabet, fusion, adapter, placement, multitask;
  std::string synth_mode;
  std::uint64_t seed = 0;
  std::size_t pavf_count = 0, n_clips = 0;
  double score_w = 0.0, noise = 0.0, flip_rate = 0.0;
  bool cross_gender = false, folds_by_clip = false;
  bool inject_bug = false, json_output = false;
  std::vector<std::string> kappa_files;
};

std::size_t count_of(const CLI::App* sub, const std::string& name) {
  const CLI::Option* opt = sub->get_option_no_throw(name);
  return opt ? opt->count() : 0;
}

void add_common(CLI::App* sub, RawFlags& raw) {
  sub->add_option("--config", raw.config, "JSON experiment config file");
  sub->add_option("--seed", raw.seed, "top-level seed; all RNG derives from it");
  sub->add_option("--out", raw.out, "output directory");
  sub->add_option("--alphabet", raw.alphabet,
                  "annotation feature set: standard or compact");
}

void add_model_flags(CLI::App* sub, RawFlags& raw) {
  sub->add_option("--fusion", raw.fusion, "fusion mode: pavf, concat, score");
  sub->add_option("--adapter", raw.adapter,
                  "adapter kind: none, ut, bottleneck");
  sub->add_option("--placement", raw.placement,
                  "adapter placement: parallel_both, parallel_mhsa, "
                  "parallel_ffn, between");
  sub->add_option("--pavf-count", raw.pavf_count,
                  "number of crossmodal fusion modules");
  sub->add_option("--multitask", raw.multitask,
                  "auxiliary annotation heads: on or off");
}

void add_data_flags(CLI::App* sub, RawFlags& raw) {
  sub->add_option("--data", raw.data, "dataset directory (manifest + media)");
  sub->add_option("--protocol", raw.protocol,
                  "evaluation protocol: fold1, fold2, fold3, duration, gender");
  sub->add_option("--score-w", raw.score_w,
                  "visual weight for score fusion, in [0,1]");
  sub->add_flag("--cross-gender", raw.cross_gender,
                "gender protocol trains on one gender, tests on the other");
  sub->add_flag("--folds-by-clip", raw.folds_by_clip,
                "drop subject disjointness when building folds");
}

pecl::CliOverrides collect(const CLI::App* sub, const RawFlags& raw) {
  pecl::CliOverrides o;
  if (count_of(sub, "--seed")) o.seed = raw.seed;
  if (count_of(sub, "--out")) o.out = raw.out;
  if (count_of(sub, "--data")) o.data = raw.data;
  if (count_of(sub, "--manifest")) o.manifest = raw.manifest;
  if (count_of(sub, "--checkpoint")) o.checkpoint = raw.checkpoint;
  if (count_of(sub, "--protocol")) o.protocol = raw.protocol;
  if (count_of(sub, "--alphabet")) o.alphabet = raw.alphabet;
  if (count_of(sub, "--fusion")) o.fusion = raw.fusion;
  if (count_of(sub, "--adapter")) o.adapter = raw.adapter;
  if (count_of(sub, "--placement")) o.placement = raw.placement;
  if (count_of(sub, "--multitask")) o.multitask = raw.multitask;
  if (count_of(sub, "--pavf-count")) o.pavf_count = raw.pavf_count;
  if (count_of(sub, "--score-w")) o.score_w = raw.score_w;
  if (count_of(sub, "--cross-gender")) o.cross_gender = raw.cross_gender;
  if (count_of(sub, "--mode")) o.synth_mode = raw.synth_mode;
  if (count_of(sub, "--n-clips")) o.n_clips = raw.n_clips;
  if (count_of(sub, "--noise")) o.noise = raw.noise;
  if (count_of(sub, "--flip-rate")) o.flip_rate = raw.flip_rate;
  o.inject_bug = raw.inject_bug;
  o.json_output = raw.json_output;
  return o;
}

}  // namespace

int main(int argc, char** argv) {
  RawFlags raw;
  CLI::App app{"Parameter-efficient audio-visual deception classifier"};
  app.require_subcommand(1);

  CLI::App* train = app.add_subcommand(
      "train", "train a model and write checkpoint, log, and metrics");
  add_common(train, raw);
  add_model_flags(train, raw);
  add_data_flags(train, raw);

  CLI::App* eval = app.add_subcommand(
      "eval", "evaluate a checkpoint on a protocol test set");
  add_common(eval, raw);
  add_model_flags(eval, raw);
  add_data_flags(eval, raw);
  eval->add_option("--checkpoint", raw.checkpoint, "checkpoint file to load");

  CLI::App* gradcheck = app.add_subcommand(
      "gradcheck", "finite-difference check of every trainable parameter");
  add_common(gradcheck, raw);
  add_model_flags(gradcheck, raw);
  gradcheck->add_flag("--inject-bug", raw.inject_bug,
                      "corrupt the analytic gradients; the check must fail");

  CLI::App* params = app.add_subcommand(
      "params", "parameter count breakdown and trainable ratio");
  add_common(params, raw);
  add_model_flags(params, raw);
  params->add_flag("--json", raw.json_output, "print JSON instead of text");

  CLI::App* split = app.add_subcommand(
      "split", "build protocol splits from a manifest");
  add_common(split, raw);
  split->add_option("--manifest", raw.manifest, "clip manifest (JSON lines)");
  split->add_option("--protocol", raw.protocol,
                    "one protocol family, or all (default)");
  split->add_flag("--cross-gender", raw.cross_gender,
                  "gender protocol trains on one gender, tests on the other");
  split->add_flag("--folds-by-clip", raw.folds_by_clip,
                  "drop subject disjointness when building folds");

  CLI::App* kappa = app.add_subcommand(
      "kappa", "inter-annotator agreement over annotation files");
  add_common(kappa, raw);
  kappa->add_option("files", raw.kappa_files,
                    "two or more annotator JSON files");

  CLI::App* synth = app.add_subcommand(
      "synth", "generate a synthetic dataset with on-disk media");
  add_common(synth, raw);
  synth->add_option("--mode", raw.synth_mode,
                    "latent wiring: xor or aligned");
  synth->add_option("--n-clips", raw.n_clips, "number of clips");
  synth->add_option("--noise", raw.noise, "media noise sigma");
  synth->add_option("--flip-rate", raw.flip_rate,
                    "annotation label flip probability");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 2;
  }

  const CLI::App* sub = app.get_subcommands().front();
  try {
    auto o = collect(sub, raw);
    auto r = pecl::resolve_experiment(raw.config, o);
    const std::string& name = sub->get_name();
    if (name == "train") return pecl::cmd_train(r, std::cout);
    if (name == "eval") return pecl::cmd_eval(r, std::cout);
    if (name == "gradcheck")
      return pecl::cmd_gradcheck(r, raw.inject_bug, std::cout);
    if (name == "params") return pecl::cmd_params(r, raw.json_output, std::cout);
    if (name == "split") {
      if (!count_of(sub, "--protocol")) r.cfg.protocol = "all";
      return pecl::cmd_split(r, std::cout);
    }
    if (name == "kappa") return pecl::cmd_kappa(r, raw.kappa_files, std::cout);
    if (name == "synth") return pecl::cmd_synth(r, std::cout);
    std::cerr << "error: unknown command " << name << "\n";
    return 2;
  } catch (const pecl::NonFiniteError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 3;
  } catch (const pecl::ConfigError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const pecl::ValueError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const pecl::ShapeError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
}
