#ifndef PECL_CONFIG_HPP
#define PECL_CONFIG_HPP

#include <cstdint>
#include <set>
#include <string>
#include <vector>

#include <json.hpp>

#include "pecl/adapters.hpp"
#include "pecl/encoder.hpp"
#include "pecl/error.hpp"
#include "pecl/nn.hpp"
#include "pecl/pavf.hpp"
#include "pecl/tokenizers.hpp"

namespace pecl {

using Json = nlohmann::json;

// Residual-norm selection before resolution: `auto_pick` turns into
// layer_norm when any adapter is configured and identity otherwise.
enum class AnMode { auto_pick, layer_norm, identity };

enum class Precision { f32, f64 };

enum class FusionMode { pavf, concat, score };

enum class Modality { both, audio, visual };

// String forms used in config files, reports, and CLI flags.
inline const char* to_string(AdapterKind k) {
  switch (k) {
    case AdapterKind::none: return "none";
    case AdapterKind::ut: return "ut";
    case AdapterKind::bottleneck: return "bottleneck";
  }
  return "?";
}
inline const char* to_string(Placement p) {
  switch (p) {
    case Placement::parallel_both: return "parallel_both";
    case Placement::parallel_mhsa: return "parallel_mhsa";
    case Placement::parallel_ffn: return "parallel_ffn";
    case Placement::between: return "between";
  }
  return "?";
}
inline const char* to_string(AnMode m) {
  switch (m) {
    case AnMode::auto_pick: return "auto";
    case AnMode::layer_norm: return "layer_norm";
    case AnMode::identity: return "identity";
  }
  return "?";
}
inline const char* to_string(AttnScale s) {
  return s == AttnScale::full_dim ? "full_dim" : "per_head";
}
inline const char* to_string(PavfSoftmaxAxis a) {
  return a == PavfSoftmaxAxis::summation ? "summation" : "column";
}
inline const char* to_string(Precision p) {
  return p == Precision::f32 ? "f32" : "f64";
}
inline const char* to_string(FusionMode f) {
  switch (f) {
    case FusionMode::pavf: return "pavf";
    case FusionMode::concat: return "concat";
    case FusionMode::score: return "score";
  }
  return "?";
}
inline const char* to_string(Modality m) {
  switch (m) {
    case Modality::both: return "both";
    case Modality::audio: return "audio";
    case Modality::visual: return "visual";
  }
  return "?";
}

namespace detail {

template <typename E>
E parse_enum(const std::string& s, std::initializer_list<E> values,
             const char* what) {
  for (E v : values)
    if (s == to_string(v)) return v;
  std::string opts;
  for (E v : values) {
    if (!opts.empty()) opts += ", ";
    opts += to_string(v);
  }
  throw ConfigError(std::string(what) + ": unknown value \"" + s +
                    "\" (expected one of: " + opts + ")");
}

}  // namespace detail

inline AdapterKind parse_adapter_kind(const std::string& s) {
  return detail::parse_enum(
      s, {AdapterKind::none, AdapterKind::ut, AdapterKind::bottleneck},
      "adapter.kind");
}
inline Placement parse_placement(const std::string& s) {
  return detail::parse_enum(
      s,
      {Placement::parallel_both, Placement::parallel_mhsa,
       Placement::parallel_ffn, Placement::between},
      "placement");
}
inline AnMode parse_an_mode(const std::string& s) {
  return detail::parse_enum(
      s, {AnMode::auto_pick, AnMode::layer_norm, AnMode::identity}, "an_mode");
}
inline AttnScale parse_attn_scale(const std::string& s) {
  return detail::parse_enum(s, {AttnScale::full_dim, AttnScale::per_head},
                            "attn_scale");
}
inline PavfSoftmaxAxis parse_pavf_axis(const std::string& s) {
  return detail::parse_enum(
      s, {PavfSoftmaxAxis::summation, PavfSoftmaxAxis::column}, "pavf_axis");
}
inline Precision parse_precision(const std::string& s) {
  return detail::parse_enum(s, {Precision::f32, Precision::f64}, "precision");
}
inline FusionMode parse_fusion_mode(const std::string& s) {
  return detail::parse_enum(
      s, {FusionMode::pavf, FusionMode::concat, FusionMode::score}, "fusion");
}
inline Modality parse_modality(const std::string& s) {
  return detail::parse_enum(s, {Modality::both, Modality::audio, Modality::visual},
                            "modality");
}

struct OptimSettings {
  double lr = 3e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  std::size_t batch = 16;
  std::size_t epochs = 20;
};

struct LossWeights {
  double audio = 1.0;
  double visual = 1.0;
  double fusion = 1.0;
};

struct ModelConfig {
  std::size_t dim = 64;       // token width D
  std::size_t seq_len = 16;   // tokens per clip L
  std::size_t heads = 4;
  std::size_t layers = 4;     // per modality

  AdapterKind adapter = AdapterKind::ut;
  std::size_t adapter_r = 16;
  std::size_t adapter_kernel = 3;
  Placement placement = Placement::parallel_both;
  AnMode an_mode = AnMode::auto_pick;
  AttnScale attn_scale = AttnScale::full_dim;

  std::size_t proj_dim = 0;   // D'; 0 derives dim/2
  std::size_t fuse_dim = 0;   // D''; 0 derives dim/4
  std::size_t num_pavf = 4;
  PavfSoftmaxAxis pavf_axis = PavfSoftmaxAxis::summation;
  // The correlation is computed as Xv' * Wp * Xa'^T; recorded so reports
  // carry the exact bilinear form evaluated.
  std::string correlation_form = "xv*wp*xa_t";

  std::size_t aux_tasks = 25;  // K; only active when multitask is on
  bool multitask = false;

  FusionMode fusion = FusionMode::pavf;
  Modality modality = Modality::both;

  VisualTokenizerConfig visual;
  AudioTokenizerConfig audio;

  LossWeights loss_weights;
  OptimSettings optim;
  Precision precision = Precision::f32;
  std::uint64_t seed = 1;

  std::size_t resolved_proj_dim() const {
    return proj_dim == 0 ? dim / 2 : proj_dim;
  }
  std::size_t resolved_fuse_dim() const {
    return fuse_dim == 0 ? dim / 4 : fuse_dim;
  }
  std::size_t effective_aux() const { return multitask ? aux_tasks : 0; }
  AnStyle resolved_an() const {
    if (an_mode == AnMode::layer_norm) return AnStyle::layer_norm;
    if (an_mode == AnMode::identity) return AnStyle::identity;
    // Auto: the extra norm exists to stabilize adapter branches on the
    // residual stream; plain and between-style layers stay standard.
    if (adapter == AdapterKind::none || placement == Placement::between)
      return AnStyle::identity;
    return AnStyle::layer_norm;
  }

  void validate() const {
    if (dim == 0 || seq_len == 0 || layers == 0) {
      throw ConfigError("model: dim, seq_len, and layers must be positive");
    }
    if (heads == 0 || dim % heads != 0) {
      throw ConfigError("model: dim " + std::to_string(dim) +
                        " not divisible by heads " + std::to_string(heads));
    }
    if (adapter != AdapterKind::none && adapter_r == 0) {
      throw ConfigError("model: adapter_r must be positive");
    }
    if (adapter == AdapterKind::ut && adapter_kernel % 2 == 0) {
      throw ConfigError("model: adapter_kernel must be odd, got " +
                        std::to_string(adapter_kernel));
    }
    if (num_pavf < 1 || num_pavf > layers) {
      throw ConfigError("model: num_pavf " + std::to_string(num_pavf) +
                        " outside [1, layers=" + std::to_string(layers) + "]");
    }
    if (resolved_proj_dim() == 0 || resolved_proj_dim() >= dim) {
      throw ConfigError("model: proj_dim " +
                        std::to_string(resolved_proj_dim()) +
                        " must lie in [1, dim)");
    }
    if (resolved_fuse_dim() == 0) {
      throw ConfigError("model: fuse_dim must be positive");
    }
    if (multitask && (fusion != FusionMode::pavf || modality != Modality::both)) {
      throw ConfigError(
          "model: multitask attaches to the fused head and needs pavf fusion "
          "with both modalities");
    }
    if (correlation_form != "xv*wp*xa_t") {
      throw ConfigError("model: unsupported correlation_form \"" +
                        correlation_form + "\"");
    }
    if (optim.lr <= 0 || optim.batch == 0) {
      throw ConfigError("model: optimizer lr must be > 0 and batch >= 1");
    }
    visual.validate();
    audio.validate();
  }
};

// Presets. `desk` is the size every end-to-end run uses; `micro` exists for
// fast 64-bit gradient sweeps; `full` is only ever constructed for
// parameter accounting.
inline ModelConfig desk_config() {
  ModelConfig c;  // defaults above are the desk preset
  c.visual.frame_h = 16;
  c.visual.frame_w = 16;
  c.visual.frame_c = 1;
  c.visual.patch = 8;
  c.visual.inter_dim = 32;
  c.visual.validate();
  c.audio.channels = {8, 16, 32};
  c.audio.kernels = {10, 3, 3};
  c.audio.strides = {5, 2, 2};
  c.proj_dim = 32;
  c.fuse_dim = 16;
  return c;
}

inline ModelConfig micro_config() {
  ModelConfig c;
  c.dim = 16;
  c.seq_len = 4;
  c.heads = 2;
  c.layers = 2;
  c.adapter_r = 4;
  c.proj_dim = 8;
  c.fuse_dim = 4;
  c.num_pavf = 2;
  c.aux_tasks = 3;
  c.precision = Precision::f64;
  c.visual.frame_h = 8;
  c.visual.frame_w = 8;
  c.visual.frame_c = 1;
  c.visual.patch = 4;
  c.visual.inter_dim = 8;
  c.audio.channels = {4, 8};
  c.audio.kernels = {10, 3};
  c.audio.strides = {5, 2};
  return c;
}

inline ModelConfig full_scale_config() {
  ModelConfig c;
  c.dim = 768;
  c.seq_len = 64;
  c.heads = 12;
  c.layers = 4;
  c.adapter_r = 128;
  c.adapter_kernel = 3;
  c.proj_dim = 256;
  c.fuse_dim = 64;
  c.num_pavf = 4;
  c.aux_tasks = 25;
  c.multitask = true;
  c.visual.frame_h = 32;
  c.visual.frame_w = 32;
  c.visual.frame_c = 3;
  c.visual.patch = 16;
  c.visual.inter_dim = 768;
  c.audio.channels = {256, 384, 512};
  c.audio.kernels = {10, 3, 3};
  c.audio.strides = {5, 2, 2};
  return c;
}

inline ModelConfig preset_config(const std::string& name) {
  if (name == "desk") return desk_config();
  if (name == "micro") return micro_config();
  if (name == "full") return full_scale_config();
  throw ConfigError("unknown preset \"" + name +
                    "\" (expected desk, micro, or full)");
}

namespace detail {

inline void reject_unknown_keys(const Json& j, const std::set<std::string>& ok,
                                const std::string& where) {
  for (auto it = j.begin(); it != j.end(); ++it) {
    if (!ok.count(it.key())) {
      throw ConfigError("config: unknown key \"" + it.key() + "\" in " + where);
    }
  }
}

template <typename V>
void maybe(const Json& j, const char* key, V& out) {
  if (j.contains(key)) out = j.at(key).template get<V>();
}

}  // namespace detail

inline Json to_json(const ModelConfig& c) {
  Json j;
  j["dim"] = c.dim;
  j["seq_len"] = c.seq_len;
  j["heads"] = c.heads;
  j["layers"] = c.layers;
  j["adapter"] = {{"kind", to_string(c.adapter)},
                  {"r", c.adapter_r},
                  {"kernel", c.adapter_kernel}};
  j["placement"] = to_string(c.placement);
  j["an_mode"] = to_string(c.an_mode);
  j["attn_scale"] = to_string(c.attn_scale);
  j["proj_dim"] = c.resolved_proj_dim();
  j["fuse_dim"] = c.resolved_fuse_dim();
  j["num_pavf"] = c.num_pavf;
  j["pavf_axis"] = to_string(c.pavf_axis);
  j["correlation_form"] = c.correlation_form;
  j["aux_tasks"] = c.aux_tasks;
  j["multitask"] = c.multitask;
  j["fusion"] = to_string(c.fusion);
  j["modality"] = to_string(c.modality);
  j["visual"] = {{"frame_h", c.visual.frame_h}, {"frame_w", c.visual.frame_w},
                 {"frame_c", c.visual.frame_c}, {"patch", c.visual.patch},
                 {"inter_dim", c.visual.inter_dim}};
  j["audio"] = {{"channels", c.audio.channels},
                {"kernels", c.audio.kernels},
                {"strides", c.audio.strides}};
  j["loss_weights"] = {{"audio", c.loss_weights.audio},
                       {"visual", c.loss_weights.visual},
                       {"fusion", c.loss_weights.fusion}};
  j["optim"] = {{"lr", c.optim.lr},     {"beta1", c.optim.beta1},
                {"beta2", c.optim.beta2}, {"eps", c.optim.eps},
                {"batch", c.optim.batch}, {"epochs", c.optim.epochs}};
  j["precision"] = to_string(c.precision);
  j["seed"] = c.seed;
  return j;
}

// Applies the fields present in `j` on top of `base` (which may come from a
// preset). Unknown keys are rejected so typos cannot silently no-op.
inline ModelConfig config_from_json(const Json& j, ModelConfig base = {}) {
  if (!j.is_object()) throw ConfigError("config: top level must be an object");
  detail::reject_unknown_keys(
      j,
      {"preset",    "dim",       "seq_len",   "heads",      "layers",
       "adapter",   "placement", "an_mode",   "attn_scale", "proj_dim",
       "fuse_dim",  "num_pavf",  "pavf_axis", "correlation_form", "aux_tasks",
       "multitask", "fusion",    "modality",  "visual",     "audio",
       "loss_weights", "optim",  "precision", "seed"},
      "model config");
  ModelConfig c = j.contains("preset")
                      ? preset_config(j.at("preset").get<std::string>())
                      : std::move(base);

  detail::maybe(j, "dim", c.dim);
  detail::maybe(j, "seq_len", c.seq_len);
  detail::maybe(j, "heads", c.heads);
  detail::maybe(j, "layers", c.layers);
  if (j.contains("adapter")) {
    const Json& a = j.at("adapter");
    detail::reject_unknown_keys(a, {"kind", "r", "kernel"}, "adapter");
    if (a.contains("kind"))
      c.adapter = parse_adapter_kind(a.at("kind").get<std::string>());
    detail::maybe(a, "r", c.adapter_r);
    detail::maybe(a, "kernel", c.adapter_kernel);
  }
  if (j.contains("placement"))
    c.placement = parse_placement(j.at("placement").get<std::string>());
  if (j.contains("an_mode"))
    c.an_mode = parse_an_mode(j.at("an_mode").get<std::string>());
  if (j.contains("attn_scale"))
    c.attn_scale = parse_attn_scale(j.at("attn_scale").get<std::string>());
  detail::maybe(j, "proj_dim", c.proj_dim);
  detail::maybe(j, "fuse_dim", c.fuse_dim);
  detail::maybe(j, "num_pavf", c.num_pavf);
  if (j.contains("pavf_axis"))
    c.pavf_axis = parse_pavf_axis(j.at("pavf_axis").get<std::string>());
  detail::maybe(j, "correlation_form", c.correlation_form);
  detail::maybe(j, "aux_tasks", c.aux_tasks);
  detail::maybe(j, "multitask", c.multitask);
  if (j.contains("fusion"))
    c.fusion = parse_fusion_mode(j.at("fusion").get<std::string>());
  if (j.contains("modality"))
    c.modality = parse_modality(j.at("modality").get<std::string>());
  if (j.contains("visual")) {
    const Json& v = j.at("visual");
    detail::reject_unknown_keys(
        v, {"frame_h", "frame_w", "frame_c", "patch", "inter_dim"}, "visual");
    detail::maybe(v, "frame_h", c.visual.frame_h);
    detail::maybe(v, "frame_w", c.visual.frame_w);
    detail::maybe(v, "frame_c", c.visual.frame_c);
    detail::maybe(v, "patch", c.visual.patch);
    detail::maybe(v, "inter_dim", c.visual.inter_dim);
  }
  if (j.contains("audio")) {
    const Json& a = j.at("audio");
    detail::reject_unknown_keys(a, {"channels", "kernels", "strides"}, "audio");
    detail::maybe(a, "channels", c.audio.channels);
    detail::maybe(a, "kernels", c.audio.kernels);
    detail::maybe(a, "strides", c.audio.strides);
  }
  if (j.contains("loss_weights")) {
    const Json& w = j.at("loss_weights");
    detail::reject_unknown_keys(w, {"audio", "visual", "fusion"},
                                "loss_weights");
    detail::maybe(w, "audio", c.loss_weights.audio);
    detail::maybe(w, "visual", c.loss_weights.visual);
    detail::maybe(w, "fusion", c.loss_weights.fusion);
  }
  if (j.contains("optim")) {
    const Json& o = j.at("optim");
    detail::reject_unknown_keys(
        o, {"lr", "beta1", "beta2", "eps", "batch", "epochs"}, "optim");
    detail::maybe(o, "lr", c.optim.lr);
    detail::maybe(o, "beta1", c.optim.beta1);
    detail::maybe(o, "beta2", c.optim.beta2);
    detail::maybe(o, "eps", c.optim.eps);
    detail::maybe(o, "batch", c.optim.batch);
    detail::maybe(o, "epochs", c.optim.epochs);
  }
  if (j.contains("precision"))
    c.precision = parse_precision(j.at("precision").get<std::string>());
  detail::maybe(j, "seed", c.seed);

  c.validate();
  return c;
}

}  // namespace pecl

#endif  // PECL_CONFIG_HPP
