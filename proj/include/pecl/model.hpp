#ifndef PECL_MODEL_HPP
#define PECL_MODEL_HPP

#include <cstdint>
#include <map>
#include <string>
#include <utility>
#include <vector>

#include "pecl/config.hpp"
#include "pecl/encoder.hpp"
#include "pecl/error.hpp"
#include "pecl/param.hpp"
#include "pecl/pavf.hpp"
#include "pecl/tensor.hpp"
#include "pecl/tokenizers.hpp"

namespace pecl {

// `train` zero-initializes adapter up-projections (fresh adapters are the
// zero function); `dense` randomizes them so gradient checks exercise the
// whole path.
enum class InitMode { train, dense };

template <typename T>
struct PeclModel {
  ModelConfig cfg;
  ParamStore<T> params;

  VisualTokenizer<T> vis_tok;
  AudioTokenizer<T> aud_tok;
  Tensor<T> pos_v, pos_a;
  std::vector<EncoderLayer<T>> vis_layers, aud_layers;
  std::vector<PavfParams<T>> pavf_mods;

  Tensor<T> head_a_w, head_a_b;  // audio deception logit
  Tensor<T> head_v_w, head_v_b;  // visual deception logit
  Tensor<T> head_f_w, head_f_b;  // fusion logits (K_eff + 1)
  Tensor<T> head_c_w, head_c_b;  // concat-baseline logit

  bool has_visual() const { return cfg.modality != Modality::audio; }
  bool has_audio() const { return cfg.modality != Modality::visual; }
  bool has_fusion() const { return cfg.modality == Modality::both; }
  // PAVF modules read the deepest num_pavf layer pairs.
  std::size_t tap_base() const { return cfg.layers - cfg.num_pavf; }
};

namespace detail {

// Registers tensors in the store with per-name derived seeds: a parameter's
// initial values depend only on (config seed, its own name), so adding or
// removing other parameters never reshuffles them.
template <typename T>
class ModelBuilder {
 public:
  ModelBuilder(ParamStore<T>& store, std::uint64_t model_seed)
      : store_(store), model_seed_(model_seed) {}

  Tensor<T> he(const std::string& name, Shape shape, std::size_t fan_in,
               bool trainable, ParamGroup g) {
    auto t = Tensor<T>::zeros(std::move(shape));
    Rng rng(derive_seed(model_seed_, name));
    fill_he_uniform(t, rng, fan_in);
    return store_.add(name, std::move(t), trainable, g).value;
  }

  Tensor<T> zeros(const std::string& name, Shape shape, bool trainable,
                  ParamGroup g) {
    return store_.add(name, Tensor<T>::zeros(std::move(shape)), trainable, g)
        .value;
  }

  Tensor<T> ones(const std::string& name, Shape shape, bool trainable,
                 ParamGroup g) {
    return store_.add(name, Tensor<T>::full(std::move(shape), T(1)), trainable, g)
        .value;
  }

  Tensor<T> table(const std::string& name, Shape shape, double stddev,
                  bool trainable, ParamGroup g) {
    auto t = Tensor<T>::zeros(std::move(shape));
    Rng rng(derive_seed(model_seed_, name));
    fill_normal(t, rng, 0.0, stddev);
    return store_.add(name, std::move(t), trainable, g).value;
  }

 private:
  ParamStore<T>& store_;
  std::uint64_t model_seed_;
};

template <typename T>
AdapterBlock<T> build_adapter(ModelBuilder<T>& b, const ModelConfig& cfg,
                              const std::string& prefix, InitMode mode) {
  AdapterBlock<T> blk;
  blk.kind = cfg.adapter;
  const std::size_t d = cfg.dim, r = cfg.adapter_r;
  const auto g = ParamGroup::adapter;
  if (cfg.adapter == AdapterKind::ut) {
    const std::size_t k = cfg.adapter_kernel;
    blk.ut.kernel = k;
    blk.ut.w1 = b.he(prefix + ".w1", {d, r}, d, true, g);
    blk.ut.b1 = b.zeros(prefix + ".b1", {r}, true, g);
    blk.ut.conv_w = b.he(prefix + ".conv_w", {r, r, k}, r * k, true, g);
    blk.ut.conv_b = b.zeros(prefix + ".conv_b", {r}, true, g);
    blk.ut.w2 = mode == InitMode::dense
                    ? b.he(prefix + ".w2", {r, d}, r, true, g)
                    : b.zeros(prefix + ".w2", {r, d}, true, g);
    blk.ut.b2 = b.zeros(prefix + ".b2", {d}, true, g);
  } else if (cfg.adapter == AdapterKind::bottleneck) {
    blk.bottleneck.w_down = b.he(prefix + ".w_down", {d, r}, d, true, g);
    blk.bottleneck.b_down = b.zeros(prefix + ".b_down", {r}, true, g);
    blk.bottleneck.w_up = mode == InitMode::dense
                              ? b.he(prefix + ".w_up", {r, d}, r, true, g)
                              : b.zeros(prefix + ".w_up", {r, d}, true, g);
    blk.bottleneck.b_up = b.zeros(prefix + ".b_up", {d}, true, g);
  }
  return blk;
}

template <typename T>
EncoderLayer<T> build_layer(ModelBuilder<T>& b, const ModelConfig& cfg,
                            const std::string& prefix, LayerStyle style,
                            InitMode mode) {
  EncoderLayer<T> p;
  p.style = style;
  p.placement = cfg.placement;
  p.an = cfg.resolved_an();
  p.heads = cfg.heads;
  p.scale = cfg.attn_scale;

  const std::size_t d = cfg.dim, h = 4 * cfg.dim;
  const auto bb = ParamGroup::backbone;
  p.mhsa_w.wq = b.he(prefix + ".mhsa.wq", {d, d}, d, false, bb);
  p.mhsa_w.bq = b.zeros(prefix + ".mhsa.bq", {d}, false, bb);
  p.mhsa_w.wk = b.he(prefix + ".mhsa.wk", {d, d}, d, false, bb);
  p.mhsa_w.bk = b.zeros(prefix + ".mhsa.bk", {d}, false, bb);
  p.mhsa_w.wv = b.he(prefix + ".mhsa.wv", {d, d}, d, false, bb);
  p.mhsa_w.bv = b.zeros(prefix + ".mhsa.bv", {d}, false, bb);
  p.mhsa_w.wo = b.he(prefix + ".mhsa.wo", {d, d}, d, false, bb);
  p.mhsa_w.bo = b.zeros(prefix + ".mhsa.bo", {d}, false, bb);
  p.ffn_w.w1 = b.he(prefix + ".ffn.w1", {d, h}, d, false, bb);
  p.ffn_w.b1 = b.zeros(prefix + ".ffn.b1", {h}, false, bb);
  p.ffn_w.w2 = b.he(prefix + ".ffn.w2", {h, d}, h, false, bb);
  p.ffn_w.b2 = b.zeros(prefix + ".ffn.b2", {d}, false, bb);
  p.ffn_w.act = Act::gelu;
  p.ln1_g = b.ones(prefix + ".ln1.g", {d}, false, bb);
  p.ln1_b = b.zeros(prefix + ".ln1.b", {d}, false, bb);
  p.ln2_g = b.ones(prefix + ".ln2.g", {d}, false, bb);
  p.ln2_b = b.zeros(prefix + ".ln2.b", {d}, false, bb);

  if (p.an == AnStyle::layer_norm) {
    p.an1_g = b.ones(prefix + ".an1.g", {d}, true, ParamGroup::norm);
    p.an1_b = b.zeros(prefix + ".an1.b", {d}, true, ParamGroup::norm);
    p.an2_g = b.ones(prefix + ".an2.g", {d}, true, ParamGroup::norm);
    p.an2_b = b.zeros(prefix + ".an2.b", {d}, true, ParamGroup::norm);
  }

  if (cfg.adapter != AdapterKind::none) {
    const bool attn_slot = cfg.placement == Placement::parallel_both ||
                           cfg.placement == Placement::parallel_mhsa ||
                           cfg.placement == Placement::between;
    const bool ffn_slot = cfg.placement == Placement::parallel_both ||
                          cfg.placement == Placement::parallel_ffn;
    if (attn_slot)
      p.adapter_attn = build_adapter(b, cfg, prefix + ".adapter_attn", mode);
    if (ffn_slot)
      p.adapter_ffn = build_adapter(b, cfg, prefix + ".adapter_ffn", mode);
  }
  return p;
}

}  // namespace detail

template <typename T>
PeclModel<T> build_model(const ModelConfig& cfg,
                         InitMode mode = InitMode::train) {
  cfg.validate();
  PeclModel<T> m;
  m.cfg = cfg;
  detail::ModelBuilder<T> b(m.params, derive_seed(cfg.seed, "model"));
  const std::size_t d = cfg.dim, l = cfg.seq_len;
  const auto bb = ParamGroup::backbone;
  const auto cls = ParamGroup::classifier;

  if (m.has_visual()) {
    m.vis_tok.cfg = cfg.visual;
    const std::size_t pd = cfg.visual.patch_dim();
    const std::size_t vi = cfg.visual.inter_dim;
    m.vis_tok.patch_w = b.he("visual.tokenizer.patch_w", {pd, vi}, pd, false, bb);
    m.vis_tok.patch_b = b.zeros("visual.tokenizer.patch_b", {vi}, false, bb);
    m.vis_tok.proj_w = b.he("visual.tokenizer.proj_w", {vi, d}, vi, false, bb);
    m.vis_tok.proj_b = b.zeros("visual.tokenizer.proj_b", {d}, false, bb);
    m.pos_v = b.table("visual.pos", {l, d}, 0.02, false, bb);
    for (std::size_t i = 0; i < cfg.layers; ++i) {
      m.vis_layers.push_back(detail::build_layer(
          b, cfg, "visual.layer" + std::to_string(i),
          LayerStyle::pre_norm_visual, mode));
    }
    m.head_v_w = b.he("head.visual.w", {d, 1}, d, true, cls);
    m.head_v_b = b.zeros("head.visual.b", {1}, true, cls);
  }

  if (m.has_audio()) {
    m.aud_tok.cfg = cfg.audio;
    std::size_t cin = 1;
    for (std::size_t i = 0; i < cfg.audio.channels.size(); ++i) {
      const std::size_t co = cfg.audio.channels[i], k = cfg.audio.kernels[i];
      const std::string nm = "audio.tokenizer.conv" + std::to_string(i);
      m.aud_tok.conv_w.push_back(
          b.he(nm + ".w", {co, cin, k}, cin * k, false, bb));
      m.aud_tok.conv_b.push_back(b.zeros(nm + ".b", {co}, false, bb));
      cin = co;
    }
    const std::size_t ai = cfg.audio.inter_dim();
    m.aud_tok.proj_w = b.he("audio.tokenizer.proj_w", {ai, d}, ai, false, bb);
    m.aud_tok.proj_b = b.zeros("audio.tokenizer.proj_b", {d}, false, bb);
    m.pos_a = b.table("audio.pos", {l, d}, 0.02, false, bb);
    for (std::size_t i = 0; i < cfg.layers; ++i) {
      m.aud_layers.push_back(detail::build_layer(
          b, cfg, "audio.layer" + std::to_string(i),
          LayerStyle::post_norm_audio, mode));
    }
    m.head_a_w = b.he("head.audio.w", {d, 1}, d, true, cls);
    m.head_a_b = b.zeros("head.audio.b", {1}, true, cls);
  }

  if (m.has_fusion() && cfg.fusion == FusionMode::pavf) {
    const std::size_t dp = cfg.resolved_proj_dim();
    const std::size_t dpp = cfg.resolved_fuse_dim();
    for (std::size_t j = 0; j < cfg.num_pavf; ++j) {
      const std::string nm = "pavf" + std::to_string(j);
      PavfParams<T> p;
      p.axis = cfg.pavf_axis;
      p.proj_v_w = b.he(nm + ".proj_v_w", {d, dp}, d, true, ParamGroup::pavf);
      p.proj_v_b = b.zeros(nm + ".proj_v_b", {dp}, true, ParamGroup::pavf);
      p.proj_a_w = b.he(nm + ".proj_a_w", {d, dp}, d, true, ParamGroup::pavf);
      p.proj_a_b = b.zeros(nm + ".proj_a_b", {dp}, true, ParamGroup::pavf);
      p.w_p = b.he(nm + ".w_p", {dp, dp}, dp, true, ParamGroup::pavf);
      p.fuse_w = b.he(nm + ".fuse_w", {2 * dp, dpp}, 2 * dp, true,
                      ParamGroup::pavf);
      p.fuse_b = b.zeros(nm + ".fuse_b", {dpp}, true, ParamGroup::pavf);
      p.ln_g = b.ones(nm + ".ln_g", {dpp}, true, ParamGroup::pavf);
      p.ln_b = b.zeros(nm + ".ln_b", {dpp}, true, ParamGroup::pavf);
      m.pavf_mods.push_back(std::move(p));
    }
    const std::size_t fin = cfg.num_pavf * dpp;
    const std::size_t nout = cfg.effective_aux() + 1;
    m.head_f_w = b.he("head.fusion.w", {fin, nout}, fin, true, cls);
    m.head_f_b = b.zeros("head.fusion.b", {nout}, true, cls);
  } else if (m.has_fusion() && cfg.fusion == FusionMode::concat) {
    m.head_c_w = b.he("head.concat.w", {2 * d, 1}, 2 * d, true, cls);
    m.head_c_b = b.zeros("head.concat.b", {1}, true, cls);
  }
  return m;
}

template <typename T>
struct ForwardOutput {
  Tensor<T> logits_a;  // [1 x 1] when the audio path exists
  Tensor<T> logits_v;  // [1 x 1] when the visual path exists
  Tensor<T> logits_f;  // [1 x (K_eff+1)] pavf, [1 x 1] concat, else undefined
  std::vector<Tensor<T>> pavf_feats;  // per tap, [L x D'']
  std::vector<Tensor<T>> vis_states, aud_states;
};

template <typename T>
ForwardOutput<T> forward_clip(const PeclModel<T>& m, const Tensor<T>& frames,
                              const Tensor<T>& wave) {
  ForwardOutput<T> out;
  const ModelConfig& cfg = m.cfg;

  if (m.has_visual()) {
    auto tokens = add(tokenize_visual(m.vis_tok, frames), m.pos_v);
    out.vis_states = encode_stack(tokens, m.vis_layers);
    auto pooled = mean_axis(out.vis_states.back(), 0);
    out.logits_v = add_rows(matmul(pooled, m.head_v_w), m.head_v_b);
  }
  if (m.has_audio()) {
    auto tokens = add(tokenize_audio(m.aud_tok, wave, cfg.seq_len), m.pos_a);
    out.aud_states = encode_stack(tokens, m.aud_layers);
    auto pooled = mean_axis(out.aud_states.back(), 0);
    out.logits_a = add_rows(matmul(pooled, m.head_a_w), m.head_a_b);
  }

  if (m.has_fusion() && cfg.fusion == FusionMode::pavf) {
    std::vector<Tensor<T>> pooled;
    for (std::size_t j = 0; j < cfg.num_pavf; ++j) {
      const std::size_t tap = m.tap_base() + j;
      auto feat = pavf_forward(out.vis_states[tap], out.aud_states[tap],
                               m.pavf_mods[j]);
      out.pavf_feats.push_back(feat);
      pooled.push_back(mean_axis(feat, 0));
    }
    auto fused = pooled.size() == 1 ? pooled[0] : concat(pooled, 1);
    out.logits_f = add_rows(matmul(fused, m.head_f_w), m.head_f_b);
  } else if (m.has_fusion() && cfg.fusion == FusionMode::concat) {
    auto cat = concat(std::vector<Tensor<T>>{mean_axis(out.vis_states.back(), 0),
                                             mean_axis(out.aud_states.back(), 0)},
                      1);
    out.logits_f = add_rows(matmul(cat, m.head_c_w), m.head_c_b);
  }
  return out;
}

namespace detail {

inline void check_binary(int v, const char* what) {
  if (v != 0 && v != 1) {
    throw ValueError(std::string(what) + " must be 0 or 1, got " +
                     std::to_string(v));
  }
}

}  // namespace detail

// Sum of the active path losses plus the already-weighted value of each term
// for logging.
template <typename T>
struct LossTerms {
  Tensor<T> total;
  double audio = 0.0;
  double visual = 0.0;
  double fusion = 0.0;
};

// Binary cross-entropy per unimodal head plus the fusion term (summed over
// its K_eff+1 tasks), each scaled by its configured weight.
template <typename T>
LossTerms<T> clip_loss_terms(const PeclModel<T>& m, const ForwardOutput<T>& out,
                             int label, const std::vector<int>& aux) {
  detail::check_binary(label, "label");
  for (int v : aux) detail::check_binary(v, "auxiliary label");
  const ModelConfig& cfg = m.cfg;

  LossTerms<T> terms;
  auto accumulate = [&](const Tensor<T>& term, double w, double& slot) {
    auto scaled = scale(term, static_cast<T>(w));
    slot = static_cast<double>(scaled.item());
    terms.total = terms.total.defined() ? add(terms.total, scaled) : scaled;
  };

  auto y1 = Tensor<T>::full({1, 1}, static_cast<T>(label));
  if (m.has_audio())
    accumulate(bce_with_logits(out.logits_a, y1), cfg.loss_weights.audio,
               terms.audio);
  if (m.has_visual())
    accumulate(bce_with_logits(out.logits_v, y1), cfg.loss_weights.visual,
               terms.visual);

  if (out.logits_f.defined()) {
    const std::size_t k = cfg.fusion == FusionMode::pavf ? cfg.effective_aux() : 0;
    if (aux.size() < k) {
      throw ValueError("clip_loss: need " + std::to_string(k) +
                       " auxiliary labels, got " + std::to_string(aux.size()));
    }
    std::vector<T> targets(k + 1);
    targets[0] = static_cast<T>(label);
    for (std::size_t i = 0; i < k; ++i) targets[i + 1] = static_cast<T>(aux[i]);
    auto yt = Tensor<T>::from({1, k + 1}, std::move(targets));
    accumulate(bce_with_logits(out.logits_f, yt), cfg.loss_weights.fusion,
               terms.fusion);
  }
  return terms;
}

template <typename T>
Tensor<T> clip_loss(const PeclModel<T>& m, const ForwardOutput<T>& out,
                    int label, const std::vector<int>& aux) {
  return clip_loss_terms(m, out, label, aux).total;
}

// One training example: raw clip tensors plus targets.
template <typename T>
struct Example {
  Tensor<T> frames;  // [L x H x W x C]
  Tensor<T> wave;    // [T]
  int label = 0;
  std::vector<int> aux;
};

template <typename T>
Tensor<T> batch_loss(const PeclModel<T>& m,
                     const std::vector<Example<T>>& examples,
                     const std::vector<std::size_t>& indices) {
  if (indices.empty()) throw ValueError("batch_loss: empty batch");
  Tensor<T> sum;
  for (std::size_t idx : indices) {
    const auto& e = examples.at(idx);
    auto out = forward_clip(m, e.frames, e.wave);
    auto loss = clip_loss(m, out, e.label, e.aux);
    sum = sum.defined() ? add(sum, loss) : loss;
  }
  return scale(sum, static_cast<T>(1.0 / static_cast<double>(indices.size())));
}

struct ParamReport {
  std::size_t total = 0;
  std::size_t trainable = 0;
  std::size_t frozen = 0;
  double ratio = 0.0;
  std::map<std::string, std::size_t> by_group;

  Json to_json() const {
    Json j;
    j["total"] = total;
    j["trainable"] = trainable;
    j["frozen"] = frozen;
    j["ratio"] = ratio;
    j["by_group"] = by_group;
    return j;
  }

  std::string to_text() const {
    std::string s = "group        parameters\n";
    for (const auto& [name, count] : by_group) {
      s += name;
      s.append(name.size() < 13 ? 13 - name.size() : 1, ' ');
      s += std::to_string(count) + "\n";
    }
    s += "trainable    " + std::to_string(trainable) + "\n";
    s += "frozen       " + std::to_string(frozen) + "\n";
    s += "total        " + std::to_string(total) + "\n";
    s += "ratio        " + std::to_string(ratio) + "\n";
    return s;
  }
};

template <typename T>
ParamReport param_report(const PeclModel<T>& m) {
  ParamReport r;
  for (const auto& p : m.params.all()) {
    const std::size_t n = p.value.size();
    r.total += n;
    (p.trainable ? r.trainable : r.frozen) += n;
    r.by_group[param_group_name(p.group)] += n;
  }
  r.ratio = r.total == 0 ? 0.0
                         : static_cast<double>(r.trainable) /
                               static_cast<double>(r.total);
  return r;
}

// Weighted average of per-item deception probabilities from the two towers.
inline std::vector<double> score_fusion(const std::vector<double>& pv,
                                        const std::vector<double>& pa,
                                        double w) {
  if (w < 0.0 || w > 1.0) {
    throw ValueError("score_fusion: weight " + std::to_string(w) +
                     " outside [0,1]");
  }
  if (pv.size() != pa.size()) {
    throw ValueError("score_fusion: length mismatch");
  }
  std::vector<double> out(pv.size());
  for (std::size_t i = 0; i < pv.size(); ++i) {
    if (pv[i] < 0.0 || pv[i] > 1.0 || pa[i] < 0.0 || pa[i] > 1.0) {
      throw ValueError("score_fusion: probabilities must lie in [0,1]");
    }
    out[i] = w * pv[i] + (1.0 - w) * pa[i];
  }
  return out;
}

}  // namespace pecl

#endif  // PECL_MODEL_HPP
