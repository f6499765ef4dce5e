#ifndef PECL_ENCODER_HPP
#define PECL_ENCODER_HPP

#include <cstddef>
#include <string>
#include <vector>

#include "pecl/adapters.hpp"
#include "pecl/error.hpp"
#include "pecl/nn.hpp"
#include "pecl/tensor.hpp"

namespace pecl {

// Visual layers normalize before each sub-block; audio layers normalize the
// sub-block output before the residual add.
enum class LayerStyle { pre_norm_visual, post_norm_audio };

// Residual-sum normalization. With adapters present it is a trainable-affine
// layer norm; `identity` recovers the standard layer exactly.
enum class AnStyle { layer_norm, identity };

template <typename T>
struct AdapterBlock {
  AdapterKind kind = AdapterKind::none;
  UtAdapterWeights<T> ut;
  BottleneckAdapterWeights<T> bottleneck;
};

template <typename T>
Tensor<T> apply_adapter(const Tensor<T>& x, const AdapterBlock<T>& a) {
  switch (a.kind) {
    case AdapterKind::ut: return ut_adapter(x, a.ut);
    case AdapterKind::bottleneck: return bottleneck_adapter(x, a.bottleneck);
    case AdapterKind::none: break;
  }
  throw ConfigError("apply_adapter: no adapter present in this slot");
}

// One encoder layer. The backbone pieces (mhsa, ffn, ln) stay frozen during
// training; adapters and the AN affines are the trainable part.
template <typename T>
struct EncoderLayer {
  LayerStyle style = LayerStyle::pre_norm_visual;
  Placement placement = Placement::parallel_both;
  AnStyle an = AnStyle::layer_norm;
  std::size_t heads = 1;
  AttnScale scale = AttnScale::full_dim;

  MhsaWeights<T> mhsa_w;
  FfnWeights<T> ffn_w;
  Tensor<T> ln1_g, ln1_b, ln2_g, ln2_b;
  Tensor<T> an1_g, an1_b, an2_g, an2_b;  // unused when an == identity

  AdapterBlock<T> adapter_attn;  // also the single slot for `between`
  AdapterBlock<T> adapter_ffn;
};

namespace detail {

template <typename T>
inline void check_layer_adapters(const EncoderLayer<T>& p) {
  const bool has_attn = p.adapter_attn.kind != AdapterKind::none;
  const bool has_ffn = p.adapter_ffn.kind != AdapterKind::none;
  if (!has_attn && !has_ffn) return;  // adapter-free layer, placement unused
  bool ok = false;
  switch (p.placement) {
    case Placement::parallel_both: ok = has_attn && has_ffn; break;
    case Placement::parallel_mhsa: ok = has_attn && !has_ffn; break;
    case Placement::parallel_ffn: ok = !has_attn && has_ffn; break;
    case Placement::between: ok = has_attn && !has_ffn; break;
  }
  if (!ok) {
    throw ConfigError(
        "encoder layer: adapter slots do not match the requested placement");
  }
}

}  // namespace detail

template <typename T>
Tensor<T> encoder_layer_forward(const Tensor<T>& x, const EncoderLayer<T>& p) {
  detail::check_layer_adapters(p);
  const T eps = static_cast<T>(kLayerNormEps);
  const bool has_adapter = p.adapter_attn.kind != AdapterKind::none ||
                           p.adapter_ffn.kind != AdapterKind::none;
  const bool attn_par =
      has_adapter && (p.placement == Placement::parallel_both ||
                      p.placement == Placement::parallel_mhsa);
  const bool ffn_par =
      has_adapter && (p.placement == Placement::parallel_both ||
                      p.placement == Placement::parallel_ffn);
  const bool between = has_adapter && p.placement == Placement::between;

  auto an = [&](const Tensor<T>& h, const Tensor<T>& g, const Tensor<T>& b) {
    return p.an == AnStyle::layer_norm ? layer_norm(h, g, b, eps) : h;
  };

  Tensor<T> attn_out =
      p.style == LayerStyle::pre_norm_visual
          ? mhsa(layer_norm(x, p.ln1_g, p.ln1_b, eps), p.mhsa_w, p.heads, p.scale)
          : layer_norm(mhsa(x, p.mhsa_w, p.heads, p.scale), p.ln1_g, p.ln1_b,
                       eps);
  auto h1 = add(x, attn_out);
  if (attn_par) h1 = add(h1, apply_adapter(x, p.adapter_attn));
  auto x2 = an(h1, p.an1_g, p.an1_b);
  if (between) x2 = add(x2, apply_adapter(x2, p.adapter_attn));

  Tensor<T> ffn_out =
      p.style == LayerStyle::pre_norm_visual
          ? ffn(layer_norm(x2, p.ln2_g, p.ln2_b, eps), p.ffn_w)
          : layer_norm(ffn(x2, p.ffn_w), p.ln2_g, p.ln2_b, eps);
  auto h2 = add(x2, ffn_out);
  if (ffn_par) h2 = add(h2, apply_adapter(x2, p.adapter_ffn));
  return an(h2, p.an2_g, p.an2_b);
}

template <typename T>
Tensor<T> visual_layer_forward(const Tensor<T>& x, const EncoderLayer<T>& p) {
  if (p.style != LayerStyle::pre_norm_visual) {
    throw ConfigError("visual_layer_forward: layer is not pre-norm style");
  }
  return encoder_layer_forward(x, p);
}

template <typename T>
Tensor<T> audio_layer_forward(const Tensor<T>& x, const EncoderLayer<T>& p) {
  if (p.style != LayerStyle::post_norm_audio) {
    throw ConfigError("audio_layer_forward: layer is not post-norm style");
  }
  return encoder_layer_forward(x, p);
}

// Runs the whole stack and keeps every per-layer output; fusion taps read
// from arbitrary depths.
template <typename T>
std::vector<Tensor<T>> encode_stack(const Tensor<T>& tokens,
                                    const std::vector<EncoderLayer<T>>& layers) {
  if (layers.empty()) throw ConfigError("encode_stack: no layers");
  std::vector<Tensor<T>> outs;
  outs.reserve(layers.size());
  Tensor<T> h = tokens;
  for (const auto& p : layers) {
    h = encoder_layer_forward(h, p);
    outs.push_back(h);
  }
  return outs;
}

}  // namespace pecl

#endif  // PECL_ENCODER_HPP
