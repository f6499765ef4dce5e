#include <cmath>
#include <string>
#include <vector>

#include <gtest/gtest.h>

#include "pecl/encoder.hpp"
#include "pecl/grad_check.hpp"
#include "pecl/param.hpp"
#include "pecl/rng.hpp"
#include "pecl/tensor.hpp"

namespace {

using pecl::Tensor;

Tensor<double> rand_tensor(pecl::Shape shape, pecl::Rng& rng, double lo = -1.0,
                           double hi = 1.0) {
  auto t = Tensor<double>::zeros(std::move(shape));
  pecl::fill_uniform(t, rng, lo, hi);
  return t;
}

pecl::UtAdapterWeights<double> rand_ut(std::size_t d, std::size_t r,
                                       pecl::Rng& rng, bool dense_up) {
  pecl::UtAdapterWeights<double> w;
  w.w1 = rand_tensor({d, r}, rng, -0.5, 0.5);
  w.b1 = rand_tensor({r}, rng, -0.2, 0.2);
  w.conv_w = rand_tensor({r, r, 3}, rng, -0.5, 0.5);
  w.conv_b = rand_tensor({r}, rng, -0.2, 0.2);
  w.w2 = dense_up ? rand_tensor({r, d}, rng, -0.5, 0.5)
                  : Tensor<double>::zeros({r, d});
  w.b2 = dense_up ? rand_tensor({d}, rng, -0.2, 0.2)
                  : Tensor<double>::zeros({d});
  w.kernel = 3;
  return w;
}

pecl::BottleneckAdapterWeights<double> rand_bottleneck(std::size_t d,
                                                       std::size_t r,
                                                       pecl::Rng& rng,
                                                       bool dense_up) {
  pecl::BottleneckAdapterWeights<double> w;
  w.w_down = rand_tensor({d, r}, rng, -0.5, 0.5);
  w.b_down = rand_tensor({r}, rng, -0.2, 0.2);
  w.w_up = dense_up ? rand_tensor({r, d}, rng, -0.5, 0.5)
                    : Tensor<double>::zeros({r, d});
  w.b_up = dense_up ? rand_tensor({d}, rng, -0.2, 0.2)
                    : Tensor<double>::zeros({d});
  return w;
}

pecl::AdapterBlock<double> make_block(pecl::AdapterKind kind, std::size_t d,
                                      std::size_t r, pecl::Rng& rng,
                                      bool dense_up) {
  pecl::AdapterBlock<double> b;
  b.kind = kind;
  if (kind == pecl::AdapterKind::ut) b.ut = rand_ut(d, r, rng, dense_up);
  if (kind == pecl::AdapterKind::bottleneck)
    b.bottleneck = rand_bottleneck(d, r, rng, dense_up);
  return b;
}

// Random frozen backbone with the requested adapter wiring. Handles are
// shared, so clearing the adapter slots on a copy yields the adapter-free
// layer over identical frozen weights.
pecl::EncoderLayer<double> make_layer(pecl::LayerStyle style,
                                      pecl::Placement placement,
                                      pecl::AdapterKind kind, bool dense_up,
                                      std::size_t d, std::size_t heads,
                                      std::size_t r, pecl::Rng& rng) {
  pecl::EncoderLayer<double> p;
  p.style = style;
  p.placement = placement;
  p.an = pecl::AnStyle::layer_norm;
  p.heads = heads;
  p.scale = pecl::AttnScale::full_dim;

  for (Tensor<double>* m :
       {&p.mhsa_w.wq, &p.mhsa_w.wk, &p.mhsa_w.wv, &p.mhsa_w.wo})
    *m = rand_tensor({d, d}, rng, -0.4, 0.4);
  for (Tensor<double>* b :
       {&p.mhsa_w.bq, &p.mhsa_w.bk, &p.mhsa_w.bv, &p.mhsa_w.bo})
    *b = rand_tensor({d}, rng, -0.2, 0.2);
  p.ffn_w.w1 = rand_tensor({d, 2 * d}, rng, -0.4, 0.4);
  p.ffn_w.b1 = rand_tensor({2 * d}, rng, -0.2, 0.2);
  p.ffn_w.w2 = rand_tensor({2 * d, d}, rng, -0.4, 0.4);
  p.ffn_w.b2 = rand_tensor({d}, rng, -0.2, 0.2);
  p.ffn_w.act = pecl::Act::gelu;

  p.ln1_g = rand_tensor({d}, rng, 0.5, 1.5);
  p.ln1_b = rand_tensor({d}, rng, -0.5, 0.5);
  p.ln2_g = rand_tensor({d}, rng, 0.5, 1.5);
  p.ln2_b = rand_tensor({d}, rng, -0.5, 0.5);
  p.an1_g = rand_tensor({d}, rng, 0.5, 1.5);
  p.an1_b = rand_tensor({d}, rng, -0.5, 0.5);
  p.an2_g = rand_tensor({d}, rng, 0.5, 1.5);
  p.an2_b = rand_tensor({d}, rng, -0.5, 0.5);

  if (kind != pecl::AdapterKind::none) {
    const bool attn_slot = placement == pecl::Placement::parallel_both ||
                           placement == pecl::Placement::parallel_mhsa ||
                           placement == pecl::Placement::between;
    const bool ffn_slot = placement == pecl::Placement::parallel_both ||
                          placement == pecl::Placement::parallel_ffn;
    if (attn_slot) p.adapter_attn = make_block(kind, d, r, rng, dense_up);
    if (ffn_slot) p.adapter_ffn = make_block(kind, d, r, rng, dense_up);
  }
  return p;
}

pecl::EncoderLayer<double> strip_adapters(pecl::EncoderLayer<double> p) {
  p.adapter_attn = pecl::AdapterBlock<double>{};
  p.adapter_ffn = pecl::AdapterBlock<double>{};
  return p;
}

void expect_exactly_equal(const Tensor<double>& a, const Tensor<double>& b) {
  ASSERT_EQ(a.shape(), b.shape());
  for (std::size_t i = 0; i < a.size(); ++i)
    ASSERT_EQ(a.data()[i], b.data()[i]) << "at flat index " << i;
}

TEST(EncoderLayer, AdapterFreeIdentityAnIsPlainPreNormLayer) {
  pecl::Rng rng(101);
  const std::size_t d = 6;
  auto p = make_layer(pecl::LayerStyle::pre_norm_visual,
                      pecl::Placement::parallel_both, pecl::AdapterKind::none,
                      false, d, 2, 3, rng);
  p.an = pecl::AnStyle::identity;
  auto x = rand_tensor({4, d}, rng);

  auto got = pecl::visual_layer_forward(x, p);

  // Reference pre-norm layer assembled by hand from the same blocks.
  const double eps = pecl::kLayerNormEps;
  auto x2 = pecl::add(
      x, pecl::mhsa(pecl::layer_norm(x, p.ln1_g, p.ln1_b, eps), p.mhsa_w,
                    p.heads, p.scale));
  auto want = pecl::add(
      x2, pecl::ffn(pecl::layer_norm(x2, p.ln2_g, p.ln2_b, eps), p.ffn_w));
  expect_exactly_equal(got, want);
}

TEST(EncoderLayer, AdapterFreeIdentityAnIsPlainPostNormLayer) {
  pecl::Rng rng(102);
  const std::size_t d = 6;
  auto p = make_layer(pecl::LayerStyle::post_norm_audio,
                      pecl::Placement::parallel_both, pecl::AdapterKind::none,
                      false, d, 2, 3, rng);
  p.an = pecl::AnStyle::identity;
  auto x = rand_tensor({4, d}, rng);

  auto got = pecl::audio_layer_forward(x, p);

  const double eps = pecl::kLayerNormEps;
  auto x2 = pecl::add(x, pecl::layer_norm(pecl::mhsa(x, p.mhsa_w, p.heads,
                                                     p.scale),
                                          p.ln1_g, p.ln1_b, eps));
  auto want = pecl::add(
      x2, pecl::layer_norm(pecl::ffn(x2, p.ffn_w), p.ln2_g, p.ln2_b, eps));
  expect_exactly_equal(got, want);
}

TEST(EncoderLayer, ZeroInitAdaptersMatchAdapterFreeExactly) {
  // A freshly inserted adapter (zero up-projection) must leave the layer
  // function untouched, whatever its position or kind, in both styles.
  pecl::Rng rng(103);
  const std::size_t d = 6;
  auto x = rand_tensor({5, d}, rng);
  for (auto style :
       {pecl::LayerStyle::pre_norm_visual, pecl::LayerStyle::post_norm_audio}) {
    for (auto kind : {pecl::AdapterKind::ut, pecl::AdapterKind::bottleneck}) {
      for (auto placement :
           {pecl::Placement::parallel_both, pecl::Placement::parallel_mhsa,
            pecl::Placement::parallel_ffn, pecl::Placement::between}) {
        auto p = make_layer(style, placement, kind, false, d, 2, 3, rng);
        auto with = pecl::encoder_layer_forward(x, p);
        auto without = pecl::encoder_layer_forward(x, strip_adapters(p));
        expect_exactly_equal(with, without);
      }
    }
  }
}

TEST(EncoderLayer, StylesDisagreeOnSharedWeights) {
  pecl::Rng rng(104);
  const std::size_t d = 6;
  auto p = make_layer(pecl::LayerStyle::pre_norm_visual,
                      pecl::Placement::parallel_both, pecl::AdapterKind::none,
                      false, d, 2, 3, rng);
  auto q = p;
  q.style = pecl::LayerStyle::post_norm_audio;
  auto x = rand_tensor({4, d}, rng);
  auto a = pecl::encoder_layer_forward(x, p);
  auto b = pecl::encoder_layer_forward(x, q);
  double diff = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i)
    diff = std::max(diff, std::abs(a.data()[i] - b.data()[i]));
  EXPECT_GT(diff, 1e-6);
}

TEST(EncoderLayer, PlacementsProduceDistinctOutputs) {
  // Same dense adapter weights wired into different spots must change the
  // function; guards against dead placement branches.
  pecl::Rng rng(105);
  const std::size_t d = 6;
  auto base = make_layer(pecl::LayerStyle::pre_norm_visual,
                         pecl::Placement::parallel_mhsa, pecl::AdapterKind::ut,
                         true, d, 2, 3, rng);
  auto x = rand_tensor({4, d}, rng);
  auto at_mhsa = pecl::encoder_layer_forward(x, base);

  auto at_ffn = base;
  at_ffn.placement = pecl::Placement::parallel_ffn;
  at_ffn.adapter_ffn = base.adapter_attn;
  at_ffn.adapter_attn = pecl::AdapterBlock<double>{};

  auto between = base;
  between.placement = pecl::Placement::between;

  auto y_ffn = pecl::encoder_layer_forward(x, at_ffn);
  auto y_btw = pecl::encoder_layer_forward(x, between);

  auto max_diff = [](const Tensor<double>& a, const Tensor<double>& b) {
    double m = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i)
      m = std::max(m, std::abs(a.data()[i] - b.data()[i]));
    return m;
  };
  EXPECT_GT(max_diff(at_mhsa, y_ffn), 1e-6);
  EXPECT_GT(max_diff(at_mhsa, y_btw), 1e-6);
  EXPECT_GT(max_diff(y_ffn, y_btw), 1e-6);
}

TEST(EncoderLayer, InconsistentAdapterSlotsThrow) {
  pecl::Rng rng(106);
  const std::size_t d = 6;
  auto p = make_layer(pecl::LayerStyle::pre_norm_visual,
                      pecl::Placement::parallel_both, pecl::AdapterKind::ut,
                      true, d, 2, 3, rng);
  p.adapter_ffn = pecl::AdapterBlock<double>{};  // both requires two slots
  auto x = rand_tensor({4, d}, rng);
  EXPECT_THROW(pecl::encoder_layer_forward(x, p), pecl::ConfigError);

  auto q = make_layer(pecl::LayerStyle::pre_norm_visual,
                      pecl::Placement::parallel_ffn, pecl::AdapterKind::ut,
                      true, d, 2, 3, rng);
  q.adapter_attn = q.adapter_ffn;  // extra slot the placement does not use
  EXPECT_THROW(pecl::encoder_layer_forward(x, q), pecl::ConfigError);
}

TEST(EncoderLayer, StyleWrappersRejectWrongStyle) {
  pecl::Rng rng(107);
  auto p = make_layer(pecl::LayerStyle::pre_norm_visual,
                      pecl::Placement::parallel_both, pecl::AdapterKind::none,
                      false, 4, 2, 2, rng);
  auto x = rand_tensor({2, 4}, rng);
  EXPECT_THROW(pecl::audio_layer_forward(x, p), pecl::ConfigError);
  p.style = pecl::LayerStyle::post_norm_audio;
  EXPECT_THROW(pecl::visual_layer_forward(x, p), pecl::ConfigError);
}

void collect_adapter_params(pecl::AdapterBlock<double>& b, const std::string& nm,
                            std::vector<pecl::Parameter<double>>& out) {
  auto push = [&](const std::string& leaf, Tensor<double>& t) {
    t.set_requires_grad(true);
    out.push_back(
        pecl::Parameter<double>{nm + "." + leaf, t, true, pecl::ParamGroup::adapter});
  };
  if (b.kind == pecl::AdapterKind::ut) {
    push("w1", b.ut.w1);
    push("b1", b.ut.b1);
    push("conv_w", b.ut.conv_w);
    push("conv_b", b.ut.conv_b);
    push("w2", b.ut.w2);
    push("b2", b.ut.b2);
  } else if (b.kind == pecl::AdapterKind::bottleneck) {
    push("w_down", b.bottleneck.w_down);
    push("b_down", b.bottleneck.b_down);
    push("w_up", b.bottleneck.w_up);
    push("b_up", b.bottleneck.b_up);
  }
}

// Checks d/dtheta of sum(y*y) for every trainable tensor of the layer.
void gradcheck_layer(pecl::LayerStyle style, pecl::Placement placement,
                     pecl::AdapterKind kind, std::uint64_t seed) {
  pecl::Rng rng(seed);
  const std::size_t d = 8, heads = 2, r = 4, l = 4;
  auto p = make_layer(style, placement, kind, true, d, heads, r, rng);
  auto x = rand_tensor({l, d}, rng);

  std::vector<pecl::Parameter<double>> params;
  collect_adapter_params(p.adapter_attn, "attn", params);
  collect_adapter_params(p.adapter_ffn, "ffn", params);
  auto push_an = [&](const std::string& nm, Tensor<double>& t) {
    t.set_requires_grad(true);
    params.push_back(pecl::Parameter<double>{nm, t, true, pecl::ParamGroup::norm});
  };
  push_an("an1_g", p.an1_g);
  push_an("an1_b", p.an1_b);
  push_an("an2_g", p.an2_g);
  push_an("an2_b", p.an2_b);

  std::vector<pecl::Parameter<double>*> ptrs;
  for (auto& q : params) ptrs.push_back(&q);

  auto f = [&]() {
    auto y = pecl::encoder_layer_forward(x, p);
    return pecl::sum_all(pecl::mul(y, y));
  };
  auto report = pecl::grad_check(f, ptrs);
  EXPECT_TRUE(report.pass) << report.to_text();
}

TEST(EncoderLayerGrad, VisualAllPlacements) {
  gradcheck_layer(pecl::LayerStyle::pre_norm_visual,
                  pecl::Placement::parallel_both, pecl::AdapterKind::ut, 201);
  gradcheck_layer(pecl::LayerStyle::pre_norm_visual,
                  pecl::Placement::parallel_mhsa, pecl::AdapterKind::ut, 202);
  gradcheck_layer(pecl::LayerStyle::pre_norm_visual,
                  pecl::Placement::parallel_ffn, pecl::AdapterKind::ut, 203);
  gradcheck_layer(pecl::LayerStyle::pre_norm_visual, pecl::Placement::between,
                  pecl::AdapterKind::ut, 204);
}

TEST(EncoderLayerGrad, AudioAllPlacements) {
  gradcheck_layer(pecl::LayerStyle::post_norm_audio,
                  pecl::Placement::parallel_both, pecl::AdapterKind::ut, 211);
  gradcheck_layer(pecl::LayerStyle::post_norm_audio,
                  pecl::Placement::parallel_mhsa, pecl::AdapterKind::ut, 212);
  gradcheck_layer(pecl::LayerStyle::post_norm_audio,
                  pecl::Placement::parallel_ffn, pecl::AdapterKind::ut, 213);
  gradcheck_layer(pecl::LayerStyle::post_norm_audio, pecl::Placement::between,
                  pecl::AdapterKind::ut, 214);
}

TEST(EncoderLayerGrad, BottleneckBothStyles) {
  gradcheck_layer(pecl::LayerStyle::pre_norm_visual,
                  pecl::Placement::parallel_both, pecl::AdapterKind::bottleneck,
                  221);
  gradcheck_layer(pecl::LayerStyle::post_norm_audio,
                  pecl::Placement::parallel_both, pecl::AdapterKind::bottleneck,
                  222);
}

TEST(EncodeStack, SingleLayerMatchesLayerForward) {
  pecl::Rng rng(301);
  const std::size_t d = 6;
  auto p = make_layer(pecl::LayerStyle::pre_norm_visual,
                      pecl::Placement::parallel_both, pecl::AdapterKind::ut,
                      true, d, 2, 3, rng);
  auto x = rand_tensor({4, d}, rng);
  auto outs = pecl::encode_stack(x, {p});
  ASSERT_EQ(outs.size(), 1u);
  expect_exactly_equal(outs[0], pecl::encoder_layer_forward(x, p));
}

TEST(EncodeStack, DepthsReturnOneOutputPerLayer) {
  pecl::Rng rng(302);
  const std::size_t d = 4;
  auto x = rand_tensor({3, d}, rng);
  std::vector<pecl::EncoderLayer<double>> layers;
  for (std::size_t depth = 1; depth <= 6; ++depth) {
    layers.push_back(make_layer(pecl::LayerStyle::post_norm_audio,
                                pecl::Placement::parallel_both,
                                pecl::AdapterKind::none, false, d, 2, 2, rng));
    auto outs = pecl::encode_stack(x, layers);
    EXPECT_EQ(outs.size(), depth);
    for (const auto& o : outs) {
      EXPECT_EQ(o.dim(0), 3u);
      EXPECT_EQ(o.dim(1), d);
    }
  }
  EXPECT_THROW(pecl::encode_stack(x, std::vector<pecl::EncoderLayer<double>>{}),
               pecl::ConfigError);
}

TEST(EncodeStack, ZeroInitAdapterStackMatchesAdapterFreeStack) {
  pecl::Rng rng(303);
  const std::size_t d = 6;
  auto x = rand_tensor({4, d}, rng);
  std::vector<pecl::EncoderLayer<double>> with, without;
  for (int i = 0; i < 4; ++i) {
    auto p = make_layer(pecl::LayerStyle::pre_norm_visual,
                        pecl::Placement::parallel_both, pecl::AdapterKind::ut,
                        false, d, 2, 3, rng);
    with.push_back(p);
    without.push_back(strip_adapters(p));
  }
  auto a = pecl::encode_stack(x, with);
  auto b = pecl::encode_stack(x, without);
  ASSERT_EQ(a.size(), b.size());
  for (std::size_t i = 0; i < a.size(); ++i) expect_exactly_equal(a[i], b[i]);
}

}  // namespace
