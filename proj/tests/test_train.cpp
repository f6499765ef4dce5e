#include <cmath>
#include <cstring>
#include <limits>
#include <vector>

#include <gtest/gtest.h>

#include "pecl/adam.hpp"
#include "pecl/config.hpp"
#include "pecl/model.hpp"
#include "pecl/synth.hpp"
#include "pecl/train.hpp"

namespace {

pecl::SynthSpec micro_synth() {
  pecl::SynthSpec spec;
  spec.seq_len = 4;
  spec.visual.frame_h = 8;
  spec.visual.frame_w = 8;
  spec.visual.frame_c = 1;
  spec.visual.patch = 4;
  spec.visual.inter_dim = 8;
  spec.audio.channels = {4, 8};
  spec.audio.kernels = {10, 3};
  spec.audio.strides = {5, 2};
  return spec;
}

template <typename T>
std::vector<pecl::Example<T>> micro_examples(std::size_t n, std::uint64_t seed,
                                             std::size_t aux = 0) {
  auto spec = micro_synth();
  spec.n_clips = n;
  auto clips = pecl::synth_generate(spec, seed);
  std::vector<pecl::Example<T>> out;
  for (const auto& c : clips) out.push_back(pecl::to_example<T>(c, spec, aux));
  return out;
}

TEST(Train, SingleSampleOverfitsAndDecreasesMonotonically) {
  auto cfg = pecl::desk_config();
  cfg.optim.epochs = 200;
  cfg.optim.batch = 1;
  auto m = pecl::build_model<float>(cfg);

  pecl::SynthSpec spec;  // desk-shaped by default
  spec.n_clips = 1;
  auto clips = pecl::synth_generate(spec, 31);
  std::vector<pecl::Example<float>> data = {
      pecl::to_example<float>(clips[0], spec, 0)};

  auto log = pecl::train(m, data, {}, 31);
  ASSERT_EQ(log.epochs.size(), 200u);
  for (std::size_t i = 1; i <= 10; ++i)
    EXPECT_LT(log.epochs[i].loss, log.epochs[i - 1].loss) << "step " << i;
  double best = log.epochs.front().loss;
  for (const auto& e : log.epochs) best = std::min(best, e.loss);
  EXPECT_LT(best, 0.01);

  auto report = pecl::evaluate(m, data);
  EXPECT_EQ(report.acc, 1.0);
  EXPECT_EQ(report.n_items, 1u);
}

TEST(Train, FrozenParametersStayBitIdentical) {
  auto cfg = pecl::micro_config();
  cfg.optim.epochs = 3;
  cfg.optim.batch = 4;
  auto m = pecl::build_model<double>(cfg);

  pecl::Adam<double> probe(m.params, {});
  EXPECT_EQ(probe.state_count(), m.params.trainable().size());

  std::vector<std::pair<std::string, std::vector<double>>> snapshot;
  for (const auto& p : m.params.all())
    snapshot.emplace_back(p.name, p.value.data());

  auto data = micro_examples<double>(8, 32);
  auto log = pecl::train(m, data, {}, 32);
  ASSERT_EQ(log.epochs.size(), 3u);

  bool any_moved = false;
  for (const auto& [name, before] : snapshot) {
    const auto* p = m.params.find(name);
    ASSERT_NE(p, nullptr) << name;
    const bool same = std::memcmp(before.data(), p->value.data().data(),
                                  before.size() * sizeof(double)) == 0;
    if (p->trainable)
      any_moved |= !same;
    else
      EXPECT_TRUE(same) << name << " moved while frozen";
  }
  EXPECT_TRUE(any_moved);
}

TEST(Train, SameSeedReproducesLogBytes) {
  auto run = [&]() {
    auto cfg = pecl::micro_config();
    cfg.optim.epochs = 3;
    cfg.optim.batch = 4;
    auto m = pecl::build_model<double>(cfg);
    auto train_data = micro_examples<double>(8, 33);
    auto test_data = micro_examples<double>(4, 34);
    return pecl::train(m, train_data, test_data, 33).to_jsonl();
  };
  auto a = run();
  auto b = run();
  EXPECT_FALSE(a.empty());
  EXPECT_EQ(a, b);

  auto cfg = pecl::micro_config();
  cfg.optim.epochs = 3;
  cfg.optim.batch = 4;
  auto m = pecl::build_model<double>(cfg);
  auto train_data = micro_examples<double>(8, 33);
  auto test_data = micro_examples<double>(4, 34);
  auto c = pecl::train(m, train_data, test_data, 99).to_jsonl();
  EXPECT_NE(a, c);
}

TEST(Train, LogCarriesComponentsAndTestMetrics) {
  auto cfg = pecl::micro_config();
  cfg.optim.epochs = 2;
  cfg.optim.batch = 3;
  auto m = pecl::build_model<double>(cfg);
  auto train_data = micro_examples<double>(7, 35);
  auto test_data = micro_examples<double>(5, 36);
  auto log = pecl::train(m, train_data, test_data, 35);
  ASSERT_EQ(log.epochs.size(), 2u);
  for (const auto& e : log.epochs) {
    EXPECT_NEAR(e.loss, e.loss_audio + e.loss_visual + e.loss_fusion, 1e-12);
    EXPECT_GT(e.loss_audio, 0.0);
    EXPECT_GT(e.loss_fusion, 0.0);
    ASSERT_TRUE(e.has_test);
    EXPECT_EQ(e.test.n_items, 5u);
    auto j = e.to_json();
    EXPECT_TRUE(j.contains("test"));
    EXPECT_EQ(j["epoch"].get<std::size_t>(), e.epoch);
  }
}

TEST(Train, MultitaskEvaluationBreaksOutTasks) {
  auto cfg = pecl::micro_config();
  cfg.multitask = true;  // 3 auxiliary tasks
  cfg.optim.epochs = 1;
  cfg.optim.batch = 4;
  auto m = pecl::build_model<double>(cfg);
  auto train_data = micro_examples<double>(6, 37, 3);
  auto test_data = micro_examples<double>(4, 38, 3);
  auto log = pecl::train(m, train_data, test_data, 37);
  ASSERT_EQ(log.epochs.size(), 1u);
  const auto& r = log.epochs[0].test;
  ASSERT_EQ(r.tasks.size(), 4u);
  EXPECT_EQ(r.tasks[0].name, "deception");
  EXPECT_EQ(r.acc, r.tasks[0].acc);
}

TEST(Evaluate, ScoreModeWithFullVisualWeightMatchesVisualModel) {
  auto cfg = pecl::micro_config();
  cfg.fusion = pecl::FusionMode::score;
  auto score_model = pecl::build_model<double>(cfg);

  auto vis_cfg = pecl::micro_config();
  vis_cfg.modality = pecl::Modality::visual;
  vis_cfg.fusion = pecl::FusionMode::concat;
  auto vis_model = pecl::build_model<double>(vis_cfg);

  auto data = micro_examples<double>(6, 39);
  auto fused = pecl::evaluate(score_model, data, 1.0);
  auto visual = pecl::evaluate(vis_model, data);
  EXPECT_EQ(fused.acc, visual.acc);
  EXPECT_EQ(fused.f1, visual.f1);
  ASSERT_EQ(fused.auc.has_value(), visual.auc.has_value());
  if (fused.auc) EXPECT_EQ(*fused.auc, *visual.auc);
}

TEST(Train, NonFiniteLossNamesEpochAndStep) {
  auto cfg = pecl::micro_config();
  cfg.optim.epochs = 1;
  cfg.optim.batch = 2;
  auto m = pecl::build_model<double>(cfg);
  m.head_a_w.data()[0] = std::numeric_limits<double>::quiet_NaN();
  auto data = micro_examples<double>(2, 40);
  try {
    pecl::train(m, data, {}, 40);
    FAIL() << "expected NonFiniteError";
  } catch (const pecl::NonFiniteError& e) {
    EXPECT_NE(std::string(e.what()).find("epoch 1"), std::string::npos);
    EXPECT_NE(std::string(e.what()).find("step 1"), std::string::npos);
  }
}

TEST(Train, RejectsDegenerateSetups) {
  auto cfg = pecl::micro_config();
  auto m = pecl::build_model<double>(cfg);
  EXPECT_THROW(pecl::train(m, {}, {}, 1), pecl::ValueError);
  auto data = micro_examples<double>(2, 41);
  auto bad = cfg;
  bad.optim.epochs = 0;
  auto m2 = pecl::build_model<double>(bad);
  EXPECT_THROW(pecl::train(m2, data, {}, 1), pecl::ConfigError);
  EXPECT_THROW(pecl::evaluate(m, {}), pecl::ValueError);
}

}  // namespace
