#include <gtest/gtest.h>

#include <cmath>
#include <fstream>

#include "cdvi/error.hpp"
#include "cdvi/masks.hpp"
#include "cdvi/train.hpp"
#include "test_util.hpp"

using namespace cdvi;

namespace {

class ZeroDenoiser final : public Denoiser {
 public:
  Video predict_eps(const DenoiserInput& in) const override {
    return Video(in.frames.frames(), in.frames.channels(), in.frames.height(), in.frames.width());
  }
  int frame_budget() const override { return 8; }
};

ArchConfig tiny_arch() {
  ArchConfig a;
  a.width = 6;
  a.max_frames = 4;
  return a;
}

TrainConfig tiny_cfg() {
  TrainConfig c;
  c.steps = 6;
  c.tasks.budget = 4;
  c.diffusion_steps = 50;
  c.learning_rate = 1e-3;
  c.seed = 3;
  return c;
}

TrainingData tiny_data(std::uint64_t seed) {
  Rng rng(seed);
  TrainingData d;
  for (int i = 0; i < 4; ++i) d.videos.push_back(test::random_video(rng, 6, 1, 8, 8));
  return d;
}

float f32(double v) { return static_cast<float>(v); }

}  // namespace

TEST(Train, ExampleConstruction) {
  Rng rng(1);
  const Video v = test::random_video(rng, 6, 1, 4, 4);
  const PixelMask m = test::random_mask(rng, 6, 4, 4);
  const auto schedule = NoiseSchedule::build(ScheduleKind::cosine, 100);
  const Video eps = test::random_video(rng, 3, 1, 4, 4);
  const auto ex = make_example(v, m, {1, 4}, {2}, 30, schedule, eps, 4);
  EXPECT_EQ(ex.input.positions, (std::vector<int>{1, 4, 2}));
  EXPECT_DOUBLE_EQ(ex.input.sigma, alpha_bar_to_sigma(schedule.alpha_bar(30)));
  const double a = std::sqrt(schedule.alpha_bar(30)), b = std::sqrt(1 - schedule.alpha_bar(30));
  const std::vector<int> src{1, 4, 2};
  for (std::size_t f = 0; f < 3; ++f)
    for (std::size_t y = 0; y < 4; ++y)
      for (std::size_t x = 0; x < 4; ++x) {
        const double clean = v(static_cast<std::size_t>(src[f]), 0, y, x);
        const bool known = f == 2 || m(static_cast<std::size_t>(src[f]), y, x);
        EXPECT_EQ(ex.input.mask(f, y, x), known ? 1 : 0);
        EXPECT_DOUBLE_EQ(ex.input.frames(f, 0, y, x), known ? clean : a * clean + b * eps(f, 0, y, x));
      }
  EXPECT_THROW(make_example(v, m, {0, 1, 2}, {3, 4}, 5, schedule, test::random_video(rng, 5, 1, 4, 4), 4),
               CapacityError);
}

TEST(Train, LossIsZeroWhenNothingIsMissing) {
  Rng rng(2);
  const Video v = test::random_video(rng, 4, 1, 4, 4);
  const auto schedule = NoiseSchedule::build(ScheduleKind::cosine, 10);
  ZeroDenoiser zero;
  EXPECT_EQ(masked_loss(zero, v, PixelMask(4, 4, 4, 1), {0, 1}, {2}, 5, schedule, test::random_video(rng, 3, 1, 4, 4)),
            0.0);
}

TEST(Train, ZeroPredictorLossIsMeanSquaredNoise) {
  Rng rng(3);
  const Video v = test::random_video(rng, 5, 2, 4, 4);
  const PixelMask m = test::random_mask(rng, 5, 4, 4);
  const auto schedule = NoiseSchedule::build(ScheduleKind::sigmoid, 10);
  const Video eps = test::random_video(rng, 3, 2, 4, 4);
  ZeroDenoiser zero;
  const double loss = masked_loss(zero, v, m, {0, 3}, {4}, 7, schedule, eps);
  double sum = 0.0;
  std::size_t count = 0;
  const std::vector<int> x{0, 3};
  for (std::size_t f = 0; f < 2; ++f)
    for (std::size_t c = 0; c < 2; ++c)
      for (std::size_t y = 0; y < 4; ++y)
        for (std::size_t xx = 0; xx < 4; ++xx)
          if (!m(static_cast<std::size_t>(x[f]), y, xx)) {
            sum += eps(f, c, y, xx) * eps(f, c, y, xx);
            ++count;
          }
  EXPECT_NEAR(loss, sum / static_cast<double>(count), 1e-15);
}

TEST(Train, LossIgnoresFramesOutsideTheTask) {
  const ArchConfig arch = tiny_arch();
  const auto p = init_params(arch, 4);
  NetworkDenoiser net(arch, p.weights);
  Rng rng(4);
  Video v = test::random_video(rng, 6, 1, 8, 8);
  const PixelMask m = test::random_mask(rng, 6, 8, 8);
  const auto schedule = NoiseSchedule::build(ScheduleKind::cosine, 20);
  const Video eps = test::random_video(rng, 3, 1, 8, 8);
  const double before = masked_loss(net, v, m, {1, 2}, {4}, 9, schedule, eps);
  for (std::size_t f : {0u, 3u, 5u})
    for (double& x : v.frame(f)) x = 1e6;
  EXPECT_EQ(masked_loss(net, v, m, {1, 2}, {4}, 9, schedule, eps), before);
}

TEST(Train, DiffusionStepsAreUniform) {
  TrainConfig cfg = tiny_cfg();
  cfg.diffusion_steps = 10;
  TrainingData data = tiny_data(5);
  Rng rng(6);
  data.masks.push_back(test::random_mask(rng, 6, 8, 8));
  const auto schedule = NoiseSchedule::build(cfg.schedule, cfg.diffusion_steps);
  std::vector<int> counts(11, 0);
  const int draws = 20000;
  for (long s = 0; s < draws; ++s) ++counts[static_cast<std::size_t>(draw_examples(cfg, data, schedule, s)[0].t)];
  EXPECT_EQ(counts[0], 0);
  double chi2 = 0.0;
  const double expected = draws / 10.0;
  for (int t = 1; t <= 10; ++t) chi2 += std::pow(counts[static_cast<std::size_t>(t)] - expected, 2) / expected;
  EXPECT_LT(chi2, 27.88);  // 9 degrees of freedom, p = 0.001
}

TEST(Train, DrawsAreReproducibleAndValid) {
  const TrainConfig cfg = tiny_cfg();
  const TrainingData data = tiny_data(7);
  const auto schedule = NoiseSchedule::build(cfg.schedule, cfg.diffusion_steps);
  for (long s = 0; s < 50; ++s) {
    const auto a = draw_examples(cfg, data, schedule, s);
    const auto b = draw_examples(cfg, data, schedule, s);
    ASSERT_EQ(a.size(), 1u);
    EXPECT_EQ(a[0].input.frames, b[0].input.frames);
    EXPECT_EQ(a[0].eps, b[0].eps);
    EXPECT_EQ(a[0].input.frames.frames(), 4u);
    for (std::size_t f = a[0].latents.size(); f < 4; ++f) EXPECT_TRUE(a[0].input.mask.frame_complete(f));
  }
}

TEST(Train, LoopIsReproducible) {
  const TrainConfig cfg = tiny_cfg();
  const TrainingData data = tiny_data(8);
  const auto state = fresh_state(init_params(tiny_arch(), 1));
  const auto a = train_loop(cfg, data, state);
  const auto b = train_loop(cfg, data, state);
  EXPECT_EQ(a.losses, b.losses);
  EXPECT_EQ(a.state.params.weights, b.state.params.weights);
  EXPECT_EQ(a.state.params.ema, b.state.params.ema);
  EXPECT_EQ(a.state.step, 6);
  EXPECT_NE(a.state.params.weights, state.params.weights);
}

TEST(Train, ZeroStepsLeavesStateUntouched) {
  TrainConfig cfg = tiny_cfg();
  cfg.steps = 0;
  const auto state = fresh_state(init_params(tiny_arch(), 1));
  const auto r = train_loop(cfg, TrainingData{}, state);
  EXPECT_TRUE(r.losses.empty());
  EXPECT_EQ(r.state.params.weights, state.params.weights);
  EXPECT_EQ(r.state.step, 0);
}

TEST(Train, ResumingMatchesOneLongRun) {
  TrainConfig cfg = tiny_cfg();
  const TrainingData data = tiny_data(9);
  const auto state = fresh_state(init_params(tiny_arch(), 2));
  const auto whole = train_loop(cfg, data, state);
  cfg.steps = 3;
  const auto first = train_loop(cfg, data, state);
  const auto second = train_loop(cfg, data, first.state);
  EXPECT_EQ(second.state.params.weights, whole.state.params.weights);
}

TEST(Train, PeriodicCheckpoints) {
  TrainConfig cfg = tiny_cfg();
  cfg.checkpoint_every = 2;
  cfg.checkpoint_dir = test::scratch_dir("periodic");
  train_loop(cfg, tiny_data(1), fresh_state(init_params(tiny_arch(), 0)));
  for (int s : {2, 4, 6}) EXPECT_TRUE(std::filesystem::exists(cfg.checkpoint_dir / ("step_" + std::to_string(s) + ".ckpt")));
  EXPECT_EQ(load_checkpoint(cfg.checkpoint_dir / "step_4.ckpt").step, 4);
}

TEST(Train, ConfigValidation) {
  TrainConfig c = tiny_cfg();
  c.learning_rate = 0;
  EXPECT_THROW(check_train_config(c), ParameterError);
  c = tiny_cfg();
  c.ema_rate = 1.0;
  EXPECT_THROW(check_train_config(c), ParameterError);
  c = tiny_cfg();
  c.tasks.budget = 1;
  EXPECT_THROW(check_train_config(c), ParameterError);
  c = tiny_cfg();
  c.tasks.budget = 8;
  EXPECT_THROW(train_loop(c, tiny_data(1), fresh_state(init_params(tiny_arch(), 0))), CapacityError);
  c = tiny_cfg();
  c.seed = 99;
  c.accumulate = 2;
  const nlohmann::json j = c;
  const TrainConfig back = train_config_from_json(nlohmann::json::parse(j.dump()));
  EXPECT_EQ(back.seed, 99u);
  EXPECT_EQ(back.accumulate, 2);
  EXPECT_EQ(back.tasks.budget, 4);
}

TEST(Checkpoint, RoundTrip) {
  const auto dir = test::scratch_dir("ckpt");
  auto r = train_loop(tiny_cfg(), tiny_data(2), fresh_state(init_params(tiny_arch(), 5)));
  save_checkpoint(dir / "a.ckpt", r.state, {{"note", "x"}});
  nlohmann::json meta;
  const TrainState back = load_checkpoint(dir / "a.ckpt", &meta);
  EXPECT_EQ(meta["note"], "x");
  EXPECT_EQ(back.step, r.state.step);
  EXPECT_EQ(back.params.arch, r.state.params.arch);
  ASSERT_EQ(back.params.weights.size(), r.state.params.weights.size());
  for (std::size_t i = 0; i < back.params.weights.size(); ++i) {
    EXPECT_EQ(back.params.weights[i], static_cast<double>(f32(r.state.params.weights[i])));
    EXPECT_EQ(back.params.ema[i], static_cast<double>(f32(r.state.params.ema[i])));
    EXPECT_EQ(back.adam_v[i], static_cast<double>(f32(r.state.adam_v[i])));
  }
  // A loaded state re-saves to identical bytes.
  save_checkpoint(dir / "b.ckpt", back, {{"note", "x"}});
  std::ifstream fa(dir / "a.ckpt", std::ios::binary), fb(dir / "b.ckpt", std::ios::binary);
  const std::string sa((std::istreambuf_iterator<char>(fa)), {}), sb((std::istreambuf_iterator<char>(fb)), {});
  EXPECT_EQ(sa, sb);
}

TEST(Checkpoint, MalformedFiles) {
  const auto dir = test::scratch_dir("ckpt_bad");
  save_checkpoint(dir / "good.ckpt", fresh_state(init_params(tiny_arch(), 0)));
  std::ifstream f(dir / "good.ckpt", std::ios::binary);
  std::string bytes((std::istreambuf_iterator<char>(f)), {});
  auto write = [&](const std::string& name, const std::string& content) {
    std::ofstream o(dir / name, std::ios::binary);
    o << content;
    return dir / name;
  };
  EXPECT_THROW(load_checkpoint(write("trunc.ckpt", bytes.substr(0, bytes.size() - 3))), FormatError);
  EXPECT_THROW(load_checkpoint(write("magic.ckpt", "XXXX" + bytes.substr(4))), FormatError);
  EXPECT_THROW(load_checkpoint(write("tail.ckpt", bytes + "z")), FormatError);
  EXPECT_THROW(load_checkpoint(write("tiny.ckpt", "CDV")), FormatError);
  EXPECT_THROW(load_checkpoint(dir / "absent.ckpt"), FormatError);
}
