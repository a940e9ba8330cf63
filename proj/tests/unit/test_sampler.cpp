#include <gtest/gtest.h>

#include <cmath>
#include <limits>
#include <memory>

#include <nlohmann/json.hpp>

#include "cdvi/denoiser.hpp"
#include "cdvi/error.hpp"
#include "cdvi/gp.hpp"
#include "cdvi/oracle_check.hpp"
#include "cdvi/sampler.hpp"
#include "test_util.hpp"

using namespace cdvi;

namespace {

std::shared_ptr<const GaussianVideoModel> gp(int frames, int h, int w, double mean = 0.0) {
  GPVideoSpec s;
  s.frames = frames;
  s.height = h;
  s.width = w;
  s.mean = mean;
  return std::make_shared<GaussianVideoModel>(s);
}

std::vector<int> iota(int n) {
  std::vector<int> v(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) v[static_cast<std::size_t>(i)] = i;
  return v;
}

// Always returns a fixed non-finite value.
class NanDenoiser final : public Denoiser {
 public:
  Video predict_eps(const DenoiserInput& in) const override {
    return Video(in.frames.frames(), in.frames.channels(), in.frames.height(), in.frames.width(), std::nan(""));
  }
  int frame_budget() const override { return 8; }
};

}  // namespace

TEST(Sampler, NothingMissingMakesNoCalls) {
  auto model = gp(3, 2, 2);
  GaussianOracle oracle(model, 3);
  CountingDenoiser counter(oracle);
  Rng rng(1);
  const Video v = test::random_video(rng, 3, 1, 2, 2);
  for (auto kind : {SamplerKind::heun, SamplerKind::ddpm}) {
    SamplerConfig cfg;
    cfg.kind = kind;
    EXPECT_EQ(sample_frames(counter, v, PixelMask(3, 2, 2, 1), iota(3), cfg), v);
  }
  EXPECT_EQ(counter.calls(), 0);
}

TEST(Sampler, HeunNetworkEvaluationCount) {
  auto model = gp(2, 2, 2);
  GaussianOracle oracle(model, 2);
  CountingDenoiser counter(oracle);
  Rng rng(2);
  const Video v = test::random_video(rng, 2, 1, 2, 2);
  const PixelMask m = test::random_mask(rng, 2, 2, 2, 0.0);
  for (int n : {1, 2, 10, 25, 50, 100}) {
    SamplerConfig cfg;
    cfg.n_steps = n;
    counter.reset();
    sample_frames(counter, v, m, iota(2), cfg);
    EXPECT_EQ(counter.calls(), 2 * n - 1) << "n=" << n;
  }
  SamplerConfig ddpm;
  ddpm.kind = SamplerKind::ddpm;
  ddpm.n_steps = 40;
  counter.reset();
  sample_frames(counter, v, m, iota(2), ddpm);
  EXPECT_EQ(counter.calls(), 40);
}

TEST(Sampler, SigmaSequence) {
  SamplerConfig cfg;
  auto s = heun_sigmas(cfg);
  ASSERT_EQ(s.size(), 101u);
  EXPECT_EQ(s.front(), 1000.0);
  EXPECT_EQ(s[99], 0.002);
  EXPECT_EQ(s.back(), 0.0);
  cfg.n_steps = 1;
  EXPECT_EQ(heun_sigmas(cfg), (std::vector<double>{1000.0, 0.0}));
}

TEST(Sampler, DeterministicAndKnownPixelsPreserved) {
  auto model = gp(4, 2, 2);
  GaussianOracle oracle(model, 4);
  Rng rng(3);
  const Video v = test::random_video(rng, 4, 1, 2, 2);
  const PixelMask m = test::random_mask(rng, 4, 2, 2);
  for (auto kind : {SamplerKind::heun, SamplerKind::ddpm}) {
    SamplerConfig cfg;
    cfg.kind = kind;
    cfg.n_steps = 30;
    cfg.seed = 77;
    const Video a = sample_frames(oracle, v, m, iota(4), cfg);
    EXPECT_EQ(sample_frames(oracle, v, m, iota(4), cfg), a);
    for (std::size_t i = 0; i < a.size(); ++i)
      if (m.bits()[i]) EXPECT_EQ(a.values()[i], v.values()[i]);
    cfg.seed = 78;
    EXPECT_NE(sample_frames(oracle, v, m, iota(4), cfg), a);
  }
}

TEST(Sampler, DdpmSingleStepReturnsCleanPrediction) {
  auto model = gp(2, 1, 1, 0.3);
  GaussianOracle oracle(model, 2);
  const auto schedule = NoiseSchedule::from_table(ScheduleKind::cosine, {0.2});
  Video v(2, 1, 1, 1);
  v.values()[0] = 0.5;
  PixelMask m(2, 1, 1, 1);
  m.bits()[1] = 0;
  const Video out = sample_frames_ddpm(oracle, v, m, {0, 1}, schedule, 9);
  Rng rng(9);
  const double xt = rng.normal();
  DenoiserInput in{v, m, {0, 1}, alpha_bar_to_sigma(0.2)};
  in.frames.values()[1] = xt;
  const double eps = oracle.predict_eps(in).values()[1];
  EXPECT_NEAR(out.values()[1], (xt - std::sqrt(0.8) * eps) / std::sqrt(0.2), 1e-14);
  EXPECT_EQ(out.values()[0], 0.5);
}

TEST(Sampler, HeunMatchesGaussianConditional) {
  auto model = gp(3, 1, 1);
  GaussianOracle oracle(model, 3);
  Video v(3, 1, 1, 1);
  v.values()[0] = 0.4;
  PixelMask m(3, 1, 1, 0);
  m.bits()[0] = 1;
  const auto cond = model->condition({0}, Eigen::VectorXd::Constant(1, 0.4), {1, 2});
  SamplerConfig cfg;
  const int samples = 3000;
  Eigen::MatrixXd draws(2, samples);
  for (int s = 0; s < samples; ++s) {
    cfg.seed = static_cast<std::uint64_t>(s);
    const Video out = sample_frames(oracle, v, m, iota(3), cfg);
    draws(0, s) = out.values()[1];
    draws(1, s) = out.values()[2];
  }
  const Eigen::VectorXd mean = draws.rowwise().mean();
  const Eigen::MatrixXd centered = draws.colwise() - mean;
  const Eigen::MatrixXd cov = centered * centered.transpose() / (samples - 1);
  for (int i = 0; i < 2; ++i) {
    const double se = std::sqrt(cond.cov(i, i) / samples);
    EXPECT_LT(std::abs(mean(i) - cond.mean(i)), 4 * se) << i;
  }
  EXPECT_LT((cov - cond.cov).norm() / cond.cov.norm(), 0.1);
}

TEST(Sampler, DeterministicSolverConvergesAsStepsGrow) {
  auto model = gp(1, 1, 1);
  GaussianOracle oracle(model, 1);
  const Video v(1, 1, 1, 1);
  const PixelMask m(1, 1, 1, 0);
  SamplerConfig cfg;
  cfg.s_churn = 0.0;
  cfg.seed = 4;
  cfg.n_steps = 1000;
  const double reference = sample_frames(oracle, v, m, {0}, cfg).values()[0];
  double previous = std::numeric_limits<double>::infinity();
  for (int n : {10, 25, 50, 100}) {
    cfg.n_steps = n;
    const double err = std::abs(sample_frames(oracle, v, m, {0}, cfg).values()[0] - reference);
    EXPECT_LT(err, previous) << "n=" << n;
    previous = err;
  }
}

TEST(Sampler, OutputsAreNotClamped) {
  auto model = gp(2, 1, 1, 5.0);
  GaussianOracle oracle(model, 2);
  SamplerConfig cfg;
  cfg.n_steps = 20;
  const Video out = sample_frames(oracle, Video(2, 1, 1, 1), PixelMask(2, 1, 1, 0), {0, 1}, cfg);
  EXPECT_GT(out.values()[0], 2.0);
}

TEST(Sampler, StageOrderAndErrors) {
  auto model = gp(5, 1, 1);
  GaussianOracle oracle(model, 3);
  Rng rng(5);
  const Video v = test::random_video(rng, 5, 1, 1, 1);
  PixelMask m(5, 1, 1, 1);
  m.bits()[4] = 0;
  SamplerConfig cfg;
  cfg.n_steps = 5;
  const Video out = sample_stage(oracle, v, m, {4}, {0, 2}, cfg);
  ASSERT_EQ(out.frames(), 3u);
  EXPECT_EQ(out.values()[1], v.values()[0]);
  EXPECT_EQ(out.values()[2], v.values()[2]);
  EXPECT_THROW(sample_stage(oracle, v, m, {4, 3}, {0, 2}, cfg), CapacityError);
  EXPECT_THROW(sample_stage(oracle, v, m, {4}, {4}, cfg), IndexError);
  EXPECT_THROW(sample_stage(oracle, v, m, {5}, {}, cfg), IndexError);
  NanDenoiser nan;
  try {
    sample_frames(nan, v, m, iota(5), cfg);
    FAIL() << "expected NumericError";
  } catch (const NumericError& e) {
    EXPECT_NE(std::string(e.what()).find("step 0"), std::string::npos);
  }
}

TEST(Sampler, ConfigValidationAndJson) {
  SamplerConfig cfg;
  cfg.n_steps = 0;
  EXPECT_THROW(check_sampler_config(cfg), ParameterError);
  cfg = {};
  cfg.s_churn = -1;
  EXPECT_THROW(check_sampler_config(cfg), ParameterError);
  cfg = {};
  cfg.sigma_min = 0.0;
  EXPECT_THROW(check_sampler_config(cfg), ParameterError);
  cfg = {};
  cfg.seed = 12;
  cfg.s_churn = 3;
  const nlohmann::json j = cfg;
  const SamplerConfig back = sampler_config_from_json(nlohmann::json::parse(j.dump()));
  EXPECT_EQ(back.seed, 12u);
  EXPECT_EQ(back.s_churn, 3.0);
  EXPECT_TRUE(std::isinf(back.s_max));
  EXPECT_THROW(sampler_kind_from_string("euler"), ParameterError);
}

TEST(OracleCheck, SmallRunReportsSaneNumbers) {
  OracleCheckConfig cfg;
  cfg.samples = 400;
  cfg.seed = 3;
  const auto r = run_oracle_check(cfg);
  EXPECT_EQ(r.samples, 400);
  EXPECT_GT(r.missing_pixels, r.marginal_pixels);
  EXPECT_EQ(r.network_calls, 2L * 400 * 199);
  EXPECT_LT(r.max_mean_z, 5.0);
  EXPECT_LT(r.cov_rel_error, 0.3);
  EXPECT_LT(r.max_marginal_z, 5.0);
  const auto again = run_oracle_check(cfg);
  EXPECT_EQ(again.cov_rel_error, r.cov_rel_error);
  cfg.gp.frames = 2;
  EXPECT_THROW(run_oracle_check(cfg), ParameterError);
}
