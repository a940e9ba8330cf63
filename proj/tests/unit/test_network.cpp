#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>

#include <nlohmann/json.hpp>

#include "cdvi/error.hpp"
#include "cdvi/network.hpp"
#include "test_util.hpp"

using namespace cdvi;

namespace {

ArchConfig small_arch() {
  ArchConfig a;
  a.width = 8;
  a.heads = 2;
  a.max_frames = 6;
  return a;
}

DenoiserInput random_input(Rng& rng, std::size_t n, std::size_t c, std::size_t h, std::size_t w) {
  DenoiserInput in;
  in.frames = test::random_video(rng, n, c, h, w);
  in.mask = test::random_mask(rng, n, h, w, 0.4);
  for (std::size_t i = 0; i < n; ++i) in.positions.push_back(static_cast<int>(3 * i + 1));
  in.sigma = 0.7;
  return in;
}

// Non-zero everywhere so that the attention path is live.
std::vector<double> live_weights(const ArchConfig& arch, std::uint64_t seed) {
  auto p = init_params(arch, seed);
  Rng rng(seed + 1);
  for (double& w : p.weights) w += 0.05 * rng.normal();
  return p.weights;
}

}  // namespace

TEST(Network, DefaultParameterCountMatchesReference) {
  const auto golden = test::load_json("network_golden.json");
  EXPECT_EQ(make_layout(ArchConfig{}).total, golden["default_param_count"].get<std::size_t>());
}

TEST(Network, LayoutIsContiguous) {
  const auto layout = make_layout(small_arch());
  std::size_t offset = 0;
  for (const auto& b : layout.blocks) {
    EXPECT_EQ(b.offset, offset) << b.name;
    std::size_t n = 1;
    for (int d : b.shape) n *= static_cast<std::size_t>(d);
    EXPECT_EQ(b.size, n) << b.name;
    offset += b.size;
  }
  EXPECT_EQ(offset, layout.total);
  EXPECT_THROW(layout.find("nope"), ParameterError);
  EXPECT_EQ(layout.find("attn.wo").shape.front(), 8);
}

TEST(Network, InitIsDeterministicAndZeroWhereExpected) {
  const auto a = init_params(small_arch(), 3);
  const auto b = init_params(small_arch(), 3);
  const auto c = init_params(small_arch(), 4);
  EXPECT_EQ(a.weights, b.weights);
  EXPECT_NE(a.weights, c.weights);
  EXPECT_EQ(a.ema, a.weights);
  for (const auto& blk : a.layout.blocks) {
    const bool zero = blk.name == "attn.wo" || blk.name == "attn.rel_bias" ||
                      (blk.name.size() > 2 && blk.name.substr(blk.name.size() - 2) == ".b");
    const auto first = a.weights.begin() + static_cast<std::ptrdiff_t>(blk.offset);
    const bool all_zero = std::all_of(first, first + static_cast<std::ptrdiff_t>(blk.size), [](double v) { return v == 0.0; });
    EXPECT_EQ(all_zero, zero) << blk.name;
  }
}

TEST(Network, GradientMatchesCentralDifferences) {
  const ArchConfig arch = small_arch();
  Rng rng(42);
  const auto w = live_weights(arch, 5);
  const DenoiserInput in = random_input(rng, 5, 1, 6, 6);
  Video target = test::random_video(rng, 5, 1, 6, 6);
  std::vector<double> grad(w.size());
  network_masked_loss(arch, w, in, target, grad);
  std::vector<double> probe = w;
  const double h = 1e-4;
  double worst = 0.0;
  for (int trial = 0; trial < 120; ++trial) {
    const std::size_t i = rng.below(w.size());
    probe[i] = w[i] + h;
    const double up = network_masked_loss(arch, probe, in, target, {});
    probe[i] = w[i] - h;
    const double down = network_masked_loss(arch, probe, in, target, {});
    probe[i] = w[i];
    const double fd = (up - down) / (2 * h);
    const double rel = std::abs(fd - grad[i]) / std::max(1e-6, std::abs(fd) + std::abs(grad[i]));
    worst = std::max(worst, rel);
  }
  EXPECT_LT(worst, 1e-4);
}

TEST(Network, GradientOverwritesBuffer) {
  const ArchConfig arch = small_arch();
  Rng rng(8);
  const auto w = live_weights(arch, 1);
  const DenoiserInput in = random_input(rng, 3, 1, 4, 4);
  const Video target = test::random_video(rng, 3, 1, 4, 4);
  std::vector<double> g1(w.size(), 0.0), g2(w.size(), 123.0);
  network_masked_loss(arch, w, in, target, g1);
  network_masked_loss(arch, w, in, target, g2);
  EXPECT_EQ(g1, g2);
}

TEST(Network, ZeroOutputProjectionSilencesAttention) {
  const ArchConfig arch = small_arch();
  auto p = init_params(arch, 9);
  Rng rng(2);
  const DenoiserInput in = random_input(rng, 4, 1, 5, 5);
  const Video base = network_forward(arch, p.weights, in);
  for (const char* name : {"attn.wq", "attn.wk", "attn.wv", "attn.rel_bias"}) {
    const auto& blk = p.layout.find(name);
    for (std::size_t i = 0; i < blk.size; ++i) p.weights[blk.offset + i] += rng.normal();
  }
  EXPECT_EQ(network_forward(arch, p.weights, in), base);
  // The projection itself still receives gradient.
  std::vector<double> grad(p.weights.size());
  network_masked_loss(arch, p.weights, in, test::random_video(rng, 4, 1, 5, 5), grad);
  const auto& wo = p.layout.find("attn.wo");
  double norm = 0.0;
  for (std::size_t i = 0; i < wo.size; ++i) norm += std::abs(grad[wo.offset + i]);
  EXPECT_GT(norm, 0.0);
}

TEST(Network, TranslationInFrameIndexIsExact) {
  const ArchConfig arch = small_arch();
  const auto w = live_weights(arch, 12);
  Rng rng(3);
  DenoiserInput in = random_input(rng, 5, 1, 4, 4);
  const Video a = network_forward(arch, w, in);
  for (int& p : in.positions) p += 17;
  EXPECT_EQ(network_forward(arch, w, in), a);
}

TEST(Network, FramePermutationPermutesOutput) {
  const ArchConfig arch = small_arch();
  const auto w = live_weights(arch, 13);
  Rng rng(4);
  const DenoiserInput in = random_input(rng, 5, 1, 4, 4);
  const Video a = network_forward(arch, w, in);
  const std::vector<int> perm{3, 0, 4, 2, 1};
  DenoiserInput q;
  q.frames = in.frames.select(perm);
  q.mask = in.mask.select(perm);
  for (int i : perm) q.positions.push_back(in.positions[static_cast<std::size_t>(i)]);
  q.sigma = in.sigma;
  const Video b = network_forward(arch, w, q);
  const Video a_perm = a.select(perm);
  for (std::size_t i = 0; i < b.size(); ++i) EXPECT_NEAR(b.values()[i], a_perm.values()[i], 1e-12);
}

TEST(Network, OutputShapeAndBudget) {
  const ArchConfig arch = small_arch();
  const auto p = init_params(arch, 0);
  NetworkDenoiser net(arch, p.weights);
  Rng rng(5);
  const DenoiserInput in = random_input(rng, 6, 1, 4, 3);
  const Video out = net.predict_eps(in);
  EXPECT_TRUE(out.same_shape(in.frames));
  EXPECT_TRUE(out.all_finite());
  const DenoiserInput big = random_input(rng, 7, 1, 4, 3);
  EXPECT_THROW(net.predict_eps(big), CapacityError);
  EXPECT_THROW(NetworkDenoiser(arch, std::vector<double>(3)), ParameterError);
}

TEST(Network, MultiChannel) {
  ArchConfig arch = small_arch();
  arch.channels = 3;
  const auto w = live_weights(arch, 2);
  Rng rng(6);
  const DenoiserInput in = random_input(rng, 3, 3, 4, 4);
  const Video out = network_forward(arch, w, in);
  EXPECT_EQ(out.channels(), 3u);
  std::vector<double> grad(w.size());
  EXPECT_GT(network_masked_loss(arch, w, in, test::random_video(rng, 3, 3, 4, 4), grad), 0.0);
}

TEST(Network, LossIsZeroWithoutMissingPixels) {
  const ArchConfig arch = small_arch();
  const auto w = live_weights(arch, 2);
  Rng rng(7);
  DenoiserInput in = random_input(rng, 3, 1, 4, 4);
  in.mask = PixelMask(3, 4, 4, 1);
  std::vector<double> grad(w.size(), 1.0);
  EXPECT_EQ(network_masked_loss(arch, w, in, test::random_video(rng, 3, 1, 4, 4), grad), 0.0);
  EXPECT_TRUE(std::all_of(grad.begin(), grad.end(), [](double g) { return g == 0.0; }));
}

TEST(Network, NoiseEmbedding) {
  const auto e = noise_embedding(1.0, 4);
  ASSERT_EQ(e.size(), 9u);
  EXPECT_EQ(e[0], 0.0);
  EXPECT_EQ(noise_embedding(0.0, 2), noise_embedding(1e-4, 2));
  const auto f = noise_embedding(std::exp(2.0), 2);
  EXPECT_DOUBLE_EQ(f[0], 0.5);
  EXPECT_DOUBLE_EQ(f[1], std::sin(0.25 * 2.0));
}

TEST(Ema, ClosedForms) {
  DenoiserParams p = init_params(small_arch(), 0);
  std::fill(p.weights.begin(), p.weights.end(), 1.0);
  std::fill(p.ema.begin(), p.ema.end(), 0.0);
  for (int i = 0; i < 1000; ++i) ema_update(p, 0.999);
  EXPECT_NEAR(p.ema.front(), 1.0 - std::pow(0.999, 1000), 1e-9);

  std::fill(p.ema.begin(), p.ema.end(), 0.25);
  ema_update(p, 0.0);
  EXPECT_EQ(p.ema, p.weights);

  std::fill(p.ema.begin(), p.ema.end(), 3.0);
  ema_update(p, 0.5);
  EXPECT_EQ(p.ema.back(), 2.0);

  EXPECT_THROW(ema_update(p, 1.0), ParameterError);
  EXPECT_THROW(ema_update(p, -0.1), ParameterError);
}

TEST(Network, JsonRoundTrip) {
  const ArchConfig arch = small_arch();
  const nlohmann::json ja = arch;
  EXPECT_EQ(arch_from_json(nlohmann::json::parse(ja.dump())), arch);
  const auto layout = make_layout(arch);
  const nlohmann::json jl = layout;
  EXPECT_EQ(layout_from_json(nlohmann::json::parse(jl.dump())), layout);
}
