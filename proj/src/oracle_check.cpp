#include "cdvi/oracle_check.hpp"

#include <algorithm>
#include <cmath>
#include <memory>

#include <nlohmann/json.hpp>

#include "cdvi/denoiser.hpp"
#include "cdvi/error.hpp"

namespace cdvi {

namespace {

struct Moments {
  Eigen::VectorXd mean;
  Eigen::MatrixXd cov;
};

Moments moments(const Eigen::MatrixXd& draws) {
  Moments m;
  m.mean = draws.rowwise().mean();
  const Eigen::MatrixXd centered = draws.colwise() - m.mean;
  m.cov = centered * centered.transpose() / static_cast<double>(draws.cols() - 1);
  return m;
}

}  // namespace

OracleCheckReport run_oracle_check(const OracleCheckConfig& cfg) {
  if (cfg.gp.frames < 3) throw ParameterError("sampler", "oracle check needs at least 3 frames");
  if (cfg.samples < 2) throw ParameterError("sampler", "oracle check needs at least 2 samples");
  check_sampler_config(cfg.sampler);
  auto model = std::make_shared<GaussianVideoModel>(cfg.gp);
  const GaussianOracle oracle(model, cfg.gp.frames);
  const CountingDenoiser counter(oracle);

  const Rng root(cfg.seed);
  Rng truth_rng = root.split(0);
  const Video truth = model->sample(truth_rng);
  const std::size_t n = truth.frames(), h = truth.height(), w = truth.width(), fs = truth.frame_size();
  const std::size_t z_frame = n - 2;
  PixelMask mask(n, h, w, 1);
  Rng mask_rng = root.split(1);
  for (std::size_t f = 1; f + 1 < n; ++f)
    for (auto& b : mask.frame(f)) b = (f != z_frame && mask_rng.bernoulli(cfg.known_prob)) ? 1 : 0;

  std::vector<Eigen::Index> known, missing, x_pixels;
  Eigen::VectorXd known_values(static_cast<Eigen::Index>(truth.size()));
  Eigen::Index k = 0;
  for (std::size_t f = 0; f < n; ++f)
    for (std::size_t c = 0; c < truth.channels(); ++c)
      for (std::size_t y = 0; y < h; ++y)
        for (std::size_t x = 0; x < w; ++x) {
          const auto idx = model->index(static_cast<int>(f), static_cast<int>(c), static_cast<int>(y),
                                        static_cast<int>(x));
          if (mask(f, y, x)) {
            known.push_back(idx);
            known_values[k++] = truth.values()[static_cast<std::size_t>(idx)];
          } else {
            missing.push_back(idx);
            if (f != z_frame) x_pixels.push_back(idx);
          }
        }
  known_values.conservativeResize(k);
  const ConditionalGaussian exact = model->condition(known, known_values, missing);

  std::vector<int> all_frames(n);
  for (std::size_t f = 0; f < n; ++f) all_frames[f] = static_cast<int>(f);
  std::vector<int> direct_frames;
  for (int f : all_frames)
    if (f != static_cast<int>(z_frame)) direct_frames.push_back(f);
  const Video direct_video = truth.select(direct_frames);
  const PixelMask direct_mask = mask.select(direct_frames);

  const auto m = static_cast<Eigen::Index>(missing.size());
  const auto mx = static_cast<Eigen::Index>(x_pixels.size());
  Eigen::MatrixXd joint(m, cfg.samples), direct(mx, cfg.samples);
  SamplerConfig sc = cfg.sampler;
  for (int s = 0; s < cfg.samples; ++s) {
    sc.seed = derive_seed(cfg.seed, 2 + 2 * static_cast<std::uint64_t>(s));
    const Video a = sample_frames(counter, truth, mask, all_frames, sc);
    for (Eigen::Index i = 0; i < m; ++i) joint(i, s) = a.values()[static_cast<std::size_t>(missing[static_cast<std::size_t>(i)])];
    sc.seed = derive_seed(cfg.seed, 3 + 2 * static_cast<std::uint64_t>(s));
    const Video b = sample_frames(counter, direct_video, direct_mask, direct_frames, sc);
    for (Eigen::Index i = 0; i < mx; ++i) {
      // Frames after z shift down by one in the direct call.
      auto idx = static_cast<std::size_t>(x_pixels[static_cast<std::size_t>(i)]);
      if (idx / fs > z_frame) idx -= fs;
      direct(i, s) = b.values()[idx];
    }
  }

  OracleCheckReport r;
  r.samples = cfg.samples;
  r.missing_pixels = static_cast<int>(m);
  r.marginal_pixels = static_cast<int>(mx);
  r.network_calls = counter.calls();
  const Moments jm = moments(joint), dm = moments(direct);
  const double count = static_cast<double>(cfg.samples);
  for (Eigen::Index i = 0; i < m; ++i)
    r.max_mean_z = std::max(r.max_mean_z, std::abs(jm.mean[i] - exact.mean[i]) / std::sqrt(exact.cov(i, i) / count));
  r.cov_rel_error = (jm.cov - exact.cov).norm() / exact.cov.norm();
  // x_pixels is an ordered subsequence of `missing`.
  Eigen::Index xi = 0;
  for (Eigen::Index i = 0; i < m; ++i) {
    if (missing[static_cast<std::size_t>(i)] != x_pixels[static_cast<std::size_t>(xi)]) continue;
    const double var = exact.cov(i, i);
    r.max_marginal_z =
        std::max(r.max_marginal_z, std::abs(jm.mean[i] - dm.mean[xi]) / std::sqrt(2.0 * var / count));
    r.max_direct_mean_z = std::max(r.max_direct_mean_z, std::abs(dm.mean[xi] - exact.mean[i]) / std::sqrt(var / count));
    if (++xi == mx) break;
  }
  r.fidelity_pass = r.max_mean_z < cfg.mean_z_threshold && r.cov_rel_error < cfg.cov_threshold;
  r.marginal_pass = r.max_marginal_z < cfg.mean_z_threshold;
  return r;
}

void to_json(nlohmann::json& j, const OracleCheckReport& r) {
  j = nlohmann::json{{"samples", r.samples},
                     {"missing_pixels", r.missing_pixels},
                     {"marginal_pixels", r.marginal_pixels},
                     {"network_calls", r.network_calls},
                     {"max_mean_z", r.max_mean_z},
                     {"cov_rel_error", r.cov_rel_error},
                     {"max_marginal_z", r.max_marginal_z},
                     {"max_direct_mean_z", r.max_direct_mean_z},
                     {"fidelity_pass", r.fidelity_pass},
                     {"marginal_pass", r.marginal_pass}};
}

}  // namespace cdvi
