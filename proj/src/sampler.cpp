#include "cdvi/sampler.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include <fmt/format.h>
#include <nlohmann/json.hpp>

#include "cdvi/error.hpp"
#include "cdvi/rng.hpp"

namespace cdvi {

namespace {

struct Problem {
  DenoiserInput input;
  std::vector<std::size_t> missing;  // flat indices into input.frames
};

Problem make_problem(const Denoiser& denoiser, const Video& frames, const PixelMask& mask,
                     const std::vector<int>& positions) {
  if (!mask.matches(frames)) throw ParameterError("sampler", "mask shape does not match frames");
  if (positions.size() != frames.frames()) throw ParameterError("sampler", "one position per frame is required");
  if (static_cast<int>(frames.frames()) > denoiser.frame_budget())
    throw CapacityError("sampler", fmt::format("{} frames exceed the denoiser budget of {}", frames.frames(),
                                               denoiser.frame_budget()));
  Problem p;
  p.input.frames = frames;
  p.input.mask = mask;
  p.input.positions = positions;
  for (std::size_t f = 0; f < frames.frames(); ++f)
    for (std::size_t c = 0; c < frames.channels(); ++c)
      for (std::size_t y = 0; y < frames.height(); ++y)
        for (std::size_t x = 0; x < frames.width(); ++x)
          if (!mask(f, y, x)) p.missing.push_back(((f * frames.channels() + c) * frames.height() + y) * frames.width() + x);
  return p;
}

// Network call with the missing pixels set to `scale * iterate`.
std::vector<double> eps_at(const Denoiser& denoiser, Problem& p, const std::vector<double>& iterate, double scale,
                           double sigma) {
  auto dst = p.input.frames.values();
  for (std::size_t i = 0; i < p.missing.size(); ++i) dst[p.missing[i]] = scale * iterate[i];
  p.input.sigma = sigma;
  const Video eps = denoiser.predict_eps(p.input);
  if (!eps.same_shape(p.input.frames)) throw ParameterError("sampler", "denoiser output shape mismatch");
  std::vector<double> out(p.missing.size());
  for (std::size_t i = 0; i < p.missing.size(); ++i) out[i] = eps.values()[p.missing[i]];
  return out;
}

void check_finite(const std::vector<double>& x, int step) {
  for (double v : x)
    if (!std::isfinite(v)) throw NumericError("sampler", fmt::format("non-finite iterate at step {}", step));
}

Video finish(const Video& frames, const Problem& p, const std::vector<double>& x) {
  Video out = frames;
  auto dst = out.values();
  for (std::size_t i = 0; i < p.missing.size(); ++i) dst[p.missing[i]] = x[i];
  return out;
}

}  // namespace

std::string_view to_string(SamplerKind kind) noexcept { return kind == SamplerKind::ddpm ? "ddpm" : "heun"; }

SamplerKind sampler_kind_from_string(std::string_view name) {
  if (name == "heun") return SamplerKind::heun;
  if (name == "ddpm") return SamplerKind::ddpm;
  throw ParameterError("sampler", fmt::format("unknown sampler '{}'", name));
}

void check_sampler_config(const SamplerConfig& cfg) {
  if (cfg.n_steps < 1) throw ParameterError("sampler", fmt::format("n_steps must be >= 1, got {}", cfg.n_steps));
  if (cfg.s_churn < 0.0 || cfg.s_min < 0.0 || cfg.s_noise < 0.0 || cfg.s_max < cfg.s_min)
    throw ParameterError("sampler", "churn parameters must be non-negative with s_min <= s_max");
  if (!(cfg.sigma_min > 0.0) || !(cfg.sigma_max > cfg.sigma_min))
    throw ParameterError("sampler", "need sigma_max > sigma_min > 0");
  if (!(cfg.rho > 0.0)) throw ParameterError("sampler", "rho must be positive");
}

std::vector<double> heun_sigmas(const SamplerConfig& cfg) {
  check_sampler_config(cfg);
  if (cfg.n_steps == 1) return {cfg.sigma_max, 0.0};
  const SigmaGrid grid = build_sigma_grid({cfg.sigma_min, cfg.sigma_max, cfg.rho, cfg.n_steps});
  return {grid.sigmas().begin(), grid.sigmas().end()};
}

Video sample_frames(const Denoiser& denoiser, const Video& frames, const PixelMask& mask,
                    const std::vector<int>& positions, const SamplerConfig& cfg) {
  check_sampler_config(cfg);
  Problem p = make_problem(denoiser, frames, mask, positions);
  if (p.missing.empty()) return frames;
  if (cfg.kind == SamplerKind::ddpm)
    return sample_frames_ddpm(denoiser, frames, mask, positions, NoiseSchedule::build(cfg.schedule, cfg.n_steps),
                              cfg.seed);

  const std::vector<double> sigmas = heun_sigmas(cfg);
  const int n = cfg.n_steps;
  Rng rng(cfg.seed);
  const std::size_t m = p.missing.size();
  std::vector<double> x(m), x_next(m);
  for (double& v : x) v = sigmas.front() * rng.normal();
  const double gamma_cap = std::min(cfg.s_churn / n, std::sqrt(2.0) - 1.0);
  for (int i = 0; i < n; ++i) {
    const double s = sigmas[static_cast<std::size_t>(i)];
    const double s_next = sigmas[static_cast<std::size_t>(i) + 1];
    const double gamma = (s >= cfg.s_min && s <= cfg.s_max) ? gamma_cap : 0.0;
    const double s_hat = s * (1.0 + gamma);
    if (s_hat > s) {
      const double extra = std::sqrt(s_hat * s_hat - s * s) * cfg.s_noise;
      for (double& v : x) v += extra * rng.normal();
    }
    const std::vector<double> d = eps_at(denoiser, p, x, 1.0 / std::sqrt(1.0 + s_hat * s_hat), s_hat);
    const double h = s_next - s_hat;
    for (std::size_t k = 0; k < m; ++k) x_next[k] = x[k] + h * d[k];
    if (s_next != 0.0) {
      const std::vector<double> d2 = eps_at(denoiser, p, x_next, 1.0 / std::sqrt(1.0 + s_next * s_next), s_next);
      for (std::size_t k = 0; k < m; ++k) x_next[k] = x[k] + 0.5 * h * (d[k] + d2[k]);
    }
    x.swap(x_next);
    check_finite(x, i);
  }
  return finish(frames, p, x);
}

Video sample_frames_ddpm(const Denoiser& denoiser, const Video& frames, const PixelMask& mask,
                         const std::vector<int>& positions, const NoiseSchedule& schedule, std::uint64_t seed) {
  Problem p = make_problem(denoiser, frames, mask, positions);
  if (p.missing.empty()) return frames;
  Rng rng(seed);
  const std::size_t m = p.missing.size();
  std::vector<double> x(m);
  for (double& v : x) v = rng.normal();
  for (int t = schedule.steps(); t >= 1; --t) {
    const double ab = schedule.alpha_bar(t);
    const double ab_prev = schedule.alpha_bar(t - 1);
    const double beta = 1.0 - ab / ab_prev;
    const std::vector<double> eps = eps_at(denoiser, p, x, 1.0, alpha_bar_to_sigma(ab));
    const double c0 = std::sqrt(ab_prev) * beta / (1.0 - ab);
    const double ct = std::sqrt(1.0 - beta) * (1.0 - ab_prev) / (1.0 - ab);
    const double sd = std::sqrt((1.0 - ab_prev) / (1.0 - ab) * beta);
    for (std::size_t k = 0; k < m; ++k) {
      const double x0 = (x[k] - std::sqrt(1.0 - ab) * eps[k]) / std::sqrt(ab);
      x[k] = c0 * x0 + ct * x[k];
      if (t > 1) x[k] += sd * rng.normal();
    }
    check_finite(x, schedule.steps() - t);
  }
  return finish(frames, p, x);
}

Video sample_stage(const Denoiser& denoiser, const Video& video, const PixelMask& mask, const FrameIndexSet& latents,
                   const FrameIndexSet& observed, const SamplerConfig& cfg) {
  const int n = static_cast<int>(video.frames());
  if (!mask.matches(video)) throw ParameterError("sampler", "mask shape does not match the video");
  if (!latents.within(n) || !observed.within(n)) throw IndexError("sampler", "stage frame index out of range");
  if (!latents.disjoint(observed)) throw IndexError("sampler", "latent and observed frames overlap");
  const std::vector<int> order = concat(latents, observed);
  if (static_cast<int>(order.size()) > denoiser.frame_budget())
    throw CapacityError("sampler", fmt::format("stage with {} frames exceeds the budget of {}", order.size(),
                                               denoiser.frame_budget()));
  return sample_frames(denoiser, video.select(order), mask.select(order), order, cfg);
}

Video ddpm_stage(const Denoiser& denoiser, const Video& video, const PixelMask& mask, const FrameIndexSet& latents,
                 const FrameIndexSet& observed, SamplerConfig cfg) {
  cfg.kind = SamplerKind::ddpm;
  return sample_stage(denoiser, video, mask, latents, observed, cfg);
}

void to_json(nlohmann::json& j, const SamplerConfig& c) {
  j = nlohmann::json{{"kind", std::string(to_string(c.kind))},
                     {"n_steps", c.n_steps},
                     {"sigma_min", c.sigma_min},
                     {"sigma_max", c.sigma_max},
                     {"rho", c.rho},
                     {"s_churn", c.s_churn},
                     {"s_min", c.s_min},
                     {"s_max", std::isinf(c.s_max) ? nlohmann::json("inf") : nlohmann::json(c.s_max)},
                     {"s_noise", c.s_noise},
                     {"schedule", std::string(to_string(c.schedule))},
                     {"seed", c.seed}};
}

SamplerConfig sampler_config_from_json(const nlohmann::json& j) {
  SamplerConfig c;
  if (j.contains("kind")) c.kind = sampler_kind_from_string(j.at("kind").get<std::string>());
  c.n_steps = j.value("n_steps", c.kind == SamplerKind::ddpm ? 1000 : c.n_steps);
  c.sigma_min = j.value("sigma_min", c.sigma_min);
  c.sigma_max = j.value("sigma_max", c.sigma_max);
  c.rho = j.value("rho", c.rho);
  c.s_churn = j.value("s_churn", c.s_churn);
  c.s_min = j.value("s_min", c.s_min);
  if (j.contains("s_max")) {
    const auto& v = j.at("s_max");
    c.s_max = v.is_string() ? std::numeric_limits<double>::infinity() : v.get<double>();
  }
  c.s_noise = j.value("s_noise", c.s_noise);
  if (j.contains("schedule")) c.schedule = schedule_kind_from_string(j.at("schedule").get<std::string>());
  c.seed = j.value("seed", c.seed);
  check_sampler_config(c);
  return c;
}

}  // namespace cdvi
