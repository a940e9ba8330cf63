#pragma once

#include <cstdint>
#include <limits>
#include <string_view>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "cdvi/denoiser.hpp"
#include "cdvi/schedule.hpp"
#include "cdvi/video.hpp"

namespace cdvi {

enum class SamplerKind { heun, ddpm };

std::string_view to_string(SamplerKind kind) noexcept;
SamplerKind sampler_kind_from_string(std::string_view name);

struct SamplerConfig {
  SamplerKind kind = SamplerKind::heun;
  int n_steps = 100;
  double sigma_min = 0.002;
  double sigma_max = 1000.0;
  double rho = 7.0;
  double s_churn = 80.0;
  double s_min = 0.0;
  double s_max = std::numeric_limits<double>::infinity();
  double s_noise = 1.0;
  ScheduleKind schedule = ScheduleKind::cosine;  // ddpm only; T = n_steps
  std::uint64_t seed = 0;
};

/// Throws ParameterError for n_steps < 1, negative churn parameters or
/// invalid sigma bounds.
void check_sampler_config(const SamplerConfig& cfg);

/// Noise levels of a Heun run: the Karras grid for n_steps >= 2 and
/// [sigma_max, 0] for a single step.
std::vector<double> heun_sigmas(const SamplerConfig& cfg);

/// Samples the missing pixels of `frames` given the known ones. Known
/// pixels are copied to the output unchanged and enter every network call
/// with their clean values; missing pixels start at sigma_max N(0, I) (heun)
/// or N(0, I) (ddpm). `positions` are the absolute frame indices passed to
/// the denoiser. Throws CapacityError when the call exceeds the denoiser's
/// budget and NumericError naming the step when the iterate turns
/// non-finite. Makes no network call when nothing is missing.
Video sample_frames(const Denoiser& denoiser, const Video& frames, const PixelMask& mask,
                    const std::vector<int>& positions, const SamplerConfig& cfg);

/// One stage: frames X followed by Y are taken from `video` and `mask`, and
/// the sampled X + Y frames are returned in that order. Missing pixels of Y
/// frames are sampled jointly and left for the caller to discard.
Video sample_stage(const Denoiser& denoiser, const Video& video, const PixelMask& mask, const FrameIndexSet& latents,
                   const FrameIndexSet& observed, const SamplerConfig& cfg);

/// sample_stage with the ancestral sampler over cfg.schedule with
/// T = cfg.n_steps (1000 reproduces the usual DDPM baseline), whatever
/// cfg.kind says.
Video ddpm_stage(const Denoiser& denoiser, const Video& video, const PixelMask& mask, const FrameIndexSet& latents,
                 const FrameIndexSet& observed, SamplerConfig cfg);

/// Ancestral sampler over an explicit schedule (allows T = 1).
Video sample_frames_ddpm(const Denoiser& denoiser, const Video& frames, const PixelMask& mask,
                         const std::vector<int>& positions, const NoiseSchedule& schedule, std::uint64_t seed);

void to_json(nlohmann::json& j, const SamplerConfig& cfg);
SamplerConfig sampler_config_from_json(const nlohmann::json& j);

}  // namespace cdvi
