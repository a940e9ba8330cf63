#include "cdvi/orchestrator.hpp"

#include <fmt/format.h>

#include "cdvi/error.hpp"
#include "cdvi/masks.hpp"

namespace cdvi {

namespace {

void check_inputs(const Video& video, const PixelMask& mask) {
  if (!mask.matches(video)) throw ParameterError("orchestrator", "mask shape does not match the video");
}

StageRecord run_stage(int s, const FrameIndexSet& latents, const FrameIndexSet& observed, std::uint64_t seed,
                      Video& current, PixelMask& known, const Denoiser& denoiser, SamplerConfig cfg) {
  StageRecord rec;
  rec.stage = s;
  rec.latents = latents;
  rec.observed = observed;
  rec.seed = seed;
  const std::vector<int> order = concat(latents, observed);
  const PixelMask stage_mask = known.select(order);
  rec.sampled = !stage_mask.all_known();
  if (rec.sampled) {
    cfg.seed = seed;
    Video sampled;
    try {
      sampled = sample_stage(denoiser, current, known, latents, observed, cfg);
    } catch (const NumericError& e) {
      throw NumericError("orchestrator", fmt::format("stage {}: {}", s, e.what()));
    }
    for (std::size_t i = 0; i < latents.size(); ++i)
      current.set_frame(static_cast<std::size_t>(latents[i]), sampled.frame(i));
  }
  known = mark_inpainted(known, latents);
  rec.frames_written = current.select(latents.values());
  rec.mask_after = known;
  return rec;
}

}  // namespace

std::uint64_t stage_seed(const SamplerConfig& cfg, int stage) noexcept {
  return derive_seed(cfg.seed, static_cast<std::uint64_t>(stage));
}

StageTrace stage_trace(const Video& video, const PixelMask& mask, const SamplingScheme& scheme,
                       const Denoiser& denoiser, const SamplerConfig& cfg) {
  check_inputs(video, mask);
  const auto violations = validate(scheme);
  if (!violations.empty()) {
    const auto& v = violations.front();
    throw ValidationError("orchestrator", fmt::format("invalid scheme ({} violations), first: stage {} {}: {}",
                                                      violations.size(), v.stage, v.rule, v.detail));
  }
  if (scheme.n_frames != static_cast<int>(video.frames()))
    throw ValidationError("orchestrator", fmt::format("scheme covers {} frames but the video has {}",
                                                      scheme.n_frames, video.frames()));
  check_sampler_config(cfg);
  StageTrace trace;
  trace.output = video;
  PixelMask known = mask;
  for (std::size_t s = 0; s < scheme.stages.size(); ++s) {
    const Stage& st = scheme.stages[s];
    trace.records.push_back(run_stage(static_cast<int>(s), st.latents, st.observed,
                                      stage_seed(cfg, static_cast<int>(s)), trace.output, known, denoiser, cfg));
  }
  return trace;
}

Video inpaint(const Video& video, const PixelMask& mask, const SamplingScheme& scheme, const Denoiser& denoiser,
              const SamplerConfig& cfg) {
  return stage_trace(video, mask, scheme, denoiser, cfg).output;
}

Video replay(const Video& video, const PixelMask& mask, const StageTrace& trace, const Denoiser& denoiser,
             const SamplerConfig& cfg) {
  check_inputs(video, mask);
  Video current = video;
  PixelMask known = mask;
  for (const StageRecord& rec : trace.records)
    run_stage(rec.stage, rec.latents, rec.observed, rec.seed, current, known, denoiser, cfg);
  return current;
}

}  // namespace cdvi
