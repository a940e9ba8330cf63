#pragma once

#include <cstdint>
#include <vector>

#include "cdvi/denoiser.hpp"
#include "cdvi/sampler.hpp"
#include "cdvi/schemes.hpp"

namespace cdvi {

/// Audit record of one stage.
struct StageRecord {
  int stage = 0;
  FrameIndexSet latents;
  FrameIndexSet observed;
  std::uint64_t seed = 0;  // sampler seed used for the stage
  bool sampled = false;    // false when the stage had nothing to sample
  Video frames_written;    // the latent frames after the stage, in latent order
  PixelMask mask_after;    // full-video mask after the stage
};

struct StageTrace {
  std::vector<StageRecord> records;
  Video output;
};

/// Seed of stage s: derive_seed(cfg.seed, s).
std::uint64_t stage_seed(const SamplerConfig& cfg, int stage) noexcept;

/// Runs `scheme` over the whole video. The input is never modified; known
/// pixels are carried to the output unchanged. Throws ValidationError
/// before sampling when the scheme is invalid or sized for another video,
/// and NumericError prefixed with the stage index when a stage diverges.
Video inpaint(const Video& video, const PixelMask& mask, const SamplingScheme& scheme, const Denoiser& denoiser,
              const SamplerConfig& cfg);

/// inpaint with a record per stage.
StageTrace stage_trace(const Video& video, const PixelMask& mask, const SamplingScheme& scheme,
                       const Denoiser& denoiser, const SamplerConfig& cfg);

/// Re-executes the stages listed in `trace` (latents, observed, seed) from
/// the original inputs, without consulting the scheme.
Video replay(const Video& video, const PixelMask& mask, const StageTrace& trace, const Denoiser& denoiser,
             const SamplerConfig& cfg);

}  // namespace cdvi
