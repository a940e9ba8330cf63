#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <vector>

#include <nlohmann/json.hpp>

#include "cdvi/denoiser.hpp"
#include "cdvi/network.hpp"
#include "cdvi/schedule.hpp"
#include "cdvi/schemes.hpp"

namespace cdvi {

struct TrainConfig {
  long steps = 5000;
  double learning_rate = 3e-4;
  double weight_decay = 0.01;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double adam_eps = 1e-8;
  double clip_norm = 1.0;  // <= 0 disables clipping
  double ema_rate = 0.999;
  ScheduleKind schedule = ScheduleKind::cosine;
  int diffusion_steps = 1000;
  FrameIndexDistribution tasks{8, 0.5, 4.0};
  double mask_min_frac = 0.05;
  double mask_max_frac = 0.6;
  int accumulate = 1;
  std::uint64_t seed = 0;
  long checkpoint_every = 0;  // 0 disables periodic checkpoints
  std::filesystem::path checkpoint_dir;
};

/// Throws ParameterError for non-positive learning rate, negative steps,
/// budget < 2, or an EMA rate outside [0, 1).
void check_train_config(const TrainConfig& cfg);

/// Training videos, and optionally a fixed mask pool. Without masks every
/// step draws a fresh procedural mask.
struct TrainingData {
  std::vector<Video> videos;
  std::vector<PixelMask> masks;
};

struct TrainState {
  DenoiserParams params;
  std::vector<double> adam_m;
  std::vector<double> adam_v;
  long step = 0;
};

TrainState fresh_state(DenoiserParams params);

/// One (video, mask, X, Y, t, eps) draw turned into a denoiser call.
struct TrainingExample {
  DenoiserInput input;
  Video eps;  // target, shaped like input.frames
  int t = 0;
  FrameIndexSet latents;
  FrameIndexSet observed;
};

/// Collates M_{X,Y} = M[X] + 1[Y] and builds the call: known pixels clean,
/// missing pixels sqrt(ab_t) v + sqrt(1 - ab_t) eps. `eps_draw` has shape
/// (|X| + |Y|, C, H, W); only its entries at missing pixels are used.
/// Throws CapacityError when |X| + |Y| exceeds `budget`.
TrainingExample make_example(const Video& video, const PixelMask& mask, const FrameIndexSet& latents,
                             const FrameIndexSet& observed, int t, const NoiseSchedule& schedule,
                             const Video& eps_draw, int budget);

/// Mean squared epsilon error over the missing pixels of M_{X,Y}; 0 when no
/// pixel is missing.
double masked_loss(const Denoiser& denoiser, const Video& video, const PixelMask& mask, const FrameIndexSet& latents,
                   const FrameIndexSet& observed, int t, const NoiseSchedule& schedule, const Video& eps_draw);

/// The example used at `step` (sub-draw `k` of the accumulation group).
/// Draws come from Rng(cfg.seed).split(step).
std::vector<TrainingExample> draw_examples(const TrainConfig& cfg, const TrainingData& data,
                                           const NoiseSchedule& schedule, long step);

struct TrainResult {
  TrainState state;
  std::vector<double> losses;  // one entry per step taken
};

using StepCallback = std::function<void(long step, double loss)>;

/// Runs cfg.steps AdamW steps starting at state.step, updating the EMA after
/// every step. Throws NumericError (after writing a diagnostic checkpoint
/// when checkpoint_dir is set) on a non-finite loss or gradient.
TrainResult train_loop(const TrainConfig& cfg, const TrainingData& data, TrainState state,
                       const StepCallback& on_step = {});

// Checkpoint layout, little-endian:
//   "CDVK", u32 version, u32 header bytes, JSON header,
//   then one f32 blob of layout.total values per entry of header["blobs"].
inline constexpr std::uint32_t kCheckpointVersion = 1;

void save_checkpoint(const std::filesystem::path& path, const TrainState& state,
                     const nlohmann::json& meta = nlohmann::json::object());
/// Throws FormatError on malformed files.
TrainState load_checkpoint(const std::filesystem::path& path, nlohmann::json* meta = nullptr);

void to_json(nlohmann::json& j, const TrainConfig& cfg);
TrainConfig train_config_from_json(const nlohmann::json& j);

}  // namespace cdvi
