#pragma once

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "cdvi/rng.hpp"
#include "cdvi/video.hpp"

namespace cdvi {

enum class SchemeKind {
  ar,
  reverse_ar,
  hierarchy2,
  lookahead_ar,
  lookahead_ar_pp,
  multires_ar2,
  multires_ar3,
};

/// "ar", "reverse-ar", "hierarchy-2", "lookahead-ar", "lookahead-ar++",
/// "multires-ar-2", "multires-ar-3".
std::string_view to_string(SchemeKind kind) noexcept;
SchemeKind scheme_kind_from_string(std::string_view name);
const std::vector<SchemeKind>& all_scheme_kinds();
/// Smallest budget the planner accepts for `kind`.
int min_budget(SchemeKind kind) noexcept;

/// One denoiser call: sample the missing pixels of `latents` conditioned on
/// `observed`. `incomplete[i]` marks observed[i] as a frame that may still
/// contain missing pixels; those are sampled alongside and discarded.
struct Stage {
  FrameIndexSet latents;
  FrameIndexSet observed;
  std::vector<bool> incomplete;

  std::size_t frame_count() const noexcept { return latents.size() + observed.size(); }
  bool is_incomplete(int frame) const;
  friend bool operator==(const Stage&, const Stage&) = default;
};

struct SamplingScheme {
  std::string kind;
  int n_frames = 0;
  int budget = 0;
  std::vector<Stage> stages;

  friend bool operator==(const SamplingScheme&, const SamplingScheme&) = default;
};

/// Lookahead budget split. Negative values select the default K/4.
struct PlanOptions {
  int lookahead_past = -1;
  int lookahead_future = -1;
};

/// Builds a scheme of the given kind over N frames with at most K frames per
/// stage. Throws ParameterError when K is below min_budget(kind) or N < 1.
SamplingScheme plan(SchemeKind kind, int n_frames, int budget, const PlanOptions& options = {});

struct Violation {
  int stage;  // -1 for whole-scheme rules
  std::string rule;
  std::string detail;
};

/// Never throws. Rules: "shape", "empty-latents", "range", "overlap",
/// "budget", "flags", "duplicate-latent", "missing-frame", "causality".
std::vector<Violation> validate(const SamplingScheme& scheme);

void to_json(nlohmann::json& j, const SamplingScheme& scheme);
/// Structural parse only; call validate() for the invariants.
SamplingScheme scheme_from_json(const nlohmann::json& j);
/// FNV-1a of the canonical JSON serialization.
std::string scheme_hash(const SamplingScheme& scheme);

struct FrameIndexDistribution {
  int budget = 16;
  double consecutive_prob = 0.5;
  double mean_gap = 4.0;
};

struct TrainingTask {
  FrameIndexSet latents;
  FrameIndexSet observed;
  bool consecutive = false;
};

/// Draws (X, Y) with |X| + |Y| = min(K, N) and X nonempty.
///
/// Consecutive component: a run of min(K, N) frames at a uniform start; the
/// latent count is uniform on 1..run and the latents form a contiguous block
/// at a uniform offset inside the run, the rest of the run is observed.
/// Spread component: an anchor frame, then frames at geometric signed gaps
/// (mean `mean_gap`) from randomly chosen already-selected frames, clipped
/// to [0, N); the latents are a uniform random subset of uniform size.
TrainingTask sample_training_task(const FrameIndexDistribution& dist, int n_frames, Rng& rng);

enum class Cell : std::uint8_t { empty, latent, observed_complete, observed_incomplete, done };

struct StageGrid {
  int rows = 0;
  int cols = 0;
  std::vector<Cell> cells;

  Cell at(int row, int col) const { return cells[static_cast<std::size_t>(row * cols + col)]; }
};

/// One row per stage, one column per frame. Frames inpainted by earlier
/// stages and not used by the current one are `done`.
StageGrid render_plan(const SamplingScheme& scheme);
/// 'X' latent, 'o' complete observed, '*' incomplete observed, '=' done,
/// '.' untouched; one line per stage.
std::string render_text(const StageGrid& grid);
/// Binary PPM (P6) with `cell` x `cell` pixel blocks: latent cyan, complete
/// observed dark red, incomplete observed bright red, done gray, empty white.
std::string render_ppm(const StageGrid& grid, int cell = 8);

}  // namespace cdvi
