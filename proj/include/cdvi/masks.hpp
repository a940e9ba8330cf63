#pragma once

#include <cstdint>
#include <optional>
#include <string_view>
#include <variant>

#include <nlohmann/json_fwd.hpp>

#include "cdvi/rng.hpp"
#include "cdvi/video.hpp"

namespace cdvi {

enum class MaskFamily { grid, lines, box, blob };
enum class MaskMotion { stationary, moving };
enum class LineOrientation { horizontal, vertical };

std::string_view to_string(MaskFamily family) noexcept;
std::string_view to_string(MaskMotion motion) noexcept;
MaskFamily mask_family_from_string(std::string_view name);
MaskMotion mask_motion_from_string(std::string_view name);

/// Lattice of square missing cells. A pixel is missing when both
/// (x - ox) mod pitch < cell and (y - oy) mod pitch < cell.
struct GridParams {
  int cell = 3;
  int pitch = 8;
  int offset_x = 0;
  int offset_y = 0;
  int vx = 0;
  int vy = 0;
};

/// Equally spaced missing stripes of `thickness` pixels every `pitch`.
struct LineParams {
  LineOrientation orientation = LineOrientation::horizontal;
  int thickness = 2;
  int pitch = 6;
  int offset = 0;
  int velocity = 0;
};

/// One missing axis-aligned rectangle with top-left corner (x, y).
struct BoxParams {
  int x = 0;
  int y = 0;
  int width = 4;
  int height = 4;
  int vx = 0;
  int vy = 0;
};

/// Union of discs along a random walk. Centers and radii are drawn from the
/// spec seed; radii are fractions of min(H, W).
struct BlobParams {
  int count = 6;
  double radius_min = 0.05;
  double radius_max = 0.2;
  double step = 0.15;   // random-walk step, fraction of min(H, W)
  double jitter = 0.3;  // per-frame Gaussian perturbation of centers, pixels
  double vx = 0.0;
  double vy = 0.0;
};

using MaskParams = std::variant<GridParams, LineParams, BoxParams, BlobParams>;

struct MaskSpec {
  MaskFamily family = MaskFamily::box;
  MaskMotion motion = MaskMotion::stationary;
  MaskParams params = BoxParams{};
  std::uint64_t seed = 0;
  double min_frac = 0.05;
  double max_frac = 0.6;
};

/// Rasterizes a spec. Moving masks translate by their velocity every frame
/// and reflect at the borders; stationary masks ignore velocities.
/// Deterministic in the spec. Throws ParameterError when any frame's
/// missing fraction leaves [min_frac, max_frac] or the parameters are
/// malformed.
PixelMask generate_mask(const MaskSpec& spec, int n_frames, int height, int width);

/// Draws a spec with random parameters whose masks satisfy the fraction
/// constraint. Family and motion are uniform unless fixed by the caller.
MaskSpec sample_mask_spec(Rng& rng, int n_frames, int height, int width,
                          std::optional<MaskFamily> family = std::nullopt,
                          std::optional<MaskMotion> motion = std::nullopt, double min_frac = 0.05,
                          double max_frac = 0.6);

/// M[X] followed by all-ones frames for Y. Throws IndexError when X and Y
/// overlap or reference frames outside the mask.
PixelMask collate_mask(const PixelMask& mask, const FrameIndexSet& latents,
                       const FrameIndexSet& observed);

/// Copy of `mask` with the listed frames set to all-ones.
PixelMask mark_inpainted(const PixelMask& mask, const FrameIndexSet& frames);

/// Triangle-wave reflection of p into [lo, hi].
int reflect_into(int p, int lo, int hi) noexcept;
double reflect_into(double p, double lo, double hi) noexcept;

void to_json(nlohmann::json& j, const MaskSpec& spec);
MaskSpec mask_spec_from_json(const nlohmann::json& j);

}  // namespace cdvi
