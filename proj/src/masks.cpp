#include "cdvi/masks.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <string>
#include <vector>

#include <fmt/format.h>
#include <nlohmann/json.hpp>

#include "cdvi/error.hpp"

namespace cdvi {

namespace {

struct Disc {
  double cx;
  double cy;
  double r;
};

int positive_mod(int a, int m) { return ((a % m) + m) % m; }

void raster_grid(const GridParams& p, bool moving, int k, int h, int w, std::span<std::uint8_t> out) {
  if (p.pitch < 2 || p.cell < 1 || p.cell >= p.pitch)
    throw ParameterError("masks", fmt::format("grid needs 1 <= cell < pitch, got cell={} pitch={}",
                                              p.cell, p.pitch));
  const int ox = moving ? reflect_into(p.offset_x + p.vx * k, 0, p.pitch - 1) : p.offset_x;
  const int oy = moving ? reflect_into(p.offset_y + p.vy * k, 0, p.pitch - 1) : p.offset_y;
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      const bool hole = positive_mod(x - ox, p.pitch) < p.cell && positive_mod(y - oy, p.pitch) < p.cell;
      out[static_cast<std::size_t>(y * w + x)] = hole ? 0 : 1;
    }
  }
}

void raster_lines(const LineParams& p, bool moving, int k, int h, int w, std::span<std::uint8_t> out) {
  if (p.pitch < 2 || p.thickness < 1 || p.thickness >= p.pitch)
    throw ParameterError("masks", fmt::format("lines need 1 <= thickness < pitch, got thickness={} pitch={}",
                                              p.thickness, p.pitch));
  const int off = moving ? reflect_into(p.offset + p.velocity * k, 0, p.pitch - 1) : p.offset;
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      const int coord = p.orientation == LineOrientation::horizontal ? y : x;
      out[static_cast<std::size_t>(y * w + x)] = positive_mod(coord - off, p.pitch) < p.thickness ? 0 : 1;
    }
  }
}

void raster_box(const BoxParams& p, bool moving, int k, int h, int w, std::span<std::uint8_t> out) {
  if (p.width < 1 || p.height < 1 || p.width > w || p.height > h)
    throw ParameterError("masks", fmt::format("box {}x{} does not fit a {}x{} frame", p.width, p.height, w, h));
  if (p.x < 0 || p.y < 0 || p.x + p.width > w || p.y + p.height > h)
    throw ParameterError("masks", "box origin places the box outside the frame");
  const int bx = moving ? reflect_into(p.x + p.vx * k, 0, w - p.width) : p.x;
  const int by = moving ? reflect_into(p.y + p.vy * k, 0, h - p.height) : p.y;
  std::fill(out.begin(), out.end(), std::uint8_t{1});
  for (int y = by; y < by + p.height; ++y)
    for (int x = bx; x < bx + p.width; ++x) out[static_cast<std::size_t>(y * w + x)] = 0;
}

std::vector<Disc> blob_path(const BlobParams& p, std::uint64_t seed, int h, int w) {
  if (p.count < 1 || !(p.radius_min > 0.0) || p.radius_max < p.radius_min)
    throw ParameterError("masks", "blob needs count >= 1 and 0 < radius_min <= radius_max");
  Rng rng = Rng(seed).split(0);
  const double m = std::min(h, w);
  std::vector<Disc> discs;
  double cx = rng.uniform(0.0, w);
  double cy = rng.uniform(0.0, h);
  for (int j = 0; j < p.count; ++j) {
    if (j > 0) {
      const double angle = rng.uniform(0.0, 2.0 * std::numbers::pi);
      cx = std::clamp(cx + p.step * m * std::cos(angle), 0.0, static_cast<double>(w));
      cy = std::clamp(cy + p.step * m * std::sin(angle), 0.0, static_cast<double>(h));
    }
    discs.push_back({cx, cy, rng.uniform(p.radius_min, p.radius_max) * m});
  }
  return discs;
}

void raster_blob(const BlobParams& p, const std::vector<Disc>& path, std::uint64_t seed, bool moving,
                 int k, int h, int w, std::span<std::uint8_t> out) {
  double tx = 0.0;
  double ty = 0.0;
  if (moving) {
    double min_x = w, max_x = 0.0, min_y = h, max_y = 0.0;
    for (const auto& d : path) {
      min_x = std::min(min_x, d.cx - d.r);
      max_x = std::max(max_x, d.cx + d.r);
      min_y = std::min(min_y, d.cy - d.r);
      max_y = std::max(max_y, d.cy + d.r);
    }
    const double lo_x = std::min(-min_x, 0.0), hi_x = std::max(w - max_x, 0.0);
    const double lo_y = std::min(-min_y, 0.0), hi_y = std::max(h - max_y, 0.0);
    tx = reflect_into(p.vx * k, lo_x, hi_x);
    ty = reflect_into(p.vy * k, lo_y, hi_y);
  }
  Rng frame_rng = Rng(seed).split(1 + static_cast<std::uint64_t>(k));
  std::vector<Disc> discs = path;
  for (auto& d : discs) {
    d.cx += tx + p.jitter * frame_rng.normal();
    d.cy += ty + p.jitter * frame_rng.normal();
  }
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      const double px = x + 0.5, py = y + 0.5;
      bool hole = false;
      for (const auto& d : discs) {
        const double dx = px - d.cx, dy = py - d.cy;
        if (dx * dx + dy * dy <= d.r * d.r) {
          hole = true;
          break;
        }
      }
      out[static_cast<std::size_t>(y * w + x)] = hole ? 0 : 1;
    }
  }
}

bool family_matches(MaskFamily family, const MaskParams& params) {
  switch (family) {
    case MaskFamily::grid: return std::holds_alternative<GridParams>(params);
    case MaskFamily::lines: return std::holds_alternative<LineParams>(params);
    case MaskFamily::box: return std::holds_alternative<BoxParams>(params);
    case MaskFamily::blob: return std::holds_alternative<BlobParams>(params);
  }
  return false;
}

int nonzero_step(Rng& rng, int max_speed) {
  int v = 0;
  while (v == 0) v = static_cast<int>(rng.range(-max_speed, max_speed));
  return v;
}

}  // namespace

std::string_view to_string(MaskFamily family) noexcept {
  switch (family) {
    case MaskFamily::grid: return "grid";
    case MaskFamily::lines: return "lines";
    case MaskFamily::box: return "box";
    case MaskFamily::blob: return "blob";
  }
  return "box";
}

std::string_view to_string(MaskMotion motion) noexcept {
  return motion == MaskMotion::moving ? "moving" : "stationary";
}

MaskFamily mask_family_from_string(std::string_view name) {
  if (name == "grid") return MaskFamily::grid;
  if (name == "lines") return MaskFamily::lines;
  if (name == "box") return MaskFamily::box;
  if (name == "blob") return MaskFamily::blob;
  throw ParameterError("masks", fmt::format("unknown mask family '{}'", name));
}

MaskMotion mask_motion_from_string(std::string_view name) {
  if (name == "stationary") return MaskMotion::stationary;
  if (name == "moving") return MaskMotion::moving;
  throw ParameterError("masks", fmt::format("unknown mask motion '{}'", name));
}

int reflect_into(int p, int lo, int hi) noexcept {
  const int span = hi - lo;
  if (span <= 0) return lo;
  const int period = 2 * span;
  const int q = positive_mod(p - lo, period);
  return lo + (q <= span ? q : period - q);
}

double reflect_into(double p, double lo, double hi) noexcept {
  const double span = hi - lo;
  if (!(span > 0.0)) return lo;
  const double period = 2.0 * span;
  double q = std::fmod(p - lo, period);
  if (q < 0.0) q += period;
  return lo + (q <= span ? q : period - q);
}

PixelMask generate_mask(const MaskSpec& spec, int n_frames, int height, int width) {
  if (n_frames < 1) throw ParameterError("masks", "n_frames must be >= 1");
  if (height < 8 || width < 8)
    throw ParameterError("masks", fmt::format("frames must be at least 8x8, got {}x{}", width, height));
  if (!family_matches(spec.family, spec.params))
    throw ParameterError("masks", "mask parameters do not match the mask family");
  if (!(spec.min_frac >= 0.0 && spec.min_frac <= spec.max_frac && spec.max_frac <= 1.0))
    throw ParameterError("masks", "need 0 <= min_frac <= max_frac <= 1");

  const bool moving = spec.motion == MaskMotion::moving;
  PixelMask mask(static_cast<std::size_t>(n_frames), static_cast<std::size_t>(height),
                 static_cast<std::size_t>(width));
  std::vector<Disc> path;
  if (const auto* blob = std::get_if<BlobParams>(&spec.params)) path = blob_path(*blob, spec.seed, height, width);

  for (int k = 0; k < n_frames; ++k) {
    auto out = mask.frame(static_cast<std::size_t>(k));
    std::visit(
        [&](const auto& p) {
          using P = std::decay_t<decltype(p)>;
          if constexpr (std::is_same_v<P, GridParams>) raster_grid(p, moving, k, height, width, out);
          if constexpr (std::is_same_v<P, LineParams>) raster_lines(p, moving, k, height, width, out);
          if constexpr (std::is_same_v<P, BoxParams>) raster_box(p, moving, k, height, width, out);
          if constexpr (std::is_same_v<P, BlobParams>)
            raster_blob(p, path, spec.seed, moving, k, height, width, out);
        },
        spec.params);
    const double frac = mask.missing_fraction(static_cast<std::size_t>(k));
    if (frac < spec.min_frac || frac > spec.max_frac)
      throw ParameterError("masks", fmt::format("missing fraction {:.4f} at frame {} outside [{}, {}]", frac, k,
                                                spec.min_frac, spec.max_frac));
  }
  return mask;
}

MaskSpec sample_mask_spec(Rng& rng, int n_frames, int height, int width, std::optional<MaskFamily> family,
                          std::optional<MaskMotion> motion, double min_frac, double max_frac) {
  const int m = std::min(height, width);
  constexpr int kMaxAttempts = 1000;
  for (int attempt = 0; attempt < kMaxAttempts; ++attempt) {
    MaskSpec spec;
    spec.family = family ? *family : static_cast<MaskFamily>(rng.below(4));
    spec.motion = motion ? *motion : static_cast<MaskMotion>(rng.below(2));
    spec.min_frac = min_frac;
    spec.max_frac = max_frac;
    spec.seed = rng.next_u64();
    const bool moving = spec.motion == MaskMotion::moving;
    switch (spec.family) {
      case MaskFamily::grid: {
        GridParams p;
        p.pitch = static_cast<int>(rng.range(4, std::max(4, m / 2)));
        p.cell = static_cast<int>(rng.range(1, p.pitch - 1));
        p.offset_x = static_cast<int>(rng.range(0, p.pitch - 1));
        p.offset_y = static_cast<int>(rng.range(0, p.pitch - 1));
        if (moving) {
          p.vx = static_cast<int>(rng.range(-1, 1));
          p.vy = p.vx == 0 ? nonzero_step(rng, 1) : static_cast<int>(rng.range(-1, 1));
        }
        spec.params = p;
        break;
      }
      case MaskFamily::lines: {
        LineParams p;
        p.orientation = rng.bernoulli(0.5) ? LineOrientation::horizontal : LineOrientation::vertical;
        p.pitch = static_cast<int>(rng.range(3, std::max(3, m / 2)));
        p.thickness = static_cast<int>(rng.range(1, p.pitch - 1));
        p.offset = static_cast<int>(rng.range(0, p.pitch - 1));
        if (moving) p.velocity = nonzero_step(rng, 1);
        spec.params = p;
        break;
      }
      case MaskFamily::box: {
        BoxParams p;
        p.width = static_cast<int>(rng.range(std::max(1, width / 5), std::max(1, 4 * width / 5)));
        p.height = static_cast<int>(rng.range(std::max(1, height / 5), std::max(1, 4 * height / 5)));
        p.x = static_cast<int>(rng.range(0, width - p.width));
        p.y = static_cast<int>(rng.range(0, height - p.height));
        if (moving) {
          p.vx = static_cast<int>(rng.range(-2, 2));
          p.vy = p.vx == 0 ? nonzero_step(rng, 2) : static_cast<int>(rng.range(-2, 2));
        }
        spec.params = p;
        break;
      }
      case MaskFamily::blob: {
        BlobParams p;
        p.count = static_cast<int>(rng.range(3, 12));
        if (moving) {
          p.vx = rng.uniform(-1.5, 1.5);
          p.vy = rng.uniform(-1.5, 1.5);
        }
        spec.params = p;
        break;
      }
    }
    try {
      (void)generate_mask(spec, n_frames, height, width);
      return spec;
    } catch (const ParameterError&) {
      continue;
    }
  }
  throw ParameterError("masks", "could not draw a mask satisfying the missing-fraction constraint");
}

PixelMask collate_mask(const PixelMask& mask, const FrameIndexSet& latents, const FrameIndexSet& observed) {
  const int n = static_cast<int>(mask.frames());
  if (!latents.within(n) || !observed.within(n))
    throw IndexError("masks", fmt::format("frame index outside mask with {} frames", n));
  if (!latents.disjoint(observed)) throw IndexError("masks", "latent and observed frame sets overlap");
  PixelMask out(latents.size() + observed.size(), mask.height(), mask.width(), 1);
  for (std::size_t i = 0; i < latents.size(); ++i) {
    auto src = mask.frame(static_cast<std::size_t>(latents[i]));
    std::copy(src.begin(), src.end(), out.frame(i).begin());
  }
  return out;
}

PixelMask mark_inpainted(const PixelMask& mask, const FrameIndexSet& frames) {
  if (!frames.within(static_cast<int>(mask.frames())))
    throw IndexError("masks", "frame index outside mask");
  PixelMask out = mask;
  for (int f : frames) out.set_frame_known(static_cast<std::size_t>(f));
  return out;
}

void to_json(nlohmann::json& j, const MaskSpec& spec) {
  nlohmann::json params;
  std::visit(
      [&](const auto& p) {
        using P = std::decay_t<decltype(p)>;
        if constexpr (std::is_same_v<P, GridParams>)
          params = {{"cell", p.cell}, {"pitch", p.pitch}, {"offset_x", p.offset_x},
                    {"offset_y", p.offset_y}, {"vx", p.vx}, {"vy", p.vy}};
        if constexpr (std::is_same_v<P, LineParams>)
          params = {{"orientation", p.orientation == LineOrientation::horizontal ? "horizontal" : "vertical"},
                    {"thickness", p.thickness}, {"pitch", p.pitch}, {"offset", p.offset},
                    {"velocity", p.velocity}};
        if constexpr (std::is_same_v<P, BoxParams>)
          params = {{"x", p.x}, {"y", p.y}, {"width", p.width}, {"height", p.height}, {"vx", p.vx}, {"vy", p.vy}};
        if constexpr (std::is_same_v<P, BlobParams>)
          params = {{"count", p.count}, {"radius_min", p.radius_min}, {"radius_max", p.radius_max},
                    {"step", p.step}, {"jitter", p.jitter}, {"vx", p.vx}, {"vy", p.vy}};
      },
      spec.params);
  j = nlohmann::json{{"family", std::string(to_string(spec.family))},
                     {"motion", std::string(to_string(spec.motion))},
                     {"seed", spec.seed},
                     {"min_frac", spec.min_frac},
                     {"max_frac", spec.max_frac},
                     {"params", params}};
}

MaskSpec mask_spec_from_json(const nlohmann::json& j) {
  MaskSpec spec;
  spec.family = mask_family_from_string(j.at("family").get<std::string>());
  spec.motion = mask_motion_from_string(j.value("motion", std::string("stationary")));
  spec.seed = j.value("seed", std::uint64_t{0});
  spec.min_frac = j.value("min_frac", 0.05);
  spec.max_frac = j.value("max_frac", 0.6);
  const auto& p = j.at("params");
  switch (spec.family) {
    case MaskFamily::grid: {
      GridParams g;
      g.cell = p.value("cell", g.cell);
      g.pitch = p.value("pitch", g.pitch);
      g.offset_x = p.value("offset_x", 0);
      g.offset_y = p.value("offset_y", 0);
      g.vx = p.value("vx", 0);
      g.vy = p.value("vy", 0);
      spec.params = g;
      break;
    }
    case MaskFamily::lines: {
      LineParams l;
      l.orientation = p.value("orientation", std::string("horizontal")) == "vertical" ? LineOrientation::vertical
                                                                                      : LineOrientation::horizontal;
      l.thickness = p.value("thickness", l.thickness);
      l.pitch = p.value("pitch", l.pitch);
      l.offset = p.value("offset", 0);
      l.velocity = p.value("velocity", 0);
      spec.params = l;
      break;
    }
    case MaskFamily::box: {
      BoxParams b;
      b.x = p.value("x", 0);
      b.y = p.value("y", 0);
      b.width = p.value("width", b.width);
      b.height = p.value("height", b.height);
      b.vx = p.value("vx", 0);
      b.vy = p.value("vy", 0);
      spec.params = b;
      break;
    }
    case MaskFamily::blob: {
      BlobParams b;
      b.count = p.value("count", b.count);
      b.radius_min = p.value("radius_min", b.radius_min);
      b.radius_max = p.value("radius_max", b.radius_max);
      b.step = p.value("step", b.step);
      b.jitter = p.value("jitter", b.jitter);
      b.vx = p.value("vx", 0.0);
      b.vy = p.value("vy", 0.0);
      spec.params = b;
      break;
    }
  }
  return spec;
}

}  // namespace cdvi
