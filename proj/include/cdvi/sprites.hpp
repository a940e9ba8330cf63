#pragma once

#include <cstdint>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "cdvi/rng.hpp"
#include "cdvi/video.hpp"

namespace cdvi {

enum class SpriteShape { square, disc };

/// Moving-sprites world. Every video has a static smooth background and
/// `min_sprites..max_sprites` textured squares or discs moving with integer
/// velocities and bouncing off the borders.
struct SpriteWorld {
  int frames = 32;
  int channels = 1;
  int height = 16;
  int width = 16;
  int min_sprites = 1;
  int max_sprites = 3;
  int min_size = 3;
  int max_size = 6;
  int max_speed = 2;
  std::uint64_t seed = 0;
};

/// One sprite in closed form. Its top-left corner at frame k is
/// (reflect(x0 + vx k, 0, W - size), reflect(y0 + vy k, 0, H - size)).
struct Sprite {
  SpriteShape shape = SpriteShape::square;
  int size = 4;
  int x0 = 0;
  int y0 = 0;
  int vx = 0;
  int vy = 0;
  double intensity = 0.5;
  double texture = 0.0;  // shading ramp: + texture * ((u + v) / (2 (size - 1)) - 1/2)

  int x_at(int frame, int width) const noexcept;
  int y_at(int frame, int height) const noexcept;
  bool covers(int u, int v) const noexcept;  // (u, v) relative to the top-left corner
};

struct SpriteScene {
  double background_offset = 0.0;
  double background_gx = 0.0;
  double background_gy = 0.0;
  std::vector<Sprite> sprites;  // drawn in order, later sprites on top
};

struct SpriteDataset {
  std::vector<Video> videos;
  std::vector<FlowField> flows;
  std::vector<SpriteScene> scenes;
};

/// Scene i is drawn with Rng(world.seed).split(i).
SpriteScene sample_scene(const SpriteWorld& world, Rng& rng);

/// Renders a scene. Throws ParameterError when a sprite does not fit.
Video render_scene(const SpriteWorld& world, const SpriteScene& scene);

/// Exact backward flow: frame k+1 at p equals frame k at p - flow_k(p),
/// NaN where the source is hidden or uncovered.
FlowField scene_flow(const SpriteWorld& world, const SpriteScene& scene);

SpriteDataset gen_sprites(const SpriteWorld& world, int n_videos);

void to_json(nlohmann::json& j, const SpriteWorld& world);
SpriteWorld sprite_world_from_json(const nlohmann::json& j);

}  // namespace cdvi
