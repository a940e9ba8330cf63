#include "cdvi/sprites.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include <fmt/format.h>
#include <nlohmann/json.hpp>

#include "cdvi/error.hpp"
#include "cdvi/masks.hpp"

namespace cdvi {

namespace {

void check_world(const SpriteWorld& w) {
  if (w.frames < 1 || w.channels < 1 || w.height < 1 || w.width < 1)
    throw ParameterError("data", "sprite world shape must be positive");
  if (w.min_sprites < 0 || w.max_sprites < w.min_sprites)
    throw ParameterError("data", "need 0 <= min_sprites <= max_sprites");
  if (w.min_size < 2 || w.max_size < w.min_size) throw ParameterError("data", "need 2 <= min_size <= max_size");
  if (w.max_size > std::min(w.height, w.width))
    throw ParameterError("data", fmt::format("sprite size {} does not fit a {}x{} frame", w.max_size, w.width,
                                             w.height));
  if (w.max_speed < 0) throw ParameterError("data", "max_speed must be non-negative");
}

// Index of the topmost sprite covering (x, y) at `frame`, or -1.
int top_sprite(const SpriteWorld& world, const SpriteScene& scene, int frame, int x, int y) {
  for (int j = static_cast<int>(scene.sprites.size()) - 1; j >= 0; --j) {
    const Sprite& s = scene.sprites[static_cast<std::size_t>(j)];
    if (s.covers(x - s.x_at(frame, world.width), y - s.y_at(frame, world.height))) return j;
  }
  return -1;
}

}  // namespace

int Sprite::x_at(int frame, int width) const noexcept { return reflect_into(x0 + vx * frame, 0, width - size); }
int Sprite::y_at(int frame, int height) const noexcept { return reflect_into(y0 + vy * frame, 0, height - size); }

bool Sprite::covers(int u, int v) const noexcept {
  if (u < 0 || v < 0 || u >= size || v >= size) return false;
  if (shape == SpriteShape::square) return true;
  const double r = 0.5 * size;
  const double du = u + 0.5 - r, dv = v + 0.5 - r;
  return du * du + dv * dv <= r * r;
}

SpriteScene sample_scene(const SpriteWorld& world, Rng& rng) {
  check_world(world);
  SpriteScene scene;
  scene.background_offset = rng.uniform(-0.5, 0.5);
  scene.background_gx = rng.uniform(-0.5, 0.5);
  scene.background_gy = rng.uniform(-0.5, 0.5);
  const auto count = rng.range(world.min_sprites, world.max_sprites);
  for (std::int64_t i = 0; i < count; ++i) {
    Sprite s;
    s.shape = rng.bernoulli(0.5) ? SpriteShape::square : SpriteShape::disc;
    s.size = static_cast<int>(rng.range(world.min_size, world.max_size));
    s.x0 = static_cast<int>(rng.range(0, world.width - s.size));
    s.y0 = static_cast<int>(rng.range(0, world.height - s.size));
    s.vx = static_cast<int>(rng.range(-world.max_speed, world.max_speed));
    s.vy = static_cast<int>(rng.range(-world.max_speed, world.max_speed));
    s.intensity = (rng.bernoulli(0.5) ? 1.0 : -1.0) * rng.uniform(0.4, 0.8);
    s.texture = rng.uniform(-0.4, 0.4);
    scene.sprites.push_back(s);
  }
  return scene;
}

Video render_scene(const SpriteWorld& world, const SpriteScene& scene) {
  check_world(world);
  for (const Sprite& s : scene.sprites)
    if (s.size < 2 || s.size > std::min(world.height, world.width))
      throw ParameterError("data", fmt::format("sprite of size {} does not fit the frame", s.size));
  Video v(static_cast<std::size_t>(world.frames), static_cast<std::size_t>(world.channels),
          static_cast<std::size_t>(world.height), static_cast<std::size_t>(world.width));
  const double wx = std::max(1, world.width - 1), wy = std::max(1, world.height - 1);
  for (int f = 0; f < world.frames; ++f) {
    for (int y = 0; y < world.height; ++y) {
      for (int x = 0; x < world.width; ++x) {
        double value = scene.background_offset + scene.background_gx * (x / wx - 0.5) +
                       scene.background_gy * (y / wy - 0.5);
        const int j = top_sprite(world, scene, f, x, y);
        if (j >= 0) {
          const Sprite& s = scene.sprites[static_cast<std::size_t>(j)];
          const int u = x - s.x_at(f, world.width), w = y - s.y_at(f, world.height);
          value = s.intensity + s.texture * ((u + w) / (2.0 * (s.size - 1)) - 0.5);
        }
        value = std::clamp(value, -1.0, 1.0);
        for (int c = 0; c < world.channels; ++c)
          v(static_cast<std::size_t>(f), static_cast<std::size_t>(c), static_cast<std::size_t>(y),
            static_cast<std::size_t>(x)) = value;
      }
    }
  }
  return v;
}

FlowField scene_flow(const SpriteWorld& world, const SpriteScene& scene) {
  check_world(world);
  const double nan = std::numeric_limits<double>::quiet_NaN();
  FlowField flow(static_cast<std::size_t>(std::max(0, world.frames - 1)), 2, static_cast<std::size_t>(world.height),
                 static_cast<std::size_t>(world.width));
  for (int k = 0; k + 1 < world.frames; ++k) {
    for (int y = 0; y < world.height; ++y) {
      for (int x = 0; x < world.width; ++x) {
        const int j = top_sprite(world, scene, k + 1, x, y);
        int dx = 0, dy = 0;
        if (j >= 0) {
          const Sprite& s = scene.sprites[static_cast<std::size_t>(j)];
          dx = s.x_at(k + 1, world.width) - s.x_at(k, world.width);
          dy = s.y_at(k + 1, world.height) - s.y_at(k, world.height);
        }
        const bool visible = top_sprite(world, scene, k, x - dx, y - dy) == j;
        const auto f = static_cast<std::size_t>(k), yy = static_cast<std::size_t>(y), xx = static_cast<std::size_t>(x);
        flow(f, 0, yy, xx) = visible ? dx : nan;
        flow(f, 1, yy, xx) = visible ? dy : nan;
      }
    }
  }
  return flow;
}

SpriteDataset gen_sprites(const SpriteWorld& world, int n_videos) {
  check_world(world);
  SpriteDataset ds;
  const Rng root(world.seed);
  for (int i = 0; i < n_videos; ++i) {
    Rng rng = root.split(static_cast<std::uint64_t>(i));
    ds.scenes.push_back(sample_scene(world, rng));
    ds.videos.push_back(render_scene(world, ds.scenes.back()));
    ds.flows.push_back(scene_flow(world, ds.scenes.back()));
  }
  return ds;
}

void to_json(nlohmann::json& j, const SpriteWorld& w) {
  j = nlohmann::json{{"frames", w.frames},           {"channels", w.channels},   {"height", w.height},
                     {"width", w.width},             {"min_sprites", w.min_sprites}, {"max_sprites", w.max_sprites},
                     {"min_size", w.min_size},       {"max_size", w.max_size},   {"max_speed", w.max_speed},
                     {"seed", w.seed}};
}

SpriteWorld sprite_world_from_json(const nlohmann::json& j) {
  SpriteWorld w;
  w.frames = j.value("frames", w.frames);
  w.channels = j.value("channels", w.channels);
  w.height = j.value("height", w.height);
  w.width = j.value("width", w.width);
  w.min_sprites = j.value("min_sprites", w.min_sprites);
  w.max_sprites = j.value("max_sprites", w.max_sprites);
  w.min_size = j.value("min_size", w.min_size);
  w.max_size = j.value("max_size", w.max_size);
  w.max_speed = j.value("max_speed", w.max_speed);
  w.seed = j.value("seed", w.seed);
  return w;
}

}  // namespace cdvi
