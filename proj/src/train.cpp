#include "cdvi/train.hpp"

#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>

#include <fmt/format.h>

#include "cdvi/error.hpp"
#include "cdvi/masks.hpp"

namespace cdvi {

namespace {

constexpr char kCheckpointMagic[4] = {'C', 'D', 'V', 'K'};

void put_u32(std::string& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out += static_cast<char>((v >> (8 * i)) & 0xff);
}

std::uint32_t get_u32(const std::string& in, std::size_t at) {
  std::uint32_t v = 0;
  for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(static_cast<unsigned char>(in[at + i])) << (8 * i);
  return v;
}

void put_blob(std::string& out, const std::vector<double>& values) {
  for (double d : values) put_u32(out, std::bit_cast<std::uint32_t>(static_cast<float>(d)));
}

double squared_norm(const std::vector<double>& g) {
  double s = 0.0;
  for (double v : g) s += v * v;
  return s;
}

}  // namespace

void check_train_config(const TrainConfig& cfg) {
  if (cfg.steps < 0) throw ParameterError("train", "steps must be non-negative");
  if (!(cfg.learning_rate > 0.0)) throw ParameterError("train", "learning rate must be positive");
  if (cfg.weight_decay < 0.0) throw ParameterError("train", "weight decay must be non-negative");
  if (!(cfg.ema_rate >= 0.0 && cfg.ema_rate < 1.0)) throw ParameterError("train", "EMA rate must lie in [0, 1)");
  if (cfg.tasks.budget < 2) throw ParameterError("train", "budget K must be >= 2");
  if (cfg.diffusion_steps < 2) throw ParameterError("train", "T must be >= 2");
  if (cfg.accumulate < 1) throw ParameterError("train", "accumulate must be >= 1");
  if (!(cfg.tasks.consecutive_prob >= 0.0 && cfg.tasks.consecutive_prob <= 1.0))
    throw ParameterError("train", "consecutive probability must lie in [0, 1]");
}

TrainState fresh_state(DenoiserParams params) {
  TrainState s;
  s.adam_m.assign(params.weights.size(), 0.0);
  s.adam_v.assign(params.weights.size(), 0.0);
  s.params = std::move(params);
  return s;
}

TrainingExample make_example(const Video& video, const PixelMask& mask, const FrameIndexSet& latents,
                             const FrameIndexSet& observed, int t, const NoiseSchedule& schedule,
                             const Video& eps_draw, int budget) {
  if (!mask.matches(video)) throw ParameterError("train", "mask shape does not match the video");
  if (static_cast<int>(latents.size() + observed.size()) > budget)
    throw CapacityError("train", fmt::format("{} frames exceed the budget of {}", latents.size() + observed.size(),
                                             budget));
  TrainingExample ex;
  ex.t = t;
  ex.latents = latents;
  ex.observed = observed;
  ex.input.mask = collate_mask(mask, latents, observed);
  ex.input.positions = concat(latents, observed);
  ex.input.frames = video.select(ex.input.positions);
  if (!eps_draw.same_shape(ex.input.frames)) throw ParameterError("train", "noise draw has the wrong shape");
  ex.eps = eps_draw;
  const double ab = schedule.alpha_bar(t);
  const double a = std::sqrt(ab), b = std::sqrt(1.0 - ab);
  ex.input.sigma = alpha_bar_to_sigma(ab);
  Video& fr = ex.input.frames;
  for (std::size_t f = 0; f < fr.frames(); ++f)
    for (std::size_t c = 0; c < fr.channels(); ++c)
      for (std::size_t y = 0; y < fr.height(); ++y)
        for (std::size_t x = 0; x < fr.width(); ++x)
          if (!ex.input.mask(f, y, x)) fr(f, c, y, x) = a * fr(f, c, y, x) + b * eps_draw(f, c, y, x);
  return ex;
}

double masked_loss(const Denoiser& denoiser, const Video& video, const PixelMask& mask, const FrameIndexSet& latents,
                   const FrameIndexSet& observed, int t, const NoiseSchedule& schedule, const Video& eps_draw) {
  const TrainingExample ex =
      make_example(video, mask, latents, observed, t, schedule, eps_draw, denoiser.frame_budget());
  const std::size_t missing = ex.input.mask.missing_count();
  if (missing == 0) return 0.0;
  const Video pred = denoiser.predict_eps(ex.input);
  double sum = 0.0;
  const Video& fr = ex.input.frames;
  for (std::size_t f = 0; f < fr.frames(); ++f)
    for (std::size_t c = 0; c < fr.channels(); ++c)
      for (std::size_t y = 0; y < fr.height(); ++y)
        for (std::size_t x = 0; x < fr.width(); ++x)
          if (!ex.input.mask(f, y, x)) {
            const double r = pred(f, c, y, x) - ex.eps(f, c, y, x);
            sum += r * r;
          }
  return sum / static_cast<double>(missing * fr.channels());
}

std::vector<TrainingExample> draw_examples(const TrainConfig& cfg, const TrainingData& data,
                                           const NoiseSchedule& schedule, long step) {
  if (data.videos.empty()) throw ParameterError("train", "training data is empty");
  Rng rng = Rng(cfg.seed).split(static_cast<std::uint64_t>(step));
  std::vector<TrainingExample> out;
  for (int k = 0; k < cfg.accumulate; ++k) {
    const Video& v = data.videos[rng.below(data.videos.size())];
    const int n = static_cast<int>(v.frames());
    PixelMask mask;
    if (!data.masks.empty()) {
      mask = data.masks[rng.below(data.masks.size())];
    } else {
      const MaskSpec spec = sample_mask_spec(rng, n, static_cast<int>(v.height()), static_cast<int>(v.width()),
                                             std::nullopt, std::nullopt, cfg.mask_min_frac, cfg.mask_max_frac);
      mask = generate_mask(spec, n, static_cast<int>(v.height()), static_cast<int>(v.width()));
    }
    if (!mask.matches(v)) throw ParameterError("train", "mask pool does not match the video shape");
    const TrainingTask task = sample_training_task(cfg.tasks, n, rng);
    const int t = static_cast<int>(rng.range(1, schedule.steps()));
    Video eps(task.latents.size() + task.observed.size(), v.channels(), v.height(), v.width());
    for (double& e : eps.values()) e = rng.normal();
    out.push_back(make_example(v, mask, task.latents, task.observed, t, schedule, eps, cfg.tasks.budget));
  }
  return out;
}

TrainResult train_loop(const TrainConfig& cfg, const TrainingData& data, TrainState state,
                       const StepCallback& on_step) {
  check_train_config(cfg);
  if (data.videos.empty() && cfg.steps > 0) throw ParameterError("train", "training data is empty");
  DenoiserParams& p = state.params;
  if (p.arch.max_frames < cfg.tasks.budget)
    throw CapacityError("train", fmt::format("network budget {} is below the training budget {}", p.arch.max_frames,
                                             cfg.tasks.budget));
  const std::size_t n = p.weights.size();
  if (state.adam_m.size() != n) state.adam_m.assign(n, 0.0);
  if (state.adam_v.size() != n) state.adam_v.assign(n, 0.0);
  const NoiseSchedule schedule = NoiseSchedule::build(cfg.schedule, cfg.diffusion_steps);

  TrainResult result;
  std::vector<double> grad(n), part(n);
  const long end = state.step + cfg.steps;
  for (; state.step < end; ++state.step) {
    const long step = state.step;
    const auto examples = draw_examples(cfg, data, schedule, step);
    std::fill(grad.begin(), grad.end(), 0.0);
    double loss = 0.0;
    for (const auto& ex : examples) {
      loss += network_masked_loss(p.arch, p.weights, ex.input, ex.eps, part);
      for (std::size_t i = 0; i < n; ++i) grad[i] += part[i];
    }
    const double scale = 1.0 / static_cast<double>(examples.size());
    loss *= scale;
    double norm2 = squared_norm(grad) * scale * scale;
    if (!std::isfinite(loss) || !std::isfinite(norm2)) {
      if (!cfg.checkpoint_dir.empty()) {
        std::filesystem::create_directories(cfg.checkpoint_dir);
        save_checkpoint(cfg.checkpoint_dir / fmt::format("diagnostic_step{}.ckpt", step), state,
                        {{"reason", "non-finite loss"}, {"loss", std::isfinite(loss) ? loss : -1.0}});
      }
      throw NumericError("train", fmt::format("non-finite loss or gradient at step {}", step));
    }
    const double norm = std::sqrt(norm2);
    const double clip = (cfg.clip_norm > 0.0 && norm > cfg.clip_norm) ? cfg.clip_norm / norm : 1.0;
    const double t = static_cast<double>(step + 1);
    const double bc1 = 1.0 - std::pow(cfg.beta1, t), bc2 = 1.0 - std::pow(cfg.beta2, t);
    for (std::size_t i = 0; i < n; ++i) {
      const double g = grad[i] * scale * clip;
      state.adam_m[i] = cfg.beta1 * state.adam_m[i] + (1.0 - cfg.beta1) * g;
      state.adam_v[i] = cfg.beta2 * state.adam_v[i] + (1.0 - cfg.beta2) * g * g;
      const double update = (state.adam_m[i] / bc1) / (std::sqrt(state.adam_v[i] / bc2) + cfg.adam_eps);
      p.weights[i] -= cfg.learning_rate * (update + cfg.weight_decay * p.weights[i]);
    }
    ema_update(p, cfg.ema_rate);
    result.losses.push_back(loss);
    if (on_step) on_step(step, loss);
    if (cfg.checkpoint_every > 0 && !cfg.checkpoint_dir.empty() && (step + 1) % cfg.checkpoint_every == 0) {
      TrainState snapshot = state;
      snapshot.step = step + 1;
      std::filesystem::create_directories(cfg.checkpoint_dir);
      save_checkpoint(cfg.checkpoint_dir / fmt::format("step_{}.ckpt", step + 1), snapshot);
    }
  }
  result.state = std::move(state);
  return result;
}

void save_checkpoint(const std::filesystem::path& path, const TrainState& state, const nlohmann::json& meta) {
  const DenoiserParams& p = state.params;
  const bool has_adam = state.adam_m.size() == p.weights.size() && state.adam_v.size() == p.weights.size();
  nlohmann::json blobs = {"weights", "ema"};
  if (has_adam) {
    blobs.push_back("adam_m");
    blobs.push_back("adam_v");
  }
  const nlohmann::json header = {
      {"arch", p.arch}, {"layout", p.layout}, {"step", state.step}, {"blobs", blobs}, {"meta", meta}};
  const std::string text = header.dump();
  std::string out(kCheckpointMagic, 4);
  put_u32(out, kCheckpointVersion);
  put_u32(out, static_cast<std::uint32_t>(text.size()));
  out += text;
  put_blob(out, p.weights);
  put_blob(out, p.ema.size() == p.weights.size() ? p.ema : p.weights);
  if (has_adam) {
    put_blob(out, state.adam_m);
    put_blob(out, state.adam_v);
  }
  std::ofstream f(path, std::ios::binary);
  if (!f) throw FormatError("train", fmt::format("cannot write {}", path.string()));
  f.write(out.data(), static_cast<std::streamsize>(out.size()));
}

TrainState load_checkpoint(const std::filesystem::path& path, nlohmann::json* meta) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw FormatError("train", fmt::format("cannot open {}", path.string()));
  const std::string in((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());
  if (in.size() < 12) throw FormatError("train", fmt::format("checkpoint truncated at byte {}", in.size()));
  if (std::memcmp(in.data(), kCheckpointMagic, 4) != 0) throw FormatError("train", "bad checkpoint magic at byte 0");
  if (get_u32(in, 4) != kCheckpointVersion)
    throw FormatError("train", fmt::format("unsupported checkpoint version {} at byte 4", get_u32(in, 4)));
  const std::size_t header_len = get_u32(in, 8);
  if (in.size() < 12 + header_len) throw FormatError("train", "checkpoint header truncated at byte 12");
  nlohmann::json header;
  try {
    header = nlohmann::json::parse(in.substr(12, header_len));
  } catch (const nlohmann::json::exception& e) {
    throw FormatError("train", fmt::format("checkpoint header is not JSON: {}", e.what()));
  }
  TrainState state;
  DenoiserParams& p = state.params;
  try {
    p.arch = arch_from_json(header.at("arch"));
    p.layout = layout_from_json(header.at("layout"));
    state.step = header.value("step", 0L);
  } catch (const nlohmann::json::exception& e) {
    throw FormatError("train", fmt::format("checkpoint header incomplete: {}", e.what()));
  }
  if (!(p.layout == make_layout(p.arch))) throw FormatError("train", "checkpoint layout does not match its arch");
  const std::size_t total = p.layout.total;
  std::size_t at = 12 + header_len;
  auto read_blob = [&](std::vector<double>& dst) {
    if (in.size() < at + 4 * total)
      throw FormatError("train", fmt::format("checkpoint payload truncated at byte {}", in.size()));
    dst.resize(total);
    for (std::size_t i = 0; i < total; ++i, at += 4) dst[i] = std::bit_cast<float>(get_u32(in, at));
  };
  for (const auto& name : header.at("blobs")) {
    const std::string s = name.get<std::string>();
    if (s == "weights") read_blob(p.weights);
    else if (s == "ema") read_blob(p.ema);
    else if (s == "adam_m") read_blob(state.adam_m);
    else if (s == "adam_v") read_blob(state.adam_v);
    else throw FormatError("train", fmt::format("unknown checkpoint blob '{}'", s));
  }
  if (at != in.size()) throw FormatError("train", fmt::format("trailing bytes after offset {}", at));
  if (p.weights.size() != total) throw FormatError("train", "checkpoint has no weights");
  if (p.ema.size() != total) p.ema = p.weights;
  if (meta) *meta = header.value("meta", nlohmann::json::object());
  return state;
}

void to_json(nlohmann::json& j, const TrainConfig& c) {
  j = nlohmann::json{{"steps", c.steps},
                     {"learning_rate", c.learning_rate},
                     {"weight_decay", c.weight_decay},
                     {"beta1", c.beta1},
                     {"beta2", c.beta2},
                     {"adam_eps", c.adam_eps},
                     {"clip_norm", c.clip_norm},
                     {"ema_rate", c.ema_rate},
                     {"schedule", std::string(to_string(c.schedule))},
                     {"T", c.diffusion_steps},
                     {"budget", c.tasks.budget},
                     {"consecutive_prob", c.tasks.consecutive_prob},
                     {"mean_gap", c.tasks.mean_gap},
                     {"mask_min_frac", c.mask_min_frac},
                     {"mask_max_frac", c.mask_max_frac},
                     {"accumulate", c.accumulate},
                     {"seed", c.seed},
                     {"checkpoint_every", c.checkpoint_every}};
}

TrainConfig train_config_from_json(const nlohmann::json& j) {
  TrainConfig c;
  c.steps = j.value("steps", c.steps);
  c.learning_rate = j.value("learning_rate", c.learning_rate);
  c.weight_decay = j.value("weight_decay", c.weight_decay);
  c.beta1 = j.value("beta1", c.beta1);
  c.beta2 = j.value("beta2", c.beta2);
  c.adam_eps = j.value("adam_eps", c.adam_eps);
  c.clip_norm = j.value("clip_norm", c.clip_norm);
  c.ema_rate = j.value("ema_rate", c.ema_rate);
  if (j.contains("schedule")) c.schedule = schedule_kind_from_string(j.at("schedule").get<std::string>());
  c.diffusion_steps = j.value("T", c.diffusion_steps);
  c.tasks.budget = j.value("budget", c.tasks.budget);
  c.tasks.consecutive_prob = j.value("consecutive_prob", c.tasks.consecutive_prob);
  c.tasks.mean_gap = j.value("mean_gap", c.tasks.mean_gap);
  c.mask_min_frac = j.value("mask_min_frac", c.mask_min_frac);
  c.mask_max_frac = j.value("mask_max_frac", c.mask_max_frac);
  c.accumulate = j.value("accumulate", c.accumulate);
  c.seed = j.value("seed", c.seed);
  c.checkpoint_every = j.value("checkpoint_every", c.checkpoint_every);
  check_train_config(c);
  return c;
}

}  // namespace cdvi
