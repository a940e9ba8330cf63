#include "cli/commands.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <exception>
#include <map>
#include <memory>
#include <sstream>
#include <thread>

#include <fmt/format.h>

#include "cdvi/denoiser.hpp"
#include "cdvi/error.hpp"
#include "cdvi/gp.hpp"
#include "cdvi/hash.hpp"
#include "cdvi/masks.hpp"
#include "cdvi/metrics.hpp"
#include "cdvi/network.hpp"
#include "cdvi/oracle_check.hpp"
#include "cdvi/orchestrator.hpp"
#include "cdvi/sampler.hpp"
#include "cdvi/schemes.hpp"
#include "cdvi/sprites.hpp"
#include "cdvi/tensor_io.hpp"
#include "cdvi/train.hpp"
#include "cli/schema.hpp"

namespace cdvi::cli {

using nlohmann::json;

namespace {

std::string numbered(const char* stem, std::size_t i) { return fmt::format("{}_{:04d}.fft", stem, i); }

std::string key_value_table(const std::vector<std::pair<std::string, std::string>>& rows) {
  std::size_t width = 0;
  for (const auto& [k, v] : rows) width = std::max(width, k.size());
  std::string out;
  for (const auto& [k, v] : rows) out += fmt::format("{:<{}}  {}\n", k, width, v);
  return out;
}

std::uint64_t seed_or(const Common& common, const json& cfg, std::uint64_t fallback = 0) {
  if (common.seed) return *common.seed;
  return cfg.value("seed", fallback);
}

struct MaskChoice {
  std::optional<MaskFamily> family;
  std::optional<MaskMotion> motion;
  double min_frac = 0.05;
  double max_frac = 0.6;
};

MaskChoice mask_choice(const json& j) {
  MaskChoice m;
  if (j.contains("family")) m.family = mask_family_from_string(j.at("family").get<std::string>());
  if (j.contains("motion")) m.motion = mask_motion_from_string(j.at("motion").get<std::string>());
  m.min_frac = j.value("min_frac", m.min_frac);
  m.max_frac = j.value("max_frac", m.max_frac);
  if (m.min_frac > m.max_frac) throw ParameterError("cli", "min_frac exceeds max_frac");
  return m;
}

MaskSpec draw_mask(const MaskChoice& m, Rng rng, const Video& like) {
  return sample_mask_spec(rng, static_cast<int>(like.frames()), static_cast<int>(like.height()),
                          static_cast<int>(like.width()), m.family, m.motion, m.min_frac, m.max_frac);
}

std::uint64_t video_hash(const Video& v) {
  const auto values = v.values();
  return fnv1a(std::as_bytes(values));
}

json stage_json(const StageRecord& r) {
  return {{"stage", r.stage},
          {"x", r.latents.values()},
          {"y", r.observed.values()},
          {"seed", r.seed},
          {"sampled", r.sampled},
          {"frames_fnv1a", hex64(video_hash(r.frames_written))}};
}

}  // namespace

Output gen_data(const Common& common, const GenDataOptions& options) {
  const json cfg = load_config(options.config, "gen-data.schema.json");
  const std::string source = options.config.string();
  const std::uint64_t seed = seed_or(common, cfg);
  const std::string dataset = cfg.at("dataset");
  const int n = cfg.at("n_videos");
  const json masks_cfg = cfg.value("masks", json::object());
  const bool with_masks = masks_cfg.value("enabled", true);
  const MaskChoice choice = mask_choice(masks_cfg);

  std::vector<Video> videos;
  std::vector<FlowField> flows;
  json spec;
  if (dataset == "sprites") {
    const json sj = cfg.value("sprites", json::object());
    validate(sj, "sprites.schema.json", source, "sprites");
    SpriteWorld world = sprite_world_from_json(sj);
    if (common.seed || !sj.contains("seed")) world.seed = seed;
    SpriteDataset ds = gen_sprites(world, n);
    videos = std::move(ds.videos);
    flows = std::move(ds.flows);
    spec = world;
  } else {
    const json gj = cfg.value("gp", json::object());
    validate(gj, "gp.schema.json", source, "gp");
    const GPVideoSpec gp = gp_spec_from_json(gj);
    videos = gen_gp_videos(gp, n, seed);
    spec = gp;
  }

  fs::create_directories(common.out_dir);
  json items = json::array();
  json files = json::array();
  const Rng mask_rng(derive_seed(seed, 1));
  for (std::size_t i = 0; i < videos.size(); ++i) {
    json item;
    const std::string vname = numbered("video", i);
    write_video(common.out_dir / vname, videos[i]);
    files.push_back(file_entry(common.out_dir, common.out_dir / vname));
    item["video"] = vname;
    item["flow"] = nullptr;
    item["mask"] = nullptr;
    if (!flows.empty()) {
      const std::string fname = numbered("flow", i);
      write_video(common.out_dir / fname, flows[i]);
      files.push_back(file_entry(common.out_dir, common.out_dir / fname));
      item["flow"] = fname;
    }
    if (with_masks) {
      const MaskSpec ms = draw_mask(choice, mask_rng.split(i), videos[i]);
      const PixelMask mask = generate_mask(ms, static_cast<int>(videos[i].frames()),
                                           static_cast<int>(videos[i].height()), static_cast<int>(videos[i].width()));
      const std::string mname = numbered("mask", i);
      write_mask(common.out_dir / mname, mask);
      files.push_back(file_entry(common.out_dir, common.out_dir / mname));
      item["mask"] = mname;
      item["spec"] = ms;
    }
    items.push_back(std::move(item));
  }
  const json manifest = {{"version", 1}, {"dataset", dataset}, {"seed", seed}, {"spec", spec}, {"items", items}};
  write_json(common.out_dir / "manifest.json", manifest);
  files.push_back(file_entry(common.out_dir, common.out_dir / "manifest.json"));

  Output out;
  out.json = {{"command", "gen-data"}, {"version", 1},           {"dataset", dataset}, {"n_videos", n},
              {"seed", seed},          {"manifest", "manifest.json"}, {"files", files}};
  out.text = key_value_table({{"dataset", dataset},
                              {"videos", std::to_string(n)},
                              {"masks", with_masks ? "yes" : "no"},
                              {"seed", std::to_string(seed)},
                              {"manifest", (common.out_dir / "manifest.json").string()}});
  return out;
}

Output gen_masks(const Common& common, const GenMasksOptions& options) {
  const json cfg = load_config(options.config, "gen-masks.schema.json");
  const std::uint64_t seed = seed_or(common, cfg);
  const int n = cfg.at("n_masks");
  const Video like(cfg.at("frames").get<std::size_t>(), 1, cfg.at("height").get<std::size_t>(),
                   cfg.at("width").get<std::size_t>());
  const MaskChoice choice = mask_choice(cfg);

  fs::create_directories(common.out_dir);
  const Rng rng(seed);
  json items = json::array();
  json files = json::array();
  double missing = 0.0;
  std::map<std::string, int> families;
  for (int i = 0; i < n; ++i) {
    const MaskSpec ms = draw_mask(choice, rng.split(static_cast<std::uint64_t>(i)), like);
    const PixelMask mask = generate_mask(ms, static_cast<int>(like.frames()), static_cast<int>(like.height()),
                                         static_cast<int>(like.width()));
    missing += static_cast<double>(mask.missing_count()) / static_cast<double>(mask.size());
    ++families[fmt::format("{} {}", to_string(ms.family), to_string(ms.motion))];
    const std::string name = numbered("mask", static_cast<std::size_t>(i));
    write_mask(common.out_dir / name, mask);
    files.push_back(file_entry(common.out_dir, common.out_dir / name));
    items.push_back({{"mask", name}, {"spec", ms}});
  }
  missing /= n;
  const json manifest = {{"version", 1}, {"dataset", "masks"}, {"seed", seed}, {"items", items}};
  write_json(common.out_dir / "masks.json", manifest);
  files.push_back(file_entry(common.out_dir, common.out_dir / "masks.json"));

  Output out;
  out.json = {{"command", "gen-masks"},      {"version", 1}, {"n_masks", n}, {"seed", seed},
              {"manifest", "masks.json"}, {"missing_fraction", missing}, {"files", files}};
  std::vector<std::pair<std::string, std::string>> rows = {{"masks", std::to_string(n)},
                                                           {"seed", std::to_string(seed)},
                                                           {"missing fraction", cell(missing, 4)}};
  for (const auto& [name, count] : families) rows.emplace_back(name, std::to_string(count));
  rows.emplace_back("manifest", (common.out_dir / "masks.json").string());
  out.text = key_value_table(rows);
  return out;
}

Output plan_command(const Common& common, const PlanCommandOptions& options) {
  const SchemeKind kind = scheme_kind_from_string(options.kind);
  PlanOptions po;
  po.lookahead_past = options.past;
  po.lookahead_future = options.future;
  const SamplingScheme scheme = plan(kind, options.frames, options.budget, po);
  const auto violations = validate(scheme);
  if (!violations.empty())
    throw ValidationError("schemes", fmt::format("planned scheme breaks rule '{}' at stage {}: {}",
                                                 violations.front().rule, violations.front().stage,
                                                 violations.front().detail));
  const std::string hash = scheme_hash(scheme);
  json scheme_json = scheme;
  json file_json = scheme_json;
  file_json["hash"] = hash;

  const StageGrid grid = render_plan(scheme);
  const std::string stem = fmt::format("plan_{}_n{}_k{}", to_string(kind), options.frames, options.budget);
  fs::create_directories(common.out_dir);
  write_json(common.out_dir / (stem + ".json"), file_json);
  write_text(common.out_dir / (stem + ".ppm"), render_ppm(grid, options.cell));

  Output out;
  out.json = {{"command", "plan"},
              {"version", 1},
              {"scheme", scheme_json},
              {"hash", hash},
              {"stages", scheme.stages.size()},
              {"violations", json::array()},
              {"files",
               {file_entry(common.out_dir, common.out_dir / (stem + ".json")),
                file_entry(common.out_dir, common.out_dir / (stem + ".ppm"))}}};
  out.text = fmt::format("{} N={} K={}: {} stages, hash {}\n", to_string(kind), options.frames, options.budget,
                         scheme.stages.size(), hash);
  out.text += render_text(grid);
  out.text += "X latent, o observed, * incomplete observed, = done\n";
  return out;
}

Output train_command(const Common& common, const TrainOptions& options) {
  const json cfg = load_config(options.config, "train.schema.json");
  const std::string source = options.config.string();
  const std::uint64_t seed = seed_or(common, cfg);
  TrainConfig tc = train_config_from_json(cfg.value("train", json::object()));
  tc.seed = seed;
  const ArchConfig arch = arch_from_json(cfg.value("arch", json::object()));
  const json data_cfg = cfg.at("data");

  TrainingData data;
  fs::path manifest_path = options.data;
  if (manifest_path.empty() && data_cfg.contains("manifest")) manifest_path = data_cfg.at("manifest").get<std::string>();
  if (!manifest_path.empty()) {
    const json manifest = load_config(manifest_path, "dataset-manifest.schema.json");
    const bool use_masks = data_cfg.value("use_masks", true);
    for (const auto& item : manifest.at("items")) {
      if (!item.contains("video") || item.at("video").is_null())
        throw FormatError("cli", fmt::format("{}: item without a video", manifest_path.string()));
      data.videos.push_back(read_video(resolve_near(manifest_path, item.at("video"))));
      if (use_masks && item.contains("mask") && !item.at("mask").is_null())
        data.masks.push_back(read_mask(resolve_near(manifest_path, item.at("mask"))));
    }
  } else {
    const json sj = data_cfg.value("sprites", json::object());
    validate(sj, "sprites.schema.json", source, "data.sprites");
    SpriteWorld world = sprite_world_from_json(sj);
    if (!sj.contains("seed")) world.seed = derive_seed(seed, 2);
    data.videos = gen_sprites(world, data_cfg.value("n_videos", 200)).videos;
  }

  TrainState state;
  if (!options.resume.empty()) {
    state = load_checkpoint(options.resume);
    if (cfg.contains("arch") && !(state.params.arch == arch))
      throw ParameterError("cli", "checkpoint architecture differs from the config's arch block");
  } else {
    state = fresh_state(init_params(arch, derive_seed(seed, 1)));
  }

  fs::create_directories(common.out_dir);
  if (tc.checkpoint_every > 0) tc.checkpoint_dir = common.out_dir / "checkpoints";
  const long first = state.step;
  TrainResult result = train_loop(tc, data, std::move(state));

  std::string csv = "step,loss\n";
  for (std::size_t i = 0; i < result.losses.size(); ++i)
    csv += fmt::format("{},{:.17g}\n", first + static_cast<long>(i) + 1, result.losses[i]);
  write_text(common.out_dir / "loss.csv", csv);
  const json meta = {{"seed", seed}, {"train", cfg.value("train", json::object())}};
  save_checkpoint(common.out_dir / "final.ckpt", result.state, meta);

  json files = json::array();
  files.push_back(file_entry(common.out_dir, common.out_dir / "loss.csv"));
  if (tc.checkpoint_every > 0 && fs::exists(tc.checkpoint_dir)) {
    std::vector<fs::path> ckpts;
    for (const auto& e : fs::directory_iterator(tc.checkpoint_dir)) ckpts.push_back(e.path());
    std::sort(ckpts.begin(), ckpts.end());
    for (const auto& p : ckpts) files.push_back(file_entry(common.out_dir, p));
  }
  files.push_back(file_entry(common.out_dir, common.out_dir / "final.ckpt"));

  const auto& losses = result.losses;
  const std::size_t window = std::min<std::size_t>(100, losses.size());
  double initial = std::nan(""), final = std::nan("");
  if (window > 0) {
    initial = final = 0.0;
    for (std::size_t i = 0; i < window; ++i) {
      initial += losses[i];
      final += losses[losses.size() - window + i];
    }
    initial /= static_cast<double>(window);
    final /= static_cast<double>(window);
  }

  Output out;
  out.json = {{"command", "train"},
              {"version", 1},
              {"steps", losses.size()},
              {"final_step", result.state.step},
              {"parameters", result.state.params.layout.total},
              {"initial_loss", number_or_null(initial)},
              {"final_loss", number_or_null(final)},
              {"checkpoint", "final.ckpt"},
              {"files", files}};
  out.text = key_value_table({{"steps", std::to_string(losses.size())},
                              {"final step", std::to_string(result.state.step)},
                              {"parameters", std::to_string(result.state.params.layout.total)},
                              {"videos", std::to_string(data.videos.size())},
                              {fmt::format("loss, first {}", window), cell(initial, 4)},
                              {fmt::format("loss, last {}", window), cell(final, 4)},
                              {"checkpoint", (common.out_dir / "final.ckpt").string()}});
  return out;
}

Output inpaint_command(const Common& common, const InpaintOptions& options) {
  const Video video = read_video(options.video);
  const PixelMask mask = read_mask(options.mask);
  if (!mask.matches(video)) throw ParameterError("cli", "mask shape does not match the video");

  SamplerConfig sc;
  if (!options.sampler_config.empty()) {
    const json sj = load_config(options.sampler_config, "sampler.schema.json");
    sc = sampler_config_from_json(sj);
  }
  if (common.seed) sc.seed = *common.seed;

  std::unique_ptr<Denoiser> denoiser;
  if (!options.checkpoint.empty() && !options.oracle.empty())
    throw ParameterError("cli", "--checkpoint and --oracle are exclusive");
  if (!options.checkpoint.empty()) {
    TrainState st = load_checkpoint(options.checkpoint);
    denoiser = std::make_unique<NetworkDenoiser>(st.params.arch,
                                                 options.no_ema ? st.params.weights : st.params.ema);
  } else if (!options.oracle.empty()) {
    GPVideoSpec gp = gp_spec_from_json(load_config(options.oracle, "gp.schema.json"));
    gp.frames = static_cast<int>(video.frames());
    gp.channels = static_cast<int>(video.channels());
    gp.height = static_cast<int>(video.height());
    gp.width = static_cast<int>(video.width());
    auto model = std::make_shared<const GaussianVideoModel>(gp);
    denoiser = std::make_unique<GaussianOracle>(std::move(model), options.budget > 0 ? options.budget : 8);
  } else {
    throw ParameterError("cli", "inpaint needs --checkpoint or --oracle");
  }
  const int budget = options.budget > 0 ? options.budget : denoiser->frame_budget();

  SamplingScheme scheme;
  const fs::path scheme_path(options.scheme);
  if (scheme_path.extension() == ".json" || fs::is_regular_file(scheme_path)) {
    const json sj = load_config(scheme_path, "scheme.schema.json");
    scheme = scheme_from_json(sj);
    const std::string actual = scheme_hash(scheme);
    if (sj.contains("hash") && sj.at("hash").get<std::string>() != actual)
      throw ValidationError("cli", fmt::format("{}: recorded hash {} but the stages hash to {}", scheme_path.string(),
                                               sj.at("hash").get<std::string>(), actual));
  } else {
    scheme = plan(scheme_kind_from_string(options.scheme), static_cast<int>(video.frames()), budget);
  }
  const std::string hash = scheme_hash(scheme);

  CountingDenoiser counting(*denoiser);
  const StageTrace trace = stage_trace(video, mask, scheme, counting, sc);

  const fs::path out_path = options.out.empty() ? common.out_dir / "inpainted.fft" : options.out;
  if (out_path.has_parent_path()) fs::create_directories(out_path.parent_path());
  write_video(out_path, trace.output);
  json files = json::array({file_entry(common.out_dir, out_path)});

  int sampled = 0;
  json stages = json::array();
  for (const auto& r : trace.records) {
    sampled += r.sampled ? 1 : 0;
    stages.push_back(stage_json(r));
  }
  if (!options.trace_out.empty()) {
    write_json(options.trace_out, {{"version", 1},
                                   {"scheme_hash", hash},
                                   {"sampler", sc},
                                   {"output_fnv1a", hex64(video_hash(trace.output))},
                                   {"stages", stages}});
    files.push_back(file_entry(common.out_dir, options.trace_out));
  }

  Output out;
  out.json = {{"command", "inpaint"},
              {"version", 1},
              {"scheme", scheme.kind},
              {"scheme_hash", hash},
              {"stages", scheme.stages.size()},
              {"sampled_stages", sampled},
              {"network_calls", counting.calls()},
              {"missing_pixels", mask.missing_count()},
              {"output", files[0]["path"]},
              {"files", files}};
  out.text = key_value_table({{"scheme", fmt::format("{} (hash {})", scheme.kind, hash)},
                              {"stages", fmt::format("{} ({} sampled)", scheme.stages.size(), sampled)},
                              {"network calls", std::to_string(counting.calls())},
                              {"missing pixels", std::to_string(mask.missing_count())},
                              {"output", out_path.string()}});
  return out;
}

namespace {

struct EvalRow {
  std::string method;
  std::string name;
  double psnr = 0.0;
  double psnr_missing = 0.0;
  double ssim = 0.0;
  double warp = 0.0;
};

EvalRow score(std::string method, std::string name, const Video& truth, const Video& candidate,
              const PixelMask& mask, const std::optional<FlowField>& flow) {
  EvalRow r{std::move(method), std::move(name), 0, 0, 0, 0};
  r.psnr = psnr(candidate, truth);
  r.psnr_missing = psnr(candidate, truth, mask);
  const bool big = candidate.height() >= kSsimWindow && candidate.width() >= kSsimWindow;
  r.ssim = big ? ssim(candidate, truth) : std::nan("");
  r.warp = flow ? warp_error(candidate, *flow) : std::nan("");
  return r;
}

json row_json(const EvalRow& r, std::optional<int> count = std::nullopt) {
  json j = {{"method", r.method},
            {"psnr", number_or_null(r.psnr)},
            {"psnr_missing", number_or_null(r.psnr_missing)},
            {"ssim", number_or_null(r.ssim)},
            {"warp_error", number_or_null(r.warp)}};
  if (!r.name.empty()) j["name"] = r.name;
  if (count) j["count"] = *count;
  return j;
}

std::string csv_number(double v) { return std::isfinite(v) ? fmt::format("{:.17g}", v) : ""; }

}  // namespace

Output eval_command(const Common& common, const EvalOptions& options) {
  const json manifest = load_config(options.manifest, "eval-manifest.schema.json");
  const json& items = manifest.at("items");
  const std::size_t n = items.size();
  std::vector<std::vector<EvalRow>> results(n);
  std::vector<std::exception_ptr> errors(n);

  auto work = [&](std::size_t i) {
    try {
      const json& item = items[i];
      const fs::path truth_path = resolve_near(options.manifest, item.at("ground_truth"));
      const Video truth = read_video(truth_path);
      const Video candidate = read_video(resolve_near(options.manifest, item.at("inpainted")));
      const PixelMask mask = read_mask(resolve_near(options.manifest, item.at("mask")));
      if (!candidate.same_shape(truth) || !mask.matches(truth))
        throw ParameterError("metrics", fmt::format("item {}: shapes of video, inpainting and mask differ", i));
      std::optional<FlowField> flow;
      if (item.contains("flow") && !item.at("flow").is_null())
        flow = read_video(resolve_near(options.manifest, item.at("flow")));
      const std::string name = item.value("name", truth_path.stem().string());
      results[i].push_back(score(item.value("method", "model"), name, truth, candidate, mask, flow));
      if (options.baseline)
        results[i].push_back(score("copy-nearest", name, truth, copy_nearest_known(truth, mask), mask, flow));
    } catch (...) {
      errors[i] = std::current_exception();
    }
  };

  const std::size_t workers = std::clamp<std::size_t>(static_cast<std::size_t>(std::max(options.workers, 1)), 1, n);
  if (workers == 1) {
    for (std::size_t i = 0; i < n; ++i) work(i);
  } else {
    std::atomic<std::size_t> next{0};
    std::vector<std::thread> pool;
    for (std::size_t w = 0; w < workers; ++w)
      pool.emplace_back([&] {
        for (std::size_t i = next++; i < n; i = next++) work(i);
      });
    for (auto& t : pool) t.join();
  }
  for (const auto& e : errors)
    if (e) std::rethrow_exception(e);

  std::vector<EvalRow> rows;
  for (auto& r : results) rows.insert(rows.end(), r.begin(), r.end());

  // Means over finite values, methods in order of first appearance.
  std::vector<std::string> methods;
  for (const auto& r : rows)
    if (std::find(methods.begin(), methods.end(), r.method) == methods.end()) methods.push_back(r.method);
  json summary = json::array();
  std::vector<std::pair<EvalRow, int>> summary_rows;
  for (const auto& m : methods) {
    EvalRow mean{m, "", 0, 0, 0, 0};
    double* fields[] = {&mean.psnr, &mean.psnr_missing, &mean.ssim, &mean.warp};
    int counts[4] = {0, 0, 0, 0};
    int total = 0;
    for (const auto& r : rows) {
      if (r.method != m) continue;
      ++total;
      const double values[] = {r.psnr, r.psnr_missing, r.ssim, r.warp};
      for (int k = 0; k < 4; ++k)
        if (std::isfinite(values[k])) {
          *fields[k] += values[k];
          ++counts[k];
        }
    }
    for (int k = 0; k < 4; ++k) *fields[k] = counts[k] ? *fields[k] / counts[k] : std::nan("");
    summary.push_back(row_json(mean, total));
    summary_rows.emplace_back(mean, total);
  }

  std::string csv = "method,name,psnr,psnr_missing,ssim,warp_error\n";
  json row_list = json::array();
  for (const auto& r : rows) {
    csv += fmt::format("{},{},{},{},{},{}\n", r.method, r.name, csv_number(r.psnr), csv_number(r.psnr_missing),
                       csv_number(r.ssim), csv_number(r.warp));
    row_list.push_back(row_json(r));
  }
  fs::create_directories(common.out_dir);
  write_text(common.out_dir / "eval.csv", csv);

  Output out;
  out.json = {{"command", "eval"},
              {"version", 1},
              {"rows", row_list},
              {"summary", summary},
              {"files", {file_entry(common.out_dir, common.out_dir / "eval.csv")}}};
  std::size_t width = 6;
  for (const auto& m : methods) width = std::max(width, m.size());
  out.text = fmt::format("{:<{}}  {:>5}  {:>8}  {:>12}  {:>6}  {:>10}\n", "method", width, "n", "PSNR", "PSNR missing",
                         "SSIM", "warp error");
  for (const auto& [r, count] : summary_rows)
    out.text += fmt::format("{:<{}}  {:>5}  {:>8}  {:>12}  {:>6}  {:>10}\n", r.method, width, count, cell(r.psnr, 2),
                            cell(r.psnr_missing, 2), cell(r.ssim, 3), cell(r.warp, 4));
  return out;
}

Output oracle_check_command(const Common& common, const OracleCheckOptions& options) {
  OracleCheckConfig oc;
  if (!options.config.empty()) {
    const std::string source = options.config.string();
    const json cfg = load_config(options.config, "oracle-check.schema.json");
    if (cfg.contains("gp")) {
      validate(cfg.at("gp"), "gp.schema.json", source, "gp");
      oc.gp = gp_spec_from_json(cfg.at("gp"));
    }
    if (cfg.contains("sampler")) {
      validate(cfg.at("sampler"), "sampler.schema.json", source, "sampler");
      oc.sampler = sampler_config_from_json(cfg.at("sampler"));
    }
    oc.samples = cfg.value("samples", oc.samples);
    oc.known_prob = cfg.value("known_prob", oc.known_prob);
    oc.mean_z_threshold = cfg.value("mean_z_threshold", oc.mean_z_threshold);
    oc.cov_threshold = cfg.value("cov_threshold", oc.cov_threshold);
    oc.seed = cfg.value("seed", oc.seed);
  }
  if (options.samples) oc.samples = *options.samples;
  if (options.steps) {
    oc.sampler.n_steps = *options.steps;
    check_sampler_config(oc.sampler);
  }
  if (common.seed) oc.seed = *common.seed;

  const OracleCheckReport report = run_oracle_check(oc);
  const bool pass = report.fidelity_pass && report.marginal_pass;

  Output out;
  out.json = {{"command", "oracle-check"},
              {"version", 1},
              {"report", report},
              {"thresholds", {{"mean_z", oc.mean_z_threshold}, {"cov_rel_error", oc.cov_threshold}}},
              {"pass", pass}};
  const auto verdict = [](bool ok) { return ok ? "pass" : "FAIL"; };
  out.text = key_value_table(
      {{"samples", std::to_string(report.samples)},
       {"network calls", std::to_string(report.network_calls)},
       {"missing pixels", fmt::format("{} ({} kept)", report.missing_pixels, report.marginal_pixels)},
       {"max mean z", fmt::format("{} (threshold {})", cell(report.max_mean_z), oc.mean_z_threshold)},
       {"cov rel error", fmt::format("{} (threshold {})", cell(report.cov_rel_error, 4), oc.cov_threshold)},
       {"max marginal z", fmt::format("{} (threshold {})", cell(report.max_marginal_z), oc.mean_z_threshold)},
       {"max direct mean z", cell(report.max_direct_mean_z)},
       {"fidelity", verdict(report.fidelity_pass)},
       {"marginalization", verdict(report.marginal_pass)}});
  out.exit_code = pass ? 0 : 1;
  return out;
}

}  // namespace cdvi::cli
