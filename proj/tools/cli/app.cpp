#include "cli/app.hpp"

#include <functional>
#include <memory>
#include <string>

#include <CLI11.hpp>

#include "cdvi/error.hpp"
#include "cli/commands.hpp"
#include "cli/schema.hpp"

namespace cdvi::cli {

namespace {

struct CommonFlags {
  std::string out_dir;
  std::uint64_t seed = 0;
  CLI::Option* seed_option = nullptr;
  bool json = false;

  Common resolve() const {
    Common c;
    c.out_dir = resolve_out_dir(out_dir);
    if (seed_option && seed_option->count() > 0) c.seed = seed;
    c.json = json;
    return c;
  }
};

CLI::App* add_command(CLI::App& app, const char* name, const char* description, CommonFlags& flags) {
  CLI::App* sub = app.add_subcommand(name, description);
  sub->add_option("--out-dir", flags.out_dir, "Output directory (default $CDVI_OUTPUT_DIR or cdvi_out)");
  flags.seed_option = sub->add_option("--seed", flags.seed, "Seed overriding the config");
  sub->add_flag("--json", flags.json, "Machine-readable JSON on stdout");
  return sub;
}

}  // namespace

int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Conditional diffusion video inpainting toolkit", "cdvi"};
  app.require_subcommand(1);

  std::vector<std::unique_ptr<CommonFlags>> flags;
  std::function<Output()> command;
  auto register_command = [&](const char* name, const char* description) {
    flags.push_back(std::make_unique<CommonFlags>());
    return add_command(app, name, description, *flags.back());
  };

  GenDataOptions gen_data_opts;
  CLI::App* gd = register_command("gen-data", "Generate a sprites or Gaussian-process dataset");
  gd->add_option("--config", gen_data_opts.config, "gen-data config JSON")->required();
  CommonFlags* gd_flags = flags.back().get();

  GenMasksOptions gen_masks_opts;
  CLI::App* gm = register_command("gen-masks", "Generate procedural masks");
  gm->add_option("--config", gen_masks_opts.config, "gen-masks config JSON")->required();
  CommonFlags* gm_flags = flags.back().get();

  PlanCommandOptions plan_opts;
  CLI::App* pl = register_command("plan", "Plan a sampling scheme and render its stage diagram");
  pl->add_option("--kind", plan_opts.kind, "Scheme kind")->required();
  pl->add_option("--frames", plan_opts.frames, "Number of frames N")->check(CLI::PositiveNumber);
  pl->add_option("--budget", plan_opts.budget, "Frames per stage K")->check(CLI::PositiveNumber);
  pl->add_option("--past", plan_opts.past, "Lookahead: past frames per stage");
  pl->add_option("--future", plan_opts.future, "Lookahead: future frames per stage");
  pl->add_option("--cell", plan_opts.cell, "Pixels per diagram cell")->check(CLI::Range(1, 64));
  CommonFlags* pl_flags = flags.back().get();

  TrainOptions train_opts;
  CLI::App* tr = register_command("train", "Train the epsilon network");
  tr->add_option("--config", train_opts.config, "train config JSON")->required();
  tr->add_option("--data", train_opts.data, "Dataset manifest overriding the config");
  tr->add_option("--resume", train_opts.resume, "Checkpoint to continue from");
  CommonFlags* tr_flags = flags.back().get();

  InpaintOptions inpaint_opts;
  CLI::App* ip = register_command("inpaint", "Inpaint a video with a sampling scheme");
  ip->add_option("--video", inpaint_opts.video, "Video tensor")->required();
  ip->add_option("--mask", inpaint_opts.mask, "Mask tensor (1 = known)")->required();
  ip->add_option("--scheme", inpaint_opts.scheme, "Scheme kind or scheme JSON file");
  ip->add_option("--checkpoint", inpaint_opts.checkpoint, "Network checkpoint");
  ip->add_option("--oracle", inpaint_opts.oracle, "Gaussian-process spec JSON for the exact denoiser");
  ip->add_flag("--no-ema", inpaint_opts.no_ema, "Use raw weights instead of the EMA copy");
  ip->add_option("--sampler-config", inpaint_opts.sampler_config, "Sampler config JSON");
  ip->add_option("--out", inpaint_opts.out, "Output tensor (default <out-dir>/inpainted.fft)");
  ip->add_option("--trace-out", inpaint_opts.trace_out, "Per-stage trace JSON");
  ip->add_option("--budget", inpaint_opts.budget, "Frames per stage (default: the denoiser's)")
      ->check(CLI::PositiveNumber);
  CommonFlags* ip_flags = flags.back().get();

  EvalOptions eval_opts;
  CLI::App* ev = register_command("eval", "Score inpainted videos");
  ev->add_option("--manifest", eval_opts.manifest, "eval manifest JSON")->required();
  ev->add_flag("--baseline", eval_opts.baseline, "Add copy-nearest-known-frame rows");
  ev->add_option("--workers", eval_opts.workers, "Worker threads")->check(CLI::PositiveNumber);
  CommonFlags* ev_flags = flags.back().get();

  OracleCheckOptions oracle_opts;
  int oracle_samples = 0;
  int oracle_steps = 0;
  CLI::App* oc = register_command("oracle-check", "Check the sampler against the exact Gaussian denoiser");
  oc->add_option("--config", oracle_opts.config, "oracle-check config JSON");
  CLI::Option* samples_opt = oc->add_option("--samples", oracle_samples, "Samples per run")->check(CLI::Range(2, 1 << 30));
  CLI::Option* steps_opt = oc->add_option("--steps", oracle_steps, "Sampler steps")->check(CLI::PositiveNumber);
  CommonFlags* oc_flags = flags.back().get();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? 0 : 2;
  }

  Common common;
  try {
    if (*gd) {
      common = gd_flags->resolve();
      command = [&] { return gen_data(common, gen_data_opts); };
    } else if (*gm) {
      common = gm_flags->resolve();
      command = [&] { return gen_masks(common, gen_masks_opts); };
    } else if (*pl) {
      common = pl_flags->resolve();
      command = [&] { return plan_command(common, plan_opts); };
    } else if (*tr) {
      common = tr_flags->resolve();
      command = [&] { return train_command(common, train_opts); };
    } else if (*ip) {
      common = ip_flags->resolve();
      command = [&] { return inpaint_command(common, inpaint_opts); };
    } else if (*ev) {
      common = ev_flags->resolve();
      command = [&] { return eval_command(common, eval_opts); };
    } else {
      common = oc_flags->resolve();
      if (samples_opt->count()) oracle_opts.samples = oracle_samples;
      if (steps_opt->count()) oracle_opts.steps = oracle_steps;
      command = [&] { return oracle_check_command(common, oracle_opts); };
    }
    const Output result = command();
    if (common.json)
      out << result.json.dump(2) << '\n';
    else
      out << result.text;
    if (result.exit_code != 0) err << app.get_subcommands().front()->get_name() << ": check failed\n";
    return result.exit_code;
  } catch (const SchemaViolation& e) {
    err << "schema: " << e.what() << '\n';
    return 2;
  } catch (const Error& e) {
    err << e.module() << ": " << e.what() << '\n';
    return 1;
  } catch (const std::exception& e) {
    err << "cli: " << e.what() << '\n';
    return 1;
  }
}

}  // namespace cdvi::cli
