#pragma once

#include <optional>
#include <string>

#include <nlohmann/json.hpp>

#include "cli/common.hpp"

namespace cdvi::cli {

/// What a command reports: `json` goes to stdout under --json, `text`
/// otherwise.
struct Output {
  nlohmann::json json;
  std::string text;
  int exit_code = 0;
};

struct GenDataOptions {
  fs::path config;
};

struct GenMasksOptions {
  fs::path config;
};

struct PlanCommandOptions {
  std::string kind;
  int frames = 32;
  int budget = 8;
  int past = -1;
  int future = -1;
  int cell = 8;
};

struct TrainOptions {
  fs::path config;
  fs::path data;
  fs::path resume;
};

struct InpaintOptions {
  fs::path video;
  fs::path mask;
  std::string scheme = "ar";
  fs::path checkpoint;
  fs::path oracle;
  fs::path sampler_config;
  fs::path out;
  fs::path trace_out;
  int budget = 0;  // 0: the denoiser's budget
  bool no_ema = false;
};

struct EvalOptions {
  fs::path manifest;
  bool baseline = false;
  int workers = 1;
};

struct OracleCheckOptions {
  fs::path config;
  std::optional<int> samples;
  std::optional<int> steps;
};

Output gen_data(const Common& common, const GenDataOptions& options);
Output gen_masks(const Common& common, const GenMasksOptions& options);
Output plan_command(const Common& common, const PlanCommandOptions& options);
Output train_command(const Common& common, const TrainOptions& options);
Output inpaint_command(const Common& common, const InpaintOptions& options);
Output eval_command(const Common& common, const EvalOptions& options);
Output oracle_check_command(const Common& common, const OracleCheckOptions& options);

}  // namespace cdvi::cli
