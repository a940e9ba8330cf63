#include "cdvi/schedule.hpp"

#include <cmath>
#include <numbers>
#include <string>

#include <fmt/format.h>
#include <nlohmann/json.hpp>

#include "cdvi/error.hpp"

namespace cdvi {

namespace {

constexpr double kCosineOffset = 0.008;
constexpr double kSigmoidStart = -3.0;
constexpr double kSigmoidEnd = 3.0;

double logistic(double x) { return 1.0 / (1.0 + std::exp(-x)); }

double raw_alpha_bar(ScheduleKind kind, double u) {
  switch (kind) {
    case ScheduleKind::cosine: {
      const double s = kCosineOffset;
      const double num = std::cos((u + s) / (1.0 + s) * std::numbers::pi / 2.0);
      const double den = std::cos(s / (1.0 + s) * std::numbers::pi / 2.0);
      return (num * num) / (den * den);
    }
    case ScheduleKind::sigmoid: {
      const double b = kSigmoidStart;
      const double e = kSigmoidEnd;
      return logistic(-(u * (e - b) + b)) / logistic(-b);
    }
  }
  return 0.0;
}

}  // namespace

std::string_view to_string(ScheduleKind kind) noexcept {
  return kind == ScheduleKind::cosine ? "cosine" : "sigmoid";
}

ScheduleKind schedule_kind_from_string(std::string_view name) {
  if (name == "cosine") return ScheduleKind::cosine;
  if (name == "sigmoid") return ScheduleKind::sigmoid;
  throw ParameterError("schedule", fmt::format("unknown schedule kind '{}'", name));
}

double continuous_alpha_bar(ScheduleKind kind, double u) {
  return kAlphaBarFloor + (kAlphaBarCeil - kAlphaBarFloor) * raw_alpha_bar(kind, u);
}

NoiseSchedule NoiseSchedule::build(ScheduleKind kind, int steps) {
  if (steps < 2) throw ParameterError("schedule", fmt::format("T must be >= 2, got {}", steps));
  std::vector<double> table(static_cast<std::size_t>(steps));
  for (int t = 1; t <= steps; ++t)
    table[static_cast<std::size_t>(t - 1)] =
        continuous_alpha_bar(kind, static_cast<double>(t) / static_cast<double>(steps));
  return NoiseSchedule(kind, std::move(table));
}

NoiseSchedule NoiseSchedule::from_table(ScheduleKind kind, std::vector<double> alpha_bar) {
  if (alpha_bar.empty()) throw ParameterError("schedule", "empty alpha_bar table");
  for (std::size_t i = 0; i < alpha_bar.size(); ++i) {
    if (!(alpha_bar[i] > 0.0 && alpha_bar[i] < 1.0))
      throw ParameterError("schedule", fmt::format("alpha_bar[{}] = {} outside (0, 1)", i + 1, alpha_bar[i]));
    if (i > 0 && !(alpha_bar[i] < alpha_bar[i - 1]))
      throw ParameterError("schedule", fmt::format("alpha_bar not strictly decreasing at t = {}", i + 1));
  }
  return NoiseSchedule(kind, std::move(alpha_bar));
}

double NoiseSchedule::alpha_bar(int t) const {
  if (t == 0) return 1.0;
  if (t < 0 || t > steps())
    throw IndexError("schedule", fmt::format("step {} outside 0..{}", t, steps()));
  return alpha_bar_[static_cast<std::size_t>(t - 1)];
}

double NoiseSchedule::beta(int t) const { return 1.0 - alpha_bar(t) / alpha_bar(t - 1); }

double NoiseSchedule::sigma(int t) const { return alpha_bar_to_sigma(alpha_bar(t)); }

SigmaGrid build_sigma_grid(const SigmaGridConfig& config) {
  if (!(config.sigma_min > 0.0) || !(config.sigma_max > config.sigma_min))
    throw ParameterError("schedule", fmt::format("need sigma_max > sigma_min > 0, got [{}, {}]",
                                                 config.sigma_min, config.sigma_max));
  if (!(config.rho > 0.0)) throw ParameterError("schedule", "rho must be positive");
  if (config.n_steps < 2) throw ParameterError("schedule", "n_steps must be >= 2");

  SigmaGrid grid;
  grid.config_ = config;
  const int n = config.n_steps;
  grid.sigmas_.resize(static_cast<std::size_t>(n) + 1);
  const double lo = std::pow(config.sigma_min, 1.0 / config.rho);
  const double hi = std::pow(config.sigma_max, 1.0 / config.rho);
  for (int i = 0; i < n; ++i) {
    const double frac = static_cast<double>(i) / static_cast<double>(n - 1);
    grid.sigmas_[static_cast<std::size_t>(i)] = std::pow(hi + frac * (lo - hi), config.rho);
  }
  grid.sigmas_.front() = config.sigma_max;
  grid.sigmas_[static_cast<std::size_t>(n - 1)] = config.sigma_min;
  grid.sigmas_.back() = 0.0;
  return grid;
}

VpCoefficients sigma_to_alpha_bar(double sigma) {
  const double s2 = sigma * sigma;
  VpCoefficients c{};
  c.alpha_bar = 1.0 / (1.0 + s2);
  c.scale = 1.0 / std::sqrt(1.0 + s2);
  c.one_minus_alpha_bar = s2 / (1.0 + s2);
  c.noise_scale = sigma / std::sqrt(1.0 + s2);
  return c;
}

double alpha_bar_to_sigma(const VpCoefficients& coefficients) {
  return std::sqrt(coefficients.one_minus_alpha_bar / coefficients.alpha_bar);
}

double alpha_bar_to_sigma(double alpha_bar) { return std::sqrt((1.0 - alpha_bar) / alpha_bar); }

void to_json(nlohmann::json& j, const NoiseSchedule& schedule) {
  j = nlohmann::json{{"kind", std::string(to_string(schedule.kind()))},
                     {"T", schedule.steps()},
                     {"alpha_bar", std::vector<double>(schedule.table().begin(), schedule.table().end())}};
}

void to_json(nlohmann::json& j, const SigmaGrid& grid) {
  const auto& c = grid.config();
  j = nlohmann::json{{"sigma_min", c.sigma_min},
                     {"sigma_max", c.sigma_max},
                     {"rho", c.rho},
                     {"n_steps", c.n_steps},
                     {"sigmas", std::vector<double>(grid.sigmas().begin(), grid.sigmas().end())}};
}

NoiseSchedule schedule_from_json(const nlohmann::json& j) {
  const auto kind = schedule_kind_from_string(j.at("kind").get<std::string>());
  auto table = j.at("alpha_bar").get<std::vector<double>>();
  if (static_cast<int>(table.size()) != j.at("T").get<int>())
    throw FormatError("schedule", "alpha_bar length does not match T");
  return NoiseSchedule::from_table(kind, std::move(table));
}

}  // namespace cdvi
