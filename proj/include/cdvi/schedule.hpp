#pragma once

#include <span>
#include <string_view>
#include <vector>

#include <nlohmann/json_fwd.hpp>

namespace cdvi {

enum class ScheduleKind { cosine, sigmoid };

std::string_view to_string(ScheduleKind kind) noexcept;
ScheduleKind schedule_kind_from_string(std::string_view name);

/// Bounds every alpha-bar value is squeezed into.
inline constexpr double kAlphaBarFloor = 1e-5;
inline constexpr double kAlphaBarCeil = 1.0 - 1e-5;

/// Continuous alpha-bar at normalized time u in [0, 1].
///
/// cosine:  cos^2((u+s)/(1+s) * pi/2) / cos^2(s/(1+s) * pi/2), s = 0.008
/// sigmoid: logistic(-(u*(e-b) + b)) / logistic(-b),      b = -3, e = 3
///
/// Both raw curves start at 1 and decrease strictly; the result is mapped
/// affinely onto [kAlphaBarFloor, kAlphaBarCeil] so that the floor is hit
/// only at u = 1 for the cosine curve and strict monotonicity survives.
double continuous_alpha_bar(ScheduleKind kind, double u);

/// Discrete variance-preserving schedule: alpha_bar(t) for t in 1..T.
class NoiseSchedule {
 public:
  /// Throws ParameterError for steps < 2.
  static NoiseSchedule build(ScheduleKind kind, int steps);
  /// Custom table (alpha_bar(1), ..., alpha_bar(T)); must be strictly
  /// decreasing inside (0, 1). Allows T = 1.
  static NoiseSchedule from_table(ScheduleKind kind, std::vector<double> alpha_bar);

  ScheduleKind kind() const noexcept { return kind_; }
  int steps() const noexcept { return static_cast<int>(alpha_bar_.size()); }
  std::span<const double> table() const noexcept { return alpha_bar_; }

  /// t in 1..T; alpha_bar(0) is 1 by convention.
  double alpha_bar(int t) const;
  /// Continuous query; equals the table entry at u = t/T.
  double alpha_bar_at(double u) const { return continuous_alpha_bar(kind_, u); }
  /// beta_t = 1 - alpha_bar(t)/alpha_bar(t-1).
  double beta(int t) const;
  /// sqrt((1 - alpha_bar)/alpha_bar) at step t.
  double sigma(int t) const;

 private:
  NoiseSchedule(ScheduleKind kind, std::vector<double> table)
      : kind_(kind), alpha_bar_(std::move(table)) {}

  ScheduleKind kind_;
  std::vector<double> alpha_bar_;
};

struct SigmaGridConfig {
  double sigma_min = 0.002;
  double sigma_max = 1000.0;
  double rho = 7.0;
  int n_steps = 100;
};

/// Karras-style noise levels: n_steps decreasing values from sigma_max to
/// sigma_min followed by a terminal 0.
class SigmaGrid {
 public:
  const SigmaGridConfig& config() const noexcept { return config_; }
  int n_steps() const noexcept { return config_.n_steps; }
  std::span<const double> sigmas() const noexcept { return sigmas_; }
  double operator[](std::size_t i) const { return sigmas_[i]; }

 private:
  friend SigmaGrid build_sigma_grid(const SigmaGridConfig& config);
  SigmaGridConfig config_;
  std::vector<double> sigmas_;
};

/// sigma_i = (max^(1/rho) + i/(n-1) (min^(1/rho) - max^(1/rho)))^rho with
/// both endpoints assigned exactly. Throws ParameterError on bad bounds.
SigmaGrid build_sigma_grid(const SigmaGridConfig& config);

/// Variance-preserving coefficients equivalent to a noise level sigma:
/// x_t = scale * x0 + noise_scale * eps  <=>  x_t / scale = x0 + sigma * eps.
struct VpCoefficients {
  double alpha_bar;            // 1 / (1 + sigma^2)
  double scale;                // sqrt(alpha_bar)
  double one_minus_alpha_bar;  // sigma^2 / (1 + sigma^2), computed without cancellation
  double noise_scale;          // sqrt(one_minus_alpha_bar)
};

VpCoefficients sigma_to_alpha_bar(double sigma);
/// Inverse of sigma_to_alpha_bar.
double alpha_bar_to_sigma(const VpCoefficients& coefficients);
/// Inverse from a bare alpha_bar value (loses precision as alpha_bar -> 1).
double alpha_bar_to_sigma(double alpha_bar);

void to_json(nlohmann::json& j, const NoiseSchedule& schedule);
void to_json(nlohmann::json& j, const SigmaGrid& grid);
NoiseSchedule schedule_from_json(const nlohmann::json& j);

}  // namespace cdvi
