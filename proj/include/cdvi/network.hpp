#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "cdvi/denoiser.hpp"

namespace cdvi {

/// Shape of the compact epsilon network.
///
///   input (C image channels + 1 mask channel)
///   conv3x3 -> width
///   depth residual blocks: silu, conv3x3, FiLM(noise), silu, conv3x3, +skip
///   temporal attention after the first depth/2 blocks (per pixel, across
///   frames, relative frame-position bias), zero-initialized output
///   silu, conv3x3 -> C
///
/// Convolutions act on each frame separately with zero padding. The noise
/// level enters only through FiLM features of log(sigma).
struct ArchConfig {
  int channels = 1;
  int width = 32;
  int depth = 2;
  int heads = 1;
  int max_frames = 8;
  int noise_features = 4;
  int max_relative = 32;  // relative offsets are clipped to +-max_relative

  int embedding_dim() const noexcept { return 1 + 2 * noise_features; }
  friend bool operator==(const ArchConfig&, const ArchConfig&) = default;
};

/// A named slice of the flat parameter vector. Matrices are stored column
/// major with rows = shape[0] and cols = product of the remaining dims.
struct ParamBlock {
  std::string name;
  std::vector<int> shape;
  std::size_t offset = 0;
  std::size_t size = 0;

  friend bool operator==(const ParamBlock&, const ParamBlock&) = default;
};

struct ParamLayout {
  std::vector<ParamBlock> blocks;
  std::size_t total = 0;

  /// Throws ParameterError for unknown names.
  const ParamBlock& find(const std::string& name) const;
  friend bool operator==(const ParamLayout&, const ParamLayout&) = default;
};

ParamLayout make_layout(const ArchConfig& arch);

struct DenoiserParams {
  ArchConfig arch;
  ParamLayout layout;
  std::vector<double> weights;
  std::vector<double> ema;
};

/// Deterministic in (arch, seed). Weights are Gaussian with standard
/// deviation 1/sqrt(fan_in); biases, relative-position biases and the
/// attention output projection start at zero. The EMA copy equals the
/// weights.
DenoiserParams init_params(const ArchConfig& arch, std::uint64_t seed);

/// ema <- rate * ema + (1 - rate) * weights. Throws ParameterError unless
/// 0 <= rate < 1.
void ema_update(DenoiserParams& params, double rate);

/// Log-sigma Fourier features: [log(s)/4, sin(w_k log s), cos(w_k log s)]
/// with w_k = 2^(k-2), s floored at 1e-4.
std::vector<double> noise_embedding(double sigma, int features);

class NetworkDenoiser final : public Denoiser {
 public:
  NetworkDenoiser(ArchConfig arch, std::vector<double> weights);

  Video predict_eps(const DenoiserInput& input) const override;
  int frame_budget() const override { return arch_.max_frames; }

  const ArchConfig& arch() const noexcept { return arch_; }
  std::span<const double> weights() const noexcept { return weights_; }

 private:
  ArchConfig arch_;
  ParamLayout layout_;
  std::vector<double> weights_;
};

/// Network output for `weights` without constructing a denoiser.
Video network_forward(const ArchConfig& arch, std::span<const double> weights, const DenoiserInput& input);

/// Mean of (eps_hat - target)^2 over every channel of every mask = 0
/// pixel; 0 when nothing is missing. When `grad` is non-empty it receives
/// the gradient with respect to `weights` (overwritten, not accumulated).
double network_masked_loss(const ArchConfig& arch, std::span<const double> weights, const DenoiserInput& input,
                           const Video& target, std::span<double> grad);

void to_json(nlohmann::json& j, const ArchConfig& arch);
ArchConfig arch_from_json(const nlohmann::json& j);
void to_json(nlohmann::json& j, const ParamLayout& layout);
ParamLayout layout_from_json(const nlohmann::json& j);

}  // namespace cdvi
