#pragma once

#include <cstdint>
#include <vector>

#include <Eigen/Dense>
#include <nlohmann/json_fwd.hpp>

#include "cdvi/rng.hpp"
#include "cdvi/video.hpp"

namespace cdvi {

/// Gaussian-process video distribution. The covariance between pixels
/// (f, c, p) and (f', c', p') is
///
///   scale^2 * ar^|f - f'| * [c == c'] * ((1 - floor) rbf(p, p') + floor [p == p'])
///
/// with rbf(p, p') = exp(-|p - p'|^2 / (2 lengthscale^2)).
struct GPVideoSpec {
  int frames = 5;
  int channels = 1;
  int height = 2;
  int width = 2;
  double ar = 0.9;
  double lengthscale = 1.0;
  double noise_floor = 0.05;
  double scale = 0.5;
  double mean = 0.0;
};

struct ConditionalGaussian {
  Eigen::VectorXd mean;
  Eigen::MatrixXd cov;
};

class GaussianVideoModel {
 public:
  /// Throws ParameterError for malformed specs and NumericError when the
  /// covariance is not positive definite.
  explicit GaussianVideoModel(const GPVideoSpec& spec);

  const GPVideoSpec& spec() const noexcept { return spec_; }
  Eigen::Index dim() const noexcept { return mean_.size(); }
  const Eigen::VectorXd& mean() const noexcept { return mean_; }
  const Eigen::MatrixXd& cov() const noexcept { return cov_; }

  /// Flat index of (f, c, y, x), identical to Video storage order.
  Eigen::Index index(int f, int c, int y, int x) const noexcept;

  /// Exact sample through the Cholesky factor. Values are not clamped.
  Video sample(Rng& rng) const;

  /// Distribution of `query` pixels given `observed` pixels take `values`.
  /// Empty `observed` gives the prior marginal.
  ConditionalGaussian condition(const std::vector<Eigen::Index>& observed, const Eigen::VectorXd& values,
                                const std::vector<Eigen::Index>& query) const;

  /// E[video | pixels with mask = 1]; known pixels keep their values.
  Video conditional_mean(const Video& video, const PixelMask& mask) const;
  /// Covariance of the missing pixels (in flat order) given the known ones.
  Eigen::MatrixXd conditional_cov(const PixelMask& mask) const;

 private:
  GPVideoSpec spec_;
  Eigen::VectorXd mean_;
  Eigen::MatrixXd cov_;
  Eigen::MatrixXd chol_;
};

/// Video i is drawn with Rng(seed).split(i).
std::vector<Video> gen_gp_videos(const GPVideoSpec& spec, int n_videos, std::uint64_t seed);

void to_json(nlohmann::json& j, const GPVideoSpec& spec);
GPVideoSpec gp_spec_from_json(const nlohmann::json& j);

}  // namespace cdvi
