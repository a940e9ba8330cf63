#include "cdvi/gp.hpp"

#include <cmath>

#include <fmt/format.h>
#include <nlohmann/json.hpp>

#include "cdvi/error.hpp"

namespace cdvi {

GaussianVideoModel::GaussianVideoModel(const GPVideoSpec& spec) : spec_(spec) {
  if (spec.frames < 1 || spec.channels < 1 || spec.height < 1 || spec.width < 1)
    throw ParameterError("data", "GP video shape must be positive");
  if (!(spec.ar >= 0.0 && spec.ar < 1.0)) throw ParameterError("data", "GP ar coefficient must lie in [0, 1)");
  if (!(spec.lengthscale > 0.0)) throw ParameterError("data", "GP lengthscale must be positive");
  if (!(spec.noise_floor >= 0.0 && spec.noise_floor <= 1.0))
    throw ParameterError("data", "GP noise floor must lie in [0, 1]");
  if (!(spec.scale > 0.0)) throw ParameterError("data", "GP scale must be positive");

  const int hw = spec.height * spec.width;
  Eigen::MatrixXd spatial(hw, hw);
  for (int p = 0; p < hw; ++p) {
    for (int q = 0; q < hw; ++q) {
      const double dy = p / spec.width - q / spec.width;
      const double dx = p % spec.width - q % spec.width;
      const double rbf = std::exp(-(dx * dx + dy * dy) / (2.0 * spec.lengthscale * spec.lengthscale));
      spatial(p, q) = (1.0 - spec.noise_floor) * rbf + (p == q ? spec.noise_floor : 0.0);
    }
  }
  const Eigen::Index n = static_cast<Eigen::Index>(spec.frames) * spec.channels * hw;
  mean_ = Eigen::VectorXd::Constant(n, spec.mean);
  cov_ = Eigen::MatrixXd::Zero(n, n);
  const double s2 = spec.scale * spec.scale;
  for (int f = 0; f < spec.frames; ++f) {
    for (int g = 0; g < spec.frames; ++g) {
      const double temporal = s2 * std::pow(spec.ar, std::abs(f - g));
      if (temporal == 0.0) continue;
      for (int c = 0; c < spec.channels; ++c) {
        const Eigen::Index r0 = index(f, c, 0, 0), c0 = index(g, c, 0, 0);
        cov_.block(r0, c0, hw, hw) = temporal * spatial;
      }
    }
  }
  Eigen::LLT<Eigen::MatrixXd> llt(cov_);
  if (llt.info() != Eigen::Success) throw NumericError("data", "GP covariance is not positive definite");
  chol_ = llt.matrixL();
}

Eigen::Index GaussianVideoModel::index(int f, int c, int y, int x) const noexcept {
  return ((static_cast<Eigen::Index>(f) * spec_.channels + c) * spec_.height + y) * spec_.width + x;
}

Video GaussianVideoModel::sample(Rng& rng) const {
  Eigen::VectorXd z(dim());
  for (Eigen::Index i = 0; i < dim(); ++i) z[i] = rng.normal();
  const Eigen::VectorXd x = mean_ + chol_ * z;
  Video v(static_cast<std::size_t>(spec_.frames), static_cast<std::size_t>(spec_.channels),
          static_cast<std::size_t>(spec_.height), static_cast<std::size_t>(spec_.width));
  for (Eigen::Index i = 0; i < dim(); ++i) v.values()[static_cast<std::size_t>(i)] = x[i];
  return v;
}

ConditionalGaussian GaussianVideoModel::condition(const std::vector<Eigen::Index>& observed,
                                                  const Eigen::VectorXd& values,
                                                  const std::vector<Eigen::Index>& query) const {
  const auto no = static_cast<Eigen::Index>(observed.size());
  if (values.size() != no) throw ParameterError("data", "observed values and indices differ in length");
  ConditionalGaussian out;
  out.mean = mean_(query);
  out.cov = cov_(query, query);
  if (no == 0) return out;
  const Eigen::MatrixXd s_oo = cov_(observed, observed);
  const Eigen::MatrixXd s_qo = cov_(query, observed);
  Eigen::LLT<Eigen::MatrixXd> llt(s_oo);
  if (llt.info() != Eigen::Success) throw NumericError("data", "observed covariance is not positive definite");
  const Eigen::MatrixXd gain = llt.solve(s_qo.transpose()).transpose();
  out.mean += gain * (values - mean_(observed));
  out.cov -= gain * s_qo.transpose();
  out.cov = 0.5 * (out.cov + out.cov.transpose());
  return out;
}

namespace {

void split_by_mask(const GaussianVideoModel& model, const PixelMask& mask, std::vector<Eigen::Index>& known,
                   std::vector<Eigen::Index>& missing) {
  const auto& s = model.spec();
  if (static_cast<int>(mask.frames()) != s.frames || static_cast<int>(mask.height()) != s.height ||
      static_cast<int>(mask.width()) != s.width)
    throw ParameterError("data", "mask shape does not match the GP model");
  for (int f = 0; f < s.frames; ++f)
    for (int c = 0; c < s.channels; ++c)
      for (int y = 0; y < s.height; ++y)
        for (int x = 0; x < s.width; ++x)
          (mask(static_cast<std::size_t>(f), static_cast<std::size_t>(y), static_cast<std::size_t>(x)) ? known
                                                                                                       : missing)
              .push_back(model.index(f, c, y, x));
}

}  // namespace

Video GaussianVideoModel::conditional_mean(const Video& video, const PixelMask& mask) const {
  std::vector<Eigen::Index> known, missing;
  split_by_mask(*this, mask, known, missing);
  Eigen::VectorXd values(static_cast<Eigen::Index>(known.size()));
  for (std::size_t i = 0; i < known.size(); ++i)
    values[static_cast<Eigen::Index>(i)] = video.values()[static_cast<std::size_t>(known[i])];
  const ConditionalGaussian cg = condition(known, values, missing);
  Video out = video;
  for (std::size_t i = 0; i < missing.size(); ++i)
    out.values()[static_cast<std::size_t>(missing[i])] = cg.mean[static_cast<Eigen::Index>(i)];
  return out;
}

Eigen::MatrixXd GaussianVideoModel::conditional_cov(const PixelMask& mask) const {
  std::vector<Eigen::Index> known, missing;
  split_by_mask(*this, mask, known, missing);
  return condition(known, Eigen::VectorXd::Zero(static_cast<Eigen::Index>(known.size())), missing).cov;
}

std::vector<Video> gen_gp_videos(const GPVideoSpec& spec, int n_videos, std::uint64_t seed) {
  const GaussianVideoModel model(spec);
  std::vector<Video> out;
  const Rng root(seed);
  for (int i = 0; i < n_videos; ++i) {
    Rng rng = root.split(static_cast<std::uint64_t>(i));
    out.push_back(model.sample(rng));
  }
  return out;
}

void to_json(nlohmann::json& j, const GPVideoSpec& s) {
  j = nlohmann::json{{"frames", s.frames},         {"channels", s.channels}, {"height", s.height},
                     {"width", s.width},           {"ar", s.ar},             {"lengthscale", s.lengthscale},
                     {"noise_floor", s.noise_floor}, {"scale", s.scale},     {"mean", s.mean}};
}

GPVideoSpec gp_spec_from_json(const nlohmann::json& j) {
  GPVideoSpec s;
  s.frames = j.value("frames", s.frames);
  s.channels = j.value("channels", s.channels);
  s.height = j.value("height", s.height);
  s.width = j.value("width", s.width);
  s.ar = j.value("ar", s.ar);
  s.lengthscale = j.value("lengthscale", s.lengthscale);
  s.noise_floor = j.value("noise_floor", s.noise_floor);
  s.scale = j.value("scale", s.scale);
  s.mean = j.value("mean", s.mean);
  return s;
}

}  // namespace cdvi
