#include "cdvi/denoiser.hpp"

#include <cmath>
#include <cstring>

#include <fmt/format.h>

#include "cdvi/error.hpp"

namespace cdvi {

GaussianOracle::GaussianOracle(std::shared_ptr<const GaussianVideoModel> model, int budget)
    : model_(std::move(model)), budget_(budget) {
  if (!model_) throw ParameterError("denoiser", "oracle needs a model");
  if (budget < 1) throw ParameterError("denoiser", "oracle budget must be positive");
}

std::shared_ptr<const GaussianOracle::Pattern> GaussianOracle::pattern(const DenoiserInput& input) const {
  const auto& spec = model_->spec();
  std::vector<std::uint8_t> key(input.positions.size() * sizeof(int));
  std::memcpy(key.data(), input.positions.data(), key.size());
  key.insert(key.end(), input.mask.bits().begin(), input.mask.bits().end());
  {
    std::lock_guard lock(mutex_);
    if (auto it = cache_.find(key); it != cache_.end()) return it->second;
  }

  auto pat = std::make_shared<Pattern>();
  std::vector<Eigen::Index> model_known, model_missing;
  const std::size_t n_frames = input.frames.frames();
  for (std::size_t r = 0; r < n_frames; ++r) {
    const int pos = input.positions[r];
    if (pos < 0 || pos >= spec.frames)
      throw IndexError("denoiser", fmt::format("frame position {} outside the oracle's {} frames", pos, spec.frames));
    for (int c = 0; c < spec.channels; ++c) {
      for (int y = 0; y < spec.height; ++y) {
        for (int x = 0; x < spec.width; ++x) {
          const auto local = static_cast<Eigen::Index>(((r * spec.channels + c) * spec.height + y) * spec.width + x);
          const Eigen::Index global = model_->index(pos, c, y, x);
          if (input.mask(r, static_cast<std::size_t>(y), static_cast<std::size_t>(x))) {
            pat->known.push_back(local);
            model_known.push_back(global);
          } else {
            pat->missing.push_back(local);
            model_missing.push_back(global);
          }
        }
      }
    }
  }
  const Eigen::MatrixXd& cov = model_->cov();
  pat->prior_missing = model_->mean()(model_missing);
  pat->prior_known = model_->mean()(model_known);
  Eigen::MatrixXd cond = cov(model_missing, model_missing);
  if (!model_known.empty()) {
    const Eigen::MatrixXd s_uy = cov(model_missing, model_known);
    Eigen::LLT<Eigen::MatrixXd> llt(cov(model_known, model_known));
    if (llt.info() != Eigen::Success) throw NumericError("denoiser", "oracle observed covariance is singular");
    pat->gain = llt.solve(s_uy.transpose()).transpose();
    cond -= pat->gain * s_uy.transpose();
  } else {
    pat->gain = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(model_missing.size()), 0);
  }
  cond = 0.5 * (cond + cond.transpose());
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(cond);
  if (eig.info() != Eigen::Success) throw NumericError("denoiser", "oracle eigendecomposition failed");
  pat->basis = eig.eigenvectors();
  pat->eigenvalues = eig.eigenvalues().cwiseMax(0.0);

  std::lock_guard lock(mutex_);
  return cache_.emplace(std::move(key), std::move(pat)).first->second;
}

Video GaussianOracle::predict_eps(const DenoiserInput& input) const {
  const auto& spec = model_->spec();
  const std::size_t n_frames = input.frames.frames();
  if (static_cast<int>(n_frames) > budget_)
    throw CapacityError("denoiser", fmt::format("{} frames exceed the budget of {}", n_frames, budget_));
  if (input.positions.size() != n_frames || input.mask.frames() != n_frames ||
      static_cast<int>(input.frames.channels()) != spec.channels ||
      static_cast<int>(input.frames.height()) != spec.height || static_cast<int>(input.frames.width()) != spec.width ||
      !input.mask.matches(input.frames))
    throw ParameterError("denoiser", "oracle input shape does not match the model");

  Video out(n_frames, input.frames.channels(), input.frames.height(), input.frames.width());
  const auto pat = pattern(input);
  if (pat->missing.empty() || input.sigma == 0.0) return out;

  const auto values = input.frames.values();
  Eigen::VectorXd cond_mean = pat->prior_missing;
  if (!pat->known.empty()) {
    Eigen::VectorXd y(static_cast<Eigen::Index>(pat->known.size()));
    for (std::size_t i = 0; i < pat->known.size(); ++i)
      y[static_cast<Eigen::Index>(i)] = values[static_cast<std::size_t>(pat->known[i])];
    cond_mean += pat->gain * (y - pat->prior_known);
  }
  const double s = input.sigma;
  const double unscale = std::sqrt(1.0 + s * s);
  Eigen::VectorXd resid(static_cast<Eigen::Index>(pat->missing.size()));
  for (std::size_t i = 0; i < pat->missing.size(); ++i)
    resid[static_cast<Eigen::Index>(i)] = values[static_cast<std::size_t>(pat->missing[i])] * unscale;
  resid -= cond_mean;
  const Eigen::VectorXd filter = (s / (pat->eigenvalues.array() + s * s)).matrix();
  const Eigen::VectorXd eps = pat->basis * (filter.asDiagonal() * (pat->basis.transpose() * resid));
  auto dst = out.values();
  for (std::size_t i = 0; i < pat->missing.size(); ++i)
    dst[static_cast<std::size_t>(pat->missing[i])] = eps[static_cast<Eigen::Index>(i)];
  return out;
}

}  // namespace cdvi
