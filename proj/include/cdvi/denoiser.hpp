#pragma once

#include <atomic>
#include <map>
#include <memory>
#include <mutex>
#include <vector>

#include <Eigen/Dense>

#include "cdvi/gp.hpp"
#include "cdvi/video.hpp"

namespace cdvi {

/// One network call. `frames` holds clean values where `mask` is 1 and
/// variance-preserving noisy values sqrt(ab) x + sqrt(1 - ab) eps where it
/// is 0, with ab = 1 / (1 + sigma^2). `positions` are the absolute frame
/// indices of the rows of `frames` (latents first, then observed).
struct DenoiserInput {
  Video frames;
  PixelMask mask;
  std::vector<int> positions;
  double sigma = 0.0;
};

/// Epsilon predictor. Implementations must be safe to call concurrently.
class Denoiser {
 public:
  virtual ~Denoiser() = default;

  /// Returns a tensor shaped like input.frames. Only entries at mask = 0
  /// are meaningful. Throws CapacityError when the call has more frames
  /// than frame_budget().
  virtual Video predict_eps(const DenoiserInput& input) const = 0;
  virtual int frame_budget() const = 0;
};

/// Forwards to another denoiser and counts calls.
class CountingDenoiser final : public Denoiser {
 public:
  explicit CountingDenoiser(const Denoiser& inner) : inner_(inner) {}

  Video predict_eps(const DenoiserInput& input) const override {
    calls_.fetch_add(1, std::memory_order_relaxed);
    return inner_.predict_eps(input);
  }
  int frame_budget() const override { return inner_.frame_budget(); }

  long calls() const noexcept { return calls_.load(); }
  void reset() noexcept { calls_.store(0); }

 private:
  const Denoiser& inner_;
  mutable std::atomic<long> calls_{0};
};

/// Bayes-optimal epsilon predictor for videos drawn from a Gaussian model.
///
/// For a call over frames F with known pixels y and missing pixels u, the
/// prior of u given y is N(m, S). With S = Q diag(l) Q^T and the scaled
/// iterate xh = x_t / sqrt(ab) = u + sigma eps,
///
///   eps* = Q diag(sigma / (l + sigma^2)) Q^T (xh - m).
///
/// The factorization for each (positions, mask) pattern is cached.
class GaussianOracle final : public Denoiser {
 public:
  GaussianOracle(std::shared_ptr<const GaussianVideoModel> model, int budget);

  Video predict_eps(const DenoiserInput& input) const override;
  int frame_budget() const override { return budget_; }

  const GaussianVideoModel& model() const noexcept { return *model_; }

 private:
  struct Pattern {
    std::vector<Eigen::Index> known;    // flat indices into the call tensor
    std::vector<Eigen::Index> missing;
    Eigen::VectorXd prior_missing;      // model mean at missing pixels
    Eigen::VectorXd prior_known;
    Eigen::MatrixXd gain;               // S_uy S_yy^{-1}
    Eigen::MatrixXd basis;              // Q
    Eigen::VectorXd eigenvalues;        // l
  };

  std::shared_ptr<const Pattern> pattern(const DenoiserInput& input) const;

  std::shared_ptr<const GaussianVideoModel> model_;
  int budget_;
  mutable std::mutex mutex_;
  mutable std::map<std::vector<std::uint8_t>, std::shared_ptr<const Pattern>> cache_;
};

}  // namespace cdvi
