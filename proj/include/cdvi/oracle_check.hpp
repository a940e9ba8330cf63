#pragma once

#include <cstdint>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "cdvi/gp.hpp"
#include "cdvi/sampler.hpp"

namespace cdvi {

/// Sampler verification against a Gaussian-process model with the exact
/// epsilon oracle.
///
/// One ground-truth video is drawn from the model. Its first and last
/// frames are fully known, the last interior frame is fully missing (the
/// discarded frame z), and the other interior frames keep each pixel with
/// probability `known_prob`. Two runs of `samples` draws each are made:
///
///   joint:  every frame in one call; all missing pixels are compared with
///           the exact conditional (mean and covariance)
///   direct: the z frame left out of the call; the remaining missing
///           pixels x are compared with the joint run's x
struct OracleCheckConfig {
  GPVideoSpec gp;
  int samples = 20000;
  double known_prob = 0.25;
  SamplerConfig sampler;
  std::uint64_t seed = 0;
  double mean_z_threshold = 3.0;
  double cov_threshold = 0.1;
};

struct OracleCheckReport {
  int samples = 0;
  int missing_pixels = 0;     // x and z together
  int marginal_pixels = 0;    // x only
  long network_calls = 0;
  double max_mean_z = 0.0;          // joint run vs exact conditional mean
  double cov_rel_error = 0.0;       // Frobenius, joint run vs exact conditional
  double max_marginal_z = 0.0;      // joint x vs direct x
  double max_direct_mean_z = 0.0;   // direct x vs exact conditional mean
  bool fidelity_pass = false;
  bool marginal_pass = false;
};

/// Throws ParameterError unless the GP has at least 3 frames and samples >= 2.
OracleCheckReport run_oracle_check(const OracleCheckConfig& cfg);

void to_json(nlohmann::json& j, const OracleCheckReport& report);

}  // namespace cdvi
