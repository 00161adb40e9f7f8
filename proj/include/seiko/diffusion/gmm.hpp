#pragma once

#include "seiko/common.hpp"

namespace seiko::diffusion {

// Gaussian mixture with full (or diagonal) SPD covariances.
struct GmmSpec {
  Vector weights;
  std::vector<Vector> means;
  std::vector<Matrix> covariances;

  int dim() const { return means.empty() ? 0 : static_cast<int>(means.front().size()); }
  int components() const { return static_cast<int>(weights.size()); }
  void validate() const;

  static GmmSpec single(Vector mean, Matrix cov);
  static GmmSpec isotropic(std::vector<Vector> means, Vector weights, double variance);
};

double gmm_log_density(const GmmSpec& gmm, const Vector& x);
Vector gmm_score(const GmmSpec& gmm, const Vector& x);
// Hessian of the log density; the score's Jacobian, used for analytic
// vector-Jacobian products through the drift.
Matrix gmm_score_jacobian(const GmmSpec& gmm, const Vector& x);
Vector gmm_sample(const GmmSpec& gmm, Rng& rng);

}  // namespace seiko::diffusion
