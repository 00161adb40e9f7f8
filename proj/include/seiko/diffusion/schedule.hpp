#pragma once

#include "seiko/common.hpp"

#include <optional>

namespace seiko::diffusion {

// Variance-preserving forward schedule with linear noise rate
// b(s) = b_min + s (b_max - b_min)/T in forward time s, and
// alpha_bar(s) = exp(-int_0^s b). Generative time t runs 0..T with s = T - t;
// the generative diffusion coefficient is sigma^2(t) = b(T - t) unless a
// constant override is set (test/config hook).
struct NoiseSchedule {
  double b_min = 0.1;
  double b_max = 20.0;
  double horizon = 1.0;
  int n_steps = 50;
  std::optional<double> sigma_override;

  void validate() const;
  double dt() const { return horizon / n_steps; }
  double grid_time(int step) const { return step * dt(); }

  double rate(double s) const;       // b(s), forward time
  double alpha_bar(double s) const;  // exp(-int_0^s b(u) du)
  double sigma2(double t) const;     // generative diffusion, sigma^2(t)
  double sigma(double t) const { return std::sqrt(sigma2(t)); }
};

}  // namespace seiko::diffusion
