#include "seiko/diffusion/schedule.hpp"

#include <cmath>

namespace seiko::diffusion {

void NoiseSchedule::validate() const {
  if (!(b_min > 0.0) || !(b_max > 0.0)) throw ConfigError("schedule rates must be positive");
  if (b_min > b_max) throw ConfigError("schedule requires b_min <= b_max");
  if (!(horizon > 0.0)) throw ConfigError("schedule horizon must be positive");
  if (n_steps < 2) throw ConfigError("schedule needs at least 2 steps");
  if (sigma_override && !(*sigma_override > 0.0)) throw ConfigError("sigma override must be positive");
}

double NoiseSchedule::rate(double s) const {
  if (s < 0.0 || s > horizon) throw DomainError("schedule rate: time outside [0, T]");
  return b_min + s * (b_max - b_min) / horizon;
}

double NoiseSchedule::alpha_bar(double s) const {
  if (s < 0.0 || s > horizon) throw DomainError("schedule alpha_bar: time outside [0, T]");
  const double integral = b_min * s + 0.5 * s * s * (b_max - b_min) / horizon;
  return std::exp(-integral);
}

double NoiseSchedule::sigma2(double t) const {
  if (sigma_override) return (*sigma_override) * (*sigma_override);
  if (t < 0.0 || t > horizon) throw DomainError("schedule sigma2: time outside [0, T]");
  return rate(horizon - t);
}

}  // namespace seiko::diffusion
