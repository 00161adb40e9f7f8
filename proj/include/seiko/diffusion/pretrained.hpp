#pragma once

#include "seiko/diffusion/gmm.hpp"
#include "seiko/diffusion/schedule.hpp"

#include <memory>

namespace seiko::diffusion {

GmmSpec diffused_gmm(const GmmSpec& gmm, const NoiseSchedule& schedule, double s);

// Closed-form generative model: the reverse-time drift of the VP diffusion of
// a known mixture, f(t,x) = 1/2 b(T-t) x + b(T-t) grad log p_{T-t}(x).
// Initial law is standard normal. Feasibility is the density super-level set
// {x : p(x) >= eps_feas * max p}.
struct PretrainedModel {
  GmmSpec gmm;
  NoiseSchedule schedule;
  double eps_feas = 1e-4;

  static PretrainedModel make(GmmSpec gmm, NoiseSchedule schedule, double eps_feas = 1e-4);

  Vector drift(double t, const Vector& x) const;
  Matrix drift_jacobian(double t, const Vector& x) const;

  double max_density() const { return max_density_; }
  double feasibility_threshold() const { return eps_feas * max_density_; }
  bool feasible(const Vector& x) const;

  // Bounding box used for the feasibility scan; handy default for grids.
  Vector domain_lo() const { return domain_lo_; }
  Vector domain_hi() const { return domain_hi_; }

 private:
  double max_density_ = 0.0;
  Vector domain_lo_, domain_hi_;
};

// Cached per-grid-step diffused mixtures so the Euler loop avoids re-deriving
// them; step index k corresponds to generative time t_k = k dt, forward time
// s = T - t_k.
class DriftGrid {
 public:
  DriftGrid(const PretrainedModel& model, const NoiseSchedule& schedule);

  Vector drift(int step, const Vector& x) const;
  Matrix drift_jacobian(int step, const Vector& x) const;
  double sigma2(int step) const { return layers_[static_cast<std::size_t>(step)].sigma2; }
  int steps() const { return static_cast<int>(layers_.size()); }

 private:
  struct Component {
    Vector mean;
    Matrix precision;
    double log_norm;  // log w - 1/2 (d log 2pi + log det Sigma)
  };
  struct Layer {
    std::vector<Component> components;
    double rate;
    double sigma2;
  };

  void score_and_responsibilities(const Layer& layer, const Vector& x, Vector& score,
                                  std::vector<Vector>& u, Vector& resp) const;

  std::vector<Layer> layers_;
};

}  // namespace seiko::diffusion
