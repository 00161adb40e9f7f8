#pragma once

#include "seiko/diffusion/gmm.hpp"

#include <functional>

namespace seiko::eval {

// Regular cell grid over a box; 1D and 2D only. Cell probabilities sum to 1.
struct GridSpec {
  Vector lo;
  Vector hi;
  std::vector<int> cells;

  void validate() const;
  int dim() const { return static_cast<int>(cells.size()); }
  int total_cells() const;
  Vector center(int flat_index) const;
  // flat index of the containing cell, or -1 when outside the box
  int locate(const Vector& x) const;
  double cell_volume() const;
};

struct GridDensity {
  GridSpec spec;
  Vector p;  // probabilities per flat cell index

  void validate() const;
};

// Normalizes exp(log_unnormalized) over the grid; stable in log space.
GridDensity density_from_log(const GridSpec& spec, const std::function<double(const Vector&)>& log_unnormalized);

// Analytic mixture restricted to the grid and renormalized.
GridDensity gmm_grid_density(const diffusion::GmmSpec& gmm, const GridSpec& spec);

// Histogram normalized over in-range mass; out_frac_out_of_range reports the
// discarded fraction. Throws DegenerateDensityError when nothing lands inside.
GridDensity empirical_density(const Matrix& samples, const GridSpec& spec,
                              double* out_frac_out_of_range = nullptr);

double tv_distance(const GridDensity& p, const GridDensity& q);

// KL(p || q) with additive smoothing (then renormalization) on the p side only.
double kl_divergence(const GridDensity& p, const GridDensity& q, double smoothing = 1e-12);

// Cellwise product form p ~ exp(optimistic/(alpha+beta)) prev^{beta/(alpha+beta)} pre^{alpha/(alpha+beta)}.
GridDensity grid_target_density(const std::function<double(const Vector&)>& optimistic,
                                const GridDensity& prev, const GridDensity& pre, double alpha,
                                double beta);

}  // namespace seiko::eval
