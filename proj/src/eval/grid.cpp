#include "seiko/eval/grid.hpp"

#include <cmath>

namespace seiko::eval {

void GridSpec::validate() const {
  if (cells.empty() || cells.size() > 2) throw ConfigError("grid supports 1 or 2 dimensions");
  if (lo.size() != dim() || hi.size() != dim()) throw ConfigError("grid bounds disagree with dimension");
  for (int c : cells) {
    if (c < 2) throw ConfigError("grid needs at least 2 cells per axis");
  }
  for (int j = 0; j < dim(); ++j) {
    if (!(lo[j] < hi[j])) throw ConfigError("grid bounds must satisfy lo < hi");
  }
}

int GridSpec::total_cells() const {
  int n = 1;
  for (int c : cells) n *= c;
  return n;
}

Vector GridSpec::center(int flat_index) const {
  Vector x(dim());
  int rest = flat_index;
  for (int j = 0; j < dim(); ++j) {
    const int c = cells[static_cast<std::size_t>(j)];
    const int idx = rest % c;
    rest /= c;
    x[j] = lo[j] + (idx + 0.5) * (hi[j] - lo[j]) / c;
  }
  return x;
}

int GridSpec::locate(const Vector& x) const {
  if (x.size() != dim()) throw ShapeError("grid locate: dimension mismatch");
  int flat = 0;
  int stride = 1;
  for (int j = 0; j < dim(); ++j) {
    const int c = cells[static_cast<std::size_t>(j)];
    const double u = (x[j] - lo[j]) / (hi[j] - lo[j]);
    if (u < 0.0 || u >= 1.0) return -1;
    flat += stride * static_cast<int>(u * c);
    stride *= c;
  }
  return flat;
}

double GridSpec::cell_volume() const {
  double v = 1.0;
  for (int j = 0; j < dim(); ++j) v *= (hi[j] - lo[j]) / cells[static_cast<std::size_t>(j)];
  return v;
}

void GridDensity::validate() const {
  spec.validate();
  if (p.size() != spec.total_cells()) throw ShapeError("grid density has the wrong cell count");
  if ((p.array() < 0.0).any()) throw DegenerateDensityError("grid density has negative cells");
  if (std::abs(p.sum() - 1.0) > 1e-9) throw DegenerateDensityError("grid density does not sum to 1");
}

GridDensity density_from_log(const GridSpec& spec,
                             const std::function<double(const Vector&)>& log_unnormalized) {
  spec.validate();
  const int n = spec.total_cells();
  Vector logs(n);
  for (int i = 0; i < n; ++i) logs[i] = log_unnormalized(spec.center(i));
  const double mx = logs.maxCoeff();
  if (!std::isfinite(mx)) throw DegenerateDensityError("all grid cells carry zero mass");
  GridDensity d;
  d.spec = spec;
  d.p = (logs.array() - mx).exp();
  const double total = d.p.sum();
  d.p /= total;
  return d;
}

GridDensity gmm_grid_density(const diffusion::GmmSpec& gmm, const GridSpec& spec) {
  return density_from_log(spec, [&](const Vector& x) { return diffusion::gmm_log_density(gmm, x); });
}

GridDensity empirical_density(const Matrix& samples, const GridSpec& spec,
                              double* out_frac_out_of_range) {
  spec.validate();
  if (samples.cols() < 1) throw ConfigError("empirical_density: need at least one sample");
  if (samples.rows() != spec.dim()) throw ShapeError("empirical_density: dimension mismatch");
  GridDensity d;
  d.spec = spec;
  d.p = Vector::Zero(spec.total_cells());
  long inside = 0;
  for (Eigen::Index i = 0; i < samples.cols(); ++i) {
    const int cell = spec.locate(samples.col(i));
    if (cell >= 0) {
      d.p[cell] += 1.0;
      ++inside;
    }
  }
  if (inside == 0) throw DegenerateDensityError("no sample fell inside the grid");
  if (out_frac_out_of_range != nullptr) {
    *out_frac_out_of_range = 1.0 - static_cast<double>(inside) / static_cast<double>(samples.cols());
  }
  d.p /= static_cast<double>(inside);
  return d;
}

double tv_distance(const GridDensity& p, const GridDensity& q) {
  if (p.p.size() != q.p.size()) throw ShapeError("tv_distance: misaligned grids");
  return 0.5 * (p.p - q.p).cwiseAbs().sum();
}

double kl_divergence(const GridDensity& p, const GridDensity& q, double smoothing) {
  if (p.p.size() != q.p.size()) throw ShapeError("kl_divergence: misaligned grids");
  Vector ps = p.p.array() + smoothing;
  ps /= ps.sum();
  double kl = 0.0;
  for (Eigen::Index i = 0; i < ps.size(); ++i) {
    if (ps[i] <= 0.0) continue;
    if (q.p[i] <= 0.0) return std::numeric_limits<double>::infinity();
    kl += ps[i] * std::log(ps[i] / q.p[i]);
  }
  return std::max(kl, 0.0);
}

GridDensity grid_target_density(const std::function<double(const Vector&)>& optimistic,
                                const GridDensity& prev, const GridDensity& pre, double alpha,
                                double beta) {
  if (prev.p.size() != pre.p.size()) throw ShapeError("grid_target_density: misaligned grids");
  if (!(alpha + beta > 0.0)) throw ConfigError("grid_target_density: alpha + beta must be positive");
  const GridSpec& spec = pre.spec;
  const double gamma = alpha + beta;
  const int n = spec.total_cells();
  Vector logs(n);
  for (int i = 0; i < n; ++i) {
    const double lp_prev = prev.p[i] > 0.0 ? std::log(prev.p[i]) : -std::numeric_limits<double>::infinity();
    const double lp_pre = pre.p[i] > 0.0 ? std::log(pre.p[i]) : -std::numeric_limits<double>::infinity();
    // guard 0 * (-inf) when one exponent vanishes
    double mix = 0.0;
    if (beta > 0.0) mix += beta * lp_prev;
    if (alpha > 0.0) mix += alpha * lp_pre;
    logs[i] = optimistic(spec.center(i)) / gamma + mix / gamma;
  }
  const double mx = logs.maxCoeff();
  if (!std::isfinite(mx)) throw DegenerateDensityError("product-form target has no mass on the grid");
  GridDensity d;
  d.spec = spec;
  d.p = (logs.array() - mx).exp();
  d.p /= d.p.sum();
  return d;
}

}  // namespace seiko::eval
