#include "seiko/diffusion/pretrained.hpp"

#include <cmath>

namespace seiko::diffusion {

GmmSpec diffused_gmm(const GmmSpec& gmm, const NoiseSchedule& schedule, double s) {
  if (s < 0.0 || s > schedule.horizon) throw DomainError("diffused_gmm: forward time outside [0, T]");
  const double a = schedule.alpha_bar(s);
  const double sqrt_a = std::sqrt(a);
  const int d = gmm.dim();
  GmmSpec out;
  out.weights = gmm.weights;
  out.means.reserve(gmm.means.size());
  out.covariances.reserve(gmm.covariances.size());
  for (std::size_t k = 0; k < gmm.means.size(); ++k) {
    out.means.push_back(sqrt_a * gmm.means[k]);
    out.covariances.push_back(a * gmm.covariances[k] + (1.0 - a) * Matrix::Identity(d, d));
  }
  return out;
}

PretrainedModel PretrainedModel::make(GmmSpec gmm, NoiseSchedule schedule, double eps_feas) {
  gmm.validate();
  schedule.validate();
  if (!(eps_feas > 0.0) || eps_feas >= 1.0) throw ConfigError("eps_feas must lie in (0, 1)");
  PretrainedModel m;
  m.gmm = std::move(gmm);
  m.schedule = schedule;
  m.eps_feas = eps_feas;

  // deterministic scan of the data density over a box covering all components
  const int d = m.gmm.dim();
  if (d > 2) throw ConfigError("feasibility scan supports state dimension <= 2");
  m.domain_lo_ = Vector::Constant(d, std::numeric_limits<double>::infinity());
  m.domain_hi_ = Vector::Constant(d, -std::numeric_limits<double>::infinity());
  for (std::size_t k = 0; k < m.gmm.means.size(); ++k) {
    const Vector& mu = m.gmm.means[k];
    const double spread = 8.0 * std::sqrt(m.gmm.covariances[k].eigenvalues().real().maxCoeff());
    for (int j = 0; j < d; ++j) {
      m.domain_lo_[j] = std::min(m.domain_lo_[j], mu[j] - spread);
      m.domain_hi_[j] = std::max(m.domain_hi_[j], mu[j] + spread);
    }
  }
  double best = -std::numeric_limits<double>::infinity();
  if (d == 1) {
    const int cells = 4096;
    for (int i = 0; i < cells; ++i) {
      Vector x(1);
      x[0] = m.domain_lo_[0] + (i + 0.5) * (m.domain_hi_[0] - m.domain_lo_[0]) / cells;
      best = std::max(best, gmm_log_density(m.gmm, x));
    }
  } else {
    const int cells = 512;
    for (int i = 0; i < cells; ++i) {
      for (int j = 0; j < cells; ++j) {
        Vector x(2);
        x[0] = m.domain_lo_[0] + (i + 0.5) * (m.domain_hi_[0] - m.domain_lo_[0]) / cells;
        x[1] = m.domain_lo_[1] + (j + 0.5) * (m.domain_hi_[1] - m.domain_lo_[1]) / cells;
        best = std::max(best, gmm_log_density(m.gmm, x));
      }
    }
  }
  // component means are candidate modes too
  for (const auto& mu : m.gmm.means) best = std::max(best, gmm_log_density(m.gmm, mu));
  m.max_density_ = std::exp(best);
  return m;
}

Vector PretrainedModel::drift(double t, const Vector& x) const {
  if (t < 0.0 || t > schedule.horizon) throw DomainError("pretrained drift: time outside [0, T]");
  const double s = schedule.horizon - t;
  const double b = schedule.rate(s);
  const GmmSpec noised = diffused_gmm(gmm, schedule, s);
  return 0.5 * b * x + b * gmm_score(noised, x);
}

Matrix PretrainedModel::drift_jacobian(double t, const Vector& x) const {
  if (t < 0.0 || t > schedule.horizon) throw DomainError("pretrained drift: time outside [0, T]");
  const double s = schedule.horizon - t;
  const double b = schedule.rate(s);
  const GmmSpec noised = diffused_gmm(gmm, schedule, s);
  return 0.5 * b * Matrix::Identity(x.size(), x.size()) + b * gmm_score_jacobian(noised, x);
}

bool PretrainedModel::feasible(const Vector& x) const {
  return std::exp(gmm_log_density(gmm, x)) >= feasibility_threshold();
}

DriftGrid::DriftGrid(const PretrainedModel& model, const NoiseSchedule& schedule) {
  schedule.validate();
  constexpr double kLog2Pi = 1.8378770664093454836;
  layers_.reserve(static_cast<std::size_t>(schedule.n_steps) + 1);
  for (int k = 0; k <= schedule.n_steps; ++k) {
    const double t = schedule.grid_time(k);
    const double s = schedule.horizon - t;
    const GmmSpec noised = diffused_gmm(model.gmm, model.schedule, s);
    Layer layer;
    layer.rate = model.schedule.rate(s);
    layer.sigma2 = schedule.sigma2(t);
    for (int c = 0; c < noised.components(); ++c) {
      Eigen::LLT<Matrix> llt(noised.covariances[static_cast<std::size_t>(c)]);
      if (llt.info() != Eigen::Success) throw ConfigError("diffused covariance is not SPD");
      const int d = noised.dim();
      Component comp;
      comp.mean = noised.means[static_cast<std::size_t>(c)];
      comp.precision = llt.solve(Matrix::Identity(d, d));
      const double log_det = 2.0 * llt.matrixL().toDenseMatrix().diagonal().array().log().sum();
      comp.log_norm = std::log(noised.weights[c]) - 0.5 * (d * kLog2Pi + log_det);
      layer.components.push_back(std::move(comp));
    }
    layers_.push_back(std::move(layer));
  }
}

void DriftGrid::score_and_responsibilities(const Layer& layer, const Vector& x, Vector& score,
                                           std::vector<Vector>& u, Vector& resp) const {
  const int m = static_cast<int>(layer.components.size());
  Vector logs(m);
  u.resize(static_cast<std::size_t>(m));
  for (int k = 0; k < m; ++k) {
    const Component& c = layer.components[static_cast<std::size_t>(k)];
    const Vector diff = x - c.mean;
    u[static_cast<std::size_t>(k)] = -(c.precision * diff);
    logs[k] = c.log_norm + 0.5 * diff.dot(u[static_cast<std::size_t>(k)]);
  }
  const double mx = logs.maxCoeff();
  resp = (logs.array() - mx).exp();
  resp /= resp.sum();
  score = Vector::Zero(x.size());
  for (int k = 0; k < m; ++k) score += resp[k] * u[static_cast<std::size_t>(k)];
}

Vector DriftGrid::drift(int step, const Vector& x) const {
  const Layer& layer = layers_[static_cast<std::size_t>(step)];
  Vector score, resp;
  std::vector<Vector> u;
  score_and_responsibilities(layer, x, score, u, resp);
  return 0.5 * layer.rate * x + layer.rate * score;
}

Matrix DriftGrid::drift_jacobian(int step, const Vector& x) const {
  const Layer& layer = layers_[static_cast<std::size_t>(step)];
  Vector score, resp;
  std::vector<Vector> u;
  score_and_responsibilities(layer, x, score, u, resp);
  Matrix hess = -score * score.transpose();
  for (std::size_t k = 0; k < layer.components.size(); ++k) {
    const auto& uk = u[k];
    hess += resp[static_cast<Eigen::Index>(k)] * (uk * uk.transpose() - layer.components[k].precision);
  }
  const double b = layer.rate;
  return 0.5 * b * Matrix::Identity(x.size(), x.size()) + b * hess;
}

}  // namespace seiko::diffusion
