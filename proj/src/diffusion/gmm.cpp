#include "seiko/diffusion/gmm.hpp"

#include <Eigen/Cholesky>

#include <cmath>

namespace seiko::diffusion {

namespace {

constexpr double kLog2Pi = 1.8378770664093454836;

std::vector<Eigen::LLT<Matrix>> cholesky_all(const GmmSpec& gmm) {
  std::vector<Eigen::LLT<Matrix>> llts;
  llts.reserve(static_cast<std::size_t>(gmm.components()));
  for (const auto& cov : gmm.covariances) {
    Eigen::LLT<Matrix> llt(cov);
    if (llt.info() != Eigen::Success) throw ConfigError("gmm covariance is not SPD");
    llts.push_back(std::move(llt));
  }
  return llts;
}

}  // namespace

void GmmSpec::validate() const {
  if (weights.size() == 0) throw ConfigError("gmm has no components");
  if (static_cast<std::size_t>(weights.size()) != means.size() ||
      means.size() != covariances.size()) {
    throw ConfigError("gmm weights/means/covariances disagree in length");
  }
  if ((weights.array() < 0.0).any()) throw ConfigError("gmm weights must be nonnegative");
  if (std::abs(weights.sum() - 1.0) > 1e-12) throw ConfigError("gmm weights must sum to 1 (within 1e-12)");
  const int d = dim();
  for (const auto& m : means) {
    if (m.size() != d) throw ConfigError("gmm means disagree in dimension");
  }
  for (const auto& c : covariances) {
    if (c.rows() != d || c.cols() != d) throw ConfigError("gmm covariances disagree in dimension");
  }
  cholesky_all(*this);  // SPD check
}

GmmSpec GmmSpec::single(Vector mean, Matrix cov) {
  GmmSpec g;
  g.weights = Vector::Ones(1);
  g.means.push_back(std::move(mean));
  g.covariances.push_back(std::move(cov));
  return g;
}

GmmSpec GmmSpec::isotropic(std::vector<Vector> means, Vector weights, double variance) {
  GmmSpec g;
  g.weights = std::move(weights);
  const int d = means.empty() ? 0 : static_cast<int>(means.front().size());
  for (auto& m : means) {
    g.means.push_back(std::move(m));
    g.covariances.push_back(variance * Matrix::Identity(d, d));
  }
  return g;
}

double gmm_log_density(const GmmSpec& gmm, const Vector& x) {
  if (x.size() != gmm.dim()) throw ShapeError("gmm_log_density: dimension mismatch");
  const auto llts = cholesky_all(gmm);
  const int m = gmm.components();
  Vector logs(m);
  for (int k = 0; k < m; ++k) {
    const auto& llt = llts[static_cast<std::size_t>(k)];
    const Vector diff = x - gmm.means[static_cast<std::size_t>(k)];
    const Vector sol = llt.solve(diff);
    const double log_det = 2.0 * llt.matrixL().toDenseMatrix().diagonal().array().log().sum();
    const double w = gmm.weights[k];
    logs[k] = (w > 0.0 ? std::log(w) : -std::numeric_limits<double>::infinity()) -
              0.5 * (gmm.dim() * kLog2Pi + log_det + diff.dot(sol));
  }
  const double mx = logs.maxCoeff();
  if (!std::isfinite(mx)) return mx;
  return mx + std::log((logs.array() - mx).exp().sum());
}

Vector gmm_score(const GmmSpec& gmm, const Vector& x) {
  if (x.size() != gmm.dim()) throw ShapeError("gmm_score: dimension mismatch");
  const auto llts = cholesky_all(gmm);
  const int m = gmm.components();
  Vector logs(m);
  std::vector<Vector> u(static_cast<std::size_t>(m));
  for (int k = 0; k < m; ++k) {
    const auto& llt = llts[static_cast<std::size_t>(k)];
    const Vector diff = x - gmm.means[static_cast<std::size_t>(k)];
    const Vector sol = llt.solve(diff);
    const double log_det = 2.0 * llt.matrixL().toDenseMatrix().diagonal().array().log().sum();
    const double w = gmm.weights[k];
    logs[k] = (w > 0.0 ? std::log(w) : -std::numeric_limits<double>::infinity()) -
              0.5 * (gmm.dim() * kLog2Pi + log_det + diff.dot(sol));
    u[static_cast<std::size_t>(k)] = -sol;
  }
  const double mx = logs.maxCoeff();
  const Vector resp = (logs.array() - mx).exp() / (logs.array() - mx).exp().sum();
  Vector score = Vector::Zero(gmm.dim());
  for (int k = 0; k < m; ++k) score += resp[k] * u[static_cast<std::size_t>(k)];
  return score;
}

Matrix gmm_score_jacobian(const GmmSpec& gmm, const Vector& x) {
  if (x.size() != gmm.dim()) throw ShapeError("gmm_score_jacobian: dimension mismatch");
  const auto llts = cholesky_all(gmm);
  const int m = gmm.components();
  const int d = gmm.dim();
  Vector logs(m);
  std::vector<Vector> u(static_cast<std::size_t>(m));
  for (int k = 0; k < m; ++k) {
    const auto& llt = llts[static_cast<std::size_t>(k)];
    const Vector diff = x - gmm.means[static_cast<std::size_t>(k)];
    const Vector sol = llt.solve(diff);
    const double log_det = 2.0 * llt.matrixL().toDenseMatrix().diagonal().array().log().sum();
    const double w = gmm.weights[k];
    logs[k] = (w > 0.0 ? std::log(w) : -std::numeric_limits<double>::infinity()) -
              0.5 * (d * kLog2Pi + log_det + diff.dot(sol));
    u[static_cast<std::size_t>(k)] = -sol;
  }
  const double mx = logs.maxCoeff();
  const Vector resp = (logs.array() - mx).exp() / (logs.array() - mx).exp().sum();
  Vector score = Vector::Zero(d);
  for (int k = 0; k < m; ++k) score += resp[k] * u[static_cast<std::size_t>(k)];
  // H = sum_k r_k (u_k u_k^T - Sigma_k^{-1}) - s s^T
  Matrix hess = -score * score.transpose();
  for (int k = 0; k < m; ++k) {
    const auto& uk = u[static_cast<std::size_t>(k)];
    const Matrix prec = llts[static_cast<std::size_t>(k)].solve(Matrix::Identity(d, d));
    hess += resp[k] * (uk * uk.transpose() - prec);
  }
  return hess;
}

Vector gmm_sample(const GmmSpec& gmm, Rng& rng) {
  const auto llts = cholesky_all(gmm);
  const double r = rng.uniform();
  double acc = 0.0;
  int pick = gmm.components() - 1;
  for (int k = 0; k < gmm.components(); ++k) {
    acc += gmm.weights[k];
    if (r < acc) {
      pick = k;
      break;
    }
  }
  const Vector z = rng.normal_vector(gmm.dim());
  return gmm.means[static_cast<std::size_t>(pick)] +
         llts[static_cast<std::size_t>(pick)].matrixL() * z;
}

}  // namespace seiko::diffusion
