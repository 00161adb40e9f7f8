#include "seiko/reward/features.hpp"

#include <cmath>

namespace seiko::reward {

void FeatureMap::build() {
  if (input_dim < 1) throw ConfigError("feature map input dimension must be positive");
  if (dim < 1) throw ConfigError("feature map dimension must be positive");
  if (!(norm_bound > 0.0)) throw ConfigError("feature norm bound must be positive");
  if (!(lengthscale > 0.0)) throw ConfigError("feature lengthscale must be positive");

  if (kind == Kind::RandomFourier) {
    const int random = dim - (constant_feature ? 1 : 0);
    if (random < 1) throw ConfigError("feature map needs at least one random feature");
    Rng rng(seed_hash(seed, 0x726666 /*"rff"*/));
    omega_.resize(random, input_dim);
    phase_.resize(random);
    for (int i = 0; i < random; ++i) {
      for (int j = 0; j < input_dim; ++j) omega_(i, j) = rng.normal() / lengthscale;
      phase_[i] = rng.uniform(0.0, 2.0 * M_PI);
    }
  } else {
    if (degree < 1) throw ConfigError("polynomial degree must be positive");
    exponents_.clear();
    // all exponent tuples with total degree in [constant_feature ? 0 : 1, degree]
    std::vector<int> tuple(static_cast<std::size_t>(input_dim), 0);
    std::function<void(int, int)> emit = [&](int pos, int remaining) {
      if (pos == input_dim) {
        int total = 0;
        for (int e : tuple) total += e;
        if (total > 0 || constant_feature) exponents_.push_back(tuple);
        return;
      }
      for (int e = 0; e <= remaining; ++e) {
        tuple[static_cast<std::size_t>(pos)] = e;
        emit(pos + 1, remaining - e);
      }
      tuple[static_cast<std::size_t>(pos)] = 0;
    };
    emit(0, degree);
    dim = static_cast<int>(exponents_.size());
  }
  built_ = true;
}

Vector FeatureMap::phi(const Vector& x) const {
  if (!built_) throw ConfigError("feature map used before build()");
  if (x.size() != input_dim) throw ShapeError("feature map: input dimension mismatch");
  Vector f(dim);
  const double scale = norm_bound / std::sqrt(static_cast<double>(dim));
  if (kind == Kind::RandomFourier) {
    int base = 0;
    if (constant_feature) {
      f[0] = scale;
      base = 1;
    }
    const Vector arg = omega_ * x + phase_;
    for (Eigen::Index i = 0; i < arg.size(); ++i) f[base + i] = scale * std::cos(arg[i]);
  } else {
    const Eigen::ArrayXd squashed = (x.array() / lengthscale).tanh();
    for (int i = 0; i < dim; ++i) {
      double v = 1.0;
      for (int j = 0; j < input_dim; ++j) {
        v *= std::pow(squashed[j], exponents_[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)]);
      }
      f[i] = scale * v;
    }
  }
  return f;
}

Matrix FeatureMap::phi_jacobian(const Vector& x) const {
  if (!built_) throw ConfigError("feature map used before build()");
  if (x.size() != input_dim) throw ShapeError("feature map: input dimension mismatch");
  Matrix jac = Matrix::Zero(dim, input_dim);
  const double scale = norm_bound / std::sqrt(static_cast<double>(dim));
  if (kind == Kind::RandomFourier) {
    const int base = constant_feature ? 1 : 0;
    const Vector arg = omega_ * x + phase_;
    for (Eigen::Index i = 0; i < arg.size(); ++i) {
      jac.row(base + i) = -scale * std::sin(arg[i]) * omega_.row(i);
    }
  } else {
    const Eigen::ArrayXd squashed = (x.array() / lengthscale).tanh();
    const Eigen::ArrayXd dsquash = (1.0 - squashed.square()) / lengthscale;
    for (int i = 0; i < dim; ++i) {
      const auto& exps = exponents_[static_cast<std::size_t>(i)];
      for (int j = 0; j < input_dim; ++j) {
        if (exps[static_cast<std::size_t>(j)] == 0) continue;
        double v = scale * exps[static_cast<std::size_t>(j)] *
                   std::pow(squashed[j], exps[static_cast<std::size_t>(j)] - 1) * dsquash[j];
        for (int k = 0; k < input_dim; ++k) {
          if (k == j) continue;
          v *= std::pow(squashed[k], exps[static_cast<std::size_t>(k)]);
        }
        jac(i, j) = v;
      }
    }
  }
  return jac;
}

}  // namespace seiko::reward
