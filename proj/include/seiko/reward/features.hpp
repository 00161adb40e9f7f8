#pragma once

#include "seiko/common.hpp"

namespace seiko::reward {

// Deterministic feature map with a hard norm bound ||phi(x)|| <= norm_bound.
//
// random_fourier: phi_j(x) = (B/sqrt(D)) cos(omega_j . x + b_j), omega ~
// N(0, I / lengthscale^2). polynomial: monomials of tanh(x / lengthscale) up
// to the configured degree, scaled by B/sqrt(D) (the squash keeps the bound
// exact on an unbounded domain). An optional leading constant feature makes
// affine targets representable.
struct FeatureMap {
  enum class Kind { RandomFourier, Polynomial };

  Kind kind = Kind::RandomFourier;
  int input_dim = 1;
  int dim = 64;
  double norm_bound = 1.0;
  double lengthscale = 1.0;
  int degree = 3;  // polynomial only
  bool constant_feature = true;
  std::uint64_t seed = 0;

  void build();  // derive frequencies/phases; must be called before use
  bool built() const { return built_; }

  Vector phi(const Vector& x) const;
  // Jacobian d phi / d x, dim x input_dim
  Matrix phi_jacobian(const Vector& x) const;

 private:
  Matrix omega_;  // dim x input_dim
  Vector phase_;
  std::vector<std::vector<int>> exponents_;  // polynomial exponent tuples
  bool built_ = false;
};

}  // namespace seiko::reward
