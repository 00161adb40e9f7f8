#include <doctest.h>

#include "seiko/diffusion/pretrained.hpp"

#include <cmath>

using namespace seiko;
using namespace seiko::diffusion;

namespace {

GmmSpec two_component_1d() {
  GmmSpec g;
  g.weights = (Vector(2) << 0.3, 0.7).finished();
  g.means = {Vector::Constant(1, -1.0), Vector::Constant(1, 1.5)};
  g.covariances = {Matrix::Constant(1, 1, 0.4), Matrix::Constant(1, 1, 0.2)};
  return g;
}

}  // namespace

TEST_CASE("gmm_log_density: standard normal at the origin") {
  GmmSpec g = GmmSpec::single(Vector::Zero(1), Matrix::Identity(1, 1));
  CHECK(gmm_log_density(g, Vector::Zero(1)) == doctest::Approx(-0.5 * std::log(2.0 * M_PI)).epsilon(1e-12));
}

TEST_CASE("gmm_log_density: invariant under component permutation") {
  GmmSpec g = two_component_1d();
  GmmSpec swapped;
  swapped.weights = (Vector(2) << 0.7, 0.3).finished();
  swapped.means = {g.means[1], g.means[0]};
  swapped.covariances = {g.covariances[1], g.covariances[0]};
  Rng rng(17);
  for (int i = 0; i < 20; ++i) {
    Vector x = Vector::Constant(1, rng.uniform(-4.0, 4.0));
    CHECK(gmm_log_density(g, x) == doctest::Approx(gmm_log_density(swapped, x)).epsilon(1e-13));
  }
}

TEST_CASE("gmm_log_density: direct summation oracle for a 1D mixture") {
  GmmSpec g = two_component_1d();
  Rng rng(29);
  for (int i = 0; i < 30; ++i) {
    const double x = rng.uniform(-4.0, 4.0);
    double direct = 0.0;
    for (int k = 0; k < 2; ++k) {
      const double var = g.covariances[static_cast<std::size_t>(k)](0, 0);
      const double diff = x - g.means[static_cast<std::size_t>(k)][0];
      direct += g.weights[k] * std::exp(-0.5 * diff * diff / var) / std::sqrt(2.0 * M_PI * var);
    }
    CHECK(gmm_log_density(g, Vector::Constant(1, x)) == doctest::Approx(std::log(direct)).epsilon(1e-10));
  }
}

TEST_CASE("gmm_log_density rejects a non-SPD covariance") {
  GmmSpec g;
  g.weights = Vector::Ones(1);
  g.means = {Vector::Zero(2)};
  g.covariances = {(Matrix(2, 2) << 1.0, 2.0, 2.0, 1.0).finished()};  // indefinite
  CHECK_THROWS_AS(g.validate(), ConfigError);
}

TEST_CASE("gmm_score: unit Gaussian and symmetric mixture") {
  GmmSpec g = GmmSpec::single(Vector::Zero(1), Matrix::Identity(1, 1));
  CHECK(gmm_score(g, Vector::Constant(1, 2.0))[0] == doctest::Approx(-2.0));

  GmmSpec sym;
  sym.weights = (Vector(2) << 0.5, 0.5).finished();
  sym.means = {Vector::Constant(1, -0.8), Vector::Constant(1, 0.8)};
  sym.covariances = {Matrix::Constant(1, 1, 0.3), Matrix::Constant(1, 1, 0.3)};
  CHECK(gmm_score(sym, Vector::Zero(1))[0] == doctest::Approx(0.0).epsilon(1e-14));
}

TEST_CASE("gmm_score matches finite differences of the log density") {
  GmmSpec g;
  g.weights = (Vector(2) << 0.4, 0.6).finished();
  g.means = {(Vector(2) << -1.0, 0.5).finished(), (Vector(2) << 1.2, -0.3).finished()};
  g.covariances = {(Matrix(2, 2) << 0.5, 0.1, 0.1, 0.3).finished(),
                   (Matrix(2, 2) << 0.4, -0.05, -0.05, 0.6).finished()};
  Rng rng(31);
  for (int i = 0; i < 100; ++i) {
    Vector x = rng.normal_vector(2) * 1.5;
    const Vector s = gmm_score(g, x);
    for (int j = 0; j < 2; ++j) {
      const double h = 1e-5;
      Vector xp = x, xm = x;
      xp[j] += h;
      xm[j] -= h;
      const double fd = (gmm_log_density(g, xp) - gmm_log_density(g, xm)) / (2.0 * h);
      CHECK(std::abs(s[j] - fd) / std::max(1e-6, std::abs(fd)) <= 1e-6);
    }
  }
}

TEST_CASE("gmm_score_jacobian matches finite differences of the score") {
  GmmSpec g = two_component_1d();
  Rng rng(41);
  for (int i = 0; i < 50; ++i) {
    Vector x = Vector::Constant(1, rng.uniform(-3.0, 3.0));
    const Matrix jac = gmm_score_jacobian(g, x);
    const double h = 1e-6;
    const double fd = (gmm_score(g, Vector::Constant(1, x[0] + h))[0] -
                       gmm_score(g, Vector::Constant(1, x[0] - h))[0]) /
                      (2.0 * h);
    CHECK(jac(0, 0) == doctest::Approx(fd).epsilon(1e-5));
  }
}

TEST_CASE("diffused_gmm: identity at s=0, variance preservation, terminal limit") {
  NoiseSchedule sched;
  sched.validate();

  GmmSpec g = two_component_1d();
  GmmSpec at0 = diffused_gmm(g, sched, 0.0);
  CHECK(at0.means[0][0] == doctest::Approx(g.means[0][0]).epsilon(1e-15));
  CHECK(at0.covariances[1](0, 0) == doctest::Approx(g.covariances[1](0, 0)).epsilon(1e-15));

  GmmSpec unit = GmmSpec::single(Vector::Zero(1), Matrix::Identity(1, 1));
  for (double s : {0.1, 0.33, 0.7, 1.0}) {
    GmmSpec noised = diffused_gmm(unit, sched, s);
    CHECK(noised.covariances[0](0, 0) == doctest::Approx(1.0).epsilon(1e-14));
  }

  // alpha_bar(T) = exp(-(b_min + b_max)/2 * T) = exp(-10.05)
  CHECK(sched.alpha_bar(1.0) == doctest::Approx(std::exp(-10.05)).epsilon(1e-12));
  GmmSpec atT = diffused_gmm(g, sched, 1.0);
  CHECK(atT.means[1][0] == doctest::Approx(std::sqrt(std::exp(-10.05)) * 1.5).epsilon(1e-12));
  CHECK(std::abs(atT.covariances[0](0, 0) - 1.0) < 1e-4);

  CHECK_THROWS_AS((void)diffused_gmm(g, sched, 1.5), DomainError);
}

TEST_CASE("diffused_gmm: mean norms non-increasing, covariances stay SPD") {
  NoiseSchedule sched;
  GmmSpec g;
  g.weights = (Vector(2) << 0.5, 0.5).finished();
  g.means = {(Vector(2) << 2.0, -1.0).finished(), (Vector(2) << -0.5, 1.5).finished()};
  g.covariances = {(Matrix(2, 2) << 0.5, 0.2, 0.2, 0.4).finished(),
                   (Matrix(2, 2) << 0.9, -0.3, -0.3, 0.7).finished()};
  double prev_norm = std::numeric_limits<double>::infinity();
  for (double s = 0.0; s <= 1.0; s += 0.1) {
    GmmSpec noised = diffused_gmm(g, sched, s);
    const double norm = noised.means[0].norm() + noised.means[1].norm();
    CHECK(norm <= prev_norm + 1e-12);
    prev_norm = norm;
    for (const auto& cov : noised.covariances) {
      Eigen::LLT<Matrix> llt(cov);
      CHECK(llt.info() == Eigen::Success);
    }
  }
}

TEST_CASE("pretrained drift: pure Gaussian reduces to an OU pull") {
  NoiseSchedule sched;
  PretrainedModel model = PretrainedModel::make(GmmSpec::single(Vector::Zero(1), Matrix::Identity(1, 1)), sched);
  Rng rng(55);
  for (int i = 0; i < 25; ++i) {
    const double t = rng.uniform(0.0, 1.0);
    const double x = rng.uniform(-3.0, 3.0);
    const double b = sched.rate(1.0 - t);
    CHECK(model.drift(t, Vector::Constant(1, x))[0] == doctest::Approx(-0.5 * b * x).epsilon(1e-10));
  }
  CHECK_THROWS_AS((void)model.drift(1.2, Vector::Zero(1)), DomainError);
}

TEST_CASE("pretrained drift at t=T uses the exact data score") {
  NoiseSchedule sched;
  GmmSpec g = two_component_1d();
  PretrainedModel model = PretrainedModel::make(g, sched);
  const Vector x = Vector::Constant(1, 0.4);
  const double b = sched.rate(0.0);
  const Vector expected = 0.5 * b * x + b * gmm_score(g, x);
  CHECK(model.drift(1.0, x)[0] == doctest::Approx(expected[0]).epsilon(1e-12));
}

TEST_CASE("pretrained drift jacobian matches finite differences") {
  NoiseSchedule sched;
  PretrainedModel model = PretrainedModel::make(two_component_1d(), sched);
  Rng rng(91);
  for (int i = 0; i < 20; ++i) {
    const double t = rng.uniform(0.0, 1.0);
    const double x = rng.uniform(-2.5, 2.5);
    const double h = 1e-6;
    const double fd =
        (model.drift(t, Vector::Constant(1, x + h))[0] - model.drift(t, Vector::Constant(1, x - h))[0]) /
        (2.0 * h);
    CHECK(model.drift_jacobian(t, Vector::Constant(1, x))(0, 0) == doctest::Approx(fd).epsilon(1e-5));
  }
}

TEST_CASE("feasibility super-level set covers the bulk and excludes far tails") {
  NoiseSchedule sched;
  PretrainedModel model = PretrainedModel::make(two_component_1d(), sched, 1e-4);
  CHECK(model.feasible(Vector::Constant(1, 1.5)));
  CHECK(model.feasible(Vector::Constant(1, -1.0)));
  CHECK_FALSE(model.feasible(Vector::Constant(1, 30.0)));
}
