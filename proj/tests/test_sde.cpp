#include <doctest.h>

#include "seiko/sde/engine.hpp"

#include <cmath>

using namespace seiko;
using namespace seiko::sde;
using diffusion::GmmSpec;
using diffusion::NoiseSchedule;
using diffusion::PretrainedModel;

namespace {

PretrainedModel pure_gaussian_1d() {
  return PretrainedModel::make(GmmSpec::single(Vector::Zero(1), Matrix::Identity(1, 1)), NoiseSchedule{});
}

// constant-rate schedule: the pure-Gaussian drift becomes the OU pull -b/2 x
NoiseSchedule constant_rate(double b0, int n_steps, std::optional<double> sigma_override = {}) {
  NoiseSchedule s;
  s.b_min = b0;
  s.b_max = b0;
  s.n_steps = n_steps;
  s.sigma_override = sigma_override;
  return s;
}

}  // namespace

TEST_CASE("simulate: no residuals means zero KL accumulators") {
  PretrainedModel model = pure_gaussian_1d();
  DriftStack stack(&model);
  auto trajs = simulate(stack, model.schedule, 32, 7);
  for (const auto& t : trajs) {
    CHECK(t.z_terminal() == 0.0);
    CHECK(t.kl_prev_terminal() == 0.0);
  }
}

TEST_CASE("simulate: constant residual gives the closed-form accumulator") {
  PretrainedModel model = pure_gaussian_1d();
  DriftStack stack(&model);
  stack.residuals.push_back(ResidualDrift::make_affine(Matrix::Zero(1, 1), Vector::Constant(1, 1.0)));
  NoiseSchedule sched = constant_rate(0.1, 50, 1.0);
  auto trajs = simulate(stack, sched, 16, 3);
  for (const auto& t : trajs) {
    CHECK(t.z_terminal() == doctest::Approx(0.5).epsilon(1e-12));          // c^2 T / (2 sigma0^2)
    CHECK(t.kl_prev_terminal() == doctest::Approx(0.5).epsilon(1e-12));    // single residual: same drift pair
  }
}

TEST_CASE("simulate: pure-Gaussian terminal moments") {
  PretrainedModel model = pure_gaussian_1d();
  DriftStack stack(&model);
  const int n = 100000;
  Matrix xs = sample_terminal(stack, model.schedule, n, 12345);
  const double mean = xs.row(0).mean();
  const double var = (xs.row(0).array() - mean).square().sum() / (n - 1);
  const double se = std::sqrt(var / n);
  CHECK(std::abs(mean) <= 3.0 * se);
  CHECK(var == doctest::Approx(1.0).epsilon(0.02));
}

TEST_CASE("simulate: bitwise deterministic across runs and thread widths") {
  NoiseSchedule sched;
  GmmSpec g;
  g.weights = (Vector(2) << 0.5, 0.5).finished();
  g.means = {Vector::Constant(1, -1.0), Vector::Constant(1, 1.0)};
  g.covariances = {Matrix::Constant(1, 1, 0.25), Matrix::Constant(1, 1, 0.25)};
  PretrainedModel model = PretrainedModel::make(g, sched);
  DriftStack stack(&model);

  SimOptions one;
  one.n_threads = 1;
  SimOptions four;
  four.n_threads = 4;
  auto a = simulate(stack, sched, 64, 99, one);
  auto b = simulate(stack, sched, 64, 99, four);
  auto c = simulate(stack, sched, 64, 99, one);
  REQUIRE(a.size() == b.size());
  for (std::size_t i = 0; i < a.size(); ++i) {
    CHECK((a[i].states.array() == b[i].states.array()).all());
    CHECK((a[i].states.array() == c[i].states.array()).all());
    CHECK(a[i].z_terminal() >= 0.0);
    CHECK(a[i].kl_prev_terminal() >= 0.0);
  }
}

TEST_CASE("pathwise_kl: no residuals, constant shift, and the OU oracle") {
  PretrainedModel model = pure_gaussian_1d();
  DriftStack stack(&model);
  auto plain = simulate(stack, model.schedule, 8, 1);
  auto [a1_plain, a2_plain] = pathwise_kl(plain);
  CHECK(a1_plain == 0.0);
  CHECK(a2_plain == 0.0);

  // constant shift: A1 = c^2 T / (2 sigma0^2) = 0.5
  DriftStack shifted(&model);
  shifted.residuals.push_back(ResidualDrift::make_affine(Matrix::Zero(1, 1), Vector::Constant(1, 1.0)));
  NoiseSchedule sched = constant_rate(0.1, 50, 1.0);
  auto [a1_shift, a2_shift] = pathwise_kl(simulate(shifted, sched, 64, 2));
  CHECK(a1_shift == doctest::Approx(0.5).epsilon(1e-12));
  CHECK(a2_shift == doctest::Approx(0.5).epsilon(1e-12));

  // OU vs OU: base rate a1 = b0/2, residual (a1 - a2) x makes the simulated
  // process an OU with rate a2; the analytic path KL follows the discrete
  // variance recursion of the simulated chain.
  const double b0 = 1.0;
  const double rate1 = b0 / 2.0;
  const double rate2 = 1.2;
  PretrainedModel ou_model =
      PretrainedModel::make(GmmSpec::single(Vector::Zero(1), Matrix::Identity(1, 1)), constant_rate(b0, 50, 1.0));
  DriftStack ou(&ou_model);
  ou.residuals.push_back(
      ResidualDrift::make_affine(Matrix::Constant(1, 1, rate1 - rate2), Vector::Zero(1)));
  NoiseSchedule ou_sched = constant_rate(b0, 50, 1.0);

  const int n = 20000;
  auto trajs = simulate(ou, ou_sched, n, 77);
  auto [a1_est, a2_est] = pathwise_kl(trajs);

  const double dt = ou_sched.dt();
  double expectation = 0.0;
  double v = 1.0;  // x0 ~ N(0, 1)
  for (int k = 0; k < ou_sched.n_steps; ++k) {
    expectation += (rate1 - rate2) * (rate1 - rate2) * v / 2.0 * dt;
    v = (1.0 - rate2 * dt) * (1.0 - rate2 * dt) * v + dt;
  }
  double sq = 0.0;
  for (const auto& t : trajs) sq += (t.z_terminal() - a1_est) * (t.z_terminal() - a1_est);
  const double se = std::sqrt(sq / (n - 1) / n);
  CHECK(std::abs(a1_est - expectation) <= 3.0 * se);
  CHECK(a2_est == doctest::Approx(a1_est).epsilon(1e-12));  // single residual: A1 == A2 pathwise
}

TEST_CASE("differentiable_rollout: zero-init residual contributes no KL, gradient exists") {
  PretrainedModel model = pure_gaussian_1d();
  DriftStack stack(&model);
  grad::MlpSpec spec;
  spec.layer_widths = {9, 16, 1};
  spec.time_embedding_dim = 8;
  stack.residuals.push_back(ResidualDrift::make_mlp(spec, 11));
  stack.active_trainable = 0;

  LinearTerminal terminal;
  terminal.direction = Vector::Ones(1);
  auto result = differentiable_rollout(stack, model.schedule, 16, 5, terminal, 0.01, 0.01);
  CHECK(result.mean_z == 0.0);
  CHECK(result.mean_kl_prev == 0.0);
  CHECK(result.gradient.size() == stack.active().params.values.size());
  CHECK(result.gradient.cwiseAbs().maxCoeff() > 0.0);
}

TEST_CASE("differentiable_rollout: trainable constant accumulates linearly") {
  // near-zero rate makes the base drift state-independent, so dx_T/dc = T
  PretrainedModel model = PretrainedModel::make(GmmSpec::single(Vector::Zero(1), Matrix::Identity(1, 1)),
                                                constant_rate(1e-12, 50, 1.0));
  DriftStack stack(&model);
  stack.residuals.push_back(ResidualDrift::make_affine(Matrix::Zero(1, 1), Vector::Zero(1)));
  stack.active_trainable = 0;

  LinearTerminal terminal;
  terminal.direction = Vector::Ones(1);
  auto result = differentiable_rollout(stack, constant_rate(1e-12, 50, 1.0), 4, 9, terminal, 0.0, 0.0);
  // layout is [A, c]; the bias slot accumulates exactly the horizon
  CHECK(result.gradient[1] == doctest::Approx(1.0).epsilon(1e-9));
}

TEST_CASE("differentiable_rollout gradient matches finite differences") {
  NoiseSchedule sched;
  sched.n_steps = 20;
  GmmSpec g;
  g.weights = (Vector(2) << 0.5, 0.5).finished();
  g.means = {Vector::Constant(1, -1.0), Vector::Constant(1, 1.0)};
  g.covariances = {Matrix::Constant(1, 1, 0.25), Matrix::Constant(1, 1, 0.25)};
  PretrainedModel model = PretrainedModel::make(g, sched);

  DriftStack stack(&model);
  grad::MlpSpec spec;
  spec.layer_widths = {3, 4, 1};
  spec.time_embedding_dim = 2;
  stack.residuals.push_back(ResidualDrift::make_mlp(spec, 13));
  // random warm start so the residual is active
  Rng rng(3);
  for (Eigen::Index i = 0; i < stack.residuals[0].params.values.size(); ++i) {
    stack.residuals[0].params.values[i] += 0.2 * rng.normal();
  }
  stack.active_trainable = 0;

  LinearTerminal terminal;
  terminal.direction = Vector::Ones(1);
  const double alpha = 0.05;
  const double beta = 0.02;
  const int n = 8;
  const std::uint64_t seed = 4242;

  auto res = differentiable_rollout(stack, sched, n, seed, terminal, alpha, beta);
  Vector fd(res.gradient.size());
  for (Eigen::Index i = 0; i < fd.size(); ++i) {
    const double h = 1e-5 * std::max(1.0, std::abs(stack.residuals[0].params.values[i]));
    const double orig = stack.residuals[0].params.values[i];
    stack.residuals[0].params.values[i] = orig + h;
    const double up = rollout_objective(stack, sched, n, seed, terminal, alpha, beta).objective;
    stack.residuals[0].params.values[i] = orig - h;
    const double lo = rollout_objective(stack, sched, n, seed, terminal, alpha, beta).objective;
    stack.residuals[0].params.values[i] = orig;
    fd[i] = (up - lo) / (2.0 * h);
  }
  for (Eigen::Index i = 0; i < fd.size(); ++i) {
    CHECK(std::abs(res.gradient[i] - fd[i]) / std::max(1e-6, std::abs(fd[i])) <= 1e-3);
  }
}

TEST_CASE("doubling the step count barely moves the terminal mean") {
  PretrainedModel model = pure_gaussian_1d();
  DriftStack stack(&model);
  NoiseSchedule coarse = model.schedule;
  NoiseSchedule fine = model.schedule;
  fine.n_steps = 100;
  const int n = 50000;
  const double mean50 = sample_terminal(stack, coarse, n, 31).row(0).mean();
  const double mean100 = sample_terminal(stack, fine, n, 32).row(0).mean();
  CHECK(std::abs(mean50 - mean100) < 0.02);
}

TEST_CASE("simulate flags blow-ups with the failing step") {
  PretrainedModel model = pure_gaussian_1d();
  DriftStack stack(&model);
  stack.residuals.push_back(
      ResidualDrift::make_affine(Matrix::Constant(1, 1, 1e6), Vector::Constant(1, 1e6)));
  CHECK_THROWS_AS((void)simulate(stack, model.schedule, 2, 1), SimulationError);
}
