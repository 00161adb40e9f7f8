#include <doctest.h>

#include "seiko/grad/adam.hpp"
#include "seiko/grad/mlp.hpp"
#include "seiko/grad/tape.hpp"

#include <cmath>

using namespace seiko;
using namespace seiko::grad;

namespace {

// central finite differences of a scalar program, h = 1e-5 * max(1, |p|)
Vector finite_difference(const ParamVector& params,
                         const std::function<double(const ParamVector&)>& loss) {
  Vector g(params.values.size());
  ParamVector probe = params;
  for (Eigen::Index i = 0; i < params.values.size(); ++i) {
    const double h = 1e-5 * std::max(1.0, std::abs(params.values[i]));
    probe.values = params.values;
    probe.values[i] += h;
    const double up = loss(probe);
    probe.values[i] -= 2.0 * h;
    const double lo = loss(probe);
    g[i] = (up - lo) / (2.0 * h);
  }
  return g;
}

double max_rel_error(const Vector& got, const Vector& want) {
  double worst = 0.0;
  for (Eigen::Index i = 0; i < got.size(); ++i) {
    const double scale = std::max(1e-8, std::abs(want[i]));
    worst = std::max(worst, std::abs(got[i] - want[i]) / scale);
  }
  return worst;
}

}  // namespace

TEST_CASE("tape: d(p.p)/dp = 2p") {
  auto layout = ParamLayout::build({{"p", 1, 1, 0}});
  ParamVector pv = ParamVector::zeros(layout);
  pv.values[0] = 3.0;

  Tape tape;
  auto x = tape.constant(Vector::Zero(1));
  auto p = tape.affine(pv, 0, 0, x, true);  // W*0 + b, with W == b == p
  // use a clean single-parameter read instead: loss = sum(square(p-node))
  auto loss = tape.squared_norm(p);
  Vector g = tape.gradient(loss);
  // p enters twice (as W against zero input, and as bias): W*0 contributes 0,
  // bias contributes p, so d(p^2)/dp = 2p = 6 on the bias slot.
  CHECK(g[0] == doctest::Approx(6.0));
}

TEST_CASE("tape: constant loss has zero gradient") {
  auto layout = ParamLayout::build({{"W", 2, 2, 0}, {"b", 2, 1, 0}});
  ParamVector pv = ParamVector::zeros(layout);
  pv.values << 1.0, -2.0, 0.5, 0.25, 3.0, -1.0;

  ParamVector g = gradient_of(pv, [](Tape& tape, const ParamVector&) {
    auto c = tape.constant(Vector::Constant(3, 2.0));
    return tape.sum(tape.log(c));
  });
  CHECK(g.values.size() == pv.values.size());
  CHECK(g.values.cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("tape: primitive set matches finite differences") {
  auto layout = ParamLayout::build({{"W", 3, 2, 0}, {"b", 3, 1, 0}});
  ParamVector pv = ParamVector::zeros(layout);
  Rng rng(99);
  for (Eigen::Index i = 0; i < pv.values.size(); ++i) pv.values[i] = rng.uniform(-1.0, 1.0);

  auto program = [](Tape& tape, const ParamVector& p) {
    auto x = tape.constant((Vector(2) << 0.7, -0.3).finished());
    auto h = tape.affine(p, 0, 1, x, true);
    auto a = tape.activation(h, Activation::Silu);
    auto e = tape.exp(tape.scale(a, 0.5));
    auto l = tape.log(tape.add(e, tape.constant(Vector::Constant(3, 1.0))));
    auto m = tape.mul(l, tape.activation(h, Activation::Tanh));
    auto s = tape.sum(tape.square(m));
    auto mn = tape.min2(s, tape.constant(Vector::Constant(1, 100.0)));
    return mn;
  };

  ParamVector analytic = gradient_of(pv, [&](Tape& t, const ParamVector& p) { return program(t, p); });
  Vector fd = finite_difference(pv, [&](const ParamVector& p) {
    Tape t;
    return t.scalar(program(t, p));
  });
  CHECK(max_rel_error(analytic.values, fd) <= 1e-4);
}

TEST_CASE("tape: min2/max2 pick the attaining branch") {
  auto layout = ParamLayout::build({{"b", 1, 1, 0}});
  ParamVector pv = ParamVector::zeros(layout);
  pv.values[0] = 2.0;

  Tape tape;
  auto x = tape.constant(Vector::Zero(1));
  auto p = tape.affine(pv, 0, 0, x, true);
  auto lo = tape.constant(Vector::Constant(1, 1.0));
  auto clipped = tape.min2(p, lo);  // min(2, 1) = 1, gradient flows to the constant side
  Vector g = tape.gradient(clipped);
  CHECK(g[0] == doctest::Approx(0.0));

  Tape tape2;
  auto x2 = tape2.constant(Vector::Zero(1));
  auto p2 = tape2.affine(pv, 0, 0, x2, true);
  auto hi = tape2.constant(Vector::Constant(1, 5.0));
  auto kept = tape2.min2(p2, hi);  // min(2, 5) = 2
  Vector g2 = tape2.gradient(kept);
  CHECK(g2[0] == doctest::Approx(1.0));
}

TEST_CASE("tape: non-finite intermediate names the node") {
  Tape tape;
  auto c = tape.constant(Vector::Constant(1, -1.0));
  CHECK_THROWS_AS((void)tape.log(c), NumericError);
}

TEST_CASE("mlp_init: zero final layer, determinism, seed sensitivity") {
  MlpSpec spec;
  spec.layer_widths = {2, 8, 2};
  spec.activation = Activation::Tanh;

  ParamVector a = mlp_init(spec, 7);
  ParamVector b = mlp_init(spec, 7);
  ParamVector c = mlp_init(spec, 8);

  CHECK((a.values.array() == b.values.array()).all());

  const int w_last = a.layout.index_of("W1");
  const int b_last = a.layout.index_of("b1");
  CHECK(a.matrix(w_last).cwiseAbs().maxCoeff() == 0.0);
  CHECK(a.vector(b_last).cwiseAbs().maxCoeff() == 0.0);

  CHECK((a.matrix(a.layout.index_of("W0")).array() != c.matrix(c.layout.index_of("W0")).array()).any());

  Rng rng(123);
  for (int i = 0; i < 100; ++i) {
    Vector x = rng.normal_vector(2);
    const double t = rng.uniform();
    CHECK(mlp_eval(spec, a, t, x).cwiseAbs().maxCoeff() == 0.0);
  }
}

TEST_CASE("mlp_init rejects invalid specs") {
  MlpSpec spec;
  spec.layer_widths = {2, 0, 2};
  CHECK_THROWS_AS((void)mlp_init(spec, 1), ConfigError);
  spec.layer_widths = {2, 2};  // no hidden layer
  CHECK_THROWS_AS((void)mlp_init(spec, 1), ConfigError);
}

TEST_CASE("mlp_eval: purity and straight-line duplicate oracle") {
  MlpSpec spec;
  spec.layer_widths = {7, 5, 4, 2};
  spec.activation = Activation::Tanh;
  spec.time_embedding_dim = 4;

  ParamVector pv = mlp_init(spec, 21);
  // make the final layer non-zero so the oracle sees a real network
  Rng rng(5);
  auto W2 = pv.matrix(pv.layout.index_of("W2"));
  auto b2 = pv.vector(pv.layout.index_of("b2"));
  for (Eigen::Index j = 0; j < W2.cols(); ++j)
    for (Eigen::Index i = 0; i < W2.rows(); ++i) W2(i, j) = rng.uniform(-0.5, 0.5);
  for (Eigen::Index i = 0; i < b2.size(); ++i) b2[i] = rng.uniform(-0.5, 0.5);

  Vector x(3);
  x << 1.0, 0.0, -0.4;
  const double t = 0.5;

  Vector first = mlp_eval(spec, pv, t, x);
  Vector second = mlp_eval(spec, pv, t, x);
  CHECK((first.array() == second.array()).all());  // bitwise purity

  // independent straight-line re-implementation with raw loops
  std::vector<double> h;
  for (int i = 0; i < 3; ++i) h.push_back(x[i]);
  for (int k = 0; k < 2; ++k) {
    h.push_back(std::sin(std::ldexp(M_PI, k) * t));
    h.push_back(std::cos(std::ldexp(M_PI, k) * t));
  }
  const std::vector<int> widths = spec.layer_widths;
  for (int l = 0; l < 3; ++l) {
    const auto W = pv.matrix(pv.layout.index_of("W" + std::to_string(l)));
    const auto b = pv.vector(pv.layout.index_of("b" + std::to_string(l)));
    std::vector<double> next(static_cast<std::size_t>(widths[static_cast<std::size_t>(l) + 1]), 0.0);
    for (std::size_t i = 0; i < next.size(); ++i) {
      double acc = b[static_cast<Eigen::Index>(i)];
      for (std::size_t j = 0; j < h.size(); ++j) {
        acc += W(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) * h[j];
      }
      next[i] = (l == 2) ? acc : std::tanh(acc);
    }
    h = next;
  }
  for (int i = 0; i < 2; ++i) CHECK(first[i] == doctest::Approx(h[static_cast<std::size_t>(i)]).epsilon(1e-12));
}

TEST_CASE("mlp_eval rejects dimension mismatches") {
  MlpSpec spec;
  spec.layer_widths = {2, 4, 1};
  ParamVector pv = mlp_init(spec, 3);
  CHECK_THROWS_AS((void)mlp_eval(spec, pv, 0.0, Vector::Zero(3)), ShapeError);
}

TEST_CASE("mlp gradient vs finite differences") {
  MlpSpec spec;
  spec.layer_widths = {6, 8, 8, 1};
  spec.activation = Activation::Silu;
  spec.time_embedding_dim = 4;

  Rng rng(77);
  for (int trial = 0; trial < 5; ++trial) {
    ParamVector pv = mlp_init(spec, 100 + static_cast<std::uint64_t>(trial));
    for (Eigen::Index i = 0; i < pv.values.size(); ++i) pv.values[i] += 0.3 * rng.normal();
    Vector x = rng.normal_vector(2);
    const double t = rng.uniform();

    auto program = [&](Tape& tape, const ParamVector& p) {
      auto xin = tape.constant(x);
      auto out = mlp_forward(tape, spec, p, t, xin, true);
      return tape.squared_norm(out);
    };
    ParamVector analytic = gradient_of(pv, program);
    Vector fd = finite_difference(pv, [&](const ParamVector& p) {
      Tape tape;
      return tape.scalar(program(tape, p));
    });
    CHECK(max_rel_error(analytic.values, fd) <= 1e-4);
  }
}

TEST_CASE("adam: zero gradient is the identity") {
  auto layout = ParamLayout::build({{"p", 3, 1, 0}});
  ParamVector pv = ParamVector::zeros(layout);
  pv.values << 1.0, -2.0, 0.5;
  AdamState state = AdamState::init(3);
  const Vector before = pv.values;
  adam_step(pv, Vector::Zero(3), state);
  CHECK((pv.values.array() == before.array()).all());
  CHECK(state.first_moment.cwiseAbs().maxCoeff() == 0.0);
  CHECK(state.second_moment.cwiseAbs().maxCoeff() == 0.0);
  CHECK(state.step_count == 1);
}

TEST_CASE("adam: first-step bias correction gives a full step") {
  auto layout = ParamLayout::build({{"p", 1, 1, 0}});
  ParamVector pv = ParamVector::zeros(layout);
  AdamState state = AdamState::init(1, {0.1, 0.9, 0.999, 1e-8});
  adam_step(pv, Vector::Constant(1, 1.0), state, StepDirection::Descent);
  CHECK(pv.values[0] == doctest::Approx(-0.1 / (1.0 + 1e-8)).epsilon(1e-12));
}

TEST_CASE("adam: 200 descent steps on p^2 converge") {
  auto layout = ParamLayout::build({{"p", 1, 1, 0}});
  ParamVector pv = ParamVector::zeros(layout);
  pv.values[0] = 1.0;
  AdamState state = AdamState::init(1, {0.05, 0.9, 0.999, 1e-8});
  for (int i = 0; i < 200; ++i) {
    adam_step(pv, Vector::Constant(1, 2.0 * pv.values[0]), state, StepDirection::Descent);
  }
  CHECK(std::abs(pv.values[0]) < 0.05);
}

TEST_CASE("adam rejects mismatched shapes") {
  auto layout = ParamLayout::build({{"p", 2, 1, 0}});
  ParamVector pv = ParamVector::zeros(layout);
  AdamState state = AdamState::init(2);
  CHECK_THROWS_AS(adam_step(pv, Vector::Zero(3), state), ShapeError);
}
