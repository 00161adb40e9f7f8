#include "seiko/grad/adam.hpp"

#include <cmath>

namespace seiko::grad {

AdamState AdamState::init(Eigen::Index n, AdamHyper hyper) {
  AdamState s;
  s.first_moment = Vector::Zero(n);
  s.second_moment = Vector::Zero(n);
  s.step_count = 0;
  s.hyper = hyper;
  return s;
}

void adam_step(ParamVector& params, const Vector& grad, AdamState& state, StepDirection direction) {
  if (grad.size() != params.values.size() || grad.size() != state.first_moment.size()) {
    throw ShapeError("adam_step: gradient/state size mismatch");
  }
  const AdamHyper& h = state.hyper;
  state.step_count += 1;
  state.first_moment = h.beta1 * state.first_moment + (1.0 - h.beta1) * grad;
  state.second_moment = h.beta2 * state.second_moment.array() + (1.0 - h.beta2) * grad.array().square();
  const double m_corr = 1.0 - std::pow(h.beta1, static_cast<double>(state.step_count));
  const double v_corr = 1.0 - std::pow(h.beta2, static_cast<double>(state.step_count));
  const Vector m_hat = state.first_moment / m_corr;
  const Vector v_hat = state.second_moment / v_corr;
  const Vector update = h.learning_rate * m_hat.array() / (v_hat.array().sqrt() + h.epsilon);
  if (direction == StepDirection::Descent) {
    params.values -= update;
  } else {
    params.values += update;
  }
}

}  // namespace seiko::grad
