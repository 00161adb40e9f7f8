#pragma once

#include "seiko/grad/tape.hpp"

namespace seiko::grad {

struct AdamHyper {
  double learning_rate = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

struct AdamState {
  Vector first_moment;
  Vector second_moment;
  long step_count = 0;
  AdamHyper hyper;

  static AdamState init(Eigen::Index n, AdamHyper hyper = {});
};

enum class StepDirection { Descent, Ascent };

// Standard bias-corrected Adam update on flat parameters.
void adam_step(ParamVector& params, const Vector& grad, AdamState& state,
               StepDirection direction = StepDirection::Descent);

}  // namespace seiko::grad
