#pragma once

#include "seiko/grad/tape.hpp"

namespace seiko::grad {

// Fully-connected network. layer_widths runs input..output; the input width
// includes time_embedding_dim sinusoidal features of t appended to the state.
struct MlpSpec {
  std::vector<int> layer_widths;
  Activation activation = Activation::Tanh;
  int time_embedding_dim = 0;

  void validate() const;
  int state_dim() const { return layer_widths.front() - time_embedding_dim; }
  int output_dim() const { return layer_widths.back(); }
  int layer_count() const { return static_cast<int>(layer_widths.size()) - 1; }
  ParamLayout layout() const;
};

// [sin(2^k pi t), cos(2^k pi t)] pairs, k = 0..dim/2-1.
Vector time_features(double t, int dim);

// Scaled-uniform fan-in initialization; the final layer is zeroed so a fresh
// residual drift is exactly the zero function.
ParamVector mlp_init(const MlpSpec& spec, std::uint64_t seed);

Vector mlp_eval(const MlpSpec& spec, const ParamVector& params, double t, const Vector& x);

// Forward pass on a tape; x is the state node, time features enter as a
// constant leaf.
Tape::NodeId mlp_forward(Tape& tape, const MlpSpec& spec, const ParamVector& params, double t,
                         Tape::NodeId x, bool trainable);

// d output / d state (analytic backprop through the fixed network); used where
// a scalar regressor's input gradient is needed outside the tape.
Vector mlp_input_gradient(const MlpSpec& spec, const ParamVector& params, double t, const Vector& x,
                          const Vector& upstream);

}  // namespace seiko::grad
