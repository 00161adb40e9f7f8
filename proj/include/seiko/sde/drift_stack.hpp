#pragma once

#include "seiko/diffusion/pretrained.hpp"
#include "seiko/grad/mlp.hpp"

#include <memory>
#include <optional>

namespace seiko::sde {

// One learned residual on top of the generative drift. Either a small MLP of
// (t, x) or a time-independent affine map A x + c (the latter is exact, used
// by oracles and available to configs).
struct ResidualDrift {
  enum class Kind { Mlp, Affine };

  Kind kind = Kind::Mlp;
  grad::MlpSpec mlp;
  int affine_dim = 0;
  grad::ParamVector params;

  static ResidualDrift make_mlp(grad::MlpSpec spec, std::uint64_t init_seed);
  static ResidualDrift make_affine(Matrix a, Vector c);
  static ResidualDrift zero_affine(int dim);

  int state_dim() const { return kind == Kind::Mlp ? mlp.state_dim() : affine_dim; }
  Vector eval(double t, const Vector& x) const;
  grad::Tape::NodeId forward(grad::Tape& tape, double t, grad::Tape::NodeId x, bool trainable) const;
};

// f = f_pre + sum of residuals. The drift at online iteration i keeps the
// iteration i-1 drift as a frozen prefix, so the difference to the previous
// iterate is exactly the last residual.
struct DriftStack {
  const diffusion::PretrainedModel* base = nullptr;
  std::vector<ResidualDrift> residuals;
  std::optional<int> active_trainable;

  explicit DriftStack(const diffusion::PretrainedModel* base_model = nullptr) : base(base_model) {}

  int state_dim() const { return base->gmm.dim(); }
  Vector drift(double t, const Vector& x) const;
  Vector residual_sum(double t, const Vector& x) const;

  ResidualDrift& active();
  const ResidualDrift& active() const;
};

}  // namespace seiko::sde
