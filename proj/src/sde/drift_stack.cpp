#include "seiko/sde/drift_stack.hpp"

namespace seiko::sde {

ResidualDrift ResidualDrift::make_mlp(grad::MlpSpec spec, std::uint64_t init_seed) {
  spec.validate();
  ResidualDrift r;
  r.kind = Kind::Mlp;
  r.params = grad::mlp_init(spec, init_seed);
  r.mlp = std::move(spec);
  return r;
}

ResidualDrift ResidualDrift::make_affine(Matrix a, Vector c) {
  if (a.rows() != a.cols() || a.rows() != c.size()) throw ShapeError("affine residual: shape mismatch");
  ResidualDrift r;
  r.kind = Kind::Affine;
  r.affine_dim = static_cast<int>(c.size());
  auto layout = grad::ParamLayout::build({{"A", r.affine_dim, r.affine_dim, 0}, {"c", r.affine_dim, 1, 0}});
  r.params = grad::ParamVector::zeros(std::move(layout));
  r.params.matrix(0) = a;
  r.params.vector(1) = c;
  return r;
}

ResidualDrift ResidualDrift::zero_affine(int dim) {
  return make_affine(Matrix::Zero(dim, dim), Vector::Zero(dim));
}

Vector ResidualDrift::eval(double t, const Vector& x) const {
  if (kind == Kind::Mlp) return grad::mlp_eval(mlp, params, t, x);
  return params.matrix(0) * x + params.vector(1);
}

grad::Tape::NodeId ResidualDrift::forward(grad::Tape& tape, double t, grad::Tape::NodeId x,
                                          bool trainable) const {
  if (kind == Kind::Mlp) return grad::mlp_forward(tape, mlp, params, t, x, trainable);
  return tape.affine(params, 0, 1, x, trainable);
}

Vector DriftStack::drift(double t, const Vector& x) const {
  Vector f = base->drift(t, x);
  for (const auto& r : residuals) f += r.eval(t, x);
  return f;
}

Vector DriftStack::residual_sum(double t, const Vector& x) const {
  Vector g = Vector::Zero(x.size());
  for (const auto& r : residuals) g += r.eval(t, x);
  return g;
}

ResidualDrift& DriftStack::active() {
  if (!active_trainable) throw ConfigError("drift stack has no trainable residual");
  return residuals.at(static_cast<std::size_t>(*active_trainable));
}

const ResidualDrift& DriftStack::active() const {
  if (!active_trainable) throw ConfigError("drift stack has no trainable residual");
  return residuals.at(static_cast<std::size_t>(*active_trainable));
}

}  // namespace seiko::sde
