#include "seiko/grad/mlp.hpp"

#include <cmath>

namespace seiko::grad {

void MlpSpec::validate() const {
  if (layer_widths.size() < 3) throw ConfigError("MlpSpec needs at least one hidden layer");
  for (int w : layer_widths) {
    if (w <= 0) throw ConfigError("MlpSpec has a non-positive layer width");
  }
  if (time_embedding_dim < 0) throw ConfigError("time_embedding_dim must be nonnegative");
  if (time_embedding_dim % 2 != 0) throw ConfigError("time_embedding_dim must be even (sin/cos pairs)");
  if (time_embedding_dim >= layer_widths.front()) {
    throw ConfigError("time embedding leaves no room for the state input");
  }
}

ParamLayout MlpSpec::layout() const {
  validate();
  std::vector<ParamLayout::Segment> segments;
  for (int l = 0; l < layer_count(); ++l) {
    segments.push_back({"W" + std::to_string(l), layer_widths[static_cast<std::size_t>(l) + 1],
                        layer_widths[static_cast<std::size_t>(l)], 0});
    segments.push_back({"b" + std::to_string(l), layer_widths[static_cast<std::size_t>(l) + 1], 1, 0});
  }
  return ParamLayout::build(std::move(segments));
}

Vector time_features(double t, int dim) {
  Vector f(dim);
  for (int k = 0; k < dim / 2; ++k) {
    const double freq = std::ldexp(M_PI, k);  // 2^k * pi
    f[2 * k] = std::sin(freq * t);
    f[2 * k + 1] = std::cos(freq * t);
  }
  return f;
}

ParamVector mlp_init(const MlpSpec& spec, std::uint64_t seed) {
  spec.validate();
  ParamVector pv = ParamVector::zeros(spec.layout());
  Rng rng(seed_hash(seed, 0x6d6c70 /*"mlp"*/));
  const int last = spec.layer_count() - 1;
  for (int l = 0; l < spec.layer_count(); ++l) {
    auto W = pv.matrix(pv.layout.index_of("W" + std::to_string(l)));
    auto b = pv.vector(pv.layout.index_of("b" + std::to_string(l)));
    if (l == last) continue;  // final layer stays zero
    const double bound = 1.0 / std::sqrt(static_cast<double>(W.cols()));
    for (Eigen::Index j = 0; j < W.cols(); ++j) {
      for (Eigen::Index i = 0; i < W.rows(); ++i) W(i, j) = rng.uniform(-bound, bound);
    }
    for (Eigen::Index i = 0; i < b.size(); ++i) b[i] = rng.uniform(-bound, bound);
  }
  return pv;
}

namespace {

Vector apply_activation(const Vector& v, Activation act) {
  switch (act) {
    case Activation::Tanh: return v.array().tanh();
    case Activation::Relu: return v.cwiseMax(0.0);
    case Activation::Silu: return v.array() / (1.0 + (-v.array()).exp());
  }
  return v;
}

Vector activation_derivative(const Vector& pre, const Vector& post, Activation act) {
  switch (act) {
    case Activation::Tanh: return 1.0 - post.array().square();
    case Activation::Relu: return (pre.array() > 0.0).cast<double>();
    case Activation::Silu: {
      const Eigen::ArrayXd sig = 1.0 / (1.0 + (-pre.array()).exp());
      return sig * (1.0 + pre.array() * (1.0 - sig));
    }
  }
  return Vector::Ones(pre.size());
}

}  // namespace

Vector mlp_eval(const MlpSpec& spec, const ParamVector& params, double t, const Vector& x) {
  if (x.size() != spec.state_dim()) {
    throw ShapeError("mlp_eval: state of size " + std::to_string(x.size()) + ", expected " +
                     std::to_string(spec.state_dim()));
  }
  Vector h(spec.layer_widths.front());
  if (spec.time_embedding_dim > 0) {
    h << x, time_features(t, spec.time_embedding_dim);
  } else {
    h = x;
  }
  const int last = spec.layer_count() - 1;
  for (int l = 0; l <= last; ++l) {
    const auto W = params.matrix(params.layout.index_of("W" + std::to_string(l)));
    const auto b = params.vector(params.layout.index_of("b" + std::to_string(l)));
    Vector pre = W * h + b;
    h = (l == last) ? pre : apply_activation(pre, spec.activation);
  }
  if (!h.allFinite()) throw NumericError("mlp_eval produced non-finite output");
  return h;
}

Tape::NodeId mlp_forward(Tape& tape, const MlpSpec& spec, const ParamVector& params, double t,
                         Tape::NodeId x, bool trainable) {
  if (tape.value(x).size() != spec.state_dim()) throw ShapeError("mlp_forward: state size mismatch");
  Tape::NodeId h = x;
  if (spec.time_embedding_dim > 0) {
    h = tape.concat(x, tape.constant(time_features(t, spec.time_embedding_dim)));
  }
  const int last = spec.layer_count() - 1;
  for (int l = 0; l <= last; ++l) {
    const int w = params.layout.index_of("W" + std::to_string(l));
    const int b = params.layout.index_of("b" + std::to_string(l));
    h = tape.affine(params, w, b, h, trainable);
    if (l != last) h = tape.activation(h, spec.activation);
  }
  return h;
}

Vector mlp_input_gradient(const MlpSpec& spec, const ParamVector& params, double t, const Vector& x,
                          const Vector& upstream) {
  if (upstream.size() != spec.output_dim()) throw ShapeError("mlp_input_gradient: upstream size mismatch");
  // forward, keeping pre/post activations
  Vector h(spec.layer_widths.front());
  if (spec.time_embedding_dim > 0) {
    h << x, time_features(t, spec.time_embedding_dim);
  } else {
    h = x;
  }
  const int last = spec.layer_count() - 1;
  std::vector<Vector> pre(static_cast<std::size_t>(last) + 1), post(static_cast<std::size_t>(last) + 1);
  Vector cur = h;
  for (int l = 0; l <= last; ++l) {
    const auto W = params.matrix(params.layout.index_of("W" + std::to_string(l)));
    const auto b = params.vector(params.layout.index_of("b" + std::to_string(l)));
    pre[static_cast<std::size_t>(l)] = W * cur + b;
    cur = (l == last) ? pre[static_cast<std::size_t>(l)]
                      : apply_activation(pre[static_cast<std::size_t>(l)], spec.activation);
    post[static_cast<std::size_t>(l)] = cur;
  }
  // backward to the input
  Vector g = upstream;
  for (int l = last; l >= 0; --l) {
    if (l != last) {
      g = g.cwiseProduct(
          activation_derivative(pre[static_cast<std::size_t>(l)], post[static_cast<std::size_t>(l)], spec.activation));
    }
    const auto W = params.matrix(params.layout.index_of("W" + std::to_string(l)));
    g = W.transpose() * g;
  }
  return g.head(spec.state_dim());
}

}  // namespace seiko::grad
