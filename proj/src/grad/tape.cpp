#include "seiko/grad/tape.hpp"

#include <cmath>

namespace seiko::grad {

Activation activation_from_string(std::string_view name) {
  if (name == "tanh") return Activation::Tanh;
  if (name == "relu") return Activation::Relu;
  if (name == "silu") return Activation::Silu;
  throw ConfigError("unknown activation: " + std::string(name));
}

std::string to_string(Activation a) {
  switch (a) {
    case Activation::Tanh: return "tanh";
    case Activation::Relu: return "relu";
    case Activation::Silu: return "silu";
  }
  return "?";
}

ParamLayout ParamLayout::build(std::vector<Segment> segments) {
  ParamLayout layout;
  int offset = 0;
  for (auto& s : segments) {
    if (s.rows <= 0 || s.cols <= 0) throw ConfigError("parameter segment '" + s.name + "' has non-positive shape");
    s.offset = offset;
    offset += s.size();
  }
  layout.segments = std::move(segments);
  layout.total_size = offset;
  return layout;
}

int ParamLayout::index_of(std::string_view name) const {
  for (std::size_t i = 0; i < segments.size(); ++i) {
    if (segments[i].name == name) return static_cast<int>(i);
  }
  throw ConfigError("no parameter segment named '" + std::string(name) + "'");
}

ParamVector ParamVector::zeros(ParamLayout layout) {
  ParamVector pv;
  pv.values = Vector::Zero(layout.total_size);
  pv.layout = std::move(layout);
  return pv;
}

void ParamVector::require_finite(std::string_view what) const {
  if (!values.allFinite()) throw NumericError("non-finite parameter values in " + std::string(what));
}

const char* Tape::op_name(Op op) {
  switch (op) {
    case Op::Constant: return "constant";
    case Op::Add: return "add";
    case Op::Sub: return "sub";
    case Op::Mul: return "mul";
    case Op::Scale: return "scale";
    case Op::Affine: return "affine";
    case Op::Activation: return "activation";
    case Op::Square: return "square";
    case Op::Exp: return "exp";
    case Op::Log: return "log";
    case Op::Sum: return "sum";
    case Op::Min2: return "min2";
    case Op::Max2: return "max2";
    case Op::Concat: return "concat";
    case Op::Custom: return "custom";
  }
  return "?";
}

Tape::NodeId Tape::push(Node node, const char* name) {
  if (!node.value.allFinite()) {
    throw NumericError(std::string("non-finite value at tape node #") + std::to_string(nodes_.size()) +
                       " (" + name + ")");
  }
  nodes_.push_back(std::move(node));
  return static_cast<NodeId>(nodes_.size() - 1);
}

Tape::NodeId Tape::constant(Vector v) {
  Node n;
  n.op = Op::Constant;
  n.value = std::move(v);
  return push(std::move(n), "constant");
}

Tape::NodeId Tape::add(NodeId a, NodeId b) {
  const Vector& va = value(a);
  const Vector& vb = value(b);
  if (va.size() != vb.size()) throw ShapeError("add: size mismatch");
  Node n;
  n.op = Op::Add;
  n.a = a;
  n.b = b;
  n.value = va + vb;
  return push(std::move(n), "add");
}

Tape::NodeId Tape::sub(NodeId a, NodeId b) {
  const Vector& va = value(a);
  const Vector& vb = value(b);
  if (va.size() != vb.size()) throw ShapeError("sub: size mismatch");
  Node n;
  n.op = Op::Sub;
  n.a = a;
  n.b = b;
  n.value = va - vb;
  return push(std::move(n), "sub");
}

Tape::NodeId Tape::mul(NodeId a, NodeId b) {
  const Vector& va = value(a);
  const Vector& vb = value(b);
  if (va.size() != vb.size()) throw ShapeError("mul: size mismatch");
  Node n;
  n.op = Op::Mul;
  n.a = a;
  n.b = b;
  n.value = va.cwiseProduct(vb);
  return push(std::move(n), "mul");
}

Tape::NodeId Tape::scale(NodeId a, double c) {
  Node n;
  n.op = Op::Scale;
  n.a = a;
  n.c = c;
  n.value = value(a) * c;
  return push(std::move(n), "scale");
}

Tape::NodeId Tape::affine(const ParamVector& params, int weight_segment, int bias_segment, NodeId x,
                          bool trainable) {
  if (trainable) {
    if (trainable_params_ != nullptr && trainable_params_ != &params) {
      throw ConfigError("tape already bound to a different trainable ParamVector");
    }
    trainable_params_ = &params;
  }
  const auto W = params.matrix(weight_segment);
  const auto b = params.vector(bias_segment);
  const Vector& vx = value(x);
  if (W.cols() != vx.size() || W.rows() != b.size()) {
    throw ShapeError("affine: weight " + std::to_string(W.rows()) + "x" + std::to_string(W.cols()) +
                     " incompatible with input of size " + std::to_string(vx.size()));
  }
  Node n;
  n.op = Op::Affine;
  n.a = x;
  n.params = &params;
  n.weight_segment = weight_segment;
  n.bias_segment = bias_segment;
  n.trainable = trainable;
  n.value = W * vx + b;
  return push(std::move(n), "affine");
}

Tape::NodeId Tape::activation(NodeId a, Activation kind) {
  const Vector& v = value(a);
  Node n;
  n.op = Op::Activation;
  n.a = a;
  n.act = kind;
  switch (kind) {
    case Activation::Tanh: n.value = v.array().tanh(); break;
    case Activation::Relu: n.value = v.cwiseMax(0.0); break;
    case Activation::Silu: n.value = v.array() / (1.0 + (-v.array()).exp()); break;
  }
  return push(std::move(n), "activation");
}

Tape::NodeId Tape::square(NodeId a) {
  Node n;
  n.op = Op::Square;
  n.a = a;
  n.value = value(a).array().square();
  return push(std::move(n), "square");
}

Tape::NodeId Tape::exp(NodeId a) {
  Node n;
  n.op = Op::Exp;
  n.a = a;
  n.value = value(a).array().exp();
  return push(std::move(n), "exp");
}

Tape::NodeId Tape::log(NodeId a) {
  Node n;
  n.op = Op::Log;
  n.a = a;
  n.value = value(a).array().log();
  return push(std::move(n), "log");
}

Tape::NodeId Tape::sum(NodeId a) {
  Node n;
  n.op = Op::Sum;
  n.a = a;
  n.value = Vector::Constant(1, value(a).sum());
  return push(std::move(n), "sum");
}

Tape::NodeId Tape::min2(NodeId a, NodeId b) {
  const Vector& va = value(a);
  const Vector& vb = value(b);
  if (va.size() != vb.size()) throw ShapeError("min2: size mismatch");
  Node n;
  n.op = Op::Min2;
  n.a = a;
  n.b = b;
  n.value = va.cwiseMin(vb);
  return push(std::move(n), "min2");
}

Tape::NodeId Tape::max2(NodeId a, NodeId b) {
  const Vector& va = value(a);
  const Vector& vb = value(b);
  if (va.size() != vb.size()) throw ShapeError("max2: size mismatch");
  Node n;
  n.op = Op::Max2;
  n.a = a;
  n.b = b;
  n.value = va.cwiseMax(vb);
  return push(std::move(n), "max2");
}

Tape::NodeId Tape::concat(NodeId a, NodeId b) {
  const Vector& va = value(a);
  const Vector& vb = value(b);
  Node n;
  n.op = Op::Concat;
  n.a = a;
  n.b = b;
  n.value.resize(va.size() + vb.size());
  n.value << va, vb;
  return push(std::move(n), "concat");
}

Tape::NodeId Tape::custom(Vector value, NodeId parent, Vjp vjp) {
  Node n;
  n.op = Op::Custom;
  n.a = parent;
  n.value = std::move(value);
  n.vjp = std::move(vjp);
  return push(std::move(n), "custom");
}

double Tape::scalar(NodeId id) const {
  const Vector& v = value(id);
  if (v.size() != 1) throw ShapeError("scalar() on a node of size " + std::to_string(v.size()));
  return v[0];
}

Vector Tape::gradient(NodeId output) { return gradient(output, -1, nullptr); }

Vector Tape::gradient(NodeId output, NodeId leaf, Vector* d_leaf) {
  if (value(output).size() != 1) throw ShapeError("gradient: output node must be scalar");

  std::vector<Vector> adjoint(nodes_.size());
  adjoint[static_cast<std::size_t>(output)] = Vector::Constant(1, 1.0);

  Vector param_grad;
  if (trainable_params_ != nullptr) param_grad = Vector::Zero(trainable_params_->layout.total_size);

  auto bump = [&](NodeId target, auto&& contribution) {
    auto& slot = adjoint[static_cast<std::size_t>(target)];
    if (slot.size() == 0) slot = Vector::Zero(value(target).size());
    contribution(slot);
  };

  for (std::int32_t i = output; i >= 0; --i) {
    Node& node = nodes_[static_cast<std::size_t>(i)];
    Vector& up = adjoint[static_cast<std::size_t>(i)];
    if (up.size() == 0) continue;
    switch (node.op) {
      case Op::Constant:
        break;
      case Op::Add:
        bump(node.a, [&](Vector& d) { d += up; });
        bump(node.b, [&](Vector& d) { d += up; });
        break;
      case Op::Sub:
        bump(node.a, [&](Vector& d) { d += up; });
        bump(node.b, [&](Vector& d) { d -= up; });
        break;
      case Op::Mul:
        bump(node.a, [&](Vector& d) { d += up.cwiseProduct(value(node.b)); });
        bump(node.b, [&](Vector& d) { d += up.cwiseProduct(value(node.a)); });
        break;
      case Op::Scale:
        bump(node.a, [&](Vector& d) { d += node.c * up; });
        break;
      case Op::Affine: {
        const auto W = node.params->matrix(node.weight_segment);
        bump(node.a, [&](Vector& d) { d.noalias() += W.transpose() * up; });
        if (node.trainable) {
          const auto& wseg = node.params->layout.segments[static_cast<std::size_t>(node.weight_segment)];
          const auto& bseg = node.params->layout.segments[static_cast<std::size_t>(node.bias_segment)];
          Eigen::Map<Matrix> dW(param_grad.data() + wseg.offset, wseg.rows, wseg.cols);
          dW.noalias() += up * value(node.a).transpose();
          param_grad.segment(bseg.offset, bseg.size()) += up;
        }
        break;
      }
      case Op::Activation: {
        const Vector& x = value(node.a);
        Vector deriv(x.size());
        switch (node.act) {
          case Activation::Tanh:
            deriv = 1.0 - node.value.array().square();
            break;
          case Activation::Relu:
            deriv = (x.array() > 0.0).cast<double>();
            break;
          case Activation::Silu: {
            const Eigen::ArrayXd sig = 1.0 / (1.0 + (-x.array()).exp());
            deriv = sig * (1.0 + x.array() * (1.0 - sig));
            break;
          }
        }
        bump(node.a, [&](Vector& d) { d += up.cwiseProduct(deriv); });
        break;
      }
      case Op::Square:
        bump(node.a, [&](Vector& d) { d += 2.0 * up.cwiseProduct(value(node.a)); });
        break;
      case Op::Exp:
        bump(node.a, [&](Vector& d) { d += up.cwiseProduct(node.value); });
        break;
      case Op::Log:
        bump(node.a, [&](Vector& d) { d += up.cwiseQuotient(value(node.a)); });
        break;
      case Op::Sum:
        bump(node.a, [&](Vector& d) { d.array() += up[0]; });
        break;
      case Op::Min2:
      case Op::Max2: {
        const Vector& va = value(node.a);
        const Vector& vb = value(node.b);
        // subgradient to the attaining side; ties go to the first argument
        Vector pick_a(va.size());
        if (node.op == Op::Min2) {
          pick_a = (va.array() <= vb.array()).cast<double>();
        } else {
          pick_a = (va.array() >= vb.array()).cast<double>();
        }
        bump(node.a, [&](Vector& d) { d += up.cwiseProduct(pick_a); });
        bump(node.b, [&](Vector& d) { d += up.cwiseProduct(Vector(1.0 - pick_a.array())); });
        break;
      }
      case Op::Concat: {
        const Eigen::Index na = value(node.a).size();
        const Eigen::Index nb = value(node.b).size();
        bump(node.a, [&](Vector& d) { d += up.head(na); });
        bump(node.b, [&](Vector& d) { d += up.tail(nb); });
        break;
      }
      case Op::Custom:
        if (node.a >= 0) {
          bump(node.a, [&](Vector& d) { node.vjp(up, d); });
        }
        break;
    }
    if (leaf >= 0 && i == leaf && d_leaf != nullptr) {
      *d_leaf = up;
    }
  }

  if (leaf >= 0 && d_leaf != nullptr && d_leaf->size() == 0) {
    *d_leaf = Vector::Zero(value(leaf).size());
  }
  return param_grad.size() > 0 ? param_grad : Vector();
}

void Tape::reset() {
  nodes_.clear();
  trainable_params_ = nullptr;
}

ParamVector gradient_of(const ParamVector& params,
                        const std::function<Tape::NodeId(Tape&, const ParamVector&)>& program) {
  Tape tape;
  const Tape::NodeId out = program(tape, params);
  ParamVector grad;
  grad.layout = params.layout;
  grad.values = tape.gradient(out);
  if (grad.values.size() == 0) grad.values = Vector::Zero(params.layout.total_size);
  return grad;
}

}  // namespace seiko::grad
