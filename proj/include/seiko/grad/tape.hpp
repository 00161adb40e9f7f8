#pragma once

#include "seiko/common.hpp"

#include <optional>

namespace seiko::grad {

enum class Activation { Tanh, Relu, Silu };

Activation activation_from_string(std::string_view name);
std::string to_string(Activation a);

// Flat parameter storage with named (rows x cols) segments. Matrices are
// flattened column-major, matching Eigen::Map.
struct ParamLayout {
  struct Segment {
    std::string name;
    int rows = 0;
    int cols = 1;
    int offset = 0;
    int size() const { return rows * cols; }
  };

  std::vector<Segment> segments;
  int total_size = 0;

  static ParamLayout build(std::vector<Segment> segments);
  int index_of(std::string_view name) const;
};

struct ParamVector {
  ParamLayout layout;
  Vector values;

  static ParamVector zeros(ParamLayout layout);

  Eigen::Map<const Matrix> matrix(int segment) const {
    const auto& s = layout.segments.at(static_cast<std::size_t>(segment));
    return {values.data() + s.offset, s.rows, s.cols};
  }
  Eigen::Map<Matrix> matrix(int segment) {
    auto& s = layout.segments.at(static_cast<std::size_t>(segment));
    return {values.data() + s.offset, s.rows, s.cols};
  }
  Eigen::Map<const Vector> vector(int segment) const {
    const auto& s = layout.segments.at(static_cast<std::size_t>(segment));
    return {values.data() + s.offset, s.size()};
  }
  Eigen::Map<Vector> vector(int segment) {
    auto& s = layout.segments.at(static_cast<std::size_t>(segment));
    return {values.data() + s.offset, s.size()};
  }

  void require_finite(std::string_view what) const;
};

// Reverse-mode tape over vector-valued nodes. The primitive set is the small
// one the planner needs: affine layers reading weights from a ParamVector,
// elementwise activation / square / exp / log / product, sum reduction, and
// elementwise min (subgradient goes to the attaining side, ties to the first
// argument). Custom nodes carry an analytic vector-Jacobian product, used for
// the closed-form generative drift and for terminal objectives.
//
// At most one ParamVector may be marked trainable per tape; gradient() returns
// the flat gradient with respect to it. Frozen affine nodes still propagate to
// their inputs.
class Tape {
 public:
  using NodeId = std::int32_t;
  using Vjp = std::function<void(const Vector& upstream, Vector& d_parent)>;

  NodeId constant(Vector v);
  NodeId add(NodeId a, NodeId b);
  NodeId sub(NodeId a, NodeId b);
  NodeId mul(NodeId a, NodeId b);
  NodeId scale(NodeId a, double c);
  NodeId affine(const ParamVector& params, int weight_segment, int bias_segment, NodeId x,
                bool trainable);
  NodeId activation(NodeId a, Activation kind);
  NodeId square(NodeId a);
  NodeId exp(NodeId a);
  NodeId log(NodeId a);
  NodeId sum(NodeId a);
  NodeId min2(NodeId a, NodeId b);
  NodeId max2(NodeId a, NodeId b);
  NodeId concat(NodeId a, NodeId b);
  NodeId custom(Vector value, NodeId parent, Vjp vjp);

  // conveniences built from primitives
  NodeId squared_norm(NodeId a) { return sum(square(a)); }
  NodeId dot(NodeId a, NodeId b) { return sum(mul(a, b)); }

  const Vector& value(NodeId id) const { return nodes_[static_cast<std::size_t>(id)].value; }
  double scalar(NodeId id) const;

  // Backward sweep from a scalar output. Returns the gradient w.r.t. the
  // trainable ParamVector (zero-length if none was used).
  Vector gradient(NodeId output);

  // Backward sweep that also exposes the adjoint of one designated leaf
  // (typically an input constant), for input-gradient uses.
  Vector gradient(NodeId output, NodeId leaf, Vector* d_leaf);

  std::size_t size() const { return nodes_.size(); }
  void reset();

 private:
  enum class Op {
    Constant,
    Add,
    Sub,
    Mul,
    Scale,
    Affine,
    Activation,
    Square,
    Exp,
    Log,
    Sum,
    Min2,
    Max2,
    Concat,
    Custom,
  };

  struct Node {
    Op op;
    NodeId a = -1;
    NodeId b = -1;
    double c = 0.0;
    Activation act = Activation::Tanh;
    const ParamVector* params = nullptr;
    int weight_segment = -1;
    int bias_segment = -1;
    bool trainable = false;
    Vector value;
    Vjp vjp;
  };

  NodeId push(Node node, const char* op_name);
  static const char* op_name(Op op);

  std::vector<Node> nodes_;
  const ParamVector* trainable_params_ = nullptr;
};

// Gradient of a scalar program with respect to `params`, spec-shaped wrapper
// around Tape.
ParamVector gradient_of(const ParamVector& params,
                        const std::function<Tape::NodeId(Tape&, const ParamVector&)>& program);

}  // namespace seiko::grad
