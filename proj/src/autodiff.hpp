#pragma once

// Scalar-tape automatic differentiation.
//
// Every node on a Tape stores its value, the first partial derivative along
// each incoming edge, and enough local curvature to run a second-order
// adjoint sweep (tangent pass forward, adjoint + adjoint-tangent backward).
// That gives gradients and Hessian-vector products at a constant multiple of
// the recording cost without ever forming a Hessian.

#include <Eigen/Dense>

#include <array>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <map>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace sg::ad {

class Tape;

/// Handle to a scalar node on a Tape. Cheap to copy; only valid while the
/// owning tape is alive and not cleared.
class Var {
 public:
  Var() = default;

  double value() const;
  std::uint32_t index() const noexcept { return index_; }
  Tape* tape() const noexcept { return tape_; }
  bool valid() const noexcept { return tape_ != nullptr; }

 private:
  friend class Tape;
  Var(Tape* tape, std::uint32_t index) : tape_(tape), index_(index) {}

  Tape* tape_ = nullptr;
  std::uint32_t index_ = 0;
};

enum class OpKind : std::uint8_t {
  Leaf,
  Unary,            // curvature[0] = d2y/dx2
  Binary,           // curvature = {d2/da2, d2/dadb, d2/db2}
  Linear,           // sum_i c_i x_i + c; zero curvature
  Dot,              // sum_i a_i b_i; edges are [a..., b...]
  SquaredDistance,  // sum_i (a_i - b_i)^2; edges are [a..., b...]
  SquaredOffset,    // sum_i (a_i - c_i)^2 with constant c
};

struct Node {
  double value = 0.0;
  std::array<double, 3> curvature{};
  std::uint32_t first_edge = 0;
  std::uint32_t edge_count = 0;
  OpKind kind = OpKind::Leaf;
};

/// Append-only computation record. Parents always precede children, so index
/// order is a valid topological order for both sweeps.
class Tape {
 public:
  Var leaf(double value);
  /// Appends one leaf per value and returns every leaf created through this
  /// call since the last clear(). Valid until the next leaves() or clear().
  std::span<const Var> leaves(std::span<const double> values);

  Var unary(Var x, double value, double d1, double d2);
  Var binary(Var a, Var b, double value, double da, double db, double haa,
             double hab, double hbb);
  Var linear(std::span<const Var> xs, std::span<const double> coeffs,
             double constant = 0.0);
  Var sum(std::span<const Var> xs);
  Var dot(std::span<const Var> a, std::span<const Var> b);
  Var squared_distance(std::span<const Var> a, std::span<const Var> b);
  Var squared_distance(std::span<const Var> a, std::span<const double> c);
  Var squared_norm(std::span<const Var> a);

  /// Drops all nodes but keeps allocated capacity.
  void clear() noexcept;

  std::size_t size() const noexcept { return nodes_.size(); }
  const Node& node(std::uint32_t i) const { return nodes_[i]; }
  std::span<const std::uint32_t> parents(const Node& n) const {
    return {parents_.data() + n.first_edge, n.edge_count};
  }
  std::span<const double> partials(const Node& n) const {
    return {partials_.data() + n.first_edge, n.edge_count};
  }

  /// First-order reverse sweep seeded with 1 at `output`. `adjoint` must have
  /// size() entries; it is overwritten.
  void reverse(std::uint32_t output, std::span<double> adjoint) const;

  /// Forward-over-reverse sweep. On entry `tangent` holds the seed direction
  /// on leaf nodes (other entries are overwritten). On exit `adjoint` holds
  /// d(output)/d(node) and `adjoint_tangent` holds the directional derivative
  /// of that adjoint, i.e. (Hessian * seed) on the leaves.
  void second_order(std::uint32_t output, std::span<double> tangent,
                    std::span<double> adjoint,
                    std::span<double> adjoint_tangent) const;

 private:
  Var push(OpKind kind, double value, std::array<double, 3> curvature);
  void edge(Var parent, double partial);
  // Reserves `count` edges on the newest node; returns write positions.
  std::pair<std::uint32_t*, double*> edges(std::size_t count);
  void check(Var v) const {
    if (v.tape_ != this) [[unlikely]] foreign_variable();
  }
  [[noreturn]] static void foreign_variable();

  std::vector<Node> nodes_;
  std::vector<std::uint32_t> parents_;
  std::vector<double> partials_;
  std::vector<Var> leaf_vars_;
  // Nodes [0, leading_leaves_) are leaves; sweeps never need to visit them.
  std::uint32_t leading_leaves_ = 0;
};

inline double Var::value() const { return tape_->node(index_).value; }

Var operator+(Var a, Var b);
Var operator-(Var a, Var b);
Var operator*(Var a, Var b);
Var operator/(Var a, Var b);
Var operator+(Var a, double c);
Var operator+(double c, Var a);
Var operator-(Var a, double c);
Var operator-(double c, Var a);
Var operator*(Var a, double c);
Var operator*(double c, Var a);
Var operator/(Var a, double c);
Var operator/(double c, Var a);
Var operator-(Var a);
inline Var& operator+=(Var& a, Var b) { return a = a + b; }
inline Var& operator-=(Var& a, Var b) { return a = a - b; }
inline Var& operator*=(Var& a, Var b) { return a = a * b; }

Var exp(Var x);
Var log(Var x);
Var sqrt(Var x);
Var square(Var x);
/// x^p for a constant exponent.
Var pow(Var x, double p);

Var sum(std::span<const Var> xs);
Var dot(std::span<const Var> a, std::span<const Var> b);
/// Affine map sum_i coeffs_i x_i + constant.
Var dot(std::span<const Var> xs, std::span<const double> coeffs,
        double constant = 0.0);
Var squared_distance(std::span<const Var> a, std::span<const Var> b);
Var squared_distance(std::span<const Var> a, std::span<const double> c);
Var squared_norm(std::span<const Var> a);

// ---------------------------------------------------------------------------
// Functions of named input blocks
// ---------------------------------------------------------------------------

struct Block {
  std::string name;
  std::size_t dim = 0;
};

/// Leaf variables of each block, in declaration order.
class BlockVars {
 public:
  BlockVars(const std::vector<Block>& blocks, std::span<const Var> leaves);

  std::span<const Var> operator[](std::size_t block) const;
  std::span<const Var> operator[](std::string_view name) const;

 private:
  const std::vector<Block>* blocks_;
  std::span<const Var> leaves_;
  std::vector<std::size_t> offsets_;
};

using Evaluator = std::function<Var(Tape&, const BlockVars&)>;

/// Scalar function of named real-vector blocks. The evaluator must be
/// deterministic and may only read the blocks it declares.
class ScalarFunction {
 public:
  ScalarFunction(std::vector<Block> blocks, Evaluator evaluator);

  const std::vector<Block>& blocks() const noexcept { return blocks_; }
  std::size_t block_index(std::string_view name) const;
  std::size_t offset(std::size_t block) const { return offsets_[block]; }
  std::size_t dim(std::size_t block) const { return blocks_[block].dim; }
  std::size_t total_dim() const noexcept { return offsets_.back(); }

  /// Clears `tape`, creates one leaf per input coordinate (block order) and
  /// records the function. Leaves occupy indices [0, total_dim()).
  Var record(Tape& tape, std::span<const std::span<const double>> inputs) const;

 private:
  std::vector<Block> blocks_;
  std::vector<std::size_t> offsets_;
  Evaluator evaluator_;
};

/// A function recorded at one input point, with reusable sweep buffers.
/// Owns its tape; not safe to share between threads.
class Recording {
 public:
  explicit Recording(const ScalarFunction& f);

  void record(std::span<const std::span<const double>> inputs);

  double value() const { return tape_.node(output_).value; }
  const ScalarFunction& function() const noexcept { return *f_; }
  const Tape& tape() const noexcept { return tape_; }

  /// Gradient over all input coordinates (block order).
  std::span<const double> gradient();

  /// Hessian times `direction`, both over all input coordinates.
  std::span<const double> hessian_vector(std::span<const double> direction);

  /// Slice of a full input-space vector belonging to `block`.
  std::span<const double> slice(std::span<const double> full,
                                std::size_t block) const {
    return full.subspan(f_->offset(block), f_->dim(block));
  }

 private:
  const ScalarFunction* f_;
  Tape tape_;
  std::uint32_t output_ = 0;
  std::vector<double> adjoint_;
  std::vector<double> tangent_;
  std::vector<double> adjoint_tangent_;
  std::vector<double> result_;
  bool recorded_ = false;
};

/// Second-derivative block B with B(i, j) = d2 f / d grad_i d wrt_j, built
/// from Hessian-vector products over the smaller of the two dimensions.
Eigen::MatrixXd hessian_block(Recording& rec, std::size_t grad_block,
                              std::size_t wrt_block);

// Named-input convenience layer.
using NamedInputs = std::map<std::string, std::vector<double>, std::less<>>;

double evaluate(const ScalarFunction& f, const NamedInputs& inputs);
Eigen::VectorXd gradient(const ScalarFunction& f, const NamedInputs& inputs,
                         std::string_view wrt);
Eigen::VectorXd hvp(const ScalarFunction& f, const NamedInputs& inputs,
                    std::string_view wrt, const Eigen::VectorXd& v);
/// Entry j is sum_i v_i d2f / d wrt_j d grad_i.
Eigen::VectorXd mixed_hvp(const ScalarFunction& f, const NamedInputs& inputs,
                          std::string_view grad_block,
                          std::string_view wrt_block, const Eigen::VectorXd& v);
Eigen::MatrixXd hessian_block(const ScalarFunction& f,
                              const NamedInputs& inputs,
                              std::string_view grad_block,
                              std::string_view wrt_block);

}  // namespace sg::ad
