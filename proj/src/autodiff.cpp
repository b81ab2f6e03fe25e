#include "autodiff.hpp"

#include "errors.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace sg::ad {

// ---------------------------------------------------------------------------
// Tape
// ---------------------------------------------------------------------------

Var Tape::push(OpKind kind, double value, std::array<double, 3> curvature) {
  nodes_.push_back(Node{value, curvature, static_cast<std::uint32_t>(parents_.size()), 0, kind});
  return Var(this, static_cast<std::uint32_t>(nodes_.size() - 1));
}

void Tape::edge(Var parent, double partial) {
  parents_.push_back(parent.index_);
  partials_.push_back(partial);
  ++nodes_.back().edge_count;
}

std::pair<std::uint32_t*, double*> Tape::edges(std::size_t count) {
  const std::size_t start = parents_.size();
  parents_.resize(start + count);
  partials_.resize(start + count);
  nodes_.back().edge_count += static_cast<std::uint32_t>(count);
  return {parents_.data() + start, partials_.data() + start};
}

void Tape::foreign_variable() {
  throw std::logic_error("autodiff: variable belongs to a different tape");
}

void Tape::clear() noexcept {
  nodes_.clear();
  parents_.clear();
  partials_.clear();
  leaf_vars_.clear();
  leading_leaves_ = 0;
}

Var Tape::leaf(double value) {
  const bool prefix = nodes_.size() == leading_leaves_;
  Var v = push(OpKind::Leaf, value, {});
  if (prefix) ++leading_leaves_;
  return v;
}

std::span<const Var> Tape::leaves(std::span<const double> values) {
  const std::size_t count = values.size();
  const auto first = static_cast<std::uint32_t>(nodes_.size());
  const auto edge = static_cast<std::uint32_t>(parents_.size());
  const bool prefix = first == leading_leaves_;
  nodes_.resize(first + count);
  const std::size_t old_vars = leaf_vars_.size();
  leaf_vars_.resize(old_vars + count);
  Node* node = nodes_.data() + first;
  Var* var = leaf_vars_.data() + old_vars;
  for (std::size_t i = 0; i < count; ++i) {
    node[i].value = values[i];
    node[i].first_edge = edge;
    var[i] = Var(this, first + static_cast<std::uint32_t>(i));
  }
  if (prefix) leading_leaves_ = first + static_cast<std::uint32_t>(count);
  return leaf_vars_;
}

Var Tape::unary(Var x, double value, double d1, double d2) {
  check(x);
  Var y = push(OpKind::Unary, value, {d2, 0.0, 0.0});
  edge(x, d1);
  return y;
}

Var Tape::binary(Var a, Var b, double value, double da, double db, double haa,
                 double hab, double hbb) {
  check(a);
  check(b);
  Var y = push(OpKind::Binary, value, {haa, hab, hbb});
  edge(a, da);
  edge(b, db);
  return y;
}

Var Tape::linear(std::span<const Var> xs, std::span<const double> coeffs,
                 double constant) {
  if (xs.size() != coeffs.size()) {
    throw DimensionError("autodiff: affine map needs one coefficient per input");
  }
  double value = constant;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    check(xs[i]);
    value += coeffs[i] * xs[i].value();
  }
  Var y = push(OpKind::Linear, value, {});
  auto [p, g] = edges(xs.size());
  for (std::size_t i = 0; i < xs.size(); ++i) {
    p[i] = xs[i].index_;
    g[i] = coeffs[i];
  }
  return y;
}

Var Tape::sum(std::span<const Var> xs) {
  double value = 0.0;
  for (Var x : xs) {
    check(x);
    value += x.value();
  }
  Var y = push(OpKind::Linear, value, {});
  auto [p, g] = edges(xs.size());
  for (std::size_t i = 0; i < xs.size(); ++i) {
    p[i] = xs[i].index_;
    g[i] = 1.0;
  }
  return y;
}

Var Tape::dot(std::span<const Var> a, std::span<const Var> b) {
  if (a.size() != b.size()) {
    throw DimensionError("autodiff: dot product of unequal lengths");
  }
  double value = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    check(a[i]);
    check(b[i]);
    value += a[i].value() * b[i].value();
  }
  Var y = push(OpKind::Dot, value, {});
  const std::size_t n = a.size();
  auto [p, g] = edges(2 * n);
  for (std::size_t i = 0; i < n; ++i) {
    p[i] = a[i].index_;
    g[i] = b[i].value();
    p[n + i] = b[i].index_;
    g[n + i] = a[i].value();
  }
  return y;
}

Var Tape::squared_distance(std::span<const Var> a, std::span<const Var> b) {
  if (a.size() != b.size()) {
    throw DimensionError("autodiff: squared distance of unequal lengths");
  }
  Var y = push(OpKind::SquaredDistance, 0.0, {});
  const std::size_t n = a.size();
  auto [p, g] = edges(2 * n);
  const Node* nodes = nodes_.data();
  double value = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    check(a[i]);
    check(b[i]);
    const double d = nodes[a[i].index_].value - nodes[b[i].index_].value;
    value += d * d;
    p[i] = a[i].index_;
    g[i] = 2.0 * d;
    p[n + i] = b[i].index_;
    g[n + i] = -2.0 * d;
  }
  nodes_.back().value = value;
  return y;
}

Var Tape::squared_distance(std::span<const Var> a, std::span<const double> c) {
  if (a.size() != c.size()) {
    throw DimensionError("autodiff: squared distance of unequal lengths");
  }
  Var y = push(OpKind::SquaredOffset, 0.0, {});
  auto [p, g] = edges(a.size());
  const Node* nodes = nodes_.data();
  double value = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    check(a[i]);
    const double d = nodes[a[i].index_].value - c[i];
    value += d * d;
    p[i] = a[i].index_;
    g[i] = 2.0 * d;
  }
  nodes_.back().value = value;
  return y;
}

Var Tape::squared_norm(std::span<const Var> a) {
  double value = 0.0;
  for (Var x : a) {
    check(x);
    value += x.value() * x.value();
  }
  Var y = push(OpKind::SquaredOffset, value, {});
  auto [p, g] = edges(a.size());
  for (std::size_t i = 0; i < a.size(); ++i) {
    p[i] = a[i].index_;
    g[i] = 2.0 * a[i].value();
  }
  return y;
}

void Tape::reverse(std::uint32_t output, std::span<double> adjoint) const {
  std::fill(adjoint.begin(), adjoint.begin() + output + 1, 0.0);
  adjoint[output] = 1.0;
  const std::uint32_t stop = std::min(leading_leaves_, output);
  for (std::uint32_t i = output + 1; i-- > stop;) {
    const double a = adjoint[i];
    if (a == 0.0) continue;
    const Node& n = nodes_[i];
    const std::uint32_t* p = parents_.data() + n.first_edge;
    const double* g = partials_.data() + n.first_edge;
    for (std::uint32_t e = 0; e < n.edge_count; ++e) adjoint[p[e]] += a * g[e];
  }
}

void Tape::second_order(std::uint32_t output, std::span<double> tangent,
                        std::span<double> adjoint,
                        std::span<double> adjoint_tangent) const {
  // Tangent pass. Leaves keep their seed.
  const std::uint32_t stop = std::min(leading_leaves_, output);
  for (std::uint32_t i = stop; i <= output; ++i) {
    const Node& n = nodes_[i];
    if (n.kind == OpKind::Leaf) continue;
    const std::uint32_t* p = parents_.data() + n.first_edge;
    const double* g = partials_.data() + n.first_edge;
    double t = 0.0;
    for (std::uint32_t e = 0; e < n.edge_count; ++e) t += g[e] * tangent[p[e]];
    tangent[i] = t;
  }

  std::fill(adjoint.begin(), adjoint.begin() + output + 1, 0.0);
  std::fill(adjoint_tangent.begin(), adjoint_tangent.begin() + output + 1, 0.0);
  adjoint[output] = 1.0;

  for (std::uint32_t i = output + 1; i-- > stop;) {
    const double a = adjoint[i];
    const double ad = adjoint_tangent[i];
    if (a == 0.0 && ad == 0.0) continue;
    const Node& n = nodes_[i];
    const std::uint32_t* p = parents_.data() + n.first_edge;
    const double* g = partials_.data() + n.first_edge;
    const std::uint32_t count = n.edge_count;
    for (std::uint32_t e = 0; e < count; ++e) {
      adjoint[p[e]] += a * g[e];
      adjoint_tangent[p[e]] += ad * g[e];
    }
    if (a == 0.0) continue;

    switch (n.kind) {
      case OpKind::Leaf:
      case OpKind::Linear:
        break;
      case OpKind::Unary:
        adjoint_tangent[p[0]] += a * n.curvature[0] * tangent[p[0]];
        break;
      case OpKind::Binary: {
        const double t0 = tangent[p[0]];
        const double t1 = tangent[p[1]];
        adjoint_tangent[p[0]] += a * (n.curvature[0] * t0 + n.curvature[1] * t1);
        adjoint_tangent[p[1]] += a * (n.curvature[1] * t0 + n.curvature[2] * t1);
        break;
      }
      case OpKind::Dot: {
        const std::uint32_t half = count / 2;
        for (std::uint32_t e = 0; e < half; ++e) {
          const double ta = tangent[p[e]];
          const double tb = tangent[p[half + e]];
          adjoint_tangent[p[e]] += a * tb;
          adjoint_tangent[p[half + e]] += a * ta;
        }
        break;
      }
      case OpKind::SquaredDistance: {
        const std::uint32_t half = count / 2;
        for (std::uint32_t e = 0; e < half; ++e) {
          const double d = 2.0 * a * (tangent[p[e]] - tangent[p[half + e]]);
          adjoint_tangent[p[e]] += d;
          adjoint_tangent[p[half + e]] -= d;
        }
        break;
      }
      case OpKind::SquaredOffset:
        for (std::uint32_t e = 0; e < count; ++e) {
          adjoint_tangent[p[e]] += 2.0 * a * tangent[p[e]];
        }
        break;
    }
  }
}

// ---------------------------------------------------------------------------
// Operators
// ---------------------------------------------------------------------------

Var operator+(Var a, Var b) {
  return a.tape()->binary(a, b, a.value() + b.value(), 1.0, 1.0, 0.0, 0.0, 0.0);
}

Var operator-(Var a, Var b) {
  return a.tape()->binary(a, b, a.value() - b.value(), 1.0, -1.0, 0.0, 0.0, 0.0);
}

Var operator*(Var a, Var b) {
  const double av = a.value();
  const double bv = b.value();
  return a.tape()->binary(a, b, av * bv, bv, av, 0.0, 1.0, 0.0);
}

Var operator/(Var a, Var b) {
  const double av = a.value();
  const double bv = b.value();
  const double inv = 1.0 / bv;
  return a.tape()->binary(a, b, av * inv, inv, -av * inv * inv, 0.0,
                          -inv * inv, 2.0 * av * inv * inv * inv);
}

Var operator+(Var a, double c) { return a.tape()->unary(a, a.value() + c, 1.0, 0.0); }
Var operator+(double c, Var a) { return a + c; }
Var operator-(Var a, double c) { return a.tape()->unary(a, a.value() - c, 1.0, 0.0); }
Var operator-(double c, Var a) { return a.tape()->unary(a, c - a.value(), -1.0, 0.0); }
Var operator*(Var a, double c) { return a.tape()->unary(a, a.value() * c, c, 0.0); }
Var operator*(double c, Var a) { return a * c; }
Var operator/(Var a, double c) { return a * (1.0 / c); }

Var operator/(double c, Var a) {
  const double x = a.value();
  return a.tape()->unary(a, c / x, -c / (x * x), 2.0 * c / (x * x * x));
}

Var operator-(Var a) { return a.tape()->unary(a, -a.value(), -1.0, 0.0); }

Var exp(Var x) {
  const double e = std::exp(x.value());
  return x.tape()->unary(x, e, e, e);
}

Var log(Var x) {
  const double v = x.value();
  return x.tape()->unary(x, std::log(v), 1.0 / v, -1.0 / (v * v));
}

Var sqrt(Var x) {
  const double v = x.value();
  const double s = std::sqrt(v);
  return x.tape()->unary(x, s, 0.5 / s, -0.25 / (s * v));
}

Var square(Var x) {
  const double v = x.value();
  return x.tape()->unary(x, v * v, 2.0 * v, 2.0);
}

Var pow(Var x, double p) {
  const double v = x.value();
  return x.tape()->unary(x, std::pow(v, p), p * std::pow(v, p - 1.0),
                         p * (p - 1.0) * std::pow(v, p - 2.0));
}

namespace {
Tape& tape_of(std::span<const Var> xs) {
  if (xs.empty() || !xs.front().valid()) {
    throw std::invalid_argument("autodiff: reduction over an empty block");
  }
  return *xs.front().tape();
}
}  // namespace

Var sum(std::span<const Var> xs) { return tape_of(xs).sum(xs); }
Var dot(std::span<const Var> a, std::span<const Var> b) { return tape_of(a).dot(a, b); }
Var dot(std::span<const Var> xs, std::span<const double> coeffs, double constant) {
  return tape_of(xs).linear(xs, coeffs, constant);
}
Var squared_distance(std::span<const Var> a, std::span<const Var> b) {
  return tape_of(a).squared_distance(a, b);
}
Var squared_distance(std::span<const Var> a, std::span<const double> c) {
  return tape_of(a).squared_distance(a, c);
}
Var squared_norm(std::span<const Var> a) { return tape_of(a).squared_norm(a); }

// ---------------------------------------------------------------------------
// ScalarFunction
// ---------------------------------------------------------------------------

BlockVars::BlockVars(const std::vector<Block>& blocks, std::span<const Var> leaves)
    : blocks_(&blocks), leaves_(leaves) {
  offsets_.reserve(blocks.size() + 1);
  std::size_t off = 0;
  for (const auto& b : blocks) {
    offsets_.push_back(off);
    off += b.dim;
  }
  offsets_.push_back(off);
}

std::span<const Var> BlockVars::operator[](std::size_t block) const {
  return leaves_.subspan(offsets_[block], (*blocks_)[block].dim);
}

std::span<const Var> BlockVars::operator[](std::string_view name) const {
  for (std::size_t i = 0; i < blocks_->size(); ++i) {
    if ((*blocks_)[i].name == name) return (*this)[i];
  }
  throw std::invalid_argument("autodiff: evaluator read undeclared block '" +
                              std::string(name) + "'");
}

ScalarFunction::ScalarFunction(std::vector<Block> blocks, Evaluator evaluator)
    : blocks_(std::move(blocks)), evaluator_(std::move(evaluator)) {
  offsets_.reserve(blocks_.size() + 1);
  std::size_t off = 0;
  for (std::size_t i = 0; i < blocks_.size(); ++i) {
    for (std::size_t j = 0; j < i; ++j) {
      if (blocks_[j].name == blocks_[i].name) {
        throw std::invalid_argument("autodiff: duplicate block name '" +
                                    blocks_[i].name + "'");
      }
    }
    offsets_.push_back(off);
    off += blocks_[i].dim;
  }
  offsets_.push_back(off);
  if (!evaluator_) throw std::invalid_argument("autodiff: empty evaluator");
}

std::size_t ScalarFunction::block_index(std::string_view name) const {
  for (std::size_t i = 0; i < blocks_.size(); ++i) {
    if (blocks_[i].name == name) return i;
  }
  throw std::invalid_argument("autodiff: unknown block '" + std::string(name) + "'");
}

Var ScalarFunction::record(Tape& tape,
                           std::span<const std::span<const double>> inputs) const {
  if (inputs.size() != blocks_.size()) {
    throw DimensionError("autodiff: expected " + std::to_string(blocks_.size()) +
                         " input blocks, got " + std::to_string(inputs.size()));
  }
  for (std::size_t b = 0; b < blocks_.size(); ++b) {
    if (inputs[b].size() != blocks_[b].dim) {
      throw DimensionError("autodiff: block '" + blocks_[b].name + "' expects " +
                           std::to_string(blocks_[b].dim) + " values, got " +
                           std::to_string(inputs[b].size()));
    }
  }
  tape.clear();
  std::span<const Var> leaves;
  for (const auto& in : inputs) leaves = tape.leaves(in);
  Var out = evaluator_(tape, BlockVars(blocks_, leaves));
  if (out.tape() != &tape) {
    throw std::logic_error("autodiff: evaluator returned a foreign variable");
  }
  return out;
}

// ---------------------------------------------------------------------------
// Recording
// ---------------------------------------------------------------------------

Recording::Recording(const ScalarFunction& f) : f_(&f) {}

void Recording::record(std::span<const std::span<const double>> inputs) {
  output_ = f_->record(tape_, inputs).index();
  const std::size_t n = tape_.size();
  if (adjoint_.size() < n) {
    adjoint_.resize(n);
    tangent_.resize(n);
    adjoint_tangent_.resize(n);
  }
  result_.resize(f_->total_dim());
  recorded_ = true;
}

std::span<const double> Recording::gradient() {
  if (!recorded_) throw std::logic_error("autodiff: gradient before record");
  tape_.reverse(output_, adjoint_);
  // Leaves may sit past the output when the function ignores some inputs.
  const std::size_t live = std::min<std::size_t>(output_ + 1, result_.size());
  std::copy_n(adjoint_.begin(), live, result_.begin());
  std::fill(result_.begin() + live, result_.end(), 0.0);
  return result_;
}

std::span<const double> Recording::hessian_vector(std::span<const double> direction) {
  if (!recorded_) throw std::logic_error("autodiff: Hessian product before record");
  if (direction.size() != f_->total_dim()) {
    throw DimensionError("autodiff: direction has " + std::to_string(direction.size()) +
                         " entries, function has " + std::to_string(f_->total_dim()) +
                         " inputs");
  }
  const std::uint32_t out = output_;
  std::fill(tangent_.begin(), tangent_.begin() + out + 1, 0.0);
  const std::size_t live = std::min<std::size_t>(out + 1, direction.size());
  std::copy_n(direction.begin(), live, tangent_.begin());
  tape_.second_order(out, tangent_, adjoint_, adjoint_tangent_);
  std::copy_n(adjoint_tangent_.begin(), live, result_.begin());
  std::fill(result_.begin() + live, result_.end(), 0.0);
  return result_;
}

Eigen::MatrixXd hessian_block(Recording& rec, std::size_t grad_block,
                              std::size_t wrt_block) {
  const ScalarFunction& f = rec.function();
  const std::size_t rows = f.dim(grad_block);
  const std::size_t cols = f.dim(wrt_block);
  Eigen::MatrixXd out(rows, cols);
  std::vector<double> seed(f.total_dim(), 0.0);

  if (grad_block == wrt_block || cols <= rows) {
    for (std::size_t j = 0; j < cols; ++j) {
      seed[f.offset(wrt_block) + j] = 1.0;
      auto col = rec.slice(rec.hessian_vector(seed), grad_block);
      for (std::size_t i = 0; i < rows; ++i) out(i, j) = col[i];
      seed[f.offset(wrt_block) + j] = 0.0;
    }
  } else {
    for (std::size_t i = 0; i < rows; ++i) {
      seed[f.offset(grad_block) + i] = 1.0;
      auto row = rec.slice(rec.hessian_vector(seed), wrt_block);
      for (std::size_t j = 0; j < cols; ++j) out(i, j) = row[j];
      seed[f.offset(grad_block) + i] = 0.0;
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// Named-input layer
// ---------------------------------------------------------------------------

namespace {

std::vector<std::span<const double>> bind(const ScalarFunction& f,
                                          const NamedInputs& inputs) {
  for (const auto& [name, values] : inputs) {
    (void)values;
    f.block_index(name);
  }
  std::vector<std::span<const double>> spans;
  spans.reserve(f.blocks().size());
  for (const auto& b : f.blocks()) {
    auto it = inputs.find(b.name);
    if (it == inputs.end()) {
      throw DimensionError("autodiff: missing input block '" + b.name + "'");
    }
    spans.emplace_back(it->second);
  }
  return spans;
}

Recording recorded(const ScalarFunction& f, const NamedInputs& inputs) {
  Recording rec(f);
  rec.record(bind(f, inputs));
  return rec;
}

Eigen::VectorXd to_eigen(std::span<const double> s) {
  return Eigen::Map<const Eigen::VectorXd>(s.data(), static_cast<Eigen::Index>(s.size()));
}

void check_direction(const ScalarFunction& f, std::size_t block, const Eigen::VectorXd& v) {
  if (static_cast<std::size_t>(v.size()) != f.dim(block)) {
    throw DimensionError("autodiff: direction for block '" + f.blocks()[block].name +
                         "' has " + std::to_string(v.size()) + " entries, expected " +
                         std::to_string(f.dim(block)));
  }
}

}  // namespace

double evaluate(const ScalarFunction& f, const NamedInputs& inputs) {
  return recorded(f, inputs).value();
}

Eigen::VectorXd gradient(const ScalarFunction& f, const NamedInputs& inputs,
                         std::string_view wrt) {
  const std::size_t b = f.block_index(wrt);
  Recording rec = recorded(f, inputs);
  return to_eigen(rec.slice(rec.gradient(), b));
}

Eigen::VectorXd hvp(const ScalarFunction& f, const NamedInputs& inputs,
                    std::string_view wrt, const Eigen::VectorXd& v) {
  const std::size_t b = f.block_index(wrt);
  check_direction(f, b, v);
  Recording rec = recorded(f, inputs);
  std::vector<double> seed(f.total_dim(), 0.0);
  std::copy(v.begin(), v.end(), seed.begin() + f.offset(b));
  return to_eigen(rec.slice(rec.hessian_vector(seed), b));
}

Eigen::VectorXd mixed_hvp(const ScalarFunction& f, const NamedInputs& inputs,
                          std::string_view grad_block, std::string_view wrt_block,
                          const Eigen::VectorXd& v) {
  const std::size_t g = f.block_index(grad_block);
  const std::size_t w = f.block_index(wrt_block);
  if (g == w) {
    throw std::invalid_argument("autodiff: mixed_hvp needs two distinct blocks; use hvp");
  }
  check_direction(f, g, v);
  Recording rec = recorded(f, inputs);
  std::vector<double> seed(f.total_dim(), 0.0);
  std::copy(v.begin(), v.end(), seed.begin() + f.offset(g));
  return to_eigen(rec.slice(rec.hessian_vector(seed), w));
}

Eigen::MatrixXd hessian_block(const ScalarFunction& f, const NamedInputs& inputs,
                              std::string_view grad_block, std::string_view wrt_block) {
  const std::size_t g = f.block_index(grad_block);
  const std::size_t w = f.block_index(wrt_block);
  Recording rec = recorded(f, inputs);
  return hessian_block(rec, g, w);
}

}  // namespace sg::ad
