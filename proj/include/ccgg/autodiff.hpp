#pragma once

// Minimal reverse-mode automatic differentiation over dense row-major
// matrices. A Tape records every operation of one forward pass; backward()
// walks it in reverse. Rows are items (nodes, edges), columns are features.

#include <cstddef>
#include <functional>
#include <span>
#include <string>
#include <unordered_map>
#include <unordered_set>
#include <utility>
#include <vector>

#include <Eigen/Dense>

namespace ccgg {

using Matrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

/// A named, learnable tensor. Owned by a ParamStore.
struct Parameter {
  std::string name;
  Matrix value;
};

namespace ad {

class Tape;

/// Handle to a value recorded on a Tape. Cheap to copy.
class Var {
 public:
  Var() = default;

  const Matrix& value() const;
  Eigen::Index rows() const { return value().rows(); }
  Eigen::Index cols() const { return value().cols(); }
  double scalar() const;
  bool requires_grad() const;

  Tape* tape() const { return tape_; }
  std::size_t id() const { return id_; }
  bool valid() const { return tape_ != nullptr; }

 private:
  friend class Tape;
  Var(Tape* tape, std::size_t id) : tape_(tape), id_(id) {}
  Tape* tape_ = nullptr;
  std::size_t id_ = 0;
};

class Tape {
 public:
  /// Receives the gradient flowing into the node (and the node's own value)
  /// and pushes contributions to its inputs via Tape::accumulate.
  using Backward = std::function<void(Tape&, const Matrix& grad, const Matrix& value)>;

  /// With `record == false` no backward closures are stored (inference).
  explicit Tape(bool record = true) : record_(record) {}
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  Var constant(Matrix value);
  Var variable(Matrix value);
  /// Leaf bound to a parameter; repeated calls return the same leaf.
  /// Frozen parameters become constants and never receive gradient.
  Var param(const Parameter& p);
  void freeze(const Parameter& p) { frozen_.insert(&p); }

  /// Records an op. `inputs` decide whether gradient is needed at all.
  Var record(Matrix value, std::initializer_list<Var> inputs, Backward backward);

  /// Seeds d(root)/d(root) = 1; root must be 1x1.
  void backward(Var root);

  /// Gradient of the last backward root with respect to v (zeros if none).
  Matrix grad(Var v) const;
  /// Iterates (parameter, gradient) for every bound parameter that received one.
  void for_each_param_grad(const std::function<void(const Parameter&, const Matrix&)>& fn) const;

  void accumulate(std::size_t id, const Matrix& g);
  template <class Expr>
  void accumulate_expr(std::size_t id, const Expr& g) {
    Node& n = nodes_[id];
    if (!n.needs_grad) return;
    if (n.grad.size() == 0) {
      n.grad = g;
    } else {
      n.grad += g;
    }
  }

  bool recording() const { return record_; }
  std::size_t size() const { return nodes_.size(); }

 private:
  friend class Var;
  struct Node {
    Matrix value;
    Matrix grad;
    Backward backward;
    bool needs_grad = false;
  };
  std::vector<Node> nodes_;
  std::unordered_map<const Parameter*, std::size_t> params_;
  std::unordered_set<const Parameter*> frozen_;
  bool record_;
};

// Elementwise / linear algebra. All operands must live on the same tape.
Var matmul(Var a, Var b);
Var add(Var a, Var b);
Var sub(Var a, Var b);
Var mul(Var a, Var b);
Var neg(Var a);
Var scale(Var a, double s);
Var add_scalar(Var a, double s);
/// a (r x c) + row (1 x c) broadcast over rows.
Var add_row(Var a, Var row);
/// a (r x c) * col (r x 1) broadcast over columns.
Var mul_col(Var a, Var col);
/// a (r x c) / col (r x 1) broadcast over columns.
Var div_col(Var a, Var col);

Var relu(Var a);
Var sigmoid(Var a);
Var log_sigmoid(Var a);
Var tanh(Var a);
Var exp(Var a);
Var log(Var a);
Var log1p(Var a);
/// Elementwise clamp; gradient is zero where clamped.
Var clamp(Var a, double lo, double hi);
Var clamp_min(Var a, double lo);

Var concat_cols(Var a, Var b);
Var concat_rows(Var a, Var b);
Var gather_rows(Var a, std::span<const int> index);
/// out[index[k]] += a[k]; out has `out_rows` rows.
Var scatter_add_rows(Var a, std::span<const int> index, Eigen::Index out_rows);
Var select_col(Var a, Eigen::Index col);
Var pick(Var a, Eigen::Index r, Eigen::Index c);

Var sum(Var a);
/// Column sums: (r x c) -> (1 x c).
Var sum_rows(Var a);
/// Column means: (r x c) -> (1 x c).
Var mean_rows(Var a);
/// Row sums: (r x c) -> (r x 1).
Var sum_cols(Var a);
/// Per-row log-sum-exp: (r x c) -> (r x 1).
Var logsumexp_rows(Var a);
Var log_softmax_rows(Var a);
Var softmax_rows(Var a);

/// Elementwise b*log(sigmoid(z)) + (1-b)*log(sigmoid(-z)) with z broadcast
/// (E x K) and b a constant 0/1 column (E x 1).
Var bernoulli_log_prob(Var logits, std::span<const double> bits);

/// Forward value `hard`, backward passes the gradient straight to `soft`.
Var straight_through(Var soft, Matrix hard);

/// Copies `base` and overwrites entry (r, c) with values[k] for every
/// placement {k, r, c}; gradients flow back to `values` (k x 1).
struct Placement {
  Eigen::Index source;
  Eigen::Index row;
  Eigen::Index col;
};
Var place_entries(Matrix base, Var values, std::span<const Placement> placements);

}  // namespace ad
}  // namespace ccgg
