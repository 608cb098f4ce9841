#pragma once

#include <cstddef>
#include <functional>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include <Eigen/Dense>

namespace kinfuse::ad {

using Matrix = Eigen::MatrixXd;

/// Trainable tensor. `grad` accumulates across Tape::backward calls until
/// zero_grad(); a parameter used several times on one tape (tied layers)
/// receives the sum of all contributions.
struct Parameter {
  std::string name;
  Matrix value;
  Matrix grad;

  Parameter() = default;
  Parameter(std::string n, Matrix v) : name(std::move(n)), value(std::move(v)), grad(Matrix::Zero(value.rows(), value.cols())) {}

  void zero_grad() { grad.setZero(value.rows(), value.cols()); }
};

struct Var {
  std::size_t id = static_cast<std::size_t>(-1);
};

/// Records a computation over matrices and replays it backwards.
class Tape {
 public:
  void clear();
  std::size_t size() const { return nodes_.size(); }

  Var constant(Matrix value);
  /// Leaf bound to `p`; repeated calls on one tape return the same node.
  Var param(Parameter& p);

  const Matrix& value(Var v) const { return nodes_[v.id].value; }
  double scalar(Var v) const { return nodes_[v.id].value(0, 0); }
  /// Gradient of the last backward root w.r.t. `v`.
  const Matrix& grad(Var v) const { return nodes_[v.id].grad; }

  /// Backpropagate from a 1x1 node and add leaf gradients into their Parameters.
  void backward(Var root, double seed = 1.0);

  Var matmul(Var a, Var b);
  /// a * b^T
  Var matmul_nt(Var a, Var b);
  Var add(Var a, Var b);
  /// Adds a 1 x c row to every row of a.
  Var add_row(Var a, Var row);
  Var scale(Var a, double c);
  /// tanh-approximated GELU.
  Var gelu(Var a);
  /// Row-wise softmax; columns with key_mask[c] == false get probability 0.
  Var softmax_rows(Var a, std::span<const bool> key_mask = {});
  Var layer_norm(Var x, Var gamma, Var beta, double eps);
  Var gather_rows(Var table, std::span<const int> rows);
  /// Row lookup whose backward writes straight into table.grad (sparse).
  Var embed(Parameter& table, std::span<const int> rows);
  Var row(Var a, std::size_t r);
  Var vstack(std::span<const Var> parts);
  /// Side-by-side concatenation of equal-height blocks.
  Var hstack(std::span<const Var> parts);
  Var sum(std::span<const Var> parts);
  /// 1 x n -> 1 x 1 maximum; gradient goes to the first maximal entry.
  Var max_entry(Var a);
  /// Mean over rows of -log softmax(row)[target].
  Var cross_entropy(Var logits, std::span<const std::size_t> targets);
  /// Mean over entries of binary cross-entropy with logits.
  Var bce_with_logits(Var logits, std::span<const double> targets);

 private:
  struct Node {
    Matrix value;
    Matrix grad;
    std::function<void(std::vector<Node>&, const Matrix&)> back;
    Parameter* param = nullptr;
  };

  Var push(Matrix value, std::function<void(std::vector<Node>&, const Matrix&)> back);

  std::vector<Node> nodes_;
  std::unordered_map<const Parameter*, std::size_t> param_nodes_;
};

/// Normalized rows of x before the affine rescale (exposed for tests).
Matrix layer_norm_normalize(const Matrix& x, double eps);

double gelu(double x);

}  // namespace kinfuse::ad
