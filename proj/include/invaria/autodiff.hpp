#pragma once

// Minimal reverse-mode differentiation over dense row-major matrices.
//
// A Tape records every operation whose inputs require gradients; backward()
// replays the records in reverse order. A non-recording tape keeps no history,
// so intermediate values are released as soon as the last Var referencing them
// goes away (used for inference on large clouds).

#include "invaria/types.hpp"

#include <functional>
#include <memory>
#include <span>
#include <string>
#include <vector>

namespace invaria::ad {

/// Named trainable (or buffer) tensor owned by a model.
struct Parameter {
  std::string name;
  Matrix value;
  Matrix grad;
  bool trainable = true;

  void zero_grad() { grad.setZero(value.rows(), value.cols()); }
};

struct Node {
  Matrix value;
  Matrix grad;  // empty until a gradient flows in
  bool requires_grad = false;
  std::function<void(const Node&)> backward;
};

template <class Expr>
void accumulate(Node& n, const Expr& g) {
  if (n.grad.size() == 0) {
    n.grad = g;
  } else {
    n.grad += g;
  }
}

class Tape;

class Var {
 public:
  Var() = default;
  Var(Tape* tape, std::shared_ptr<Node> node) : tape_(tape), node_(std::move(node)) {}

  const Matrix& value() const { return node_->value; }
  Index rows() const { return node_->value.rows(); }
  Index cols() const { return node_->value.cols(); }
  double scalar() const { return node_->value(0, 0); }
  bool requires_grad() const { return node_ && node_->requires_grad; }
  bool defined() const { return node_ != nullptr; }
  Tape& tape() const { return *tape_; }
  const std::shared_ptr<Node>& node() const { return node_; }

 private:
  Tape* tape_ = nullptr;
  std::shared_ptr<Node> node_;
};

class Tape {
 public:
  explicit Tape(bool record = true, bool training = true) : record_(record), training_(training) {}
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  bool recording() const { return record_; }
  /// Training mode: batch statistics are used and running buffers updated.
  bool training() const { return training_; }

  Var constant(Matrix value);
  Var parameter(Parameter& p);

  /// Reverse pass from a 1x1 root. Parameter gradients are added to Parameter::grad.
  void backward(const Var& root);

  /// Creates a node. `make_backward` is invoked only when the node is recorded and
  /// must return a callable (const Node& self) that accumulates into parent nodes.
  template <class MakeBackward>
  Var emit(Matrix value, std::initializer_list<const Var*> parents, MakeBackward&& make_backward) {
    auto node = std::make_shared<Node>();
    node->value = std::move(value);
    bool needs = false;
    if (record_) {
      for (const Var* p : parents) needs = needs || p->requires_grad();
    }
    if (needs) {
      node->requires_grad = true;
      node->backward = make_backward();
      order_.push_back(node);
    }
    return Var(this, std::move(node));
  }

  /// Same as emit() for a variable-length parent list.
  template <class MakeBackward>
  Var emit_many(Matrix value, std::span<const Var> parents, MakeBackward&& make_backward) {
    auto node = std::make_shared<Node>();
    node->value = std::move(value);
    bool needs = false;
    if (record_) {
      for (const Var& p : parents) needs = needs || p.requires_grad();
    }
    if (needs) {
      node->requires_grad = true;
      node->backward = make_backward();
      order_.push_back(node);
    }
    return Var(this, std::move(node));
  }

  std::size_t recorded_nodes() const { return order_.size(); }

 private:
  bool record_;
  bool training_;
  std::vector<std::shared_ptr<Node>> order_;
};

// Differentiable operations. All inputs must live on the same tape.

Var matmul(const Var& a, const Var& b);
Var add(const Var& a, const Var& b);
/// a + row broadcast over all rows of a.
Var add_row(const Var& a, const Var& row);
Var scale(const Var& a, double s);
Var relu(const Var& a);
Var concat_cols(const Var& a, const Var& b);
/// out.row(i) = a.row(idx[i]).
Var gather_rows(const Var& a, std::shared_ptr<const std::vector<int>> idx);
/// out.row(g) = componentwise max over rows i with group[i] == g.
Var segment_max(const Var& a, std::shared_ptr<const std::vector<int>> group, int num_groups);
/// Per-row normalization with affine gamma/beta (1 x C each).
Var layer_norm(const Var& a, const Var& gamma, const Var& beta, double eps = 1e-5);
/// Per-column normalization over rows. Training tapes use batch statistics and
/// update the running buffers; evaluation tapes use the buffers.
Var batch_norm(const Var& a, const Var& gamma, const Var& beta, Parameter& running_mean, Parameter& running_var,
               double momentum = 0.1, double eps = 1e-5);
Var softmax_rows(const Var& logits);

/// Precomputed neighborhood for edge_max_relu: P x k neighbor rows of the source
/// features plus the (P*k) x 3 per-edge relative positions.
struct EdgeSet {
  int k = 0;
  std::vector<int> nbr;
  Matrix rel;

  Index points() const { return k == 0 ? 0 : static_cast<Index>(nbr.size()) / k; }
};

/// out(i,c) = max(0, max_j u(nbr(i,j),c) + rel(i,j) . w_rel(:,c) + bias(c)).
Var edge_max_relu(const Var& u, const Var& w_rel, const Var& bias, std::shared_ptr<const EdgeSet> edges);

// Scalar losses (1 x 1 outputs); semantics match the functions in losses.hpp.
Var cross_entropy(const Var& logits, std::shared_ptr<const std::vector<int>> labels, int ignore_label = kIgnoreLabel);
Var lovasz_softmax(const Var& probs, std::shared_ptr<const std::vector<int>> labels, int ignore_label = kIgnoreLabel);
/// `matches[p]` pairs token sets (m, l) with the nearest-location index of every token of m in l.
struct AlignmentMatch {
  int from = 0;
  int to = 0;
  std::vector<int> nearest;
};
Var alignment(std::span<const Var> tokens, std::shared_ptr<const std::vector<AlignmentMatch>> matches, int num_sets);
Var weighted_sum(std::span<const Var> scalars, std::span<const double> weights);

}  // namespace invaria::ad
