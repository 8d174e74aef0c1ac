#include "invaria/autodiff.hpp"

#include "invaria/kernels.hpp"
#include "invaria/losses.hpp"

#include <cmath>

namespace invaria::ad {

Var Tape::constant(Matrix value) {
  auto node = std::make_shared<Node>();
  node->value = std::move(value);
  return Var(this, std::move(node));
}

Var Tape::parameter(Parameter& p) {
  auto node = std::make_shared<Node>();
  node->value = p.value;
  if (record_ && p.trainable) {
    node->requires_grad = true;
    node->backward = [&p](const Node& self) {
      if (p.grad.rows() != p.value.rows() || p.grad.cols() != p.value.cols()) p.zero_grad();
      p.grad += self.grad;
    };
    order_.push_back(node);
  }
  return Var(this, std::move(node));
}

void Tape::backward(const Var& root) {
  if (root.rows() != 1 || root.cols() != 1) throw std::invalid_argument("backward: root must be a scalar");
  if (!root.requires_grad()) return;
  root.node()->grad = Matrix::Constant(1, 1, 1.0);
  for (auto it = order_.rbegin(); it != order_.rend(); ++it) {
    Node& n = **it;
    if (n.grad.size() == 0 || !n.backward) continue;
    n.backward(n);
  }
}

namespace {

void same_tape(const Var& a, const Var& b) {
  if (&a.tape() != &b.tape()) throw std::logic_error("autodiff: operands recorded on different tapes");
}

}  // namespace

Var matmul(const Var& a, const Var& b) {
  same_tape(a, b);
  if (a.cols() != b.rows()) throw std::invalid_argument("matmul: inner dimensions differ");
  Matrix out = a.value() * b.value();
  return a.tape().emit(std::move(out), {&a, &b}, [a, b] {
    return [an = a.node(), bn = b.node()](const Node& self) {
      if (an->requires_grad) accumulate(*an, self.grad * bn->value.transpose());
      if (bn->requires_grad) accumulate(*bn, an->value.transpose() * self.grad);
    };
  });
}

Var add(const Var& a, const Var& b) {
  same_tape(a, b);
  if (a.rows() != b.rows() || a.cols() != b.cols()) throw std::invalid_argument("add: shape mismatch");
  Matrix out = a.value() + b.value();
  return a.tape().emit(std::move(out), {&a, &b}, [a, b] {
    return [an = a.node(), bn = b.node()](const Node& self) {
      if (an->requires_grad) accumulate(*an, self.grad);
      if (bn->requires_grad) accumulate(*bn, self.grad);
    };
  });
}

Var add_row(const Var& a, const Var& row) {
  same_tape(a, row);
  if (row.rows() != 1 || row.cols() != a.cols()) throw std::invalid_argument("add_row: row shape mismatch");
  Matrix out = a.value().rowwise() + row.value().row(0);
  return a.tape().emit(std::move(out), {&a, &row}, [a, row] {
    return [an = a.node(), rn = row.node()](const Node& self) {
      if (an->requires_grad) accumulate(*an, self.grad);
      if (rn->requires_grad) accumulate(*rn, self.grad.colwise().sum());
    };
  });
}

Var scale(const Var& a, double s) {
  Matrix out = a.value() * s;
  return a.tape().emit(std::move(out), {&a}, [a, s] {
    return [an = a.node(), s](const Node& self) { accumulate(*an, self.grad * s); };
  });
}

Var relu(const Var& a) {
  Matrix out = a.value().cwiseMax(0.0);
  return a.tape().emit(std::move(out), {&a}, [a] {
    return [an = a.node()](const Node& self) {
      accumulate(*an, (an->value.array() > 0.0).select(self.grad, 0.0).matrix());
    };
  });
}

Var concat_cols(const Var& a, const Var& b) {
  same_tape(a, b);
  if (a.rows() != b.rows()) throw std::invalid_argument("concat_cols: row count mismatch");
  Matrix out(a.rows(), a.cols() + b.cols());
  out.leftCols(a.cols()) = a.value();
  out.rightCols(b.cols()) = b.value();
  return a.tape().emit(std::move(out), {&a, &b}, [a, b] {
    return [an = a.node(), bn = b.node()](const Node& self) {
      const Index ca = an->value.cols();
      if (an->requires_grad) accumulate(*an, self.grad.leftCols(ca));
      if (bn->requires_grad) accumulate(*bn, self.grad.rightCols(self.grad.cols() - ca));
    };
  });
}

Var gather_rows(const Var& a, std::shared_ptr<const std::vector<int>> idx) {
  const auto n = static_cast<Index>(idx->size());
  Matrix out(n, a.cols());
  const Matrix& src = a.value();
#pragma omp parallel for schedule(static)
  for (Index i = 0; i < n; ++i) {
    const int r = (*idx)[static_cast<std::size_t>(i)];
    out.row(i) = src.row(r);
  }
  return a.tape().emit(std::move(out), {&a}, [a, idx] {
    return [an = a.node(), idx](const Node& self) {
      Matrix g = Matrix::Zero(an->value.rows(), an->value.cols());
      for (std::size_t i = 0; i < idx->size(); ++i) g.row((*idx)[i]) += self.grad.row(static_cast<Index>(i));
      accumulate(*an, g);
    };
  });
}

Var segment_max(const Var& a, std::shared_ptr<const std::vector<int>> group, int num_groups) {
  if (static_cast<Index>(group->size()) != a.rows()) throw std::invalid_argument("segment_max: group size mismatch");
  const Index c = a.cols();
  Matrix out = Matrix::Constant(num_groups, c, -std::numeric_limits<double>::infinity());
  auto arg = std::make_shared<std::vector<int>>(static_cast<std::size_t>(num_groups * c), -1);
  const Matrix& v = a.value();
  for (Index i = 0; i < a.rows(); ++i) {
    const int g = (*group)[static_cast<std::size_t>(i)];
    for (Index ch = 0; ch < c; ++ch) {
      if (v(i, ch) > out(g, ch)) {
        out(g, ch) = v(i, ch);
        (*arg)[static_cast<std::size_t>(g * c + ch)] = static_cast<int>(i);
      }
    }
  }
  return a.tape().emit(std::move(out), {&a}, [a, arg] {
    return [an = a.node(), arg](const Node& self) {
      Matrix g = Matrix::Zero(an->value.rows(), an->value.cols());
      const Index c = self.grad.cols();
      for (Index gr = 0; gr < self.grad.rows(); ++gr) {
        for (Index ch = 0; ch < c; ++ch) {
          const int src = (*arg)[static_cast<std::size_t>(gr * c + ch)];
          if (src >= 0) g(src, ch) += self.grad(gr, ch);
        }
      }
      accumulate(*an, g);
    };
  });
}

Var layer_norm(const Var& a, const Var& gamma, const Var& beta, double eps) {
  same_tape(a, gamma);
  same_tape(a, beta);
  const Index n = a.rows();
  const Index c = a.cols();
  if (gamma.cols() != c || beta.cols() != c) throw std::invalid_argument("layer_norm: affine width mismatch");
  auto xhat = std::make_shared<Matrix>(n, c);
  auto inv_std = std::make_shared<std::vector<double>>(static_cast<std::size_t>(n));
  Matrix out(n, c);
  const Matrix& x = a.value();
  const auto g = gamma.value().row(0);
  const auto b = beta.value().row(0);
#pragma omp parallel for schedule(static)
  for (Index i = 0; i < n; ++i) {
    const double mean = x.row(i).mean();
    const double var = (x.row(i).array() - mean).square().mean();
    const double r = 1.0 / std::sqrt(var + eps);
    (*inv_std)[static_cast<std::size_t>(i)] = r;
    xhat->row(i) = (x.row(i).array() - mean) * r;
    out.row(i) = xhat->row(i).cwiseProduct(g) + b;
  }
  return a.tape().emit(std::move(out), {&a, &gamma, &beta}, [a, gamma, beta, xhat, inv_std] {
    return [an = a.node(), gn = gamma.node(), bn = beta.node(), xhat, inv_std](const Node& self) {
      if (gn->requires_grad) accumulate(*gn, self.grad.cwiseProduct(*xhat).colwise().sum());
      if (bn->requires_grad) accumulate(*bn, self.grad.colwise().sum());
      if (!an->requires_grad) return;
      const Index n = self.grad.rows();
      Matrix dx(n, self.grad.cols());
      const auto gam = gn->value.row(0);
#pragma omp parallel for schedule(static)
      for (Index i = 0; i < n; ++i) {
        const RowVector dxhat = self.grad.row(i).cwiseProduct(gam);
        const double m1 = dxhat.mean();
        const double m2 = dxhat.cwiseProduct(xhat->row(i)).mean();
        dx.row(i) = (*inv_std)[static_cast<std::size_t>(i)] *
                    (dxhat.array() - m1 - xhat->row(i).array() * m2).matrix();
      }
      accumulate(*an, dx);
    };
  });
}

Var batch_norm(const Var& a, const Var& gamma, const Var& beta, Parameter& running_mean, Parameter& running_var,
               double momentum, double eps) {
  same_tape(a, gamma);
  same_tape(a, beta);
  const Index n = a.rows();
  const Index c = a.cols();
  if (gamma.cols() != c || beta.cols() != c) throw std::invalid_argument("batch_norm: affine width mismatch");
  const Matrix& x = a.value();
  RowVector mean(c);
  RowVector inv_std(c);
  const bool use_batch = a.tape().training();
  if (use_batch) {
    mean = x.colwise().mean();
    const RowVector var = (x.rowwise() - mean).array().square().colwise().mean().matrix();
    inv_std = (var.array() + eps).rsqrt().matrix();
    const double unbias = n > 1 ? static_cast<double>(n) / static_cast<double>(n - 1) : 1.0;
    running_mean.value = (1.0 - momentum) * running_mean.value + momentum * mean;
    running_var.value = (1.0 - momentum) * running_var.value + momentum * (var * unbias);
  } else {
    mean = running_mean.value.row(0);
    inv_std = (running_var.value.row(0).array() + eps).rsqrt().matrix();
  }
  auto xhat = std::make_shared<Matrix>((x.rowwise() - mean).array().rowwise() * inv_std.array());
  Matrix out = (xhat->array().rowwise() * gamma.value().row(0).array()).rowwise() + beta.value().row(0).array();
  return a.tape().emit(std::move(out), {&a, &gamma, &beta}, [a, gamma, beta, xhat, inv_std, use_batch] {
    return [an = a.node(), gn = gamma.node(), bn = beta.node(), xhat, inv_std, use_batch](const Node& self) {
      if (gn->requires_grad) accumulate(*gn, self.grad.cwiseProduct(*xhat).colwise().sum());
      if (bn->requires_grad) accumulate(*bn, self.grad.colwise().sum());
      if (!an->requires_grad) return;
      const Matrix dxhat = self.grad.array().rowwise() * gn->value.row(0).array();
      if (!use_batch) {
        accumulate(*an, (dxhat.array().rowwise() * inv_std.array()).matrix());
        return;
      }
      const RowVector m1 = dxhat.colwise().mean();
      const RowVector m2 = dxhat.cwiseProduct(*xhat).colwise().mean();
      Matrix dx = ((dxhat.rowwise() - m1).array() - xhat->array().rowwise() * m2.array()).rowwise() * inv_std.array();
      accumulate(*an, dx);
    };
  });
}

Var softmax_rows(const Var& logits) {
  Matrix out = invaria::softmax_rows(logits.value());
  auto probs = std::make_shared<Matrix>(out);
  return logits.tape().emit(std::move(out), {&logits}, [logits, probs] {
    return [ln = logits.node(), probs](const Node& self) {
      const Eigen::VectorXd dots = self.grad.cwiseProduct(*probs).rowwise().sum();
      accumulate(*ln, (probs->array() * (self.grad.colwise() - dots).array()).matrix());
    };
  });
}

Var edge_max_relu(const Var& u, const Var& w_rel, const Var& bias, std::shared_ptr<const EdgeSet> edges) {
  same_tape(u, w_rel);
  same_tape(u, bias);
  auto res = std::make_shared<kernels::EdgeMaxResult>(
      kernels::edge_max_relu_parallel(u.value(), edges->nbr, edges->k, edges->rel, w_rel.value(), bias.value()));
  Matrix out = res->out;
  auto argmax = std::make_shared<std::vector<int>>(std::move(res->argmax));
  return u.tape().emit(std::move(out), {&u, &w_rel, &bias}, [u, w_rel, bias, edges, argmax] {
    return [un = u.node(), wn = w_rel.node(), bn = bias.node(), edges, argmax](const Node& self) {
      const Index p = self.grad.rows();
      const Index h = self.grad.cols();
      const int k = edges->k;
      Matrix du = un->requires_grad ? Matrix::Zero(un->value.rows(), h) : Matrix();
      Matrix dw = Matrix::Zero(3, h);
      Matrix db = Matrix::Zero(1, h);
      for (Index i = 0; i < p; ++i) {
        for (Index c = 0; c < h; ++c) {
          const int j = (*argmax)[static_cast<std::size_t>(i * h + c)];
          if (j < 0) continue;
          const double g = self.grad(i, c);
          const Index e = i * k + j;
          if (un->requires_grad) du(edges->nbr[static_cast<std::size_t>(e)], c) += g;
          dw(0, c) += g * edges->rel(e, 0);
          dw(1, c) += g * edges->rel(e, 1);
          dw(2, c) += g * edges->rel(e, 2);
          db(0, c) += g;
        }
      }
      if (un->requires_grad) accumulate(*un, du);
      if (wn->requires_grad) accumulate(*wn, dw);
      if (bn->requires_grad) accumulate(*bn, db);
    };
  });
}

Var cross_entropy(const Var& logits, std::shared_ptr<const std::vector<int>> labels, int ignore_label) {
  auto grad = std::make_shared<Matrix>();
  const double v = invaria::cross_entropy(logits.value(), *labels, grad.get(), ignore_label);
  return logits.tape().emit(Matrix::Constant(1, 1, v), {&logits}, [logits, grad] {
    return [ln = logits.node(), grad](const Node& self) { accumulate(*ln, *grad * self.grad(0, 0)); };
  });
}

Var lovasz_softmax(const Var& probs, std::shared_ptr<const std::vector<int>> labels, int ignore_label) {
  auto grad = std::make_shared<Matrix>();
  const double v = invaria::lovasz_softmax(probs.value(), *labels, grad.get(), ignore_label);
  return probs.tape().emit(Matrix::Constant(1, 1, v), {&probs}, [probs, grad] {
    return [pn = probs.node(), grad](const Node& self) { accumulate(*pn, *grad * self.grad(0, 0)); };
  });
}

Var alignment(std::span<const Var> tokens, std::shared_ptr<const std::vector<AlignmentMatch>> matches, int num_sets) {
  if (tokens.empty()) throw std::invalid_argument("alignment: no token sets");
  std::vector<const Matrix*> values;
  for (const Var& t : tokens) values.push_back(&t.value());
  auto grads = std::make_shared<std::vector<Matrix>>();
  const double v = alignment_loss_matched(values, *matches, num_sets, grads.get());
  std::vector<Var> keep(tokens.begin(), tokens.end());
  return tokens[0].tape().emit_many(Matrix::Constant(1, 1, v), tokens, [keep, grads] {
    std::vector<std::shared_ptr<Node>> nodes;
    for (const Var& t : keep) nodes.push_back(t.node());
    return [nodes, grads](const Node& self) {
      for (std::size_t s = 0; s < nodes.size(); ++s) {
        if (nodes[s]->requires_grad) accumulate(*nodes[s], (*grads)[s] * self.grad(0, 0));
      }
    };
  });
}

Var weighted_sum(std::span<const Var> scalars, std::span<const double> weights) {
  if (scalars.empty() || scalars.size() != weights.size()) {
    throw std::invalid_argument("weighted_sum: need matching non-empty scalars and weights");
  }
  double v = 0.0;
  for (std::size_t i = 0; i < scalars.size(); ++i) v += weights[i] * scalars[i].scalar();
  std::vector<Var> keep(scalars.begin(), scalars.end());
  std::vector<double> w(weights.begin(), weights.end());
  return scalars[0].tape().emit_many(Matrix::Constant(1, 1, v), scalars, [keep, w] {
    std::vector<std::shared_ptr<Node>> nodes;
    for (const Var& s : keep) nodes.push_back(s.node());
    return [nodes, w](const Node& self) {
      for (std::size_t i = 0; i < nodes.size(); ++i) {
        if (nodes[i]->requires_grad) accumulate(*nodes[i], Matrix::Constant(1, 1, w[i] * self.grad(0, 0)));
      }
    };
  });
}

}  // namespace invaria::ad
