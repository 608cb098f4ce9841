#include "kinfuse/autodiff.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

#include "kinfuse/error.hpp"

namespace kinfuse::ad {

namespace {

constexpr double kGeluC = 0.044715;
const double kSqrt2OverPi = std::sqrt(2.0 / 3.14159265358979323846);

void accumulate(Matrix& grad, const Matrix& delta) {
  if (grad.size() == 0) {
    grad = delta;
  } else {
    grad += delta;
  }
}

}  // namespace

double gelu(double x) {
  double u = kSqrt2OverPi * (x + kGeluC * x * x * x);
  return 0.5 * x * (1.0 + std::tanh(u));
}

Matrix layer_norm_normalize(const Matrix& x, double eps) {
  Matrix out(x.rows(), x.cols());
  const double n = static_cast<double>(x.cols());
  for (Eigen::Index r = 0; r < x.rows(); ++r) {
    double mu = x.row(r).sum() / n;
    double var = (x.row(r).array() - mu).square().sum() / n;
    out.row(r) = (x.row(r).array() - mu) / std::sqrt(var + eps);
  }
  return out;
}

void Tape::clear() {
  nodes_.clear();
  param_nodes_.clear();
}

Var Tape::push(Matrix value, std::function<void(std::vector<Node>&, const Matrix&)> back) {
  Node n;
  n.value = std::move(value);
  n.back = std::move(back);
  nodes_.push_back(std::move(n));
  return Var{nodes_.size() - 1};
}

Var Tape::constant(Matrix value) { return push(std::move(value), nullptr); }

Var Tape::param(Parameter& p) {
  auto it = param_nodes_.find(&p);
  if (it != param_nodes_.end()) return Var{it->second};
  auto v = push(p.value, nullptr);
  nodes_[v.id].param = &p;
  param_nodes_.emplace(&p, v.id);
  return v;
}

void Tape::backward(Var root, double seed) {
  if (nodes_[root.id].value.size() != 1) throw std::logic_error("backward root must be 1x1");
  for (auto& n : nodes_) n.grad.resize(0, 0);
  nodes_[root.id].grad = Matrix::Constant(1, 1, seed);
  for (std::size_t i = root.id + 1; i-- > 0;) {
    auto& n = nodes_[i];
    if (n.grad.size() == 0) continue;
    if (n.back) {
      n.back(nodes_, n.grad);
    } else if (n.param) {
      if (n.param->grad.rows() != n.grad.rows() || n.param->grad.cols() != n.grad.cols()) {
        n.param->grad = Matrix::Zero(n.grad.rows(), n.grad.cols());
      }
      n.param->grad += n.grad;
    }
  }
}

Var Tape::matmul(Var a, Var b) {
  const auto ia = a.id, ib = b.id;
  Matrix v = value(a) * value(b);
  return push(std::move(v), [ia, ib](std::vector<Node>& ns, const Matrix& g) {
    accumulate(ns[ia].grad, g * ns[ib].value.transpose());
    accumulate(ns[ib].grad, ns[ia].value.transpose() * g);
  });
}

Var Tape::matmul_nt(Var a, Var b) {
  const auto ia = a.id, ib = b.id;
  Matrix v = value(a) * value(b).transpose();
  return push(std::move(v), [ia, ib](std::vector<Node>& ns, const Matrix& g) {
    accumulate(ns[ia].grad, g * ns[ib].value);
    accumulate(ns[ib].grad, g.transpose() * ns[ia].value);
  });
}

Var Tape::add(Var a, Var b) {
  const auto ia = a.id, ib = b.id;
  if (value(a).rows() != value(b).rows() || value(a).cols() != value(b).cols()) {
    throw std::logic_error("add: shape mismatch");
  }
  Matrix v = value(a) + value(b);
  return push(std::move(v), [ia, ib](std::vector<Node>& ns, const Matrix& g) {
    accumulate(ns[ia].grad, g);
    accumulate(ns[ib].grad, g);
  });
}

Var Tape::add_row(Var a, Var row) {
  const auto ia = a.id, ir = row.id;
  Matrix v = value(a);
  v.rowwise() += value(row).row(0);
  return push(std::move(v), [ia, ir](std::vector<Node>& ns, const Matrix& g) {
    accumulate(ns[ia].grad, g);
    accumulate(ns[ir].grad, g.colwise().sum());
  });
}

Var Tape::scale(Var a, double c) {
  const auto ia = a.id;
  Matrix v = value(a) * c;
  return push(std::move(v), [ia, c](std::vector<Node>& ns, const Matrix& g) { accumulate(ns[ia].grad, g * c); });
}

Var Tape::gelu(Var a) {
  const auto ia = a.id;
  Matrix v = value(a).unaryExpr([](double x) { return ad::gelu(x); });
  return push(std::move(v), [ia](std::vector<Node>& ns, const Matrix& g) {
    Matrix d = ns[ia].value.unaryExpr([](double x) {
      double u = kSqrt2OverPi * (x + kGeluC * x * x * x);
      double t = std::tanh(u);
      return 0.5 * (1.0 + t) + 0.5 * x * (1.0 - t * t) * kSqrt2OverPi * (1.0 + 3.0 * kGeluC * x * x);
    });
    accumulate(ns[ia].grad, g.cwiseProduct(d));
  });
}

Var Tape::softmax_rows(Var a, std::span<const bool> key_mask) {
  const auto ia = a.id;
  const Matrix& x = value(a);
  if (!key_mask.empty() && static_cast<Eigen::Index>(key_mask.size()) != x.cols()) {
    throw std::logic_error("softmax_rows: mask width mismatch");
  }
  Matrix y = Matrix::Zero(x.rows(), x.cols());
  for (Eigen::Index r = 0; r < x.rows(); ++r) {
    double mx = -std::numeric_limits<double>::infinity();
    for (Eigen::Index c = 0; c < x.cols(); ++c) {
      if (key_mask.empty() || key_mask[c]) mx = std::max(mx, x(r, c));
    }
    double z = 0.0;
    for (Eigen::Index c = 0; c < x.cols(); ++c) {
      if (key_mask.empty() || key_mask[c]) {
        y(r, c) = std::exp(x(r, c) - mx);
        z += y(r, c);
      }
    }
    y.row(r) /= z;
  }
  return push(y, [ia, y](std::vector<Node>& ns, const Matrix& g) {
    Matrix gy = g.cwiseProduct(y);
    Eigen::VectorXd dots = gy.rowwise().sum();
    Matrix d = gy - (y.array().colwise() * dots.array()).matrix();
    accumulate(ns[ia].grad, d);
  });
}

Var Tape::layer_norm(Var x, Var gamma, Var beta, double eps) {
  const auto ix = x.id, ig = gamma.id, ib = beta.id;
  const Matrix& in = value(x);
  const Eigen::Index rows = in.rows(), cols = in.cols();
  Matrix xhat(rows, cols);
  Eigen::VectorXd rstd(rows);
  const double n = static_cast<double>(cols);
  for (Eigen::Index r = 0; r < rows; ++r) {
    double mu = in.row(r).sum() / n;
    double var = (in.row(r).array() - mu).square().sum() / n;
    rstd(r) = 1.0 / std::sqrt(var + eps);
    xhat.row(r) = (in.row(r).array() - mu) * rstd(r);
  }
  Matrix y = xhat;
  y.array().rowwise() *= value(gamma).row(0).array();
  y.rowwise() += value(beta).row(0);
  return push(std::move(y), [ix, ig, ib, xhat, rstd](std::vector<Node>& ns, const Matrix& g) {
    const Eigen::Index cols = xhat.cols();
    const double n = static_cast<double>(cols);
    accumulate(ns[ig].grad, g.cwiseProduct(xhat).colwise().sum());
    accumulate(ns[ib].grad, g.colwise().sum());
    Matrix dxhat = g;
    dxhat.array().rowwise() *= ns[ig].value.row(0).array();
    Matrix dx(xhat.rows(), cols);
    for (Eigen::Index r = 0; r < xhat.rows(); ++r) {
      double mean_d = dxhat.row(r).sum() / n;
      double mean_dx = dxhat.row(r).dot(xhat.row(r)) / n;
      dx.row(r) = rstd(r) * (dxhat.row(r).array() - mean_d - xhat.row(r).array() * mean_dx);
    }
    accumulate(ns[ix].grad, dx);
  });
}

Var Tape::gather_rows(Var table, std::span<const int> rows) {
  const auto it = table.id;
  const Matrix& t = value(table);
  std::vector<int> idx(rows.begin(), rows.end());
  Matrix v(static_cast<Eigen::Index>(idx.size()), t.cols());
  for (std::size_t r = 0; r < idx.size(); ++r) {
    if (idx[r] < 0 || idx[r] >= t.rows()) throw std::out_of_range("gather_rows: row index");
    v.row(static_cast<Eigen::Index>(r)) = t.row(idx[r]);
  }
  return push(std::move(v), [it, idx](std::vector<Node>& ns, const Matrix& g) {
    auto& tg = ns[it].grad;
    if (tg.size() == 0) tg = Matrix::Zero(ns[it].value.rows(), ns[it].value.cols());
    for (std::size_t r = 0; r < idx.size(); ++r) tg.row(idx[r]) += g.row(static_cast<Eigen::Index>(r));
  });
}

Var Tape::embed(Parameter& table, std::span<const int> rows) {
  std::vector<int> idx(rows.begin(), rows.end());
  Matrix v(static_cast<Eigen::Index>(idx.size()), table.value.cols());
  for (std::size_t r = 0; r < idx.size(); ++r) {
    if (idx[r] < 0 || idx[r] >= table.value.rows()) throw std::out_of_range("embed: row index");
    v.row(static_cast<Eigen::Index>(r)) = table.value.row(idx[r]);
  }
  Parameter* p = &table;
  return push(std::move(v), [p, idx](std::vector<Node>&, const Matrix& g) {
    if (p->grad.rows() != p->value.rows() || p->grad.cols() != p->value.cols()) p->zero_grad();
    for (std::size_t r = 0; r < idx.size(); ++r) p->grad.row(idx[r]) += g.row(static_cast<Eigen::Index>(r));
  });
}

Var Tape::row(Var a, std::size_t r) {
  const auto ia = a.id;
  const auto ri = static_cast<Eigen::Index>(r);
  Matrix v = value(a).row(ri);
  return push(std::move(v), [ia, ri](std::vector<Node>& ns, const Matrix& g) {
    auto& ag = ns[ia].grad;
    if (ag.size() == 0) ag = Matrix::Zero(ns[ia].value.rows(), ns[ia].value.cols());
    ag.row(ri) += g.row(0);
  });
}

Var Tape::vstack(std::span<const Var> parts) {
  if (parts.empty()) throw std::logic_error("vstack: no parts");
  std::vector<std::size_t> ids;
  Eigen::Index rows = 0;
  const Eigen::Index cols = value(parts[0]).cols();
  for (auto p : parts) {
    if (value(p).cols() != cols) throw std::logic_error("vstack: width mismatch");
    ids.push_back(p.id);
    rows += value(p).rows();
  }
  Matrix v(rows, cols);
  Eigen::Index at = 0;
  for (auto p : parts) {
    v.middleRows(at, value(p).rows()) = value(p);
    at += value(p).rows();
  }
  return push(std::move(v), [ids](std::vector<Node>& ns, const Matrix& g) {
    Eigen::Index at = 0;
    for (auto id : ids) {
      auto h = ns[id].value.rows();
      accumulate(ns[id].grad, g.middleRows(at, h));
      at += h;
    }
  });
}

Var Tape::hstack(std::span<const Var> parts) {
  if (parts.empty()) throw std::logic_error("hstack: no parts");
  std::vector<std::size_t> ids;
  Eigen::Index cols = 0;
  const Eigen::Index rows = value(parts[0]).rows();
  for (auto p : parts) {
    if (value(p).rows() != rows) throw std::logic_error("hstack: height mismatch");
    ids.push_back(p.id);
    cols += value(p).cols();
  }
  Matrix v(rows, cols);
  Eigen::Index at = 0;
  for (auto p : parts) {
    v.middleCols(at, value(p).cols()) = value(p);
    at += value(p).cols();
  }
  return push(std::move(v), [ids](std::vector<Node>& ns, const Matrix& g) {
    Eigen::Index at = 0;
    for (auto id : ids) {
      auto w = ns[id].value.cols();
      accumulate(ns[id].grad, g.middleCols(at, w));
      at += w;
    }
  });
}

Var Tape::sum(std::span<const Var> parts) {
  if (parts.empty()) throw std::logic_error("sum: no parts");
  std::vector<std::size_t> ids;
  Matrix v = value(parts[0]);
  ids.push_back(parts[0].id);
  for (std::size_t i = 1; i < parts.size(); ++i) {
    v += value(parts[i]);
    ids.push_back(parts[i].id);
  }
  return push(std::move(v), [ids](std::vector<Node>& ns, const Matrix& g) {
    for (auto id : ids) accumulate(ns[id].grad, g);
  });
}

Var Tape::max_entry(Var a) {
  const auto ia = a.id;
  const Matrix& x = value(a);
  Eigen::Index best_r = 0, best_c = 0;
  for (Eigen::Index r = 0; r < x.rows(); ++r) {
    for (Eigen::Index c = 0; c < x.cols(); ++c) {
      if (x(r, c) > x(best_r, best_c)) {
        best_r = r;
        best_c = c;
      }
    }
  }
  Matrix v = Matrix::Constant(1, 1, x(best_r, best_c));
  return push(std::move(v), [ia, best_r, best_c](std::vector<Node>& ns, const Matrix& g) {
    auto& ag = ns[ia].grad;
    if (ag.size() == 0) ag = Matrix::Zero(ns[ia].value.rows(), ns[ia].value.cols());
    ag(best_r, best_c) += g(0, 0);
  });
}

Var Tape::cross_entropy(Var logits, std::span<const std::size_t> targets) {
  const auto il = logits.id;
  const Matrix& x = value(logits);
  if (static_cast<Eigen::Index>(targets.size()) != x.rows()) throw std::logic_error("cross_entropy: target count");
  std::vector<std::size_t> tg(targets.begin(), targets.end());
  Matrix probs(x.rows(), x.cols());
  double loss = 0.0;
  for (Eigen::Index r = 0; r < x.rows(); ++r) {
    if (tg[r] >= static_cast<std::size_t>(x.cols())) throw std::out_of_range("cross_entropy: target");
    double mx = x.row(r).maxCoeff();
    probs.row(r) = (x.row(r).array() - mx).exp();
    double z = probs.row(r).sum();
    probs.row(r) /= z;
    loss += -(x(r, static_cast<Eigen::Index>(tg[r])) - mx - std::log(z));
  }
  const double rows = static_cast<double>(x.rows());
  loss /= rows;
  return push(Matrix::Constant(1, 1, loss), [il, tg, probs, rows](std::vector<Node>& ns, const Matrix& g) {
    Matrix d = probs;
    for (std::size_t r = 0; r < tg.size(); ++r) d(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(tg[r])) -= 1.0;
    accumulate(ns[il].grad, d * (g(0, 0) / rows));
  });
}

Var Tape::bce_with_logits(Var logits, std::span<const double> targets) {
  const auto il = logits.id;
  const Matrix& x = value(logits);
  if (static_cast<Eigen::Index>(targets.size()) != x.size()) throw std::logic_error("bce: target count");
  std::vector<double> tg(targets.begin(), targets.end());
  double loss = 0.0;
  Matrix sig(x.rows(), x.cols());
  for (Eigen::Index i = 0; i < x.size(); ++i) {
    double z = x(i);
    // softplus(z) - t z, stable for large |z|
    loss += std::max(z, 0.0) + std::log1p(std::exp(-std::abs(z))) - tg[i] * z;
    sig(i) = 1.0 / (1.0 + std::exp(-z));
  }
  const double count = static_cast<double>(x.size());
  return push(Matrix::Constant(1, 1, loss / count), [il, tg, sig, count](std::vector<Node>& ns, const Matrix& g) {
    Matrix d = sig;
    for (Eigen::Index i = 0; i < d.size(); ++i) d(i) -= tg[static_cast<std::size_t>(i)];
    accumulate(ns[il].grad, d * (g(0, 0) / count));
  });
}

}  // namespace kinfuse::ad
