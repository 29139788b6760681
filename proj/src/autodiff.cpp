#include "posecam/autodiff.hpp"

#include <cmath>
#include <memory>
#include <numbers>

#include "posecam/errors.hpp"

namespace posecam::net {

std::size_t ParameterStore::add(std::string name, Mat value, ParamGroup group) {
  if (index_.contains(name)) throw InvalidInput("duplicate parameter " + name);
  index_.emplace(name, params_.size());
  params_.push_back({std::move(name), std::move(value), group});
  return params_.size() - 1;
}

bool ParameterStore::contains(std::string_view name) const { return index_.find(name) != index_.end(); }

std::size_t ParameterStore::index_of(std::string_view name) const {
  const auto it = index_.find(name);
  if (it == index_.end()) throw InvalidInput("unknown parameter " + std::string(name));
  return it->second;
}

std::size_t ParameterStore::scalar_count() const {
  std::size_t n = 0;
  for (const auto& p : params_) n += static_cast<std::size_t>(p.value.size());
  return n;
}

Gradients::Gradients(const ParameterStore& store) {
  grads_.reserve(store.size());
  for (const auto& p : store) grads_.push_back(Mat::Zero(p.value.rows(), p.value.cols()));
}

void Gradients::zero() {
  for (auto& g : grads_) g.setZero();
}

void Gradients::add_scaled(const Gradients& other, double factor) {
  if (other.size() != size()) throw InvalidInput("gradient sets differ in size");
  for (std::size_t i = 0; i < grads_.size(); ++i) grads_[i] += factor * other.grads_[i];
}

void Gradients::scale(double factor) {
  for (auto& g : grads_) g *= factor;
}

double Gradients::global_norm() const {
  double s = 0.0;
  for (const auto& g : grads_) s += g.squaredNorm();
  return std::sqrt(s);
}

long Gradients::first_non_finite() const {
  for (std::size_t i = 0; i < grads_.size(); ++i) {
    if (!grads_[i].allFinite()) return static_cast<long>(i);
  }
  return -1;
}

Var Tape::constant(Mat value) {
  nodes_.push_back({std::move(value), {}, {}, -1, false, false});
  return {static_cast<int>(nodes_.size() - 1)};
}

Var Tape::parameter(const ParameterStore& store, std::size_t index) {
  nodes_.push_back({store[index].value, {}, {}, static_cast<long>(index), record_, false});
  return {static_cast<int>(nodes_.size() - 1)};
}

Var Tape::parameter(const ParameterStore& store, std::string_view name) {
  return parameter(store, store.index_of(name));
}

Var Tape::push(Mat value, std::initializer_list<Var> inputs, BackwardFn fn) {
  bool needs = false;
  for (Var v : inputs) needs = needs || needs_grad(v);
  nodes_.push_back({std::move(value), {}, {}, -1, record_ && needs, false});
  if (nodes_.back().needs_grad) nodes_.back().backward = std::move(fn);
  return {static_cast<int>(nodes_.size() - 1)};
}

Var Tape::push(Mat value, const std::vector<Var>& inputs, BackwardFn fn) {
  bool needs = false;
  for (Var v : inputs) needs = needs || needs_grad(v);
  nodes_.push_back({std::move(value), {}, {}, -1, record_ && needs, false});
  if (nodes_.back().needs_grad) nodes_.back().backward = std::move(fn);
  return {static_cast<int>(nodes_.size() - 1)};
}

void Tape::accumulate(Var v, const Mat& grad) {
  Node& n = nodes_[static_cast<std::size_t>(v.id)];
  if (!n.needs_grad) return;
  if (n.has_grad) {
    n.grad += grad;
  } else {
    n.grad = grad;
    n.has_grad = true;
  }
}

void Tape::backward(Var scalar, Gradients& out) {
  if (!record_) throw InvalidInput("backward on a non-recording tape");
  if (value(scalar).size() != 1) throw InvalidInput("backward needs a scalar root");
  accumulate(scalar, Mat::Ones(1, 1));
  for (std::size_t i = static_cast<std::size_t>(scalar.id) + 1; i-- > 0;) {
    Node& n = nodes_[i];
    if (!n.has_grad) continue;
    if (n.param >= 0) {
      out[static_cast<std::size_t>(n.param)] += n.grad;
    } else if (n.backward) {
      n.backward(*this, n.grad);
    }
  }
}

namespace ops {

Var matmul(Tape& t, Var a, Var b) {
  return t.push(t.value(a) * t.value(b), {a, b}, [a, b](Tape& tp, const Mat& g) {
    if (tp.needs_grad(a)) tp.accumulate(a, g * tp.value(b).transpose());
    if (tp.needs_grad(b)) tp.accumulate(b, tp.value(a).transpose() * g);
  });
}

Var add(Tape& t, Var a, Var b) {
  if (t.value(a).rows() != t.value(b).rows() || t.value(a).cols() != t.value(b).cols()) {
    throw InvalidInput("add: shape mismatch");
  }
  return t.push(t.value(a) + t.value(b), {a, b}, [a, b](Tape& tp, const Mat& g) {
    tp.accumulate(a, g);
    tp.accumulate(b, g);
  });
}

Var add_row(Tape& t, Var a, Var row) {
  if (t.value(row).rows() != 1 || t.value(row).cols() != t.value(a).cols()) {
    throw InvalidInput("add_row: shape mismatch");
  }
  Mat out = t.value(a).rowwise() + t.value(row).row(0);
  return t.push(std::move(out), {a, row}, [a, row](Tape& tp, const Mat& g) {
    tp.accumulate(a, g);
    if (tp.needs_grad(row)) tp.accumulate(row, g.colwise().sum());
  });
}

Var scale(Tape& t, Var a, double s) {
  return t.push(t.value(a) * s, {a}, [a, s](Tape& tp, const Mat& g) { tp.accumulate(a, g * s); });
}

Var gelu(Tape& t, Var a) {
  static constexpr double c = 0.7978845608028654;  // sqrt(2 / pi)
  static constexpr double k = 0.044715;
  const Mat& x = t.value(a);
  Mat th = (c * (x.array() + k * x.array().cube())).tanh().matrix();
  Mat out = (0.5 * x.array() * (1.0 + th.array())).matrix();
  return t.push(std::move(out), {a}, [a, th = std::move(th)](Tape& tp, const Mat& g) {
    const auto xa = tp.value(a).array();
    const auto d = 0.5 * (1.0 + th.array()) +
                   0.5 * xa * (1.0 - th.array().square()) * c * (1.0 + 3.0 * k * xa.square());
    tp.accumulate(a, (g.array() * d).matrix());
  });
}

Var layer_norm(Tape& t, Var x, Var gain, Var bias, double eps) {
  const Mat& xv = t.value(x);
  const Eigen::Index cols = xv.cols();
  const Eigen::VectorXd mean = xv.rowwise().mean();
  Mat centered = xv.colwise() - mean;
  const Eigen::VectorXd inv_std =
      ((centered.array().square().rowwise().sum() / static_cast<double>(cols)) + eps).rsqrt();
  Mat xhat = centered.array().colwise() * inv_std.array();
  Mat out = (xhat.array().rowwise() * t.value(gain).row(0).array()).matrix();
  out.rowwise() += t.value(bias).row(0);
  return t.push(std::move(out), {x, gain, bias},
                [x, gain, bias, xhat = std::move(xhat), inv_std, cols](Tape& tp, const Mat& g) {
                  if (tp.needs_grad(gain)) {
                    tp.accumulate(gain, (g.array() * xhat.array()).colwise().sum().matrix());
                  }
                  if (tp.needs_grad(bias)) tp.accumulate(bias, g.colwise().sum());
                  if (!tp.needs_grad(x)) return;
                  const Mat dxhat = (g.array().rowwise() * tp.value(gain).row(0).array()).matrix();
                  const Eigen::VectorXd m1 = dxhat.rowwise().mean();
                  const Eigen::VectorXd m2 =
                      (dxhat.array() * xhat.array()).rowwise().sum() / static_cast<double>(cols);
                  Mat dx = dxhat.colwise() - m1;
                  dx -= (xhat.array().colwise() * m2.array()).matrix();
                  dx = dx.array().colwise() * inv_std.array();
                  tp.accumulate(x, dx);
                });
}

Var attention(Tape& t, Var q, Var k, Var v, int n_heads, bool causal) {
  const Mat& qv = t.value(q);
  const Mat& kv = t.value(k);
  const Mat& vv = t.value(v);
  const Eigen::Index rows = qv.rows();
  const Eigen::Index dim = qv.cols();
  if (n_heads <= 0 || dim % n_heads != 0) throw InvalidInput("attention: bad head count");
  if (kv.rows() != rows || vv.rows() != rows || kv.cols() != dim || vv.cols() != dim) {
    throw InvalidInput("attention: shape mismatch");
  }
  const Eigen::Index hd = dim / n_heads;
  const double sc = 1.0 / std::sqrt(static_cast<double>(hd));

  auto probs = std::make_shared<std::vector<Mat>>();
  probs->reserve(static_cast<std::size_t>(n_heads));
  Mat out(rows, dim);
  for (int h = 0; h < n_heads; ++h) {
    const Eigen::Index c0 = h * hd;
    Mat s = qv.middleCols(c0, hd) * kv.middleCols(c0, hd).transpose() * sc;
    for (Eigen::Index i = 0; i < rows; ++i) {
      const Eigen::Index valid = causal ? i + 1 : rows;
      const double mx = s.row(i).head(valid).maxCoeff();
      double z = 0.0;
      for (Eigen::Index j = 0; j < rows; ++j) {
        const double e = j < valid ? std::exp(s(i, j) - mx) : 0.0;
        s(i, j) = e;
        z += e;
      }
      s.row(i) /= z;
    }
    out.middleCols(c0, hd) = s * vv.middleCols(c0, hd);
    probs->push_back(std::move(s));
  }

  return t.push(std::move(out), {q, k, v}, [q, k, v, probs, n_heads, hd, sc](Tape& tp, const Mat& g) {
    const Mat& qv = tp.value(q);
    const Mat& kv = tp.value(k);
    const Mat& vv = tp.value(v);
    Mat dq = Mat::Zero(qv.rows(), qv.cols());
    Mat dk = Mat::Zero(kv.rows(), kv.cols());
    Mat dv = Mat::Zero(vv.rows(), vv.cols());
    for (int h = 0; h < n_heads; ++h) {
      const Eigen::Index c0 = h * hd;
      const Mat& p = (*probs)[static_cast<std::size_t>(h)];
      const auto go = g.middleCols(c0, hd);
      dv.middleCols(c0, hd) = p.transpose() * go;
      const Mat dp = go * vv.middleCols(c0, hd).transpose();
      const Eigen::VectorXd inner = (dp.array() * p.array()).rowwise().sum();
      const Mat ds = (p.array() * (dp.colwise() - inner).array()).matrix() * sc;
      dq.middleCols(c0, hd) = ds * kv.middleCols(c0, hd);
      dk.middleCols(c0, hd) = ds.transpose() * qv.middleCols(c0, hd);
    }
    tp.accumulate(q, dq);
    tp.accumulate(k, dk);
    tp.accumulate(v, dv);
  });
}

Var stack_rows(Tape& t, const std::vector<RowRef>& rows) {
  if (rows.empty()) throw InvalidInput("stack_rows: no rows");
  const Eigen::Index cols = t.value(rows.front().source).cols();
  Mat out(static_cast<Eigen::Index>(rows.size()), cols);
  std::vector<Var> inputs;
  for (std::size_t r = 0; r < rows.size(); ++r) {
    const Mat& src = t.value(rows[r].source);
    if (src.cols() != cols) throw InvalidInput("stack_rows: width mismatch");
    out.row(static_cast<Eigen::Index>(r)) = src.row(rows[r].row);
    inputs.push_back(rows[r].source);
  }
  return t.push(std::move(out), inputs, [rows](Tape& tp, const Mat& g) {
    for (std::size_t r = 0; r < rows.size(); ++r) {
      const Var src = rows[r].source;
      if (!tp.needs_grad(src)) continue;
      Mat d = Mat::Zero(tp.value(src).rows(), tp.value(src).cols());
      d.row(rows[r].row) = g.row(static_cast<Eigen::Index>(r));
      tp.accumulate(src, d);
    }
  });
}

Var gather_rows(Tape& t, Var a, const std::vector<Eigen::Index>& rows) {
  const Mat& av = t.value(a);
  Mat out(static_cast<Eigen::Index>(rows.size()), av.cols());
  for (std::size_t r = 0; r < rows.size(); ++r) {
    if (rows[r] < 0 || rows[r] >= av.rows()) throw InvalidInput("gather_rows: index out of range");
    out.row(static_cast<Eigen::Index>(r)) = av.row(rows[r]);
  }
  return t.push(std::move(out), {a}, [a, rows](Tape& tp, const Mat& g) {
    Mat d = Mat::Zero(tp.value(a).rows(), tp.value(a).cols());
    for (std::size_t r = 0; r < rows.size(); ++r) d.row(rows[r]) += g.row(static_cast<Eigen::Index>(r));
    tp.accumulate(a, d);
  });
}

Var cross_entropy(Tape& t, Var logits, Eigen::Index target) {
  const Mat& l = t.value(logits);
  if (l.rows() != 1 || target < 0 || target >= l.cols()) throw InvalidInput("cross_entropy: bad target");
  const double mx = l.maxCoeff();
  Mat p = (l.array() - mx).exp().matrix();
  const double z = p.sum();
  p /= z;
  Mat out(1, 1);
  out(0, 0) = -(l(0, target) - mx - std::log(z));
  return t.push(std::move(out), {logits}, [logits, target, p = std::move(p)](Tape& tp, const Mat& g) {
    Mat d = p;
    d(0, target) -= 1.0;
    tp.accumulate(logits, d * g(0, 0));
  });
}

Var weighted_sum(Tape& t, const std::vector<std::pair<Var, double>>& terms) {
  Mat out = Mat::Zero(1, 1);
  std::vector<Var> inputs;
  for (const auto& [v, w] : terms) {
    if (t.value(v).size() != 1) throw InvalidInput("weighted_sum: operands must be scalars");
    out(0, 0) += w * t.scalar(v);
    inputs.push_back(v);
  }
  return t.push(std::move(out), inputs, [terms](Tape& tp, const Mat& g) {
    for (const auto& [v, w] : terms) tp.accumulate(v, g * w);
  });
}

}  // namespace ops
}  // namespace posecam::net
