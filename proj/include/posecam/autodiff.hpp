#pragma once

#include <cstddef>
#include <functional>
#include <initializer_list>
#include <map>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Core>

namespace posecam::net {

using Mat = Eigen::MatrixXd;

/// Optimizer group; the head group runs at a multiple of the backbone rate.
enum class ParamGroup { backbone, head };

struct Parameter {
  std::string name;
  Mat value;
  ParamGroup group = ParamGroup::backbone;
};

/// Named parameters in insertion order.
class ParameterStore {
 public:
  std::size_t add(std::string name, Mat value, ParamGroup group);

  std::size_t size() const { return params_.size(); }
  Parameter& operator[](std::size_t i) { return params_[i]; }
  const Parameter& operator[](std::size_t i) const { return params_[i]; }
  auto begin() { return params_.begin(); }
  auto end() { return params_.end(); }
  auto begin() const { return params_.begin(); }
  auto end() const { return params_.end(); }

  bool contains(std::string_view name) const;
  /// Throws InvalidInput for unknown names.
  std::size_t index_of(std::string_view name) const;
  Parameter& get(std::string_view name) { return params_[index_of(name)]; }
  const Parameter& get(std::string_view name) const { return params_[index_of(name)]; }

  std::size_t scalar_count() const;

 private:
  std::vector<Parameter> params_;
  std::map<std::string, std::size_t, std::less<>> index_;
};

/// Per-parameter gradient buffers, shaped like the store they were made for.
class Gradients {
 public:
  Gradients() = default;
  explicit Gradients(const ParameterStore& store);

  std::size_t size() const { return grads_.size(); }
  Mat& operator[](std::size_t i) { return grads_[i]; }
  const Mat& operator[](std::size_t i) const { return grads_[i]; }

  void zero();
  void add_scaled(const Gradients& other, double factor);
  void scale(double factor);
  double global_norm() const;
  /// Index of the first buffer holding a NaN or Inf, or -1.
  long first_non_finite() const;

 private:
  std::vector<Mat> grads_;
};

/// Reverse-mode tape over dense matrices. Nodes are appended in evaluation
/// order; `backward` walks them in reverse.
class Tape {
 public:
  struct Var {
    int id = -1;
    bool valid() const { return id >= 0; }
  };
  using BackwardFn = std::function<void(Tape&, const Mat& grad_out)>;

  /// With `record == false` no backward closures are kept (inference).
  explicit Tape(bool record = true) : record_(record) {}

  bool recording() const { return record_; }

  Var constant(Mat value);
  /// Leaf bound to parameter `index` of `store`; gradients land in that slot.
  Var parameter(const ParameterStore& store, std::size_t index);
  Var parameter(const ParameterStore& store, std::string_view name);

  /// Appends an op result. `fn` runs during backward only when one of
  /// `inputs` needs a gradient.
  Var push(Mat value, std::initializer_list<Var> inputs, BackwardFn fn);
  Var push(Mat value, const std::vector<Var>& inputs, BackwardFn fn);

  const Mat& value(Var v) const { return nodes_[static_cast<std::size_t>(v.id)].value; }
  double scalar(Var v) const { return value(v)(0, 0); }
  bool needs_grad(Var v) const { return nodes_[static_cast<std::size_t>(v.id)].needs_grad; }
  void accumulate(Var v, const Mat& grad);

  /// Back-propagates d(scalar)/d(...) and adds parameter gradients into `out`.
  void backward(Var scalar, Gradients& out);

  std::size_t size() const { return nodes_.size(); }

 private:
  struct Node {
    Mat value;
    Mat grad;
    BackwardFn backward;
    long param = -1;
    bool needs_grad = false;
    bool has_grad = false;
  };

  bool record_;
  std::vector<Node> nodes_;
};

using Var = Tape::Var;

namespace ops {

Var matmul(Tape& t, Var a, Var b);
Var add(Tape& t, Var a, Var b);
/// Adds a 1×C row to every row of a.
Var add_row(Tape& t, Var a, Var row);
Var scale(Tape& t, Var a, double s);
/// tanh-approximated GELU.
Var gelu(Tape& t, Var a);
/// Row-wise layer normalization with 1×C gain and bias.
Var layer_norm(Tape& t, Var x, Var gain, Var bias, double eps = 1e-5);
/// Multi-head scaled dot-product attention over rows; causal masks j > i.
Var attention(Tape& t, Var q, Var k, Var v, int n_heads, bool causal);

struct RowRef {
  Var source;
  Eigen::Index row = 0;
};
/// Builds a matrix whose r-th row is rows[r].
Var stack_rows(Tape& t, const std::vector<RowRef>& rows);
Var gather_rows(Tape& t, Var a, const std::vector<Eigen::Index>& rows);

/// -log softmax(logits)[target] for a 1×V row.
Var cross_entropy(Tape& t, Var logits, Eigen::Index target);

/// sum_i w_i * s_i over 1×1 scalars.
Var weighted_sum(Tape& t, const std::vector<std::pair<Var, double>>& terms);

}  // namespace ops
}  // namespace posecam::net
