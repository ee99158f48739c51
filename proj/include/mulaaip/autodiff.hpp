#pragma once

#include <cstddef>
#include <functional>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "mulaaip/rng.hpp"
#include "mulaaip/tensor.hpp"

namespace mulaaip::nn {

struct Parameter {
  std::string name;
  Tensor value;
  Tensor grad;
  bool trainable = true;    // false for stored statistics (label scaling)
  bool regularized = true;  // counted in the squared-weight penalty; biases are not

  void zero_grad() { grad.fill(0.0); }
};

/// Owns parameters in registration order; addresses are stable.
class ParameterStore {
 public:
  Parameter& add(const std::string& name, Tensor value, bool regularized = true,
                 bool trainable = true);
  /// Xavier-uniform weight matrix of shape fan_in x fan_out.
  Parameter& add_xavier(const std::string& name, std::size_t fan_in, std::size_t fan_out, Rng& rng);
  Parameter& add_zeros(const std::string& name, std::size_t rows, std::size_t cols,
                       bool regularized = false);

  Parameter* find(const std::string& name);
  const Parameter* find(const std::string& name) const;
  Parameter& at(const std::string& name);

  std::vector<Parameter*> all();
  std::vector<const Parameter*> all() const;
  std::vector<Parameter*> trainable();
  void zero_grad();
  std::size_t size() const { return params_.size(); }

  /// Value snapshot in registration order (for best-epoch restore).
  std::vector<Tensor> snapshot() const;
  void restore(const std::vector<Tensor>& values);

 private:
  std::vector<std::unique_ptr<Parameter>> params_;
};

class Tape;

/// Handle to a node on a Tape.
struct Var {
  Tape* tape = nullptr;
  std::size_t id = 0;

  const Tensor& value() const;
  std::size_t rows() const { return value().rows(); }
  std::size_t cols() const { return value().cols(); }
};

/// Records a forward computation and replays it backwards. Nodes are
/// appended in evaluation order, so reverse creation order is a valid
/// topological order for the backward sweep.
class Tape {
 public:
  using BackwardFn = std::function<void(Tape&, const Tensor& out_grad)>;

  /// With grad disabled, parameters enter as constants and no backward
  /// closures are kept.
  explicit Tape(bool grad_enabled = true) : grad_enabled_(grad_enabled) {}
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  Var constant(Tensor value);
  Var parameter(Parameter& p);

  const Tensor& value(Var v) const { return nodes_[v.id].value; }
  bool requires_grad(Var v) const { return nodes_[v.id].requires_grad; }
  bool grad_enabled() const { return grad_enabled_; }

  /// Gradient buffer of a node, zero-initialised on first access.
  Tensor& grad(Var v);
  /// Gradient accumulated on the node during the last backward() call.
  const Tensor* grad_if_any(Var v) const;

  /// Appends an op result. Throws Error{NonFinite} if any output is NaN/Inf.
  Var record(const char* op, Tensor value, std::initializer_list<Var> inputs, BackwardFn backward);
  Var record(const char* op, Tensor value, std::span<const Var> inputs, BackwardFn backward);

  /// Accumulates d loss / d param into every reachable Parameter::grad.
  /// Throws Error{NotScalar} unless loss holds exactly one element.
  void backward(Var loss);

  std::size_t size() const { return nodes_.size(); }

 private:
  struct Node {
    Tensor value;
    Tensor grad;
    BackwardFn backward;
    Parameter* param = nullptr;
    bool requires_grad = false;
  };
  std::vector<Node> nodes_;
  bool grad_enabled_;
};

// ---- ops -----------------------------------------------------------------
// All ops throw Error{ShapeMismatch} on incompatible shapes.

Var matmul(Var a, Var b);
Var add(Var a, Var b);
Var sub(Var a, Var b);
Var mul(Var a, Var b);                    // elementwise
Var add_row(Var a, Var row);              // a[n x m] + row[1 x m] broadcast over rows
Var mul_col(Var a, Var col);              // a[n x m] * col[n x 1] broadcast over columns
Var mul_scalar(Var a, Var s);             // a * s, s is 1 x 1
Var scale(Var a, double c);
Var add_scalar(Var a, double c);
Var concat_cols(std::span<const Var> parts);
Var concat_rows(std::span<const Var> parts);
Var mean_rows(Var a);                     // [n x m] -> [1 x m]
Var sum_rows(Var a);                      // [n x m] -> [1 x m]
Var sum_cols(Var a);                      // [n x m] -> [n x 1]
Var sum_all(Var a);                       // -> [1 x 1]
Var leaky_relu(Var a, double slope);
Var sigmoid(Var a);
Var log(Var a);
Var abs(Var a);
Var square(Var a);
Var pow(Var a, double exponent);          // elementwise, inputs must stay in the domain
Var max_scalar(Var a, double floor);      // elementwise max(a, floor)
Var clamp(Var a, double lo, double hi);   // zero gradient outside [lo, hi]
/// Inverted dropout: survivors scaled by 1/(1-p); identity unless training.
Var dropout(Var a, double p, Rng& rng, bool training);
/// Softmax of a column vector within groups; segments[i] < num_segments.
Var softmax_segmented(Var logits, std::span<const std::size_t> segments, std::size_t num_segments);
Var gather_rows(Var a, std::span<const std::size_t> index);
Var scatter_add_rows(Var a, std::span<const std::size_t> index, std::size_t num_rows);

inline Var concat_cols(std::initializer_list<Var> parts) {
  return concat_cols(std::span<const Var>(parts.begin(), parts.size()));
}
inline Var concat_rows(std::initializer_list<Var> parts) {
  return concat_rows(std::span<const Var>(parts.begin(), parts.size()));
}

}  // namespace mulaaip::nn
