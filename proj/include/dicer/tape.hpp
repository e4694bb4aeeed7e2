#pragma once

#include <cstdint>
#include <functional>
#include <vector>

#include "dicer/tensor.hpp"

namespace dicer {

class Tape;

// Handle to a node on a tape. Cheap to copy; only valid for the tape that
// produced it.
struct Var {
  int id = -1;
  bool valid() const { return id >= 0; }
};

// Define-by-run computation tape. Every op computes its forward value
// eagerly (checking that it is finite) and records a closure implementing
// its reverse-mode rule. backward() visits nodes in exact reverse order and
// sums gradients over fan-out.
class Tape {
 public:
  using BackwardFn = std::function<void(Tape&, int self)>;

  Var leaf(Tensor value);
  // Records a leaf that borrows the tensor; the caller must keep it alive
  // and unchanged until the tape is done with forward/backward work.
  Var leaf_view(const Tensor* value);

  const Tensor& value(Var v) const { return node_value(v.id); }
  bool has_grad(Var v) const;
  const Tensor& grad(Var v) const;

  // ---- recorded primitives ----
  Var matmul(Var a, Var b);
  Var add(Var a, Var b);
  Var add_bias(Var m, Var bias);          // (r x c) + (c), broadcast over rows
  Var mul(Var a, Var b);                  // elementwise
  Var scale(Var a, double c);             // multiply by a constant
  Var concat_cols(Var a, Var b);          // concat along the last dimension
  Var gather_rows(Var m, std::vector<int> rows);
  Var segment_sum(Var m, std::vector<int> seg, int num_segments);
  Var segment_max(Var m, std::vector<int> seg, int num_segments);
  Var segment_softmax(Var x, std::vector<int> seg, int num_segments);
  Var row_dot(Var a, Var b);              // per-row dot product -> rank-1
  Var scale_rows(Var m, Var w);           // row i scaled by w[i]
  Var scale_rows_const(Var m, std::vector<double> w);
  Var leaky_relu(Var x, double slope);
  Var sigmoid(Var x);
  Var dropout(Var x, double rate, bool train, std::uint64_t seed);
  Var reduce_sum(Var x);
  Var bce_loss(Var preds, Tensor labels); // summed cross-entropy, preds clamped

  // Generic node constructor; ops above are built on it and tests use it to
  // exercise the backward plumbing directly.
  Var record(const char* op, Tensor value, std::vector<int> inputs, BackwardFn backward);

  void backward(Var loss);

  // Gradient buffer for a node, allocated as zeros on first touch. Public so
  // custom backward closures can accumulate into their inputs.
  Tensor& grad_buf(int id);
  const Tensor& out_grad(int id) const { return grads_[id]; }

  std::size_t size() const { return nodes_.size(); }

 private:
  struct Node {
    const char* op;
    Tensor owned;
    const Tensor* view = nullptr;
    std::vector<int> inputs;
    BackwardFn backward;
  };

  const Tensor& node_value(int id) const;
  void check_var(Var v, const char* op) const;

  std::vector<Node> nodes_;
  std::vector<Tensor> grads_;
};

}  // namespace dicer
