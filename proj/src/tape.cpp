#include "dicer/tape.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <utility>

#include "dicer/common.hpp"

namespace dicer {

namespace {

void check_finite(const char* op, const Tensor& t) {
  if (!t.all_finite()) numeric_error(std::string("op '") + op + "' produced a non-finite value");
}

void axpy(Tensor& dst, const Tensor& src, double c = 1.0) {
  for (std::size_t i = 0; i < dst.data.size(); ++i) dst.data[i] += c * src.data[i];
}

}  // namespace

const Tensor& Tape::node_value(int id) const {
  const Node& n = nodes_[static_cast<std::size_t>(id)];
  return n.view ? *n.view : n.owned;
}

void Tape::check_var(Var v, const char* op) const {
  if (!v.valid() || static_cast<std::size_t>(v.id) >= nodes_.size())
    numeric_error(std::string("op '") + op + "' given an invalid tape handle");
}

Var Tape::record(const char* op, Tensor value, std::vector<int> inputs, BackwardFn backward) {
  check_finite(op, value);
  Node n;
  n.op = op;
  n.owned = std::move(value);
  n.inputs = std::move(inputs);
  n.backward = std::move(backward);
  nodes_.push_back(std::move(n));
  return Var{static_cast<int>(nodes_.size()) - 1};
}

Var Tape::leaf(Tensor value) {
  return record("leaf", std::move(value), {}, nullptr);
}

Var Tape::leaf_view(const Tensor* value) {
  check_finite("leaf", *value);
  Node n;
  n.op = "leaf";
  n.view = value;
  nodes_.push_back(std::move(n));
  return Var{static_cast<int>(nodes_.size()) - 1};
}

bool Tape::has_grad(Var v) const {
  return v.valid() && static_cast<std::size_t>(v.id) < grads_.size() &&
         !grads_[static_cast<std::size_t>(v.id)].data.empty();
}

const Tensor& Tape::grad(Var v) const {
  static const Tensor empty;
  if (!has_grad(v)) return empty;
  return grads_[static_cast<std::size_t>(v.id)];
}

Tensor& Tape::grad_buf(int id) {
  Tensor& g = grads_[static_cast<std::size_t>(id)];
  if (g.data.empty() && node_value(id).numel() > 0) g = Tensor::zeros(node_value(id).shape);
  return g;
}

void Tape::backward(Var loss) {
  check_var(loss, "backward");
  const Tensor& lv = value(loss);
  if (lv.numel() != 1)
    numeric_error("backward requires a scalar output, got shape " + lv.shape_str());
  grads_.assign(nodes_.size(), Tensor{});
  grad_buf(loss.id).data[0] = 1.0;
  for (int id = loss.id; id >= 0; --id) {
    if (grads_[static_cast<std::size_t>(id)].data.empty()) continue;
    const Node& n = nodes_[static_cast<std::size_t>(id)];
    if (n.backward) n.backward(*this, id);
  }
}

// ---------------------------------------------------------------------------
// primitives

Var Tape::matmul(Var a, Var b) {
  check_var(a, "matmul");
  check_var(b, "matmul");
  const Tensor& A = value(a);
  const Tensor& B = value(b);
  if (A.rank() != 2 || B.rank() != 2 || A.shape[1] != B.shape[0])
    numeric_error("matmul: incompatible shapes " + A.shape_str() + " x " + B.shape_str());
  Tensor C = gemm(A, false, B, false);
  const int ia = a.id, ib = b.id;
  return record("matmul", std::move(C), {ia, ib}, [ia, ib](Tape& t, int self) {
    const Tensor& G = t.out_grad(self);
    if (t.node_value(ia).numel() > 0)
      gemm_acc(t.grad_buf(ia), G, false, t.node_value(ib), true);
    if (t.node_value(ib).numel() > 0)
      gemm_acc(t.grad_buf(ib), t.node_value(ia), true, G, false);
  });
}

Var Tape::add(Var a, Var b) {
  check_var(a, "add");
  check_var(b, "add");
  const Tensor& A = value(a);
  const Tensor& B = value(b);
  if (!A.same_shape(B))
    numeric_error("add: shape mismatch " + A.shape_str() + " vs " + B.shape_str());
  Tensor C = A;
  axpy(C, B);
  const int ia = a.id, ib = b.id;
  return record("add", std::move(C), {ia, ib}, [ia, ib](Tape& t, int self) {
    const Tensor& G = t.out_grad(self);
    axpy(t.grad_buf(ia), G);
    axpy(t.grad_buf(ib), G);
  });
}

Var Tape::add_bias(Var m, Var bias) {
  check_var(m, "add_bias");
  check_var(bias, "add_bias");
  const Tensor& M = value(m);
  const Tensor& B = value(bias);
  if (M.rank() != 2 || B.rank() != 1 || B.shape[0] != M.shape[1])
    numeric_error("add_bias: shape mismatch " + M.shape_str() + " vs " + B.shape_str());
  Tensor C = M;
  const std::size_t r = M.shape[0], c = M.shape[1];
  for (std::size_t i = 0; i < r; ++i)
    for (std::size_t j = 0; j < c; ++j) C.data[i * c + j] += B.data[j];
  const int im = m.id, ib = bias.id;
  return record("add_bias", std::move(C), {im, ib}, [im, ib, r, c](Tape& t, int self) {
    const Tensor& G = t.out_grad(self);
    axpy(t.grad_buf(im), G);
    Tensor& gb = t.grad_buf(ib);
    for (std::size_t i = 0; i < r; ++i)
      for (std::size_t j = 0; j < c; ++j) gb.data[j] += G.data[i * c + j];
  });
}

Var Tape::mul(Var a, Var b) {
  check_var(a, "elementwise_mul");
  check_var(b, "elementwise_mul");
  const Tensor& A = value(a);
  const Tensor& B = value(b);
  if (!A.same_shape(B))
    numeric_error("elementwise_mul: shape mismatch " + A.shape_str() + " vs " + B.shape_str());
  Tensor C = A;
  for (std::size_t i = 0; i < C.data.size(); ++i) C.data[i] *= B.data[i];
  const int ia = a.id, ib = b.id;
  return record("elementwise_mul", std::move(C), {ia, ib}, [ia, ib](Tape& t, int self) {
    const Tensor& G = t.out_grad(self);
    const Tensor& A = t.node_value(ia);
    const Tensor& B = t.node_value(ib);
    Tensor& ga = t.grad_buf(ia);
    Tensor& gb = t.grad_buf(ib);
    for (std::size_t i = 0; i < G.data.size(); ++i) {
      ga.data[i] += G.data[i] * B.data[i];
      gb.data[i] += G.data[i] * A.data[i];
    }
  });
}

Var Tape::scale(Var a, double c) {
  check_var(a, "scale");
  Tensor C = value(a);
  for (double& v : C.data) v *= c;
  const int ia = a.id;
  return record("scale", std::move(C), {ia}, [ia, c](Tape& t, int self) {
    axpy(t.grad_buf(ia), t.out_grad(self), c);
  });
}

Var Tape::concat_cols(Var a, Var b) {
  check_var(a, "concat_last_dim");
  check_var(b, "concat_last_dim");
  const Tensor& A = value(a);
  const Tensor& B = value(b);
  if (A.rank() != 2 || B.rank() != 2 || A.shape[0] != B.shape[0])
    numeric_error("concat_last_dim: shape mismatch " + A.shape_str() + " vs " + B.shape_str());
  const std::size_t r = A.shape[0], ca = A.shape[1], cb = B.shape[1];
  Tensor C = Tensor::zeros({r, ca + cb});
  for (std::size_t i = 0; i < r; ++i) {
    std::copy_n(&A.data[i * ca], ca, &C.data[i * (ca + cb)]);
    std::copy_n(&B.data[i * cb], cb, &C.data[i * (ca + cb) + ca]);
  }
  const int ia = a.id, ib = b.id;
  return record("concat_last_dim", std::move(C), {ia, ib},
                [ia, ib, r, ca, cb](Tape& t, int self) {
    const Tensor& G = t.out_grad(self);
    Tensor& ga = t.grad_buf(ia);
    Tensor& gb = t.grad_buf(ib);
    for (std::size_t i = 0; i < r; ++i) {
      for (std::size_t j = 0; j < ca; ++j) ga.data[i * ca + j] += G.data[i * (ca + cb) + j];
      for (std::size_t j = 0; j < cb; ++j) gb.data[i * cb + j] += G.data[i * (ca + cb) + ca + j];
    }
  });
}

Var Tape::gather_rows(Var m, std::vector<int> rows) {
  check_var(m, "gather_rows");
  const Tensor& M = value(m);
  if (M.rank() != 2) numeric_error("gather_rows: expected a rank-2 tensor, got " + M.shape_str());
  const std::size_t c = M.shape[1];
  for (int r : rows)
    if (r < 0 || static_cast<std::size_t>(r) >= M.shape[0])
      numeric_error("gather_rows: row " + std::to_string(r) + " out of range for " + M.shape_str());
  Tensor C = Tensor::zeros({rows.size(), c});
  for (std::size_t i = 0; i < rows.size(); ++i)
    std::copy_n(&M.data[static_cast<std::size_t>(rows[i]) * c], c, &C.data[i * c]);
  const int im = m.id;
  return record("gather_rows", std::move(C), {im},
                [im, rows = std::move(rows), c](Tape& t, int self) {
    const Tensor& G = t.out_grad(self);
    Tensor& gm = t.grad_buf(im);
    for (std::size_t i = 0; i < rows.size(); ++i) {
      double* dst = &gm.data[static_cast<std::size_t>(rows[i]) * c];
      const double* src = &G.data[i * c];
      for (std::size_t j = 0; j < c; ++j) dst[j] += src[j];
    }
  });
}

namespace {

void check_segments(const char* op, const std::vector<int>& seg, std::size_t rows,
                    int num_segments) {
  if (seg.size() != rows)
    numeric_error(std::string(op) + ": segment vector has " + std::to_string(seg.size()) +
                  " entries for " + std::to_string(rows) + " rows");
  for (int s : seg)
    if (s < 0 || s >= num_segments)
      numeric_error(std::string(op) + ": segment id " + std::to_string(s) + " out of range");
}

}  // namespace

Var Tape::segment_sum(Var m, std::vector<int> seg, int num_segments) {
  check_var(m, "segment_sum");
  const Tensor& M = value(m);
  if (M.rank() != 2) numeric_error("segment_sum: expected a rank-2 tensor, got " + M.shape_str());
  check_segments("segment_sum", seg, M.shape[0], num_segments);
  const std::size_t c = M.shape[1];
  Tensor C = Tensor::zeros({static_cast<std::size_t>(num_segments), c});
  for (std::size_t i = 0; i < seg.size(); ++i) {
    double* dst = &C.data[static_cast<std::size_t>(seg[i]) * c];
    const double* src = &M.data[i * c];
    for (std::size_t j = 0; j < c; ++j) dst[j] += src[j];
  }
  const int im = m.id;
  return record("segment_sum", std::move(C), {im},
                [im, seg = std::move(seg), c](Tape& t, int self) {
    const Tensor& G = t.out_grad(self);
    Tensor& gm = t.grad_buf(im);
    for (std::size_t i = 0; i < seg.size(); ++i) {
      const double* src = &G.data[static_cast<std::size_t>(seg[i]) * c];
      double* dst = &gm.data[i * c];
      for (std::size_t j = 0; j < c; ++j) dst[j] += src[j];
    }
  });
}

Var Tape::segment_max(Var m, std::vector<int> seg, int num_segments) {
  check_var(m, "segment_max");
  const Tensor& M = value(m);
  if (M.rank() != 2) numeric_error("segment_max: expected a rank-2 tensor, got " + M.shape_str());
  check_segments("segment_max", seg, M.shape[0], num_segments);
  const std::size_t c = M.shape[1];
  Tensor C = Tensor::zeros({static_cast<std::size_t>(num_segments), c});
  // argmax row per (segment, column); -1 marks an empty segment whose output
  // stays zero and receives no gradient. Strict > keeps the first occurrence
  // on ties.
  std::vector<int> arg(static_cast<std::size_t>(num_segments) * c, -1);
  for (std::size_t i = 0; i < seg.size(); ++i) {
    const std::size_t s = static_cast<std::size_t>(seg[i]);
    for (std::size_t j = 0; j < c; ++j) {
      int& a = arg[s * c + j];
      const double v = M.data[i * c + j];
      if (a < 0 || v > C.data[s * c + j]) {
        a = static_cast<int>(i);
        C.data[s * c + j] = v;
      }
    }
  }
  const int im = m.id;
  return record("segment_max", std::move(C), {im},
                [im, arg = std::move(arg), c](Tape& t, int self) {
    const Tensor& G = t.out_grad(self);
    Tensor& gm = t.grad_buf(im);
    for (std::size_t sj = 0; sj < arg.size(); ++sj) {
      const int row = arg[sj];
      if (row < 0) continue;
      gm.data[static_cast<std::size_t>(row) * c + (sj % c)] += G.data[sj];
    }
  });
}

Var Tape::segment_softmax(Var x, std::vector<int> seg, int num_segments) {
  check_var(x, "segment_softmax");
  const Tensor& X = value(x);
  if (X.rank() != 1)
    numeric_error("segment_softmax: expected a rank-1 tensor, got " + X.shape_str());
  check_segments("segment_softmax", seg, X.shape[0], num_segments);
  const std::size_t n = X.numel();
  std::vector<double> mx(static_cast<std::size_t>(num_segments),
                         -std::numeric_limits<double>::infinity());
  for (std::size_t i = 0; i < n; ++i)
    mx[static_cast<std::size_t>(seg[i])] = std::max(mx[static_cast<std::size_t>(seg[i])], X.data[i]);
  Tensor Y = Tensor::zeros({n});
  std::vector<double> denom(static_cast<std::size_t>(num_segments), 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    Y.data[i] = std::exp(X.data[i] - mx[static_cast<std::size_t>(seg[i])]);
    denom[static_cast<std::size_t>(seg[i])] += Y.data[i];
  }
  for (std::size_t i = 0; i < n; ++i) Y.data[i] /= denom[static_cast<std::size_t>(seg[i])];
  const int ix = x.id;
  return record("segment_softmax", std::move(Y), {ix},
                [ix, seg = std::move(seg), num_segments](Tape& t, int self) {
    const Tensor& Y = t.node_value(self);
    const Tensor& G = t.out_grad(self);
    std::vector<double> dot(static_cast<std::size_t>(num_segments), 0.0);
    for (std::size_t i = 0; i < Y.data.size(); ++i)
      dot[static_cast<std::size_t>(seg[i])] += G.data[i] * Y.data[i];
    Tensor& gx = t.grad_buf(ix);
    for (std::size_t i = 0; i < Y.data.size(); ++i)
      gx.data[i] += Y.data[i] * (G.data[i] - dot[static_cast<std::size_t>(seg[i])]);
  });
}

Var Tape::row_dot(Var a, Var b) {
  check_var(a, "row_dot");
  check_var(b, "row_dot");
  const Tensor& A = value(a);
  const Tensor& B = value(b);
  if (A.rank() != 2 || !A.same_shape(B))
    numeric_error("row_dot: shape mismatch " + A.shape_str() + " vs " + B.shape_str());
  const std::size_t r = A.shape[0], c = A.shape[1];
  Tensor C = Tensor::zeros({r});
  for (std::size_t i = 0; i < r; ++i) {
    double s = 0.0;
    for (std::size_t j = 0; j < c; ++j) s += A.data[i * c + j] * B.data[i * c + j];
    C.data[i] = s;
  }
  const int ia = a.id, ib = b.id;
  return record("row_dot", std::move(C), {ia, ib}, [ia, ib, r, c](Tape& t, int self) {
    const Tensor& G = t.out_grad(self);
    const Tensor& A = t.node_value(ia);
    const Tensor& B = t.node_value(ib);
    Tensor& ga = t.grad_buf(ia);
    Tensor& gb = t.grad_buf(ib);
    for (std::size_t i = 0; i < r; ++i)
      for (std::size_t j = 0; j < c; ++j) {
        ga.data[i * c + j] += G.data[i] * B.data[i * c + j];
        gb.data[i * c + j] += G.data[i] * A.data[i * c + j];
      }
  });
}

Var Tape::scale_rows(Var m, Var w) {
  check_var(m, "scale_rows");
  check_var(w, "scale_rows");
  const Tensor& M = value(m);
  const Tensor& W = value(w);
  if (M.rank() != 2 || W.rank() != 1 || W.shape[0] != M.shape[0])
    numeric_error("scale_rows: shape mismatch " + M.shape_str() + " vs " + W.shape_str());
  const std::size_t r = M.shape[0], c = M.shape[1];
  Tensor C = M;
  for (std::size_t i = 0; i < r; ++i)
    for (std::size_t j = 0; j < c; ++j) C.data[i * c + j] *= W.data[i];
  const int im = m.id, iw = w.id;
  return record("scale_rows", std::move(C), {im, iw}, [im, iw, r, c](Tape& t, int self) {
    const Tensor& G = t.out_grad(self);
    const Tensor& M = t.node_value(im);
    const Tensor& W = t.node_value(iw);
    Tensor& gm = t.grad_buf(im);
    Tensor& gw = t.grad_buf(iw);
    for (std::size_t i = 0; i < r; ++i) {
      double s = 0.0;
      for (std::size_t j = 0; j < c; ++j) {
        gm.data[i * c + j] += G.data[i * c + j] * W.data[i];
        s += G.data[i * c + j] * M.data[i * c + j];
      }
      gw.data[i] += s;
    }
  });
}

Var Tape::scale_rows_const(Var m, std::vector<double> w) {
  check_var(m, "scale_rows_const");
  const Tensor& M = value(m);
  if (M.rank() != 2 || w.size() != M.shape[0])
    numeric_error("scale_rows_const: " + std::to_string(w.size()) + " weights for " +
                  M.shape_str());
  const std::size_t r = M.shape[0], c = M.shape[1];
  Tensor C = M;
  for (std::size_t i = 0; i < r; ++i)
    for (std::size_t j = 0; j < c; ++j) C.data[i * c + j] *= w[i];
  const int im = m.id;
  return record("scale_rows_const", std::move(C), {im},
                [im, w = std::move(w), c](Tape& t, int self) {
    const Tensor& G = t.out_grad(self);
    Tensor& gm = t.grad_buf(im);
    for (std::size_t i = 0; i < w.size(); ++i)
      for (std::size_t j = 0; j < c; ++j) gm.data[i * c + j] += G.data[i * c + j] * w[i];
  });
}

Var Tape::leaky_relu(Var x, double slope) {
  check_var(x, "leaky_relu");
  const Tensor& X = value(x);
  Tensor Y = X;
  for (double& v : Y.data)
    if (v < 0.0) v *= slope;
  const int ix = x.id;
  return record("leaky_relu", std::move(Y), {ix}, [ix, slope](Tape& t, int self) {
    const Tensor& G = t.out_grad(self);
    const Tensor& X = t.node_value(ix);
    Tensor& gx = t.grad_buf(ix);
    for (std::size_t i = 0; i < G.data.size(); ++i)
      gx.data[i] += G.data[i] * (X.data[i] > 0.0 ? 1.0 : slope);
  });
}

Var Tape::sigmoid(Var x) {
  check_var(x, "sigmoid");
  const Tensor& X = value(x);
  Tensor Y = X;
  for (double& v : Y.data) v = 1.0 / (1.0 + std::exp(-v));
  const int ix = x.id;
  return record("sigmoid", std::move(Y), {ix}, [ix](Tape& t, int self) {
    const Tensor& G = t.out_grad(self);
    const Tensor& Y = t.node_value(self);
    Tensor& gx = t.grad_buf(ix);
    for (std::size_t i = 0; i < G.data.size(); ++i)
      gx.data[i] += G.data[i] * Y.data[i] * (1.0 - Y.data[i]);
  });
}

Var Tape::dropout(Var x, double rate, bool train, std::uint64_t seed) {
  check_var(x, "dropout");
  if (rate < 0.0 || rate >= 1.0)
    numeric_error("dropout: rate must be in [0,1), got " + std::to_string(rate));
  if (!train || rate == 0.0) return x;
  const Tensor& X = value(x);
  const double inv_keep = 1.0 / (1.0 - rate);
  Rng rng(seed);
  std::vector<double> mask(X.numel());
  for (double& m : mask) m = rng.uniform() >= rate ? inv_keep : 0.0;
  Tensor Y = X;
  for (std::size_t i = 0; i < Y.data.size(); ++i) Y.data[i] *= mask[i];
  const int ix = x.id;
  return record("dropout", std::move(Y), {ix},
                [ix, mask = std::move(mask)](Tape& t, int self) {
    const Tensor& G = t.out_grad(self);
    Tensor& gx = t.grad_buf(ix);
    for (std::size_t i = 0; i < G.data.size(); ++i) gx.data[i] += G.data[i] * mask[i];
  });
}

Var Tape::reduce_sum(Var x) {
  check_var(x, "reduce_sum");
  const Tensor& X = value(x);
  double s = 0.0;
  for (double v : X.data) s += v;
  const int ix = x.id;
  return record("reduce_sum", Tensor::scalar(s), {ix}, [ix](Tape& t, int self) {
    const double g = t.out_grad(self).data[0];
    Tensor& gx = t.grad_buf(ix);
    for (double& v : gx.data) v += g;
  });
}

Var Tape::bce_loss(Var preds, Tensor labels) {
  check_var(preds, "binary_cross_entropy");
  const Tensor& P = value(preds);
  if (P.numel() != labels.numel())
    numeric_error("binary_cross_entropy: " + std::to_string(labels.numel()) + " labels for " +
                  P.shape_str() + " predictions");
  constexpr double kLo = 1e-7, kHi = 1.0 - 1e-7;
  double sum = 0.0;
  for (std::size_t i = 0; i < P.data.size(); ++i) {
    const double p = std::clamp(P.data[i], kLo, kHi);
    const double y = labels.data[i];
    sum -= y * std::log(p) + (1.0 - y) * std::log(1.0 - p);
  }
  const int ip = preds.id;
  return record("binary_cross_entropy", Tensor::scalar(sum), {ip},
                [ip, labels = std::move(labels)](Tape& t, int self) {
    const double g = t.out_grad(self).data[0];
    const Tensor& P = t.node_value(ip);
    Tensor& gp = t.grad_buf(ip);
    for (std::size_t i = 0; i < P.data.size(); ++i) {
      const double p = P.data[i];
      if (p <= kLo || p >= kHi) continue;  // clamped region, flat
      const double y = labels.data[i];
      gp.data[i] += g * (-(y / p) + (1.0 - y) / (1.0 - p));
    }
  });
}

}  // namespace dicer
