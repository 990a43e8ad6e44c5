#pragma once

#include <cstddef>
#include <functional>
#include <span>
#include <vector>

#include "muse/matrix.hpp"
#include "muse/rng.hpp"

namespace muse {

/// Trainable matrix with its gradient accumulator and Adam moments.
struct Parameter {
  Parameter() = default;
  explicit Parameter(DenseMatrix init);

  void zero_grad() { grad.fill(0.0); }

  DenseMatrix value;
  DenseMatrix grad;
  DenseMatrix adam_m;
  DenseMatrix adam_v;
  std::size_t step_count = 0;
};

enum class OpKind {
  kConstant,
  kParameter,
  kMatmul,
  kDenseApply,
  kSpmm,
  kRelu,
  kSigmoid,
  kIdentity,
  kRowSoftmax,
  kConcatCols,
  kDropout,
  kAdd,
  kSub,
  kScale,
  kAddRowBroadcast,
  kGatherRows,
  kRowL2Norm,
  kSum,
  kNllMean,
  kKlToSoftmax,
};

class Tape;

/// Handle to a node on a Tape. Cheap to copy; valid while the tape lives.
class Var {
 public:
  Var() = default;
  Var(Tape* tape, std::size_t id) : tape_(tape), id_(id) {}

  const DenseMatrix& value() const;
  const DenseMatrix& grad() const;
  std::size_t rows() const { return value().rows(); }
  std::size_t cols() const { return value().cols(); }
  std::size_t id() const noexcept { return id_; }
  Tape* tape() const noexcept { return tape_; }
  bool valid() const noexcept { return tape_ != nullptr; }

 private:
  Tape* tape_ = nullptr;
  std::size_t id_ = 0;
};

/// Reverse-mode tape. Nodes are appended in evaluation order, so each node's
/// inputs precede it. Not thread-safe; use one tape per training context.
class Tape {
 public:
  using BackwardFn = std::function<void(Tape&, std::size_t self)>;

  Tape() = default;
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  Var constant(DenseMatrix value);
  /// Leaf whose gradient is added into `p.grad` on backward. `p` must outlive the tape.
  Var parameter(Parameter& p);

  /// Seeds d(loss)/d(loss) = 1 and propagates to every reachable node.
  /// Parameter gradients accumulate; callers zero them between steps.
  void backward(Var loss);

  std::size_t size() const noexcept { return nodes_.size(); }
  OpKind kind(std::size_t id) const { return nodes_[id].kind; }
  const DenseMatrix& value(std::size_t id) const { return nodes_[id].value; }
  const DenseMatrix& grad(std::size_t id) const { return nodes_[id].grad; }
  bool requires_grad(std::size_t id) const { return nodes_[id].requires_grad; }

  // Used by op implementations.
  Var push(OpKind kind, std::vector<std::size_t> inputs, DenseMatrix value, BackwardFn fn);
  void accumulate(std::size_t id, const DenseMatrix& g);
  /// Gradient buffer of `id`, allocated as zeros on first use.
  DenseMatrix& grad_buffer(std::size_t id);

 private:
  struct Node {
    OpKind kind;
    std::vector<std::size_t> inputs;
    DenseMatrix value;
    DenseMatrix grad;
    BackwardFn backward;
    Parameter* param = nullptr;
    bool requires_grad = false;
  };
  std::vector<Node> nodes_;
};

enum class Activation { kRelu, kSigmoid, kIdentity };

/// Differentiable operations. Every op records itself on the tape of its inputs.
namespace ad {

Var matmul(Var a, Var b);
/// m · x for a constant dense m (no gradient to m). `m` must outlive the tape.
Var dense_apply(const DenseMatrix& m, Var x);
/// s · x for a constant sparse s (no gradient to s). `s` must outlive the tape.
Var spmm(const SparseMatrix& s, Var x);
Var elementwise(Activation kind, Var x);
inline Var relu(Var x) { return elementwise(Activation::kRelu, x); }
inline Var sigmoid(Var x) { return elementwise(Activation::kSigmoid, x); }
Var row_softmax(Var x);
Var concat_cols(std::span<const Var> parts);
/// Inverted dropout. Identity (no new node, no draws) when !training or p == 0.
Var dropout(Var x, double p, Rng& rng, bool training);
Var add(Var a, Var b);
Var sub(Var a, Var b);
Var scale(Var x, double c);
/// x + 1·bias for a 1×cols bias row.
Var add_row_broadcast(Var x, Var bias);
Var gather_rows(Var x, std::span<const std::size_t> rows);
/// rows×1 column of Euclidean row norms; gradient at a zero row is 0.
Var row_l2_norm(Var x);
Var sum(Var x);
/// −mean_i ln(max(P[i, label_i], 1e-12)) over the rows of a probability matrix.
Var nll_mean(Var probs, std::span<const int> labels);
/// Σ_i KL(p_i ‖ softmax(z_i)) for constant probability rows p.
Var kl_to_softmax(const DenseMatrix& p, Var logits);

}  // namespace ad

struct AdamOptions {
  double lr = 0.01;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  double weight_decay = 0.0;
};

/// One Adam update with bias correction. Weight decay is decoupled: each value
/// is first shrunk by lr·wd·value, then moved by the Adam step.
void adam_step(std::span<Parameter* const> params, const AdamOptions& opts);

/// Builds a scalar loss on the given tape. Must bind `p` via tape.parameter(p).
using LossBuilder = std::function<Var(Tape&)>;

/// Max relative error between tape gradients of `p` and central differences
/// (f(x+eps) − f(x−eps)) / (2 eps), with denominator max(|analytic|, |numeric|, 1e-8).
double finite_diff_check(const LossBuilder& build, Parameter& p, double eps = 1e-5);

}  // namespace muse
