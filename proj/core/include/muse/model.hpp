#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <vector>

#include "muse/autodiff.hpp"
#include "muse/matrix.hpp"
#include "muse/rng.hpp"

namespace muse {

/// Shared two-layer GCN weights plus the fusion layer.
/// fc_w is (parts·K)×K where parts is the number of fused K-wide blocks.
struct MuseParams {
  Parameter w1;    // d × h
  Parameter w2;    // h × K
  Parameter fc_w;  // parts·K × K
  Parameter fc_b;  // 1 × K

  std::vector<Parameter*> all() { return {&w1, &w2, &fc_w, &fc_b}; }
  std::vector<Parameter*> gcn() { return {&w1, &w2}; }
};

/// Entries uniform in ±√(6 / (rows + cols)).
DenseMatrix glorot_uniform(std::size_t rows, std::size_t cols, Rng& rng);

/// Draw order: W1, W2, FC_W. The bias starts at zero.
MuseParams init_params(std::size_t d, std::size_t h, std::size_t k, Rng& rng,
                       std::size_t fuse_parts = 4);

/// A propagation operator: a sparse or a dense |V|×|V| constant.
/// The referenced matrix must outlive any tape it is applied on.
class Propagation {
 public:
  Propagation(const SparseMatrix& s) : sparse_(&s) {}  // NOLINT(google-explicit-constructor)
  Propagation(const DenseMatrix& d) : dense_(&d) {}    // NOLINT(google-explicit-constructor)

  std::size_t size() const noexcept { return sparse_ ? sparse_->rows() : dense_->rows(); }
  Var apply(Var x) const { return sparse_ ? ad::spmm(*sparse_, x) : ad::dense_apply(*dense_, x); }
  DenseMatrix apply(const DenseMatrix& x) const { return sparse_ ? spmm(*sparse_, x) : matmul(*dense_, x); }

 private:
  const SparseMatrix* sparse_ = nullptr;
  const DenseMatrix* dense_ = nullptr;
};

/// Naive (sparse, symmetric-normalized) and latent (row-stochastic) operators.
struct PropagationPair {
  SparseMatrix naive;
  DenseMatrix latent;
  std::optional<SparseMatrix> latent_sparse;

  Propagation naive_op() const { return naive; }
  Propagation latent_op() const { return latent_sparse ? Propagation(*latent_sparse) : Propagation(latent); }
};

struct GcnOptions {
  double dropout = 0.5;
  bool training = false;
  Activation final_activation = Activation::kRelu;
};

/// Ψ = act₂(P · drop(relu(P · drop(X) · W1)) · W2). The feature product is
/// formed before propagation.
Var gcn_forward(const Propagation& prop, Var x, Var w1, Var w2, const GcnOptions& opts, Rng& rng);

/// act(concat(parts) · W + b), act = relu by default.
Var fuse(std::span<const Var> parts, Var fc_w, Var fc_b, Activation act = Activation::kRelu);

/// Row softmax of logits.
DenseMatrix predict(const DenseMatrix& logits);
/// Per-row argmax; ties go to the smallest class id.
std::vector<int> argmax_rows(const DenseMatrix& scores);

}  // namespace muse
