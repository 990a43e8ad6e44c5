#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "muse/matrix.hpp"

namespace muse {

enum class View { kNaive, kLatent };

const char* view_name(View v) noexcept;

/// Candidate members of one node's subgraph in one view. Sorted, unique.
struct EligibilitySet {
  std::size_t node = 0;
  View view = View::kNaive;
  std::vector<std::size_t> members;
};

/// Mask logits aligned with EligibilitySet::members.
struct MaskVector {
  std::size_t node = 0;
  View view = View::kNaive;
  std::vector<double> logits;
};

struct EligibilityOptions {
  std::size_t k_hop = 3;
  double tau = 0.5;
  /// Latent sets smaller than min_members fall back to the fallback_m most similar nodes.
  std::size_t min_members = 5;
  std::size_t fallback_m = 20;
};

/// Precomputed inputs for latent eligibility: X′ rows scaled to unit length
/// (zero rows stay zero).
DenseMatrix unit_rows(const DenseMatrix& coords);

/// Naive view: k-hop neighbours, or {node} when there are none.
/// Latent view: j ≠ node with cos(X′_node, X′_j) ≥ τ; below min_members, the
/// fallback_m highest-cosine nodes (ties to the smaller id).
EligibilitySet eligibility(const SparseMatrix& adjacency, const DenseMatrix& unit_coords,
                           std::size_t node, View view, const EligibilityOptions& opts);

/// KL(softmax(ψ_i) ‖ softmax(Σ_j σ(m_j) Ψ_j)). `members` holds the Ψ rows of the set.
double kl_objective(std::span<const double> psi_i, std::span<const double> logits,
                    const DenseMatrix& members);

/// Gradient of kl_objective with respect to the logits, via the tape.
std::vector<double> kl_gradient(std::span<const double> psi_i, std::span<const double> logits,
                                const DenseMatrix& members);

struct MaskOptimizerOptions {
  std::size_t steps = 20;
  double lr = 0.1;
  std::size_t max_halvings = 10;
};

/// Plain gradient descent on kl_objective starting from `warm` (zeros when
/// empty). A step that raises the objective is retried with half the rate up to
/// max_halvings times and skipped if it still does, so the objective never increases.
std::vector<double> optimize_mask(std::span<const double> psi_i, const DenseMatrix& members,
                                  std::span<const double> warm, const MaskOptimizerOptions& opts);

/// Normalized sigmoid weights σ(m_j) / Σ σ(m).
std::vector<double> mask_weights(std::span<const double> logits);

/// Σ_j σ(m_j) Ψ_j / Σ_j σ(m_j), a 1×K row.
DenseMatrix subgraph_embedding(std::span<const double> logits, const DenseMatrix& members);

/// Rows of `psi` listed in `ids`.
DenseMatrix gather(const DenseMatrix& psi, std::span<const std::size_t> ids);

/// Sparse |owners|×n operator whose row r holds the normalized weights of
/// masks[r] at the columns of sets[r].members; applying it to Ψ yields the
/// subgraph embeddings of all owners at once.
SparseMatrix aggregation_matrix(std::span<const EligibilitySet> sets,
                                std::span<const MaskVector> masks, std::size_t n);

}  // namespace muse
