#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "muse/matrix.hpp"

namespace muse {

/// tr(Hᵀ L H) with L = I − D̃^{-1/2}(A + I)D̃^{-1/2}.
double smoothness(const DenseMatrix& h, const SparseMatrix& adjacency);

/// Mean over rows of cos(H_i, U_i); a zero row contributes 0.
double cross_view_cosine(const DenseMatrix& h, const DenseMatrix& u);

struct BoundInputs {
  double empirical_risk = 0.0;
  double input_bound = 1.0;
  std::size_t depth = 2;
  std::vector<double> norm_caps{1.0, 1.0};
  std::size_t samples = 1;
  std::size_t views = 2;
  double delta = 0.05;
  double range_a = 0.0;
  double range_b = 1.0;
};

struct BoundTerms {
  double empirical = 0.0;
  double complexity = 0.0;  // 2B(√(2 d ln 2) + 1)∏M / √N
  double confidence = 0.0;  // √((b − a)² ln(4/δ) / (2VN))
  double total() const noexcept { return empirical + complexity + confidence; }
};

/// Throws ConfigError when the inputs violate B ≥ 0, d ≥ 1, |M| = d, M > 0,
/// N ≥ 1, V ≥ 1, 0 < δ < 1 or a < b.
BoundTerms bound_terms(const BoundInputs& in);
double rademacher_bound(const BoundInputs& in);

/// Largest singular value by power iteration on MᵀM from a fixed start vector.
double spectral_norm(const DenseMatrix& m, std::size_t iters = 200);

/// Max Euclidean row norm.
double max_row_norm(const DenseMatrix& m);

/// Spearman rank correlation with average ranks for ties.
double spearman(std::span<const double> a, std::span<const double> b);

}  // namespace muse
