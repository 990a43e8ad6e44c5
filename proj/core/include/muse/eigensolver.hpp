#pragma once

#include <cstddef>
#include <vector>

#include "muse/matrix.hpp"

namespace muse {

struct EigenResult {
  std::vector<double> values;     // descending
  DenseMatrix vectors;            // n × k, column j pairs with values[j]
  std::vector<double> residuals;  // ‖Bv − λv‖ per pair
  std::size_t iterations = 0;     // Krylov dimension of the accepted run
};

/// Top-k eigenpairs of a symmetric matrix by Lanczos with full
/// reorthogonalization. Accepted when every ‖Bv − λv‖ ≤ tol·‖B‖_F; the Krylov
/// space grows until it converges, reaches n, or exceeds max_iter.
/// Each vector is unit length, signed so its largest-magnitude entry is
/// positive (first such index on ties).
/// Throws NumericError carrying the worst residual on non-convergence.
EigenResult eig_topk(const DenseMatrix& b, std::size_t k, double tol = 1e-9,
                     std::size_t max_iter = 4096);

}  // namespace muse
