#include "muse/eigensolver.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include <Eigen/Eigenvalues>

#include "muse/errors.hpp"
#include "muse/rng.hpp"

namespace muse {

namespace {

double dot(std::span<const double> a, std::span<const double> b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

void symv(const DenseMatrix& b, std::span<const double> x, std::span<double> y) {
  for (std::size_t i = 0; i < b.rows(); ++i) y[i] = dot(b.row(i), x);
}

// Orthogonalizes v against the first `m` rows of q twice (classical Gram-Schmidt, repeated).
void reorthogonalize(const DenseMatrix& q, std::size_t m, std::span<double> v) {
  for (int pass = 0; pass < 2; ++pass) {
    for (std::size_t j = 0; j < m; ++j) {
      const double c = dot(q.row(j), v);
      const auto qj = q.row(j);
      for (std::size_t i = 0; i < v.size(); ++i) v[i] -= c * qj[i];
    }
  }
}

// Fills v with a unit vector orthogonal to the first m rows of q. Returns false
// when those rows already span the space.
bool fresh_direction(const DenseMatrix& q, std::size_t m, Rng& rng, std::span<double> v) {
  for (int attempt = 0; attempt < 8; ++attempt) {
    for (double& x : v) x = rng.uniform(-1.0, 1.0);
    reorthogonalize(q, m, v);
    const double nrm = std::sqrt(dot(v, v));
    if (nrm > 1e-8) {
      for (double& x : v) x /= nrm;
      return true;
    }
  }
  return false;
}

void fix_sign(DenseMatrix& vecs, std::size_t col) {
  std::size_t best = 0;
  double mag = -1.0;
  for (std::size_t i = 0; i < vecs.rows(); ++i) {
    if (std::abs(vecs(i, col)) > mag) {
      mag = std::abs(vecs(i, col));
      best = i;
    }
  }
  if (vecs(best, col) < 0.0) {
    for (std::size_t i = 0; i < vecs.rows(); ++i) vecs(i, col) = -vecs(i, col);
  }
}

}  // namespace

EigenResult eig_topk(const DenseMatrix& b, std::size_t k, double tol, std::size_t max_iter) {
  const std::size_t n = b.rows();
  if (b.cols() != n) throw DimensionError("eig_topk: matrix is not square " + b.shape_string());
  if (k == 0 || k > n) {
    throw ConfigError("eig_topk: k=" + std::to_string(k) + " outside [1," + std::to_string(n) + "]");
  }
  const double fro = frobenius_norm(b);
  const double sym_tol = 1e-9 * std::max(1.0, fro);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = i + 1; j < n; ++j) {
      if (std::abs(b(i, j) - b(j, i)) > sym_tol) {
        throw DimensionError("eig_topk: matrix is not symmetric");
      }
    }
  }

  Rng rng = make_rng(0x5eed, RngStream::kEigen);
  std::size_t m = std::min(n, std::max<std::size_t>(2 * k + 32, 3 * k));
  double worst = 0.0;
  for (;;) {
    // Rows of q are the Lanczos basis; alpha/beta form the tridiagonal projection.
    DenseMatrix q(m, n);
    std::vector<double> alpha(m, 0.0), beta(m, 0.0);
    std::vector<double> w(n);
    rng = make_rng(0x5eed, RngStream::kEigen);
    fresh_direction(q, 0, rng, q.row(0));
    std::size_t built = m;
    for (std::size_t j = 0; j < m; ++j) {
      symv(b, q.row(j), w);
      alpha[j] = dot(q.row(j), w);
      reorthogonalize(q, j + 1, w);
      if (j + 1 == m) break;
      const double nrm = std::sqrt(dot(w, w));
      if (nrm > 1e-12 * std::max(1.0, fro)) {
        beta[j] = nrm;
        auto next = q.row(j + 1);
        for (std::size_t i = 0; i < n; ++i) next[i] = w[i] / nrm;
      } else {
        // Invariant subspace reached: continue from a new orthogonal direction.
        beta[j] = 0.0;
        if (!fresh_direction(q, j + 1, rng, q.row(j + 1))) {
          built = j + 1;
          break;
        }
      }
    }

    Eigen::MatrixXd t = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(built),
                                              static_cast<Eigen::Index>(built));
    for (std::size_t j = 0; j < built; ++j) {
      const auto jj = static_cast<Eigen::Index>(j);
      t(jj, jj) = alpha[j];
      if (j + 1 < built) t(jj, jj + 1) = t(jj + 1, jj) = beta[j];
    }
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(t);
    if (solver.info() != Eigen::Success) throw NumericError("eig_topk: tridiagonal solve failed");

    const std::size_t take = std::min(k, built);
    EigenResult res;
    res.iterations = built;
    res.vectors = DenseMatrix(n, k);
    res.values.resize(k, 0.0);
    res.residuals.resize(k, 0.0);
    for (std::size_t c = 0; c < take; ++c) {
      const auto src = static_cast<Eigen::Index>(built - 1 - c);
      res.values[c] = solver.eigenvalues()(src);
      for (std::size_t j = 0; j < built; ++j) {
        const double s = solver.eigenvectors()(static_cast<Eigen::Index>(j), src);
        const auto qj = q.row(j);
        for (std::size_t i = 0; i < n; ++i) res.vectors(i, c) += s * qj[i];
      }
    }
    worst = 0.0;
    std::vector<double> v(n), bv(n);
    for (std::size_t c = 0; c < take; ++c) {
      for (std::size_t i = 0; i < n; ++i) v[i] = res.vectors(i, c);
      const double nrm = std::sqrt(dot(v, v));
      for (std::size_t i = 0; i < n; ++i) res.vectors(i, c) = v[i] /= nrm;
      fix_sign(res.vectors, c);
      for (std::size_t i = 0; i < n; ++i) v[i] = res.vectors(i, c);
      symv(b, v, bv);
      double r = 0.0;
      for (std::size_t i = 0; i < n; ++i) {
        const double d = bv[i] - res.values[c] * v[i];
        r += d * d;
      }
      res.residuals[c] = std::sqrt(r);
      worst = std::max(worst, res.residuals[c]);
    }
    if (take == k && worst <= tol * fro) return res;
    if (m >= n || m >= max_iter) break;
    m = std::min({n, max_iter, 2 * m});
  }
  std::ostringstream msg;
  msg << "eig_topk: no convergence for k=" << k << " (worst residual " << worst
      << ", target " << tol * fro << ")";
  throw NumericError(msg.str());
}

}  // namespace muse
