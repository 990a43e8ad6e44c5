#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <vector>

#include "muse/matrix.hpp"

namespace muse {

/// Low-dimensional Isomap coordinates and the latent adjacency built from them.
struct LatentGraph {
  DenseMatrix coords;                       // |V| × d′
  DenseMatrix adjacency;                    // |V| × |V|, rows sum to 1; empty when sparse is set
  std::optional<SparseMatrix> sparse_adjacency;  // top-m rows, renormalized
  std::size_t isomap_k = 0;
  std::size_t latent_dim = 0;

  std::vector<double> eigenvalues;  // descending, length d′
  std::vector<double> residuals;
  std::size_t repair_edges = 0;
  bool cached = false;

  bool is_sparse() const noexcept { return sparse_adjacency.has_value(); }
};

struct IsomapOptions {
  std::size_t k_iso = 10;
  std::size_t latent_dim = 64;
  double tol = 1e-9;
  std::size_t max_iter = 4096;
  /// Above this node count A′ is kept as top-m rows instead of dense.
  std::size_t dense_limit = 8000;
  std::size_t top_m = 64;
};

/// Symmetric, zero diagonal. Squared distances are formed from Gram entries and
/// clamped at 0 before the square root.
DenseMatrix pairwise_euclidean(const DenseMatrix& x);

/// Weighted kNN graph: i→j for the k_iso nearest j ≠ i (ties to the smaller
/// index), symmetrized by union, weight d(i, j). Zero weights are stored.
SparseMatrix knn_graph(const DenseMatrix& dist, std::size_t k_iso);

/// Connected component id per node, numbered by smallest member.
std::vector<std::size_t> connected_components(const SparseMatrix& g);

/// Repeatedly adds the globally shortest cross-component edge (by `dist`,
/// ties to the lexicographically smallest pair) until connected.
SparseMatrix connect_components(const SparseMatrix& g, const DenseMatrix& dist,
                                std::size_t* added = nullptr);

/// All-pairs shortest paths by Dijkstra from every source.
/// Throws ConfigError on a negative weight, NumericError if disconnected.
DenseMatrix geodesic_distances(const SparseMatrix& g);

struct MdsResult {
  DenseMatrix coords;
  std::vector<double> eigenvalues;
  std::vector<double> residuals;
};

/// Top-d′ classical scaling of a distance matrix. Negative eigenvalues give zero columns.
MdsResult classical_mds(const DenseMatrix& dist, std::size_t latent_dim, double tol = 1e-9,
                        std::size_t max_iter = 4096);

/// row_softmax(X′ X′ᵀ / √d′).
DenseMatrix latent_adjacency(const DenseMatrix& coords);
/// Row-wise softmax restricted to each row's m largest scores (ties to the smaller index).
SparseMatrix latent_adjacency_topm(const DenseMatrix& coords, std::size_t m);

/// pairwise → kNN → repair → geodesics → MDS → latent adjacency.
LatentGraph build_latent_graph(const DenseMatrix& features, const IsomapOptions& opts);

/// FNV-1a 64 over the feature bits and the options that shape X′.
std::uint64_t isomap_cache_key(const DenseMatrix& features, const IsomapOptions& opts);

/// Same pipeline with X′ rounded to float32 so cached and fresh runs agree.
/// When `cache_dir` is set, X′ is read from / written to
/// `<cache_dir>/isomap_<key>.xp.f32` and A′ is written beside it as `.ap.f32`.
/// A′ is always recomputed from X′.
LatentGraph latent_graph_cached(const DenseMatrix& features, const IsomapOptions& opts,
                                const std::optional<std::filesystem::path>& cache_dir);

}  // namespace muse
