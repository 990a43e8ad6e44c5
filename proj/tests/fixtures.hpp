#pragma once

#include <cstddef>
#include <utility>
#include <vector>

#include "muse/graph_io.hpp"
#include "muse/matrix.hpp"
#include "muse/rng.hpp"
#include "muse/training.hpp"

namespace muse::test {

inline DenseMatrix random_matrix(std::size_t r, std::size_t c, Rng& rng, double lo = -1.0,
                                 double hi = 1.0) {
  DenseMatrix m(r, c);
  for (double& v : m.data()) v = rng.uniform(lo, hi);
  return m;
}

/// Random symmetric 0/1 graph with edge probability p and no self-loops.
inline SparseMatrix random_graph(std::size_t n, double p, Rng& rng) {
  std::vector<std::pair<std::size_t, std::size_t>> edges;
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = i + 1; j < n; ++j) {
      if (rng.uniform() < p) edges.emplace_back(i, j);
    }
  }
  return adjacency_from_edges(n, edges);
}

/// 12 nodes in 3 classes: a ring plus chords inside each class block, with
/// class-shifted Gaussian features in 6 dimensions.
inline GraphDataset twelve_node_fixture() {
  GraphDataset ds;
  ds.name = "twelve";
  ds.node_count = 12;
  ds.num_classes = 3;
  std::vector<std::pair<std::size_t, std::size_t>> edges;
  for (std::size_t i = 0; i < 12; ++i) edges.emplace_back(i, (i + 1) % 12);
  for (std::size_t b = 0; b < 3; ++b) {
    edges.emplace_back(4 * b, 4 * b + 2);
    edges.emplace_back(4 * b + 1, 4 * b + 3);
  }
  ds.adjacency = adjacency_from_edges(12, edges);
  Rng rng(99, 0);
  ds.features = DenseMatrix(12, 6);
  ds.labels.resize(12);
  for (std::size_t i = 0; i < 12; ++i) {
    ds.labels[i] = static_cast<int>(i / 4);
    for (std::size_t j = 0; j < 6; ++j) {
      ds.features(i, j) = (j % 3 == i / 4 ? 1.5 : 0.0) + 0.5 * rng.normal();
    }
  }
  return ds;
}

/// Training config sized for the 12-node fixture.
inline TrainConfig small_config() {
  TrainConfig c;
  c.isomap_k = 4;
  c.d_prime = 4;
  c.k_hop = 2;
  c.epochs = 30;
  c.patience = 10;
  c.trials = 2;
  c.use_cache = false;
  c.threads = 1;
  return c;
}

}  // namespace muse::test
