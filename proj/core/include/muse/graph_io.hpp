#pragma once

#include <cstddef>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "muse/matrix.hpp"
#include "muse/rng.hpp"

namespace muse {

/// Node id lists of a labeled/unlabeled partition. Pairwise disjoint.
struct Split {
  std::vector<std::size_t> train;
  std::vector<std::size_t> val;
  std::vector<std::size_t> test;
};

/// Undirected attributed graph with one class label per node.
///
/// On-disk layout (one directory):
///   edges.tsv      "src<TAB>dst" per line, 0-based ids
///   labels.tsv     "node<TAB>class" per line
///   features.csv   |V| rows of d comma-separated decimals, or
///   features.f32   8-byte header (u32 rows, u32 cols, little-endian) + rows*cols LE float32
///   split.json     optional {"train":[..],"val":[..],"test":[..]} or {"labels_per_class":n}
///   meta.json      optional {"nodes":n,"edges":nnz,"features":d,"classes":K}
struct GraphDataset {
  std::string name;
  std::size_t node_count = 0;
  SparseMatrix adjacency;  // symmetric, zero diagonal, unit weights
  DenseMatrix features;
  std::vector<int> labels;
  int num_classes = 0;
  Split split;
  bool has_split_lists = false;
  std::optional<std::size_t> labels_per_class;
  std::vector<std::string> warnings;
};

enum class FeatureFormat { kCsv, kF32 };

GraphDataset load_dataset(const std::filesystem::path& dir);
void save_dataset(const GraphDataset& ds, const std::filesystem::path& dir,
                  FeatureFormat format = FeatureFormat::kCsv);

/// .f32 container: u32 rows, u32 cols (little-endian), then row-major LE float32.
DenseMatrix read_f32_matrix(const std::filesystem::path& file);
void write_f32_matrix(const std::filesystem::path& file, const DenseMatrix& m);

/// Symmetric adjacency from an undirected edge list. Self-loops are dropped and
/// reported through `warnings` when given; duplicates collapse.
SparseMatrix adjacency_from_edges(std::size_t n,
                                  const std::vector<std::pair<std::size_t, std::size_t>>& edges,
                                  std::vector<std::string>* warnings = nullptr);

/// D̃^{-1/2} (A + I) D̃^{-1/2} with D̃ the row sums of A + I.
SparseMatrix symmetric_normalized(const SparseMatrix& adjacency);

/// D̃'^{-1} (A' + I) with D̃' the row sums of A' + I.
DenseMatrix row_normalized_latent(const DenseMatrix& latent_adjacency);
SparseMatrix row_normalized_latent(const SparseMatrix& latent_adjacency);

/// Divides each feature row by its L1 norm; all-zero rows are left unchanged.
void row_normalize_features(DenseMatrix& features);

/// Draws `per_class` labeled nodes per class, uniformly without replacement,
/// from the split's train list when present, else from all nodes outside
/// val/test. Val/test come from the dataset's split lists when present; with no
/// test list, test is every node neither sampled nor in val.
Split sample_labels(const GraphDataset& ds, std::size_t per_class, Rng& rng);

/// Nodes at hop distance 1..k from `node` (excluding it), ascending.
std::vector<std::size_t> k_hop(const SparseMatrix& adjacency, std::size_t node, std::size_t k);

/// Throws ConfigError when lists overlap or reference ids ≥ n.
void validate_split(const Split& split, std::size_t n);

}  // namespace muse
