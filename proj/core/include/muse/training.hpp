#pragma once

#include <cstddef>
#include <cstdint>
#include <deque>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "muse/autodiff.hpp"
#include "muse/graph_io.hpp"
#include "muse/manifold.hpp"
#include "muse/model.hpp"
#include "muse/subgraph.hpp"

namespace muse {

/// Which embeddings feed the classifier. gcn-raw / gcn-latent train a single
/// plain GCN branch with cross-entropy only.
enum class Variant { kFull, kH, kU, kSH, kSU, kSHH, kSUU, kNoLp, kNoMI, kGcnRaw, kGcnLatent };

const char* variant_name(Variant v) noexcept;
/// Throws ConfigError on an unknown name.
Variant parse_variant(const std::string& name);
const std::vector<Variant>& all_variants();
bool is_baseline(Variant v) noexcept;

struct TrainConfig {
  double lr = 0.01;
  double weight_decay = 5e-4;
  double dropout = 0.5;
  std::size_t hidden = 17;
  double lambda_p = 4.0;
  std::size_t k_hop = 3;
  double tau = 0.5;
  std::size_t mask_steps = 20;
  double mask_lr = 0.1;
  std::size_t isomap_k = 10;
  std::size_t d_prime = 64;
  double isomap_tol = 1e-9;
  std::size_t epochs = 1000;
  std::size_t patience = 100;
  std::uint64_t seed = 42;
  std::size_t trials = 10;
  std::size_t per_class = 1;
  Activation final_activation = Activation::kRelu;
  Activation fuse_activation = Activation::kRelu;
  bool warm_start_masks = true;
  bool row_normalize_features = true;
  bool use_cache = true;
  Variant variant = Variant::kFull;
  /// 0 means default_thread_count().
  std::size_t threads = 0;
};

/// Throws ConfigError naming the first invalid field.
void validate(const TrainConfig& cfg);

/// Everything a trial needs that does not depend on the seed.
/// Holds a pointer to the dataset, which must outlive it.
struct PreparedData {
  const GraphDataset* dataset = nullptr;
  DenseMatrix features;
  PropagationPair props;
  std::optional<LatentGraph> latent;
  std::vector<EligibilitySet> naive_sets;   // indexed by node
  std::vector<EligibilitySet> latent_sets;  // indexed by node; empty for baselines
  double input_bound = 0.0;                 // max row norm of the features
};

/// Normalizes features (when configured), builds both propagation operators,
/// the latent graph (cached under `cache_dir` when given) and eligibility sets.
PreparedData prepare(const GraphDataset& ds, const TrainConfig& cfg,
                     const std::optional<std::filesystem::path>& cache_dir = std::nullopt);

/// Mask logits by node and view; an empty vector means "not optimized yet" (zeros).
struct MaskSet {
  std::vector<std::vector<double>> naive;
  std::vector<std::vector<double>> latent;

  explicit MaskSet(std::size_t n = 0) : naive(n), latent(n) {}
  std::vector<double>& of(View v, std::size_t node) { return v == View::kNaive ? naive[node] : latent[node]; }
  const std::vector<double>& of(View v, std::size_t node) const {
    return v == View::kNaive ? naive[node] : latent[node];
  }
};

/// Class-mean rows over the labeled nodes. Throws ConfigError for a class without members.
DenseMatrix prototypes(const DenseMatrix& emb, std::span<const int> labels, std::size_t classes);
/// K × rows operator with 1/|class| at each member of that class.
SparseMatrix class_average_matrix(std::span<const int> labels, std::size_t classes);

/// Σ_k ‖P_SH − P_H‖ + ‖P_SU − P_U‖ + ‖P_H − P_U‖ over class rows.
double prototypical_loss(const DenseMatrix& p_sh, const DenseMatrix& p_su, const DenseMatrix& p_h,
                         const DenseMatrix& p_u);
Var prototypical_loss(Var p_sh, Var p_su, Var p_h, Var p_u);

/// −mean ln(max(p[i, y_i], 1e-12)).
double cross_entropy(const DenseMatrix& probs, std::span<const int> labels);
inline double total_loss(double l_c, double l_p, double lambda_p) { return l_c + lambda_p * l_p; }

/// Branch outputs recorded on a tape.
struct Embeddings {
  Var h;
  Var u;
};

Embeddings forward(Tape& tape, MuseParams& params, const PreparedData& data, const TrainConfig& cfg,
                   bool training, Rng& rng);

struct LossParts {
  Var loss;
  Var l_c;
  Var l_p;
  Var logits;  // fused representation rows of `nodes`
};

/// Fused logits, cross-entropy and prototypical loss for the labeled `nodes`
/// given fixed masks. Aggregation operators are parked in `keep_alive`, which
/// must outlive the tape.
LossParts muse_loss(Tape& tape, Embeddings emb, MuseParams& params, const PreparedData& data,
                    const TrainConfig& cfg, std::span<const std::size_t> nodes, const MaskSet& masks,
                    std::deque<SparseMatrix>& keep_alive);

/// Fused logits for arbitrary nodes (no loss). Masks must exist or be zeros.
Var fused_logits(Tape& tape, Embeddings emb, MuseParams& params, const PreparedData& data,
                 const TrainConfig& cfg, std::span<const std::size_t> nodes, const MaskSet& masks,
                 std::deque<SparseMatrix>& keep_alive);

/// Runs the mask optimizer for `nodes` in both views against frozen H, U.
/// Starts from existing logits when `warm`, else zeros.
void optimize_masks(MaskSet& masks, const DenseMatrix& h, const DenseMatrix& u, const PreparedData& data,
                    const TrainConfig& cfg, std::span<const std::size_t> nodes, bool warm);

struct EpochMetrics {
  double loss = 0.0;
  double l_c = 0.0;
  double l_p = 0.0;
  double train_accuracy = 0.0;
  double monitor = 0.0;
};

struct TrainedModel {
  MuseParams params;
  MaskSet masks;
  Split split;
  std::vector<EpochMetrics> trace;
  std::size_t epochs_run = 0;
  std::size_t best_epoch = 0;
  double best_monitor = 0.0;
  bool monitor_is_accuracy = false;
  std::uint64_t seed = 0;
};

/// Mutable per-trial state of the epoch loop.
struct TrainState {
  MuseParams params;
  MaskSet masks;
  Split split;
  Rng dropout_rng;
};

TrainState init_state(const PreparedData& data, const TrainConfig& cfg, const Split& split,
                      std::uint64_t seed);

/// One optimization step over the labeled nodes (dropout on).
EpochMetrics train_epoch(TrainState& state, const PreparedData& data, const TrainConfig& cfg);

/// Value of the early-stopping monitor: val accuracy when val is non-empty
/// (val masks advance by s warm steps), else the dropout-off training loss.
double monitor_value(TrainState& state, const PreparedData& data, const TrainConfig& cfg);

/// Epoch loop with early stopping and best-epoch restoration, then masks for
/// every evaluation node against the frozen network.
TrainedModel train(const PreparedData& data, const TrainConfig& cfg, const Split& split,
                   std::uint64_t seed);

/// Argmax predictions (dropout off) for `nodes`; absent masks are optimized first.
std::vector<int> predict_nodes(TrainedModel& model, const PreparedData& data, const TrainConfig& cfg,
                               std::span<const std::size_t> nodes);

/// Fraction of correct predictions; 1.0 for an empty set.
double evaluate(TrainedModel& model, const PreparedData& data, const TrainConfig& cfg,
                std::span<const std::size_t> nodes);

/// Dropout-off branch outputs of a trained model.
std::pair<DenseMatrix, DenseMatrix> embeddings(TrainedModel& model, const PreparedData& data,
                                               const TrainConfig& cfg);

struct TrialResult {
  std::uint64_t seed = 0;
  double accuracy = 0.0;
  std::size_t epochs = 0;
  std::size_t best_epoch = 0;
  double train_accuracy = 0.0;
  double smoothness_h = 0.0;
  double smoothness_u = 0.0;
  double cross_view_cosine = 0.0;
  double bound = 0.0;
};

struct TrialReport {
  TrainConfig config;
  std::string dataset;
  std::vector<TrialResult> per_trial;
  double mean = 0.0;
  double std = 0.0;
  double wall_time_s = 0.0;
  double smoothness_h = 0.0;
  double smoothness_u = 0.0;
  double cross_view_cosine = 0.0;
  double bound = 0.0;
  std::vector<std::string> warnings;
};

/// Trial t uses seed cfg.seed + t for the split, init and dropout streams.
TrialResult run_trial(const PreparedData& data, const TrainConfig& cfg, std::uint64_t seed);
TrialReport run_trials(const PreparedData& data, const TrainConfig& cfg);
/// run_trials with the variant forced to gcn-raw.
TrialReport baseline_gcn(const PreparedData& data, TrainConfig cfg);

}  // namespace muse
