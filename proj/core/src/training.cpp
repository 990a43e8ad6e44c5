#include "muse/training.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <limits>

#include "muse/diagnostics.hpp"
#include "muse/errors.hpp"
#include "muse/parallel.hpp"

namespace muse {

namespace {

struct VariantInfo {
  Variant v;
  const char* name;
};

constexpr VariantInfo kVariants[] = {
    {Variant::kFull, "full"},     {Variant::kH, "H"},          {Variant::kU, "U"},
    {Variant::kSH, "SH"},         {Variant::kSU, "SU"},        {Variant::kSHH, "SH+H"},
    {Variant::kSUU, "SU+U"},      {Variant::kNoLp, "no-Lp"},   {Variant::kNoMI, "no-MI"},
    {Variant::kGcnRaw, "gcn-raw"}, {Variant::kGcnLatent, "gcn-latent"},
};

std::size_t fuse_parts(Variant v) {
  switch (v) {
    case Variant::kH:
    case Variant::kU:
    case Variant::kSH:
    case Variant::kSU:
    case Variant::kGcnRaw:
    case Variant::kGcnLatent:
      return 1;
    case Variant::kSHH:
    case Variant::kSUU:
      return 2;
    default:
      return 4;
  }
}

bool optimizes_masks(Variant v) { return !is_baseline(v) && v != Variant::kNoMI; }
bool uses_latent(Variant v) { return v != Variant::kGcnRaw; }

std::vector<int> labels_at(const GraphDataset& ds, std::span<const std::size_t> nodes) {
  std::vector<int> out(nodes.size());
  for (std::size_t r = 0; r < nodes.size(); ++r) out[r] = ds.labels[nodes[r]];
  return out;
}

std::vector<Parameter*> trainable(MuseParams& p, Variant v) {
  return is_baseline(v) ? p.gcn() : p.all();
}

double accuracy_of(const DenseMatrix& scores, std::span<const int> labels) {
  if (labels.empty()) return 1.0;
  const std::vector<int> pred = argmax_rows(scores);
  std::size_t hit = 0;
  for (std::size_t i = 0; i < labels.size(); ++i) hit += pred[i] == labels[i];
  return static_cast<double>(hit) / static_cast<double>(labels.size());
}

struct Aggregates {
  Var sh;
  Var su;
};

Aggregates subgraph_rows(Embeddings emb, const PreparedData& data, std::span<const std::size_t> nodes,
                         const MaskSet& masks, std::deque<SparseMatrix>& keep_alive) {
  const std::size_t n = data.features.rows();
  Aggregates out;
  for (View view : {View::kNaive, View::kLatent}) {
    const auto& all_sets = view == View::kNaive ? data.naive_sets : data.latent_sets;
    std::vector<EligibilitySet> sets;
    std::vector<MaskVector> mv;
    sets.reserve(nodes.size());
    mv.reserve(nodes.size());
    for (std::size_t node : nodes) {
      const EligibilitySet& s = all_sets.at(node);
      std::vector<double> logits = masks.of(view, node);
      if (logits.empty()) logits.assign(s.members.size(), 0.0);
      sets.push_back(s);
      mv.push_back({node, view, std::move(logits)});
    }
    keep_alive.push_back(aggregation_matrix(sets, mv, n));
    Var psi = view == View::kNaive ? emb.h : emb.u;
    (view == View::kNaive ? out.sh : out.su) = ad::spmm(keep_alive.back(), psi);
  }
  return out;
}

std::vector<Var> fused_parts(Variant v, Var sh, Var su, Var u, Var h) {
  switch (v) {
    case Variant::kH: return {h};
    case Variant::kU: return {u};
    case Variant::kSH: return {sh};
    case Variant::kSU: return {su};
    case Variant::kSHH: return {sh, h};
    case Variant::kSUU: return {su, u};
    default: return {sh, su, u, h};
  }
}

Var baseline_psi(Embeddings emb, Variant v) { return v == Variant::kGcnRaw ? emb.h : emb.u; }

}  // namespace

const char* variant_name(Variant v) noexcept {
  for (const auto& info : kVariants) {
    if (info.v == v) return info.name;
  }
  return "?";
}

Variant parse_variant(const std::string& name) {
  for (const auto& info : kVariants) {
    if (name == info.name) return info.v;
  }
  std::string known;
  for (const auto& info : kVariants) known += std::string(known.empty() ? "" : ", ") + info.name;
  throw ConfigError("unknown variant '" + name + "' (expected one of: " + known + ")");
}

const std::vector<Variant>& all_variants() {
  static const std::vector<Variant> all = [] {
    std::vector<Variant> v;
    for (const auto& info : kVariants) v.push_back(info.v);
    return v;
  }();
  return all;
}

bool is_baseline(Variant v) noexcept { return v == Variant::kGcnRaw || v == Variant::kGcnLatent; }

void validate(const TrainConfig& cfg) {
  auto fail = [](const std::string& msg) { throw ConfigError(msg); };
  if (!(cfg.lr >= 0.0) || !std::isfinite(cfg.lr)) fail("lr must be a finite value ≥ 0");
  if (!(cfg.weight_decay >= 0.0)) fail("weight-decay must be ≥ 0");
  if (!(cfg.dropout >= 0.0 && cfg.dropout < 1.0)) fail("dropout must lie in [0, 1)");
  if (cfg.hidden == 0) fail("hidden must be ≥ 1");
  if (!(cfg.lambda_p >= 0.0)) fail("lambda-p must be ≥ 0");
  if (!(cfg.tau >= -1.0 && cfg.tau <= 1.0)) fail("tau must lie in [-1, 1]");
  if (!(cfg.mask_lr > 0.0)) fail("mask-lr must be > 0");
  if (cfg.isomap_k == 0) fail("isomap-k must be ≥ 1");
  if (cfg.d_prime == 0) fail("d-prime must be ≥ 1");
  if (!(cfg.isomap_tol > 0.0)) fail("isomap tolerance must be > 0");
  if (cfg.epochs == 0) fail("epochs must be ≥ 1");
  if (cfg.trials == 0) fail("trials must be ≥ 1");
  if (cfg.per_class == 0) fail("per-class must be ≥ 1");
}

PreparedData prepare(const GraphDataset& ds, const TrainConfig& cfg,
                     const std::optional<std::filesystem::path>& cache_dir) {
  validate(cfg);
  PreparedData data;
  data.dataset = &ds;
  data.features = ds.features;
  if (cfg.row_normalize_features) row_normalize_features(data.features);
  data.input_bound = max_row_norm(data.features);
  data.props.naive = symmetric_normalized(ds.adjacency);

  if (uses_latent(cfg.variant)) {
    IsomapOptions iso;
    iso.k_iso = cfg.isomap_k;
    iso.latent_dim = cfg.d_prime;
    iso.tol = cfg.isomap_tol;
    // Isomap sees the raw features; row normalization only feeds the GCN input.
    data.latent = latent_graph_cached(ds.features, iso,
                                      cfg.use_cache ? cache_dir : std::optional<std::filesystem::path>{});
    if (data.latent->is_sparse()) {
      data.props.latent_sparse = row_normalized_latent(*data.latent->sparse_adjacency);
    } else {
      data.props.latent = row_normalized_latent(data.latent->adjacency);
    }
  }

  if (!is_baseline(cfg.variant)) {
    const std::size_t n = ds.node_count;
    EligibilityOptions eo;
    eo.k_hop = cfg.k_hop;
    eo.tau = cfg.tau;
    const DenseMatrix unit = unit_rows(data.latent->coords);
    data.naive_sets.resize(n);
    data.latent_sets.resize(n);
    parallel_for(n, default_thread_count(), [&](std::size_t i) {
      data.naive_sets[i] = eligibility(ds.adjacency, unit, i, View::kNaive, eo);
      data.latent_sets[i] = eligibility(ds.adjacency, unit, i, View::kLatent, eo);
    });
  }
  return data;
}

DenseMatrix prototypes(const DenseMatrix& emb, std::span<const int> labels, std::size_t classes) {
  return spmm(class_average_matrix(labels, classes), emb);
}

SparseMatrix class_average_matrix(std::span<const int> labels, std::size_t classes) {
  std::vector<std::size_t> count(classes, 0);
  for (int y : labels) {
    if (y < 0 || static_cast<std::size_t>(y) >= classes) throw DimensionError("label out of range");
    ++count[static_cast<std::size_t>(y)];
  }
  std::vector<Triplet> trip;
  trip.reserve(labels.size());
  for (std::size_t c = 0; c < classes; ++c) {
    if (count[c] == 0) throw ConfigError("class " + std::to_string(c) + " has no labeled members");
  }
  for (std::size_t r = 0; r < labels.size(); ++r) {
    const auto c = static_cast<std::size_t>(labels[r]);
    trip.push_back({c, r, 1.0 / static_cast<double>(count[c])});
  }
  return SparseMatrix::from_triplets(classes, labels.size(), std::move(trip));
}

double prototypical_loss(const DenseMatrix& p_sh, const DenseMatrix& p_su, const DenseMatrix& p_h,
                         const DenseMatrix& p_u) {
  auto dist = [](const DenseMatrix& a, const DenseMatrix& b) {
    if (!a.same_shape(b)) throw DimensionError("prototypical_loss: shape mismatch");
    double total = 0.0;
    for (std::size_t i = 0; i < a.rows(); ++i) {
      double s = 0.0;
      for (std::size_t k = 0; k < a.cols(); ++k) s += (a(i, k) - b(i, k)) * (a(i, k) - b(i, k));
      total += std::sqrt(s);
    }
    return total;
  };
  return dist(p_sh, p_h) + dist(p_su, p_u) + dist(p_h, p_u);
}

Var prototypical_loss(Var p_sh, Var p_su, Var p_h, Var p_u) {
  Var a = ad::sum(ad::row_l2_norm(ad::sub(p_sh, p_h)));
  Var b = ad::sum(ad::row_l2_norm(ad::sub(p_su, p_u)));
  Var c = ad::sum(ad::row_l2_norm(ad::sub(p_h, p_u)));
  return ad::add(ad::add(a, b), c);
}

double cross_entropy(const DenseMatrix& probs, std::span<const int> labels) {
  if (labels.size() != probs.rows()) throw DimensionError("cross_entropy: label count mismatch");
  if (labels.empty()) return 0.0;
  double total = 0.0;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    total += std::log(std::max(probs(i, static_cast<std::size_t>(labels[i])), 1e-12));
  }
  return -total / static_cast<double>(labels.size());
}

Embeddings forward(Tape& tape, MuseParams& params, const PreparedData& data, const TrainConfig& cfg,
                   bool training, Rng& rng) {
  GcnOptions opts;
  opts.dropout = cfg.dropout;
  opts.training = training;
  opts.final_activation = is_baseline(cfg.variant) ? Activation::kIdentity : cfg.final_activation;
  Var x = tape.constant(data.features);
  Var w1 = tape.parameter(params.w1);
  Var w2 = tape.parameter(params.w2);
  Embeddings emb;
  if (cfg.variant != Variant::kGcnLatent) {
    emb.h = gcn_forward(data.props.naive_op(), x, w1, w2, opts, rng);
  }
  if (uses_latent(cfg.variant) && cfg.variant != Variant::kGcnRaw) {
    if (!data.latent) throw ConfigError("forward: latent graph was not prepared");
    emb.u = gcn_forward(data.props.latent_op(), x, w1, w2, opts, rng);
  }
  return emb;
}

Var fused_logits(Tape& tape, Embeddings emb, MuseParams& params, const PreparedData& data,
                 const TrainConfig& cfg, std::span<const std::size_t> nodes, const MaskSet& masks,
                 std::deque<SparseMatrix>& keep_alive) {
  if (is_baseline(cfg.variant)) return ad::gather_rows(baseline_psi(emb, cfg.variant), nodes);
  const Aggregates agg = subgraph_rows(emb, data, nodes, masks, keep_alive);
  const Var h = ad::gather_rows(emb.h, nodes);
  const Var u = ad::gather_rows(emb.u, nodes);
  const std::vector<Var> parts = fused_parts(cfg.variant, agg.sh, agg.su, u, h);
  return fuse(parts, tape.parameter(params.fc_w), tape.parameter(params.fc_b), cfg.fuse_activation);
}

LossParts muse_loss(Tape& tape, Embeddings emb, MuseParams& params, const PreparedData& data,
                    const TrainConfig& cfg, std::span<const std::size_t> nodes, const MaskSet& masks,
                    std::deque<SparseMatrix>& keep_alive) {
  const GraphDataset& ds = *data.dataset;
  const std::vector<int> y = labels_at(ds, nodes);
  LossParts out;
  if (is_baseline(cfg.variant)) {
    out.logits = ad::gather_rows(baseline_psi(emb, cfg.variant), nodes);
    out.l_c = ad::nll_mean(ad::row_softmax(out.logits), y);
    out.l_p = tape.constant(DenseMatrix(1, 1));
    out.loss = out.l_c;
    return out;
  }
  const Aggregates agg = subgraph_rows(emb, data, nodes, masks, keep_alive);
  const Var h = ad::gather_rows(emb.h, nodes);
  const Var u = ad::gather_rows(emb.u, nodes);
  const std::vector<Var> parts = fused_parts(cfg.variant, agg.sh, agg.su, u, h);
  out.logits = fuse(parts, tape.parameter(params.fc_w), tape.parameter(params.fc_b), cfg.fuse_activation);
  out.l_c = ad::nll_mean(ad::row_softmax(out.logits), y);

  keep_alive.push_back(class_average_matrix(y, static_cast<std::size_t>(ds.num_classes)));
  const SparseMatrix& avg = keep_alive.back();
  out.l_p = prototypical_loss(ad::spmm(avg, agg.sh), ad::spmm(avg, agg.su), ad::spmm(avg, h),
                              ad::spmm(avg, u));
  const double lambda = cfg.variant == Variant::kNoLp ? 0.0 : cfg.lambda_p;
  out.loss = lambda == 0.0 ? out.l_c : ad::add(out.l_c, ad::scale(out.l_p, lambda));
  return out;
}

void optimize_masks(MaskSet& masks, const DenseMatrix& h, const DenseMatrix& u, const PreparedData& data,
                    const TrainConfig& cfg, std::span<const std::size_t> nodes, bool warm) {
  MaskOptimizerOptions mo;
  mo.steps = cfg.mask_steps;
  mo.lr = cfg.mask_lr;
  for (std::size_t node : nodes) {
    for (View view : {View::kNaive, View::kLatent}) {
      const DenseMatrix& psi = view == View::kNaive ? h : u;
      const EligibilitySet& set = (view == View::kNaive ? data.naive_sets : data.latent_sets).at(node);
      std::vector<double>& logits = masks.of(view, node);
      const std::vector<double> start = warm ? logits : std::vector<double>{};
      logits = optimize_mask(psi.row(node), gather(psi, set.members), start, mo);
    }
  }
}

TrainState init_state(const PreparedData& data, const TrainConfig& cfg, const Split& split,
                      std::uint64_t seed) {
  const GraphDataset& ds = *data.dataset;
  Rng init = make_rng(seed, RngStream::kInit);
  TrainState s{init_params(data.features.cols(), cfg.hidden, static_cast<std::size_t>(ds.num_classes),
                           init, fuse_parts(cfg.variant)),
               MaskSet(ds.node_count), split, make_rng(seed, RngStream::kDropout)};
  return s;
}

EpochMetrics train_epoch(TrainState& state, const PreparedData& data, const TrainConfig& cfg) {
  Tape tape;
  const Embeddings emb = forward(tape, state.params, data, cfg, true, state.dropout_rng);
  if (optimizes_masks(cfg.variant)) {
    optimize_masks(state.masks, emb.h.value(), emb.u.value(), data, cfg, state.split.train,
                   cfg.warm_start_masks);
  }
  std::deque<SparseMatrix> keep;
  const LossParts parts = muse_loss(tape, emb, state.params, data, cfg, state.split.train, state.masks, keep);
  EpochMetrics m;
  m.loss = parts.loss.value()(0, 0);
  m.l_c = parts.l_c.value()(0, 0);
  m.l_p = parts.l_p.value()(0, 0);
  if (!std::isfinite(m.loss)) throw NumericError("non-finite training loss");
  m.train_accuracy = accuracy_of(parts.logits.value(), labels_at(*data.dataset, state.split.train));

  const std::vector<Parameter*> params = trainable(state.params, cfg.variant);
  for (Parameter* p : params) p->zero_grad();
  tape.backward(parts.loss);
  AdamOptions ao;
  ao.lr = cfg.lr;
  ao.weight_decay = cfg.weight_decay;
  adam_step(params, ao);
  return m;
}

double monitor_value(TrainState& state, const PreparedData& data, const TrainConfig& cfg) {
  Tape tape;
  Rng unused;
  const Embeddings emb = forward(tape, state.params, data, cfg, false, unused);
  std::deque<SparseMatrix> keep;
  const auto& val = state.split.val;
  if (!val.empty()) {
    if (optimizes_masks(cfg.variant)) {
      optimize_masks(state.masks, emb.h.value(), emb.u.value(), data, cfg, val, cfg.warm_start_masks);
    }
    const Var logits = fused_logits(tape, emb, state.params, data, cfg, val, state.masks, keep);
    return accuracy_of(logits.value(), labels_at(*data.dataset, val));
  }
  return muse_loss(tape, emb, state.params, data, cfg, state.split.train, state.masks, keep)
      .loss.value()(0, 0);
}

TrainedModel train(const PreparedData& data, const TrainConfig& cfg, const Split& split,
                   std::uint64_t seed) {
  validate(cfg);
  validate_split(split, data.dataset->node_count);
  if (split.train.empty()) throw ConfigError("train: no labeled nodes");
  TrainState state = init_state(data, cfg, split, seed);

  TrainedModel model;
  model.split = split;
  model.seed = seed;
  model.monitor_is_accuracy = !split.val.empty();
  const bool acc = model.monitor_is_accuracy;
  double best = acc ? -std::numeric_limits<double>::infinity() : std::numeric_limits<double>::infinity();
  MuseParams best_params = state.params;
  MaskSet best_masks = state.masks;
  std::size_t bad = 0;
  for (std::size_t epoch = 1; epoch <= cfg.epochs; ++epoch) {
    EpochMetrics m;
    // Masks as the monitor saw them on entry, so a restored state re-evaluates identically.
    MaskSet entry_masks;
    try {
      m = train_epoch(state, data, cfg);
      if (acc) entry_masks = state.masks;
      m.monitor = monitor_value(state, data, cfg);
    } catch (const NumericError& e) {
      throw NumericError(std::string(e.what()) + " at epoch " + std::to_string(epoch));
    }
    model.trace.push_back(m);
    model.epochs_run = epoch;
    const bool improved = acc ? m.monitor > best : m.monitor < best;
    if (improved) {
      best = m.monitor;
      model.best_epoch = epoch;
      best_params = state.params;
      best_masks = acc ? std::move(entry_masks) : state.masks;
      bad = 0;
    } else if (++bad > cfg.patience) {
      break;
    }
  }
  model.best_monitor = best;
  model.params = std::move(best_params);
  model.masks = std::move(best_masks);

  if (optimizes_masks(cfg.variant)) {
    auto [h, u] = embeddings(model, data, cfg);
    std::vector<std::size_t> pending;
    for (std::size_t node : split.test) {
      if (model.masks.naive[node].empty() || model.masks.latent[node].empty()) pending.push_back(node);
    }
    optimize_masks(model.masks, h, u, data, cfg, pending, false);
  }
  return model;
}

std::pair<DenseMatrix, DenseMatrix> embeddings(TrainedModel& model, const PreparedData& data,
                                               const TrainConfig& cfg) {
  Tape tape;
  Rng unused;
  const Embeddings emb = forward(tape, model.params, data, cfg, false, unused);
  return {emb.h.valid() ? emb.h.value() : DenseMatrix(), emb.u.valid() ? emb.u.value() : DenseMatrix()};
}

std::vector<int> predict_nodes(TrainedModel& model, const PreparedData& data, const TrainConfig& cfg,
                               std::span<const std::size_t> nodes) {
  Tape tape;
  Rng unused;
  const Embeddings emb = forward(tape, model.params, data, cfg, false, unused);
  if (optimizes_masks(cfg.variant)) {
    std::vector<std::size_t> pending;
    for (std::size_t node : nodes) {
      if (model.masks.naive[node].empty() || model.masks.latent[node].empty()) pending.push_back(node);
    }
    optimize_masks(model.masks, emb.h.value(), emb.u.value(), data, cfg, pending, false);
  }
  std::deque<SparseMatrix> keep;
  const Var logits = fused_logits(tape, emb, model.params, data, cfg, nodes, model.masks, keep);
  return argmax_rows(logits.value());
}

double evaluate(TrainedModel& model, const PreparedData& data, const TrainConfig& cfg,
                std::span<const std::size_t> nodes) {
  if (nodes.empty()) return 1.0;
  const std::vector<int> pred = predict_nodes(model, data, cfg, nodes);
  std::size_t hit = 0;
  for (std::size_t r = 0; r < nodes.size(); ++r) hit += pred[r] == data.dataset->labels[nodes[r]];
  return static_cast<double>(hit) / static_cast<double>(nodes.size());
}

TrialResult run_trial(const PreparedData& data, const TrainConfig& cfg, std::uint64_t seed) {
  const GraphDataset& ds = *data.dataset;
  Rng split_rng = make_rng(seed, RngStream::kSplit);
  const Split split = sample_labels(ds, cfg.per_class, split_rng);
  TrainedModel model = train(data, cfg, split, seed);

  TrialResult r;
  r.seed = seed;
  r.accuracy = evaluate(model, data, cfg, split.test);
  r.epochs = model.epochs_run;
  r.best_epoch = model.best_epoch;
  r.train_accuracy = evaluate(model, data, cfg, split.train);

  auto [h, u] = embeddings(model, data, cfg);
  if (!h.empty()) r.smoothness_h = smoothness(h, ds.adjacency);
  if (!u.empty()) r.smoothness_u = smoothness(u, ds.adjacency);
  if (!h.empty() && !u.empty()) r.cross_view_cosine = cross_view_cosine(h, u);

  BoundInputs in;
  in.empirical_risk = 1.0 - r.train_accuracy;
  in.input_bound = data.input_bound;
  in.depth = 2;
  in.norm_caps = {std::max(spectral_norm(model.params.w1.value), 1e-300),
                  std::max(spectral_norm(model.params.w2.value), 1e-300)};
  in.samples = split.train.size();
  in.views = 2;
  r.bound = rademacher_bound(in);
  return r;
}

TrialReport run_trials(const PreparedData& data, const TrainConfig& cfg) {
  validate(cfg);
  const auto start = std::chrono::steady_clock::now();
  TrialReport rep;
  rep.config = cfg;
  rep.dataset = data.dataset->name;
  rep.warnings = data.dataset->warnings;
  rep.per_trial.resize(cfg.trials);
  const std::size_t threads = cfg.threads ? cfg.threads : default_thread_count();
  parallel_for(cfg.trials, threads, [&](std::size_t t) {
    rep.per_trial[t] = run_trial(data, cfg, cfg.seed + t);
  });
  const double n = static_cast<double>(cfg.trials);
  for (const auto& r : rep.per_trial) {
    rep.mean += r.accuracy;
    rep.smoothness_h += r.smoothness_h;
    rep.smoothness_u += r.smoothness_u;
    rep.cross_view_cosine += r.cross_view_cosine;
    rep.bound += r.bound;
  }
  rep.mean /= n;
  rep.smoothness_h /= n;
  rep.smoothness_u /= n;
  rep.cross_view_cosine /= n;
  rep.bound /= n;
  if (cfg.trials > 1) {
    double ss = 0.0;
    for (const auto& r : rep.per_trial) ss += (r.accuracy - rep.mean) * (r.accuracy - rep.mean);
    rep.std = std::sqrt(ss / (n - 1.0));
  }
  rep.wall_time_s =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return rep;
}

TrialReport baseline_gcn(const PreparedData& data, TrainConfig cfg) {
  cfg.variant = Variant::kGcnRaw;
  return run_trials(data, cfg);
}

}  // namespace muse
