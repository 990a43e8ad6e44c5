#include "muse/subgraph.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "muse/autodiff.hpp"
#include "muse/errors.hpp"
#include "muse/graph_io.hpp"

namespace muse {

namespace {

double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

DenseMatrix row_of(std::span<const double> v) {
  return DenseMatrix(1, v.size(), std::vector<double>(v.begin(), v.end()));
}

void require_members(std::span<const double> logits, const DenseMatrix& members, const char* op) {
  if (members.rows() == 0) throw ConfigError(std::string(op) + ": empty member set");
  if (logits.size() != members.rows()) {
    throw DimensionError(std::string(op) + ": " + std::to_string(logits.size()) +
                         " logits for " + std::to_string(members.rows()) + " members");
  }
}

// Builds KL(softmax(ψ_i) ‖ softmax(σ(m)·Ψ)) on `tape` with the logits bound to `p`.
Var kl_on_tape(Tape& tape, Parameter& p, const DenseMatrix& target, const DenseMatrix& members) {
  Var weights = ad::sigmoid(tape.parameter(p));
  Var agg = ad::matmul(weights, tape.constant(members));
  return ad::kl_to_softmax(target, agg);
}

}  // namespace

const char* view_name(View v) noexcept { return v == View::kNaive ? "naive" : "latent"; }

DenseMatrix unit_rows(const DenseMatrix& coords) {
  DenseMatrix out = coords;
  for (std::size_t i = 0; i < out.rows(); ++i) {
    double s = 0.0;
    for (double v : out.row(i)) s += v * v;
    if (s == 0.0) continue;
    const double inv = 1.0 / std::sqrt(s);
    for (double& v : out.row(i)) v *= inv;
  }
  return out;
}

EligibilitySet eligibility(const SparseMatrix& adjacency, const DenseMatrix& unit_coords,
                           std::size_t node, View view, const EligibilityOptions& opts) {
  EligibilitySet set{node, view, {}};
  if (view == View::kNaive) {
    set.members = k_hop(adjacency, node, opts.k_hop);
    if (set.members.empty()) set.members.push_back(node);
    return set;
  }
  const std::size_t n = unit_coords.rows();
  if (node >= n) throw DimensionError("eligibility: node " + std::to_string(node) + " out of range");
  std::vector<double> cos(n, 0.0);
  const auto xi = unit_coords.row(node);
  for (std::size_t j = 0; j < n; ++j) {
    const auto xj = unit_coords.row(j);
    double s = 0.0;
    for (std::size_t k = 0; k < xi.size(); ++k) s += xi[k] * xj[k];
    cos[j] = s;
    if (j != node && s >= opts.tau) set.members.push_back(j);
  }
  if (set.members.size() < opts.min_members) {
    std::vector<std::size_t> idx;
    idx.reserve(n);
    for (std::size_t j = 0; j < n; ++j) {
      if (j != node) idx.push_back(j);
    }
    const std::size_t m = std::min(opts.fallback_m, idx.size());
    std::partial_sort(idx.begin(), idx.begin() + static_cast<std::ptrdiff_t>(m), idx.end(),
                      [&](std::size_t a, std::size_t b) {
                        return cos[a] != cos[b] ? cos[a] > cos[b] : a < b;
                      });
    idx.resize(m);
    std::sort(idx.begin(), idx.end());
    set.members = std::move(idx);
    if (set.members.empty()) set.members.push_back(node);
  }
  return set;
}

double kl_objective(std::span<const double> psi_i, std::span<const double> logits,
                    const DenseMatrix& members) {
  require_members(logits, members, "kl_objective");
  if (psi_i.size() != members.cols()) throw DimensionError("kl_objective: ψ_i width mismatch");
  Parameter p(row_of(logits));
  Tape tape;
  return kl_on_tape(tape, p, row_softmax(row_of(psi_i)), members).value()(0, 0);
}

std::vector<double> kl_gradient(std::span<const double> psi_i, std::span<const double> logits,
                                const DenseMatrix& members) {
  require_members(logits, members, "kl_gradient");
  if (psi_i.size() != members.cols()) throw DimensionError("kl_gradient: ψ_i width mismatch");
  Parameter p(row_of(logits));
  Tape tape;
  tape.backward(kl_on_tape(tape, p, row_softmax(row_of(psi_i)), members));
  return p.grad.values();
}

std::vector<double> optimize_mask(std::span<const double> psi_i, const DenseMatrix& members,
                                  std::span<const double> warm, const MaskOptimizerOptions& opts) {
  std::vector<double> logits(members.rows(), 0.0);
  if (!warm.empty()) {
    if (warm.size() != members.rows()) {
      throw DimensionError("optimize_mask: warm start has " + std::to_string(warm.size()) +
                           " logits for " + std::to_string(members.rows()) + " members");
    }
    logits.assign(warm.begin(), warm.end());
  }
  if (opts.steps == 0) return logits;
  require_members(logits, members, "optimize_mask");
  const DenseMatrix target = row_softmax(row_of(psi_i));

  Parameter p(row_of(logits));
  auto evaluate = [&](bool with_grad) {
    Tape tape;
    p.zero_grad();
    Var loss = kl_on_tape(tape, p, target, members);
    if (with_grad) tape.backward(loss);
    return loss.value()(0, 0);
  };
  double current = evaluate(true);
  std::vector<double> trial(logits.size());
  for (std::size_t step = 0; step < opts.steps; ++step) {
    const std::vector<double> grad = p.grad.values();
    if (std::all_of(grad.begin(), grad.end(), [](double g) { return g == 0.0; })) break;
    const std::vector<double> base = p.value.values();
    double lr = opts.lr;
    bool accepted = false;
    for (std::size_t h = 0; h <= opts.max_halvings; ++h, lr *= 0.5) {
      for (std::size_t j = 0; j < base.size(); ++j) p.value.data()[j] = base[j] - lr * grad[j];
      const double next = evaluate(false);
      if (next <= current) {
        current = evaluate(true);
        accepted = true;
        break;
      }
    }
    if (!accepted) {
      std::copy(base.begin(), base.end(), p.value.data().begin());
      break;
    }
  }
  return p.value.values();
}

std::vector<double> mask_weights(std::span<const double> logits) {
  std::vector<double> w(logits.size());
  double total = 0.0;
  for (std::size_t j = 0; j < logits.size(); ++j) {
    w[j] = sigmoid(logits[j]);
    total += w[j];
  }
  for (double& v : w) v /= total;
  return w;
}

DenseMatrix subgraph_embedding(std::span<const double> logits, const DenseMatrix& members) {
  require_members(logits, members, "subgraph_embedding");
  const std::vector<double> w = mask_weights(logits);
  DenseMatrix out(1, members.cols());
  for (std::size_t j = 0; j < members.rows(); ++j) {
    const auto r = members.row(j);
    for (std::size_t k = 0; k < r.size(); ++k) out(0, k) += w[j] * r[k];
  }
  return out;
}

DenseMatrix gather(const DenseMatrix& psi, std::span<const std::size_t> ids) {
  DenseMatrix out(ids.size(), psi.cols());
  for (std::size_t r = 0; r < ids.size(); ++r) {
    const auto src = psi.row(ids[r]);
    std::copy(src.begin(), src.end(), out.row(r).begin());
  }
  return out;
}

SparseMatrix aggregation_matrix(std::span<const EligibilitySet> sets,
                                std::span<const MaskVector> masks, std::size_t n) {
  if (sets.size() != masks.size()) throw DimensionError("aggregation_matrix: sets/masks length mismatch");
  std::vector<std::size_t> offsets{0};
  std::vector<std::size_t> cols;
  std::vector<double> vals;
  for (std::size_t r = 0; r < sets.size(); ++r) {
    const auto& members = sets[r].members;
    if (members.empty()) throw ConfigError("aggregation_matrix: empty member set");
    if (masks[r].logits.size() != members.size()) {
      throw DimensionError("aggregation_matrix: mask/member length mismatch for node " +
                           std::to_string(sets[r].node));
    }
    const std::vector<double> w = mask_weights(masks[r].logits);
    for (std::size_t j = 0; j < members.size(); ++j) {
      if (members[j] >= n) throw DimensionError("aggregation_matrix: member out of range");
      cols.push_back(members[j]);
      vals.push_back(w[j]);
    }
    offsets.push_back(cols.size());
  }
  return SparseMatrix(sets.size(), n, std::move(offsets), std::move(cols), std::move(vals));
}

}  // namespace muse
