#include "muse/model.hpp"

#include <cmath>

#include "muse/errors.hpp"

namespace muse {

DenseMatrix glorot_uniform(std::size_t rows, std::size_t cols, Rng& rng) {
  if (rows == 0 || cols == 0) throw ConfigError("glorot_uniform: dimensions must be positive");
  const double bound = std::sqrt(6.0 / static_cast<double>(rows + cols));
  DenseMatrix m(rows, cols);
  for (double& v : m.data()) v = rng.uniform(-bound, bound);
  return m;
}

MuseParams init_params(std::size_t d, std::size_t h, std::size_t k, Rng& rng,
                       std::size_t fuse_parts) {
  if (fuse_parts == 0) throw ConfigError("init_params: at least one fused block required");
  MuseParams p;
  p.w1 = Parameter(glorot_uniform(d, h, rng));
  p.w2 = Parameter(glorot_uniform(h, k, rng));
  p.fc_w = Parameter(glorot_uniform(fuse_parts * k, k, rng));
  p.fc_b = Parameter(DenseMatrix(1, k));
  return p;
}

Var gcn_forward(const Propagation& prop, Var x, Var w1, Var w2, const GcnOptions& opts,
                Rng& rng) {
  if (prop.size() != x.rows()) {
    throw DimensionError("gcn_forward: propagation is " + std::to_string(prop.size()) +
                         " nodes but X has " + std::to_string(x.rows()) + " rows");
  }
  Var h = ad::dropout(x, opts.dropout, rng, opts.training);
  h = ad::relu(prop.apply(ad::matmul(h, w1)));
  h = ad::dropout(h, opts.dropout, rng, opts.training);
  return ad::elementwise(opts.final_activation, prop.apply(ad::matmul(h, w2)));
}

Var fuse(std::span<const Var> parts, Var fc_w, Var fc_b, Activation act) {
  Var cat = parts.size() == 1 ? parts[0] : ad::concat_cols(parts);
  return ad::elementwise(act, ad::add_row_broadcast(ad::matmul(cat, fc_w), fc_b));
}

DenseMatrix predict(const DenseMatrix& logits) { return row_softmax(logits); }

std::vector<int> argmax_rows(const DenseMatrix& scores) {
  std::vector<int> out(scores.rows(), 0);
  for (std::size_t i = 0; i < scores.rows(); ++i) {
    const auto r = scores.row(i);
    std::size_t best = 0;
    for (std::size_t c = 1; c < r.size(); ++c) {
      if (r[c] > r[best]) best = c;
    }
    out[i] = static_cast<int>(best);
  }
  return out;
}

}  // namespace muse
