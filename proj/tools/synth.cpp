#include "synth.hpp"

#include <cmath>
#include <numbers>

#include "muse/errors.hpp"
#include "muse/rng.hpp"

namespace muse::tools {

namespace {

GraphDataset point_cloud(DenseMatrix coords, std::string name) {
  GraphDataset ds;
  ds.name = std::move(name);
  ds.node_count = coords.rows();
  ds.adjacency = SparseMatrix(coords.rows(), coords.rows());
  ds.features = std::move(coords);
  ds.labels.assign(ds.node_count, 0);
  ds.num_classes = 1;
  return ds;
}

}  // namespace

GraphDataset make_sbm(const SbmOptions& o) {
  if (o.classes < 1) throw ConfigError("synth: classes must be ≥ 1");
  if (o.per_block < 1) throw ConfigError("synth: per-block must be ≥ 1");
  if (o.feat_dim < 1) throw ConfigError("synth: feat-dim must be ≥ 1");
  if (!(o.p_in >= 0.0 && o.p_in <= 1.0)) throw ConfigError("synth: p-in must lie in [0, 1]");
  if (!(o.p_out >= 0.0 && o.p_out <= 1.0)) throw ConfigError("synth: p-out must lie in [0, 1]");
  if (!(o.feat_noise >= 0.0) || !std::isfinite(o.feat_noise)) {
    throw ConfigError("synth: feat-noise must be a finite value ≥ 0");
  }
  const auto k = static_cast<std::size_t>(o.classes);
  const std::size_t n = k * o.per_block;
  Rng rng = make_rng(o.seed, RngStream::kSynth);

  GraphDataset ds;
  ds.name = "sbm";
  ds.node_count = n;
  ds.num_classes = o.classes;
  ds.labels.resize(n);
  for (std::size_t i = 0; i < n; ++i) ds.labels[i] = static_cast<int>(i / o.per_block);

  std::vector<std::pair<std::size_t, std::size_t>> edges;
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = i + 1; j < n; ++j) {
      const double p = ds.labels[i] == ds.labels[j] ? o.p_in : o.p_out;
      if (rng.uniform() < p) edges.emplace_back(i, j);
    }
  }
  ds.adjacency = adjacency_from_edges(n, edges);

  ds.features = DenseMatrix(n, o.feat_dim);
  for (std::size_t i = 0; i < n; ++i) {
    const auto c = static_cast<std::size_t>(ds.labels[i]);
    for (std::size_t j = 0; j < o.feat_dim; ++j) {
      ds.features(i, j) = (j % k == c ? 1.0 : 0.0) + o.feat_noise * rng.normal();
    }
  }
  return ds;
}

GraphDataset make_scurve(std::size_t points, std::uint64_t seed, std::vector<double>* param,
                         double width) {
  if (points < 2) throw ConfigError("synth: an S-curve needs at least 2 points");
  if (!(width >= 0.0) || !std::isfinite(width)) throw ConfigError("synth: width must be a finite value ≥ 0");
  Rng rng = make_rng(seed, RngStream::kSynth);
  DenseMatrix x(points, 3);
  if (param) param->assign(points, 0.0);
  for (std::size_t i = 0; i < points; ++i) {
    const double t = 3.0 * std::numbers::pi * (rng.uniform() - 0.5);
    const double v = rng.uniform();
    x(i, 0) = std::sin(t);
    x(i, 1) = width * v;
    x(i, 2) = (t > 0.0 ? 1.0 : t < 0.0 ? -1.0 : 0.0) * (std::cos(t) - 1.0);
    if (param) (*param)[i] = t;
  }
  return point_cloud(std::move(x), "scurve");
}

GraphDataset make_circle(std::size_t points) {
  if (points < 3) throw ConfigError("synth: a circle needs at least 3 points");
  DenseMatrix x(points, 2);
  for (std::size_t i = 0; i < points; ++i) {
    const double a = 2.0 * std::numbers::pi * static_cast<double>(i) / static_cast<double>(points);
    x(i, 0) = std::cos(a);
    x(i, 1) = std::sin(a);
  }
  return point_cloud(std::move(x), "circle");
}

}  // namespace muse::tools
