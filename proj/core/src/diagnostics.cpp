#include "muse/diagnostics.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "muse/errors.hpp"
#include "muse/graph_io.hpp"

namespace muse {

double smoothness(const DenseMatrix& h, const SparseMatrix& adjacency) {
  if (adjacency.rows() != h.rows() || adjacency.cols() != h.rows()) {
    throw DimensionError("smoothness: H is " + h.shape_string() + " but A is " +
                         adjacency.shape_string());
  }
  const DenseMatrix ph = spmm(symmetric_normalized(adjacency), h);
  double total = 0.0;
  for (std::size_t k = 0; k < h.size(); ++k) {
    total += h.data()[k] * (h.data()[k] - ph.data()[k]);
  }
  return total;
}

double cross_view_cosine(const DenseMatrix& h, const DenseMatrix& u) {
  if (!h.same_shape(u)) {
    throw DimensionError("cross_view_cosine: " + h.shape_string() + " vs " + u.shape_string());
  }
  if (h.rows() == 0) return 0.0;
  double total = 0.0;
  for (std::size_t i = 0; i < h.rows(); ++i) {
    const auto a = h.row(i);
    const auto b = u.row(i);
    double ab = 0.0, aa = 0.0, bb = 0.0;
    for (std::size_t k = 0; k < a.size(); ++k) {
      ab += a[k] * b[k];
      aa += a[k] * a[k];
      bb += b[k] * b[k];
    }
    if (aa == 0.0 || bb == 0.0) continue;
    total += std::clamp(ab / (std::sqrt(aa) * std::sqrt(bb)), -1.0, 1.0);
  }
  return total / static_cast<double>(h.rows());
}

BoundTerms bound_terms(const BoundInputs& in) {
  if (!(in.input_bound >= 0.0)) throw ConfigError("bound: input bound B must be ≥ 0");
  if (in.depth < 1) throw ConfigError("bound: depth must be ≥ 1");
  if (in.norm_caps.size() != in.depth) {
    throw ConfigError("bound: expected " + std::to_string(in.depth) + " norm caps, got " +
                      std::to_string(in.norm_caps.size()));
  }
  for (double m : in.norm_caps) {
    if (!(m > 0.0)) throw ConfigError("bound: norm caps must be positive");
  }
  if (in.samples < 1) throw ConfigError("bound: sample count must be ≥ 1");
  if (in.views < 1) throw ConfigError("bound: view count must be ≥ 1");
  if (!(in.delta > 0.0 && in.delta < 1.0)) throw ConfigError("bound: δ must lie in (0, 1)");
  if (!(in.range_a < in.range_b)) throw ConfigError("bound: range requires a < b");

  const double n = static_cast<double>(in.samples);
  const double v = static_cast<double>(in.views);
  double prod = 1.0;
  for (double m : in.norm_caps) prod *= m;
  BoundTerms t;
  t.empirical = in.empirical_risk;
  t.complexity = 2.0 * in.input_bound *
                 (std::sqrt(2.0 * static_cast<double>(in.depth) * std::log(2.0)) + 1.0) * prod /
                 std::sqrt(n);
  const double width = in.range_b - in.range_a;
  t.confidence = std::sqrt(width * width * std::log(4.0 / in.delta) / (2.0 * v * n));
  return t;
}

double rademacher_bound(const BoundInputs& in) { return bound_terms(in).total(); }

double spectral_norm(const DenseMatrix& m, std::size_t iters) {
  if (m.size() == 0) return 0.0;
  std::vector<double> x(m.cols(), 1.0 / std::sqrt(static_cast<double>(m.cols())));
  std::vector<double> y(m.rows());
  double sigma = 0.0;
  for (std::size_t it = 0; it < iters; ++it) {
    for (std::size_t i = 0; i < m.rows(); ++i) {
      const auto r = m.row(i);
      double s = 0.0;
      for (std::size_t k = 0; k < r.size(); ++k) s += r[k] * x[k];
      y[i] = s;
    }
    std::fill(x.begin(), x.end(), 0.0);
    for (std::size_t i = 0; i < m.rows(); ++i) {
      const auto r = m.row(i);
      for (std::size_t k = 0; k < r.size(); ++k) x[k] += r[k] * y[i];
    }
    double nx = 0.0;
    for (double v : x) nx += v * v;
    nx = std::sqrt(nx);
    if (nx == 0.0) return 0.0;
    sigma = std::sqrt(nx);
    for (double& v : x) v /= nx;
  }
  return sigma;
}

double max_row_norm(const DenseMatrix& m) {
  double best = 0.0;
  for (std::size_t i = 0; i < m.rows(); ++i) {
    double s = 0.0;
    for (double v : m.row(i)) s += v * v;
    best = std::max(best, std::sqrt(s));
  }
  return best;
}

namespace {

std::vector<double> ranks(std::span<const double> v) {
  std::vector<std::size_t> idx(v.size());
  std::iota(idx.begin(), idx.end(), 0);
  std::stable_sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) { return v[a] < v[b]; });
  std::vector<double> r(v.size());
  for (std::size_t i = 0; i < idx.size();) {
    std::size_t j = i;
    while (j + 1 < idx.size() && v[idx[j + 1]] == v[idx[i]]) ++j;
    const double avg = 0.5 * static_cast<double>(i + j) + 1.0;
    for (std::size_t t = i; t <= j; ++t) r[idx[t]] = avg;
    i = j + 1;
  }
  return r;
}

}  // namespace

double spearman(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size()) throw DimensionError("spearman: length mismatch");
  if (a.size() < 2) throw ConfigError("spearman: need at least two points");
  const std::vector<double> ra = ranks(a), rb = ranks(b);
  const double n = static_cast<double>(a.size());
  const double mean = (n + 1.0) / 2.0;
  double sab = 0.0, saa = 0.0, sbb = 0.0;
  for (std::size_t i = 0; i < ra.size(); ++i) {
    sab += (ra[i] - mean) * (rb[i] - mean);
    saa += (ra[i] - mean) * (ra[i] - mean);
    sbb += (rb[i] - mean) * (rb[i] - mean);
  }
  if (saa == 0.0 || sbb == 0.0) return 0.0;
  return sab / std::sqrt(saa * sbb);
}

}  // namespace muse
