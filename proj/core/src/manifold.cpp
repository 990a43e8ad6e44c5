#include "muse/manifold.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <limits>
#include <numeric>
#include <queue>
#include <sstream>

#include <json.hpp>

#include "muse/eigensolver.hpp"
#include "muse/errors.hpp"
#include "muse/graph_io.hpp"
#include "muse/parallel.hpp"

namespace muse {

namespace fs = std::filesystem;

DenseMatrix pairwise_euclidean(const DenseMatrix& x) {
  const std::size_t n = x.rows();
  const std::size_t d = x.cols();
  // Gram rows accumulate over nonzero features in increasing index order, so
  // identical rows give an exactly zero radicand.
  std::vector<std::vector<std::pair<std::size_t, double>>> nz(n);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t k = 0; k < d; ++k) {
      if (x(i, k) != 0.0) nz[i].emplace_back(k, x(i, k));
    }
  }
  const DenseMatrix xt = transpose(x);
  DenseMatrix gram(n, n);
  parallel_for(n, default_thread_count(), [&](std::size_t i) {
    double* g = gram.row(i).data();
    for (auto [k, v] : nz[i]) {
      const double* col = xt.row(k).data();
      for (std::size_t j = 0; j < n; ++j) g[j] += v * col[j];
    }
  });
  DenseMatrix out(n, n);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = i + 1; j < n; ++j) {
      const double sq = gram(i, i) + gram(j, j) - 2.0 * gram(i, j);
      const double v = std::sqrt(std::max(sq, 0.0));
      out(i, j) = v;
      out(j, i) = v;
    }
  }
  return out;
}

SparseMatrix knn_graph(const DenseMatrix& dist, std::size_t k_iso) {
  const std::size_t n = dist.rows();
  if (dist.cols() != n) throw DimensionError("knn_graph: distance matrix not square");
  if (k_iso < 1 || k_iso >= n) {
    throw ConfigError("knn_graph: k_iso=" + std::to_string(k_iso) + " must lie in [1," +
                      std::to_string(n) + ")");
  }
  std::vector<Triplet> trip;
  trip.reserve(2 * n * k_iso);
  std::vector<std::size_t> order(n - 1);
  for (std::size_t i = 0; i < n; ++i) {
    std::size_t p = 0;
    for (std::size_t j = 0; j < n; ++j) {
      if (j != i) order[p++] = j;
    }
    auto closer = [&](std::size_t a, std::size_t b) {
      return dist(i, a) != dist(i, b) ? dist(i, a) < dist(i, b) : a < b;
    };
    std::partial_sort(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(k_iso),
                      order.end(), closer);
    for (std::size_t t = 0; t < k_iso; ++t) {
      trip.push_back({i, order[t], 0.0});
      trip.push_back({order[t], i, 0.0});
    }
  }
  SparseMatrix pattern = SparseMatrix::from_triplets(n, n, std::move(trip));
  std::vector<double> vals(pattern.nnz());
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t k = pattern.row_offsets()[i]; k < pattern.row_offsets()[i + 1]; ++k) {
      vals[k] = dist(i, pattern.col_indices()[k]);
    }
  }
  return SparseMatrix(n, n, pattern.row_offsets(), pattern.col_indices(), std::move(vals));
}

std::vector<std::size_t> connected_components(const SparseMatrix& g) {
  const std::size_t n = g.rows();
  constexpr std::size_t kNone = std::numeric_limits<std::size_t>::max();
  std::vector<std::size_t> comp(n, kNone);
  std::vector<std::size_t> stack;
  for (std::size_t s = 0; s < n; ++s) {
    if (comp[s] != kNone) continue;
    comp[s] = s;
    stack.push_back(s);
    while (!stack.empty()) {
      const std::size_t u = stack.back();
      stack.pop_back();
      for (std::size_t v : g.row_indices(u)) {
        if (comp[v] == kNone) {
          comp[v] = s;
          stack.push_back(v);
        }
      }
    }
  }
  return comp;
}

SparseMatrix connect_components(const SparseMatrix& g, const DenseMatrix& dist,
                                std::size_t* added) {
  const std::size_t n = g.rows();
  if (dist.rows() != n || dist.cols() != n) {
    throw DimensionError("connect_components: graph " + g.shape_string() + " vs distances " +
                         dist.shape_string());
  }
  std::vector<Triplet> extra;
  std::vector<std::size_t> comp = connected_components(g);
  // Merged component ids, kept as a union-find over the original labels.
  std::vector<std::size_t> parent(n);
  std::iota(parent.begin(), parent.end(), 0);
  auto find = [&](std::size_t a) {
    while (parent[a] != a) a = parent[a] = parent[parent[a]];
    return a;
  };
  std::size_t groups = 0;
  for (std::size_t i = 0; i < n; ++i) groups += comp[i] == i;
  while (groups > 1) {
    double best = std::numeric_limits<double>::infinity();
    std::size_t bi = 0, bj = 0;
    for (std::size_t i = 0; i < n; ++i) {
      const std::size_t ci = find(comp[i]);
      for (std::size_t j = i + 1; j < n; ++j) {
        if (dist(i, j) < best && find(comp[j]) != ci) {
          best = dist(i, j);
          bi = i;
          bj = j;
        }
      }
    }
    extra.push_back({bi, bj, best});
    extra.push_back({bj, bi, best});
    parent[find(comp[bi])] = find(comp[bj]);
    --groups;
  }
  if (added) *added = extra.size() / 2;
  if (extra.empty()) return g;
  std::vector<Triplet> trip = std::move(extra);
  for (std::size_t i = 0; i < n; ++i) {
    const auto cols = g.row_indices(i);
    const auto vals = g.row_values(i);
    for (std::size_t k = 0; k < cols.size(); ++k) trip.push_back({i, cols[k], vals[k]});
  }
  return SparseMatrix::from_triplets(n, n, std::move(trip));
}

DenseMatrix geodesic_distances(const SparseMatrix& g) {
  const std::size_t n = g.rows();
  for (double w : g.values()) {
    if (w < 0.0) throw ConfigError("geodesic_distances: negative edge weight");
  }
  constexpr double kInf = std::numeric_limits<double>::infinity();
  DenseMatrix out(n, n, kInf);
  parallel_for(n, default_thread_count(), [&](std::size_t s) {
    auto dist = out.row(s);
    using Item = std::pair<double, std::size_t>;
    std::priority_queue<Item, std::vector<Item>, std::greater<>> heap;
    dist[s] = 0.0;
    heap.emplace(0.0, s);
    while (!heap.empty()) {
      const auto [d, u] = heap.top();
      heap.pop();
      if (d > dist[u]) continue;
      const auto cols = g.row_indices(u);
      const auto vals = g.row_values(u);
      for (std::size_t k = 0; k < cols.size(); ++k) {
        const double nd = d + vals[k];
        if (nd < dist[cols[k]]) {
          dist[cols[k]] = nd;
          heap.emplace(nd, cols[k]);
        }
      }
    }
  });
  // Path sums can differ in the last ulp between directions; use the smaller.
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = i + 1; j < n; ++j) {
      const double v = std::min(out(i, j), out(j, i));
      if (!std::isfinite(v)) {
        throw NumericError("geodesic_distances: nodes " + std::to_string(i) + " and " +
                           std::to_string(j) + " are disconnected");
      }
      out(i, j) = out(j, i) = v;
    }
  }
  return out;
}

MdsResult classical_mds(const DenseMatrix& dist, std::size_t latent_dim, double tol,
                        std::size_t max_iter) {
  const std::size_t n = dist.rows();
  if (dist.cols() != n) throw DimensionError("classical_mds: distance matrix not square");
  if (latent_dim < 1 || latent_dim > n) {
    throw ConfigError("classical_mds: latent dimension " + std::to_string(latent_dim) +
                      " must lie in [1," + std::to_string(n) + "]");
  }
  if (!dist.all_finite()) throw NumericError("classical_mds: non-finite distance");
  DenseMatrix sq(n, n);
  std::vector<double> row_mean(n, 0.0);
  double grand = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n; ++j) {
      sq(i, j) = dist(i, j) * dist(i, j);
      row_mean[i] += sq(i, j);
    }
    grand += row_mean[i];
    row_mean[i] /= static_cast<double>(n);
  }
  grand /= static_cast<double>(n) * static_cast<double>(n);
  DenseMatrix b(n, n);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = i; j < n; ++j) {
      const double v = -0.5 * (sq(i, j) - row_mean[i] - row_mean[j] + grand);
      b(i, j) = b(j, i) = v;
    }
  }
  EigenResult eig = eig_topk(b, latent_dim, tol, max_iter);
  MdsResult res;
  res.coords = DenseMatrix(n, latent_dim);
  for (std::size_t c = 0; c < latent_dim; ++c) {
    const double s = std::sqrt(std::max(eig.values[c], 0.0));
    for (std::size_t i = 0; i < n; ++i) res.coords(i, c) = eig.vectors(i, c) * s;
  }
  res.eigenvalues = std::move(eig.values);
  res.residuals = std::move(eig.residuals);
  return res;
}

DenseMatrix latent_adjacency(const DenseMatrix& coords) {
  if (coords.cols() == 0) throw DimensionError("latent_adjacency: zero latent dimension");
  DenseMatrix scores = matmul_nt(coords, coords);
  const double inv = 1.0 / std::sqrt(static_cast<double>(coords.cols()));
  for (double& v : scores.data()) v *= inv;
  return row_softmax(scores);
}

SparseMatrix latent_adjacency_topm(const DenseMatrix& coords, std::size_t m) {
  const std::size_t n = coords.rows();
  if (coords.cols() == 0) throw DimensionError("latent_adjacency_topm: zero latent dimension");
  if (m == 0) throw ConfigError("latent_adjacency_topm: m must be positive");
  m = std::min(m, n);
  const double inv = 1.0 / std::sqrt(static_cast<double>(coords.cols()));
  std::vector<std::size_t> offsets(n + 1);
  std::vector<std::size_t> cols(n * m);
  std::vector<double> vals(n * m);
  for (std::size_t i = 0; i <= n; ++i) offsets[i] = i * m;
  parallel_for(n, default_thread_count(), [&](std::size_t i) {
    std::vector<double> score(n);
    const auto xi = coords.row(i);
    for (std::size_t j = 0; j < n; ++j) {
      const auto xj = coords.row(j);
      double s = 0.0;
      for (std::size_t k = 0; k < xi.size(); ++k) s += xi[k] * xj[k];
      score[j] = s * inv;
    }
    std::vector<std::size_t> idx(n);
    std::iota(idx.begin(), idx.end(), 0);
    std::partial_sort(idx.begin(), idx.begin() + static_cast<std::ptrdiff_t>(m), idx.end(),
                      [&](std::size_t a, std::size_t b) {
                        return score[a] != score[b] ? score[a] > score[b] : a < b;
                      });
    std::sort(idx.begin(), idx.begin() + static_cast<std::ptrdiff_t>(m));
    double mx = -std::numeric_limits<double>::infinity();
    for (std::size_t t = 0; t < m; ++t) mx = std::max(mx, score[idx[t]]);
    double z = 0.0;
    for (std::size_t t = 0; t < m; ++t) {
      cols[i * m + t] = idx[t];
      vals[i * m + t] = std::exp(score[idx[t]] - mx);
      z += vals[i * m + t];
    }
    for (std::size_t t = 0; t < m; ++t) vals[i * m + t] /= z;
  });
  return SparseMatrix(n, n, std::move(offsets), std::move(cols), std::move(vals));
}

namespace {

struct Embedding {
  DenseMatrix coords;
  std::vector<double> eigenvalues;
  std::vector<double> residuals;
  std::size_t repair_edges = 0;
};

Embedding isomap_embedding(const DenseMatrix& features, const IsomapOptions& opts) {
  const DenseMatrix dist = pairwise_euclidean(features);
  Embedding e;
  const SparseMatrix g = connect_components(knn_graph(dist, opts.k_iso), dist, &e.repair_edges);
  const DenseMatrix geo = geodesic_distances(g);
  MdsResult mds = classical_mds(geo, opts.latent_dim, opts.tol, opts.max_iter);
  e.coords = std::move(mds.coords);
  e.eigenvalues = std::move(mds.eigenvalues);
  e.residuals = std::move(mds.residuals);
  return e;
}

LatentGraph assemble(Embedding e, const IsomapOptions& opts) {
  LatentGraph lg;
  lg.isomap_k = opts.k_iso;
  lg.latent_dim = opts.latent_dim;
  lg.eigenvalues = std::move(e.eigenvalues);
  lg.residuals = std::move(e.residuals);
  lg.repair_edges = e.repair_edges;
  if (e.coords.rows() > opts.dense_limit) {
    lg.sparse_adjacency = latent_adjacency_topm(e.coords, opts.top_m);
  } else {
    lg.adjacency = latent_adjacency(e.coords);
  }
  lg.coords = std::move(e.coords);
  return lg;
}

void fnv(std::uint64_t& h, const void* data, std::size_t len) {
  const auto* p = static_cast<const unsigned char*>(data);
  for (std::size_t i = 0; i < len; ++i) {
    h ^= p[i];
    h *= 0x100000001b3ULL;
  }
}

}  // namespace

LatentGraph build_latent_graph(const DenseMatrix& features, const IsomapOptions& opts) {
  return assemble(isomap_embedding(features, opts), opts);
}

std::uint64_t isomap_cache_key(const DenseMatrix& features, const IsomapOptions& opts) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  const std::uint64_t shape[2] = {features.rows(), features.cols()};
  fnv(h, shape, sizeof shape);
  fnv(h, features.data().data(), features.size() * sizeof(double));
  const std::uint64_t ints[3] = {opts.k_iso, opts.latent_dim, opts.max_iter};
  fnv(h, ints, sizeof ints);
  fnv(h, &opts.tol, sizeof opts.tol);
  return h;
}

LatentGraph latent_graph_cached(const DenseMatrix& features, const IsomapOptions& opts,
                                const std::optional<fs::path>& cache_dir) {
  std::ostringstream stem;
  stem << "isomap_" << std::hex << isomap_cache_key(features, opts);
  std::optional<fs::path> xp_file, ap_file, info_file;
  if (cache_dir) {
    xp_file = *cache_dir / (stem.str() + ".xp.f32");
    ap_file = *cache_dir / (stem.str() + ".ap.f32");
    info_file = *cache_dir / (stem.str() + ".json");
  }

  Embedding e;
  bool hit = false;
  if (xp_file && fs::exists(*xp_file) && fs::exists(*info_file)) {
    try {
      e.coords = read_f32_matrix(*xp_file);
      std::ifstream in(*info_file);
      const auto info = nlohmann::json::parse(in);
      e.eigenvalues = info.at("eigenvalues").get<std::vector<double>>();
      e.residuals = info.at("residuals").get<std::vector<double>>();
      e.repair_edges = info.at("repair_edges").get<std::size_t>();
      hit = e.coords.rows() == features.rows() && e.coords.cols() == opts.latent_dim;
    } catch (const std::exception&) {
      hit = false;
    }
  }
  if (!hit) {
    e = isomap_embedding(features, opts);
    for (double& v : e.coords.data()) v = static_cast<double>(static_cast<float>(v));
  }
  LatentGraph lg = assemble(std::move(e), opts);
  lg.cached = hit;
  if (cache_dir && !hit) {
    fs::create_directories(*cache_dir);
    write_f32_matrix(*xp_file, lg.coords);
    if (!lg.is_sparse()) write_f32_matrix(*ap_file, lg.adjacency);
    nlohmann::json info = {{"eigenvalues", lg.eigenvalues},
                           {"residuals", lg.residuals},
                           {"repair_edges", lg.repair_edges},
                           {"k_iso", opts.k_iso},
                           {"latent_dim", opts.latent_dim},
                           {"tol", opts.tol}};
    const fs::path tmp = info_file->string() + ".tmp";
    {
      std::ofstream out(tmp);
      out << info.dump(2) << "\n";
    }
    fs::rename(tmp, *info_file);
  }
  return lg;
}

}  // namespace muse
