#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <numbers>

#include "fixtures.hpp"
#include "muse/diagnostics.hpp"
#include "muse/eigensolver.hpp"
#include "muse/errors.hpp"
#include "muse/manifold.hpp"
#include "oracle_values.hpp"
#include "synth.hpp"

namespace muse {
namespace {

using test::random_matrix;

// Cyclic Jacobi rotations; eigenvalues returned descending.
std::vector<double> jacobi_eigenvalues(DenseMatrix a) {
  const std::size_t n = a.rows();
  for (int sweep = 0; sweep < 100; ++sweep) {
    double off = 0.0;
    for (std::size_t p = 0; p < n; ++p)
      for (std::size_t q = p + 1; q < n; ++q) off += a(p, q) * a(p, q);
    if (off < 1e-30) break;
    for (std::size_t p = 0; p < n; ++p) {
      for (std::size_t q = p + 1; q < n; ++q) {
        if (std::abs(a(p, q)) < 1e-300) continue;
        const double theta = (a(q, q) - a(p, p)) / (2.0 * a(p, q));
        const double t = (theta >= 0 ? 1.0 : -1.0) / (std::abs(theta) + std::sqrt(theta * theta + 1.0));
        const double c = 1.0 / std::sqrt(t * t + 1.0);
        const double s = t * c;
        for (std::size_t k = 0; k < n; ++k) {
          const double akp = a(k, p), akq = a(k, q);
          a(k, p) = c * akp - s * akq;
          a(k, q) = s * akp + c * akq;
        }
        for (std::size_t k = 0; k < n; ++k) {
          const double apk = a(p, k), aqk = a(q, k);
          a(p, k) = c * apk - s * aqk;
          a(q, k) = s * apk + c * aqk;
        }
      }
    }
  }
  std::vector<double> ev(n);
  for (std::size_t i = 0; i < n; ++i) ev[i] = a(i, i);
  std::sort(ev.rbegin(), ev.rend());
  return ev;
}

DenseMatrix random_symmetric(std::size_t n, Rng& rng) {
  DenseMatrix m = random_matrix(n, n, rng);
  DenseMatrix s(n, n);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j) s(i, j) = 0.5 * (m(i, j) + m(j, i));
  return s;
}

TEST(Eigensolver, MatchesJacobiOracle) {
  Rng rng(31, 0);
  for (std::size_t n : {5u, 12u, 30u}) {
    const DenseMatrix b = random_symmetric(n, rng);
    const auto ref = jacobi_eigenvalues(b);
    const EigenResult r = eig_topk(b, 3);
    for (std::size_t j = 0; j < 3; ++j) {
      EXPECT_NEAR(r.values[j], ref[j], 1e-9 * std::max(1.0, std::abs(ref[j])));
      EXPECT_LE(r.residuals[j], 1e-9 * frobenius_norm(b));
    }
  }
}

TEST(Eigensolver, VectorsUnitAndSigned) {
  Rng rng(32, 0);
  const DenseMatrix b = random_symmetric(20, rng);
  const EigenResult r = eig_topk(b, 4);
  for (std::size_t j = 0; j < 4; ++j) {
    double norm = 0.0, big = 0.0;
    for (std::size_t i = 0; i < 20; ++i) {
      norm += r.vectors(i, j) * r.vectors(i, j);
      if (std::abs(r.vectors(i, j)) > std::abs(big)) big = r.vectors(i, j);
    }
    EXPECT_NEAR(norm, 1.0, 1e-12);
    EXPECT_GT(big, 0.0);
  }
}

TEST(Eigensolver, DegenerateSpectrumConverges) {
  const DenseMatrix b = DenseMatrix::identity(10);
  const EigenResult r = eig_topk(b, 3);
  for (double v : r.values) EXPECT_NEAR(v, 1.0, 1e-12);
}

TEST(Eigensolver, AsymmetricInputRejected) {
  EXPECT_THROW(eig_topk(DenseMatrix::from_rows({{1, 2}, {0, 1}}), 1), DimensionError);
}

TEST(Manifold, HelixGeodesicsMatchOracle) {
  DenseMatrix p(12, 3);
  for (std::size_t i = 0; i < 12; ++i) {
    const double a = 3.0 * static_cast<double>(i) / 11.0;
    p(i, 0) = std::cos(a);
    p(i, 1) = std::sin(a);
    p(i, 2) = 0.1 * a;
  }
  const DenseMatrix d = pairwise_euclidean(p);
  const DenseMatrix g = geodesic_distances(knn_graph(d, 4));
  for (std::size_t j = 0; j < 12; ++j) EXPECT_NEAR(g(0, j), oracle::kHelixGeodesicRow0[j], 1e-12);
  const MdsResult m = classical_mds(g, 2);
  EXPECT_NEAR(m.eigenvalues[0], oracle::kHelixMdsTop2[0], 1e-9);
  EXPECT_NEAR(m.eigenvalues[1], oracle::kHelixMdsTop2[1], 1e-9);
}

TEST(Manifold, CircleGeodesicsApproximateArcLength) {
  const GraphDataset c = tools::make_circle(100);
  const DenseMatrix g = geodesic_distances(knn_graph(pairwise_euclidean(c.features), 2));
  for (std::size_t i = 0; i < 100; i += 7) {
    for (std::size_t j = 0; j < 100; j += 3) {
      if (i == j) continue;
      const std::size_t steps = std::min((i + 100 - j) % 100, (j + 100 - i) % 100);
      const double arc = 2.0 * std::numbers::pi * static_cast<double>(steps) / 100.0;
      EXPECT_NEAR(g(i, j), arc, 0.05 * arc);
    }
  }
}

TEST(Manifold, SCurveOrderRecovered) {
  std::vector<double> t;
  const GraphDataset s = tools::make_scurve(40, 0, &t);
  IsomapOptions o;
  o.k_iso = 4;
  o.latent_dim = 1;
  const LatentGraph g = build_latent_graph(s.features, o);
  std::vector<double> x(40);
  for (std::size_t i = 0; i < 40; ++i) x[i] = g.coords(i, 0);
  EXPECT_GE(std::abs(spearman(x, t)), 0.99);
}

TEST(Manifold, MdsTwoPointHandExample) {
  const MdsResult m = classical_mds(DenseMatrix::from_rows({{0, 2}, {2, 0}}), 1);
  EXPECT_NEAR(std::abs(m.coords(0, 0)), 1.0, 1e-12);
  EXPECT_NEAR(m.coords(0, 0), -m.coords(1, 0), 1e-12);
}

TEST(Manifold, MdsRoundTripEuclidean3d) {
  Rng rng(41, 0);
  for (int rep = 0; rep < 5; ++rep) {
    const DenseMatrix p = random_matrix(25, 3, rng, -2, 2);
    const DenseMatrix d = pairwise_euclidean(p);
    const MdsResult m = classical_mds(d, 3);
    EXPECT_LT(max_abs_diff(pairwise_euclidean(m.coords), d), 1e-6);
  }
}

TEST(Manifold, LatentAdjacencyMatchesOracle) {
  const DenseMatrix a = latent_adjacency(DenseMatrix::from_rows({{1, 0}, {0.6, 0.8}, {-1, 0.5}}));
  for (std::size_t k = 0; k < 9; ++k) EXPECT_NEAR(a.data()[k], oracle::kLatentAdj[k], 1e-15);
}

TEST(Manifold, KnnRejectsBadK) {
  const DenseMatrix d = pairwise_euclidean(DenseMatrix::from_rows({{0}, {1}, {3}}));
  EXPECT_THROW(knn_graph(d, 0), ConfigError);
  EXPECT_THROW(knn_graph(d, 3), ConfigError);
}

TEST(Manifold, DisconnectedGraphRepaired) {
  const DenseMatrix p = DenseMatrix::from_rows({{0}, {0.1}, {0.2}, {5}, {5.1}, {5.2}});
  const DenseMatrix d = pairwise_euclidean(p);
  const SparseMatrix g = knn_graph(d, 1);
  EXPECT_THROW(geodesic_distances(g), NumericError);
  std::size_t added = 0;
  const SparseMatrix fixed = connect_components(g, d, &added);
  EXPECT_EQ(added, 1u);
  EXPECT_NEAR(fixed.at(2, 3), 4.8, 1e-12);
  const auto comp = connected_components(fixed);
  EXPECT_TRUE(std::all_of(comp.begin(), comp.end(), [](std::size_t c) { return c == 0; }));
}

TEST(Manifold, MdsRejectsBadDimension) {
  const DenseMatrix d = DenseMatrix::from_rows({{0, 1}, {1, 0}});
  EXPECT_THROW(classical_mds(d, 0), ConfigError);
  EXPECT_THROW(classical_mds(d, 3), ConfigError);
}

TEST(Manifold, CacheHitReproducesLatentGraph) {
  namespace fs = std::filesystem;
  const fs::path dir = fs::temp_directory_path() / "muse_cache_test";
  fs::remove_all(dir);
  const GraphDataset ds = test::twelve_node_fixture();
  IsomapOptions o;
  o.k_iso = 4;
  o.latent_dim = 3;
  const LatentGraph first = latent_graph_cached(ds.features, o, dir);
  const LatentGraph second = latent_graph_cached(ds.features, o, dir);
  const LatentGraph fresh = latent_graph_cached(ds.features, o, std::nullopt);
  EXPECT_FALSE(first.cached);
  EXPECT_TRUE(second.cached);
  EXPECT_EQ(first.coords, second.coords);
  EXPECT_EQ(first.adjacency, second.adjacency);
  EXPECT_EQ(fresh.adjacency, second.adjacency);
  o.latent_dim = 2;
  EXPECT_FALSE(latent_graph_cached(ds.features, o, dir).cached);
  fs::remove_all(dir);
}

TEST(Manifold, TopMRowsStochastic) {
  Rng rng(43, 0);
  const DenseMatrix x = random_matrix(30, 4, rng);
  const SparseMatrix a = latent_adjacency_topm(x, 5);
  for (std::size_t i = 0; i < 30; ++i) {
    const auto v = a.row_values(i);
    EXPECT_EQ(v.size(), 5u);
    double s = 0.0;
    for (double e : v) s += e;
    EXPECT_NEAR(s, 1.0, 1e-12);
  }
}

}  // namespace
}  // namespace muse
