#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>

#include "fixtures.hpp"
#include "muse/errors.hpp"
#include "muse/model.hpp"
#include "muse/subgraph.hpp"
#include "oracle_values.hpp"

namespace muse {
namespace {

using test::random_matrix;

TEST(Model, GcnForwardMatchesOracle) {
  const SparseMatrix a = symmetric_normalized(adjacency_from_edges(4, {{0, 1}, {1, 2}, {2, 3}, {0, 2}}));
  const DenseMatrix x = DenseMatrix::from_rows({{1, 0, 2}, {0.5, -1, 0}, {0, 1, 1}, {2, 0.5, -0.5}});
  Parameter w1(DenseMatrix::from_rows({{0.3, -0.2}, {0.1, 0.4}, {-0.5, 0.2}}));
  Parameter w2(DenseMatrix::from_rows({{0.7, -0.1}, {-0.3, 0.6}}));
  Tape t;
  Rng rng;
  GcnOptions o;
  const Var out = gcn_forward(Propagation(a), t.constant(x), t.parameter(w1), t.parameter(w2), o, rng);
  for (std::size_t k = 0; k < 8; ++k) EXPECT_NEAR(out.value().data()[k], oracle::kGcnOut[k], 1e-15);
}

TEST(Model, SparseAndDensePropagationAgree) {
  Rng rng(5, 0);
  const SparseMatrix a = symmetric_normalized(test::random_graph(10, 0.3, rng));
  const DenseMatrix dense = a.densify();
  const DenseMatrix x = random_matrix(10, 4, rng);
  Parameter w1(random_matrix(4, 3, rng));
  Parameter w2(random_matrix(3, 2, rng));
  Tape t;
  Rng unused;
  const GcnOptions o;
  const Var s = gcn_forward(Propagation(a), t.constant(x), t.parameter(w1), t.parameter(w2), o, unused);
  const Var d = gcn_forward(Propagation(dense), t.constant(x), t.parameter(w1), t.parameter(w2), o, unused);
  EXPECT_EQ(s.value(), d.value());
}

TEST(Model, PropagationSizeMismatchThrows) {
  const SparseMatrix a = SparseMatrix::identity(3);
  Parameter w1(DenseMatrix(2, 2, 0.1));
  Parameter w2(DenseMatrix(2, 2, 0.1));
  Tape t;
  Rng rng;
  EXPECT_THROW(gcn_forward(Propagation(a), t.constant(DenseMatrix(4, 2)), t.parameter(w1), t.parameter(w2),
                           GcnOptions{}, rng),
               DimensionError);
}

TEST(Model, InitDrawOrderAndGlorotRange) {
  Rng a(8, 2);
  const MuseParams p = init_params(6, 4, 3, a);
  Rng b(8, 2);
  EXPECT_EQ(p.w1.value, glorot_uniform(6, 4, b));
  EXPECT_EQ(p.w2.value, glorot_uniform(4, 3, b));
  EXPECT_EQ(p.fc_w.value, glorot_uniform(12, 3, b));
  EXPECT_EQ(p.fc_b.value, DenseMatrix(1, 3));
  const double bound = std::sqrt(6.0 / 10.0);
  for (double v : p.w1.value.data()) EXPECT_LE(std::abs(v), bound);
}

TEST(Model, FuseConcatenatesInOrder) {
  Tape t;
  const Var a = t.constant(DenseMatrix::from_rows({{1, 2}}));
  const Var b = t.constant(DenseMatrix::from_rows({{3, 4}}));
  DenseMatrix w(4, 1);
  w(2, 0) = 1.0;  // selects the first column of the second block
  Parameter fw(w);
  Parameter fb(DenseMatrix::from_rows({{-1.0}}));
  const Var parts[] = {a, b};
  const Var out = fuse(parts, t.parameter(fw), t.parameter(fb), Activation::kIdentity);
  EXPECT_DOUBLE_EQ(out.value()(0, 0), 2.0);
  const Var relu_out = fuse(parts, t.parameter(fw), t.parameter(fb));
  EXPECT_DOUBLE_EQ(relu_out.value()(0, 0), 2.0);
}

TEST(Model, ArgmaxTiesGoToSmallestClass) {
  EXPECT_EQ(argmax_rows(DenseMatrix::from_rows({{1, 3, 3}, {2, 2, 2}})), (std::vector<int>{1, 0}));
}

TEST(Subgraph, KlObjectiveMatchesOracle) {
  const std::vector<double> psi{0.2, 0.5, 0.3};
  const DenseMatrix members = DenseMatrix::from_rows({{0.1, 0.9, 0}, {0.4, 0.2, 0.4}, {0, 0.3, 0.7}});
  const std::vector<double> m{0.1, -0.3, 0.7};
  EXPECT_NEAR(kl_objective(psi, m, members), oracle::kMaskKl, 1e-15);
}

TEST(Subgraph, KlGradientMatchesFiniteDifference) {
  Rng rng(12, 0);
  for (int rep = 0; rep < 10; ++rep) {
    const DenseMatrix members = random_matrix(6, 4, rng, 0, 2);
    const DenseMatrix psi = random_matrix(1, 4, rng, 0, 2);
    std::vector<double> m(6);
    for (double& v : m) v = rng.uniform(-1, 1);
    const auto g = kl_gradient(psi.row(0), m, members);
    for (std::size_t j = 0; j < m.size(); ++j) {
      auto mp = m, mm = m;
      mp[j] += 1e-6;
      mm[j] -= 1e-6;
      const double fd = (kl_objective(psi.row(0), mp, members) - kl_objective(psi.row(0), mm, members)) / 2e-6;
      EXPECT_NEAR(g[j], fd, 1e-7 + 1e-5 * std::abs(fd));
    }
  }
}

TEST(Subgraph, DominantMemberGetsLargestWeight) {
  const std::vector<double> psi{6, 0, 0, 0};
  const DenseMatrix members = DenseMatrix::from_rows({{0, 6, 0, 0}, {6, 0, 0, 0}, {0, 0, 6, 0}, {0, 0, 0, 6}});
  const auto logits = optimize_mask(psi, members, {}, MaskOptimizerOptions{});
  const auto w = mask_weights(logits);
  for (std::size_t j = 0; j < w.size(); ++j) {
    if (j != 1) EXPECT_GT(w[1], w[j]);
  }
}

TEST(Subgraph, OptimizerNeverIncreasesObjective) {
  Rng rng(13, 0);
  for (int rep = 0; rep < 50; ++rep) {
    const DenseMatrix members = random_matrix(5, 3, rng, 0, 3);
    const DenseMatrix psi = random_matrix(1, 3, rng, 0, 3);
    const std::vector<double> zero(5, 0.0);
    const auto m = optimize_mask(psi.row(0), members, {}, MaskOptimizerOptions{});
    EXPECT_LE(kl_objective(psi.row(0), m, members), kl_objective(psi.row(0), zero, members));
  }
}

TEST(Subgraph, SubgraphEmbeddingIsNormalizedAverage) {
  const DenseMatrix members = DenseMatrix::from_rows({{1, 0}, {0, 1}});
  const std::vector<double> m{0.0, 0.0};
  const DenseMatrix s = subgraph_embedding(m, members);
  EXPECT_DOUBLE_EQ(s(0, 0), 0.5);
  EXPECT_DOUBLE_EQ(s(0, 1), 0.5);
}

TEST(Subgraph, EligibilityNaiveAndLatent) {
  const SparseMatrix a = adjacency_from_edges(5, {{0, 1}, {1, 2}, {2, 3}});
  const DenseMatrix unit = unit_rows(DenseMatrix::from_rows({{1, 0}, {0, 1}, {1, 0.1}, {-1, 0}, {0.9, 0.2}}));
  EligibilityOptions o;
  o.k_hop = 2;
  o.min_members = 1;
  EXPECT_EQ(eligibility(a, unit, 0, View::kNaive, o).members, (std::vector<std::size_t>{1, 2}));
  EXPECT_EQ(eligibility(a, unit, 4, View::kNaive, o).members, (std::vector<std::size_t>{4}));
  EXPECT_EQ(eligibility(a, unit, 0, View::kLatent, o).members, (std::vector<std::size_t>{2, 4}));
}

TEST(Subgraph, LatentFallbackTakesTopCosine) {
  const SparseMatrix a(4, 4);
  const DenseMatrix unit = unit_rows(DenseMatrix::from_rows({{1, 0}, {0, 1}, {-1, 0}, {0.5, -1}}));
  EligibilityOptions o;
  o.min_members = 5;
  o.fallback_m = 2;
  EXPECT_EQ(eligibility(a, unit, 0, View::kLatent, o).members, (std::vector<std::size_t>{1, 3}));
}

TEST(Subgraph, AggregationMatrixMatchesPerNodeEmbedding) {
  Rng rng(14, 0);
  const DenseMatrix psi = random_matrix(6, 3, rng, 0, 1);
  std::vector<EligibilitySet> sets{{0, View::kNaive, {1, 2}}, {3, View::kNaive, {0, 4, 5}}};
  std::vector<MaskVector> masks{{0, View::kNaive, {0.3, -0.2}}, {3, View::kNaive, {1.0, 0.0, -1.0}}};
  const DenseMatrix agg = spmm(aggregation_matrix(sets, masks, 6), psi);
  for (std::size_t r = 0; r < 2; ++r) {
    const DenseMatrix s = subgraph_embedding(masks[r].logits, gather(psi, sets[r].members));
    for (std::size_t c = 0; c < 3; ++c) EXPECT_NEAR(agg(r, c), s(0, c), 1e-15);
  }
}

TEST(Subgraph, EmptyMemberSetRejected) {
  EXPECT_THROW(kl_objective(std::vector<double>{1.0}, std::vector<double>{}, DenseMatrix(0, 1)), ConfigError);
}

}  // namespace
}  // namespace muse
