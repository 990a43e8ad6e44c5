#include <gtest/gtest.h>

#include <cmath>

#include "fixtures.hpp"
#include "muse/diagnostics.hpp"
#include "muse/errors.hpp"
#include "oracle_values.hpp"

namespace muse {
namespace {

BoundInputs plug_in() {
  BoundInputs in;
  in.empirical_risk = 0.1;
  in.input_bound = 1.0;
  in.depth = 2;
  in.norm_caps = {1.0, 1.0};
  in.samples = 100;
  in.views = 2;
  in.delta = 0.05;
  return in;
}

TEST(Smoothness, TwoNodeOracle) {
  const SparseMatrix a = adjacency_from_edges(2, {{0, 1}});
  EXPECT_NEAR(smoothness(DenseMatrix::from_rows({{1}, {-1}}), a), oracle::kSmoothnessTwoNode, 1e-15);
  EXPECT_NEAR(smoothness(DenseMatrix::from_rows({{3}, {3}}), a), 0.0, 1e-12);
}

TEST(Smoothness, SingleNodeIsZero) {
  EXPECT_EQ(smoothness(DenseMatrix::from_rows({{2, 5}}), SparseMatrix(1, 1)), 0.0);
}

TEST(Smoothness, ShapeMismatchThrows) {
  EXPECT_THROW(smoothness(DenseMatrix(3, 1), SparseMatrix(2, 2)), DimensionError);
}

TEST(Cosine, SelfAndAntipodal) {
  const DenseMatrix h = DenseMatrix::from_rows({{1, 2}, {-3, 1}});
  DenseMatrix neg = h;
  for (double& v : neg.data()) v = -v;
  EXPECT_NEAR(cross_view_cosine(h, h), 1.0, 1e-15);
  EXPECT_NEAR(cross_view_cosine(h, neg), -1.0, 1e-15);
}

TEST(Cosine, ZeroRowsContributeZero) {
  const DenseMatrix h = DenseMatrix::from_rows({{1, 0}, {0, 0}});
  EXPECT_NEAR(cross_view_cosine(h, h), 0.5, 1e-15);
}

TEST(Bound, PlugInMatchesHandComputation) {
  const BoundTerms t = bound_terms(plug_in());
  // Independent arithmetic: 2·B·(√(2·d·ln 2) + 1)·M1·M2/√N and √((b−a)² ln(4/δ)/(2VN)).
  const double complexity = 2.0 * 1.0 * (std::sqrt(2.0 * 2.0 * std::log(2.0)) + 1.0) / std::sqrt(100.0);
  const double confidence = std::sqrt(std::log(4.0 / 0.05) / (2.0 * 2.0 * 100.0));
  EXPECT_NEAR(t.complexity, complexity, 1e-12);
  EXPECT_NEAR(t.confidence, confidence, 1e-12);
  EXPECT_NEAR(t.complexity, oracle::kBoundComplexity, 1e-12);
  EXPECT_NEAR(t.confidence, oracle::kBoundConfidence, 1e-12);
  EXPECT_NEAR(rademacher_bound(plug_in()), oracle::kBoundTotal, 1e-12);
}

TEST(Bound, ZeroInputBoundLeavesConfidenceOnly) {
  BoundInputs in = plug_in();
  in.input_bound = 0.0;
  const BoundTerms t = bound_terms(in);
  EXPECT_EQ(t.complexity, 0.0);
  EXPECT_NEAR(t.total(), 0.1 + oracle::kBoundConfidence, 1e-15);
}

TEST(Bound, DoublingViewsDividesConfidenceBySqrtTwo) {
  BoundInputs one = plug_in();
  one.views = 1;
  const BoundTerms a = bound_terms(one);
  const BoundTerms b = bound_terms(plug_in());
  EXPECT_NEAR(a.confidence / b.confidence, std::sqrt(2.0), 1e-12);
}

TEST(Bound, InvalidInputsRejected) {
  BoundInputs in = plug_in();
  in.delta = 1.0;
  EXPECT_THROW(bound_terms(in), ConfigError);
  in = plug_in();
  in.norm_caps = {1.0};
  EXPECT_THROW(bound_terms(in), ConfigError);
  in = plug_in();
  in.range_a = 1.0;
  EXPECT_THROW(bound_terms(in), ConfigError);
  in = plug_in();
  in.samples = 0;
  EXPECT_THROW(bound_terms(in), ConfigError);
}

TEST(Spearman, TiesMatchOracle) {
  const std::vector<double> a{1, 2, 2, 3, 5, 4};
  const std::vector<double> b{2, 1, 3, 3, 6, 5};
  EXPECT_NEAR(spearman(a, b), oracle::kSpearmanTies, 1e-15);
}

TEST(SpectralNorm, DiagonalMatrix) {
  EXPECT_NEAR(spectral_norm(DenseMatrix::from_rows({{3, 0}, {0, -5}})), 5.0, 1e-9);
}

TEST(MaxRowNorm, Basic) {
  EXPECT_DOUBLE_EQ(max_row_norm(DenseMatrix::from_rows({{3, 4}, {1, 1}})), 5.0);
}

}  // namespace
}  // namespace muse
