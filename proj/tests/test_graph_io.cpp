#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>

#include "fixtures.hpp"
#include "muse/errors.hpp"
#include "muse/graph_io.hpp"
#include "oracle_values.hpp"

namespace muse {
namespace {

namespace fs = std::filesystem;

class TempDir : public ::testing::Test {
 protected:
  void SetUp() override {
    dir = fs::temp_directory_path() /
          ("muse_io_" + std::string(::testing::UnitTest::GetInstance()->current_test_info()->name()));
    fs::remove_all(dir);
    fs::create_directories(dir);
  }
  void TearDown() override { fs::remove_all(dir); }
  void write(const std::string& name, const std::string& body) {
    std::ofstream(dir / name, std::ios::binary) << body;
  }
  fs::path dir;
};

TEST(GraphIo, SymmetricNormalizationMatchesOracle) {
  const SparseMatrix a = adjacency_from_edges(4, {{0, 1}, {1, 2}, {2, 3}, {0, 2}});
  const DenseMatrix n = symmetric_normalized(a).densify();
  for (std::size_t k = 0; k < 16; ++k) EXPECT_NEAR(n.data()[k], oracle::kNormalized[k], 1e-15);
  EXPECT_TRUE(symmetric_normalized(a).is_symmetric());
}

TEST(GraphIo, SelfLoopsDroppedWithWarning) {
  std::vector<std::string> warnings;
  const SparseMatrix a = adjacency_from_edges(3, {{0, 0}, {0, 1}, {1, 0}}, &warnings);
  EXPECT_EQ(a.nnz(), 2u);
  EXPECT_EQ(a.at(0, 0), 0.0);
  ASSERT_EQ(warnings.size(), 1u);
  EXPECT_NE(warnings[0].find("self-loop on node 0"), std::string::npos);
}

TEST(GraphIo, RowNormalizeFeaturesL1AndZeroRows) {
  DenseMatrix x = DenseMatrix::from_rows({{1, -3}, {0, 0}});
  row_normalize_features(x);
  EXPECT_DOUBLE_EQ(x(0, 0), 0.25);
  EXPECT_DOUBLE_EQ(x(0, 1), -0.75);
  EXPECT_EQ(x(1, 0), 0.0);
}

TEST(GraphIo, KHopPathGraph) {
  const SparseMatrix a = adjacency_from_edges(5, {{0, 1}, {1, 2}, {2, 3}, {3, 4}});
  EXPECT_EQ(k_hop(a, 0, 1), (std::vector<std::size_t>{1}));
  EXPECT_EQ(k_hop(a, 2, 2), (std::vector<std::size_t>{0, 1, 3, 4}));
  EXPECT_TRUE(k_hop(a, 0, 0).empty());
}

TEST(GraphIo, SampleLabelsPerClassAndDisjoint) {
  const GraphDataset ds = test::twelve_node_fixture();
  Rng rng(1, 1);
  const Split s = sample_labels(ds, 2, rng);
  ASSERT_EQ(s.train.size(), 6u);
  std::vector<int> counts(3, 0);
  for (auto i : s.train) ++counts[static_cast<std::size_t>(ds.labels[i])];
  EXPECT_EQ(counts, (std::vector<int>{2, 2, 2}));
  EXPECT_EQ(s.test.size(), 6u);
  EXPECT_NO_THROW(validate_split(s, 12));
}

TEST(GraphIo, SampleLabelsTooFewThrowsNamingClass) {
  const GraphDataset ds = test::twelve_node_fixture();
  Rng rng(1, 1);
  try {
    sample_labels(ds, 5, rng);
    FAIL() << "expected ConfigError";
  } catch (const ConfigError& e) {
    EXPECT_NE(std::string(e.what()).find("class"), std::string::npos);
  }
}

TEST(GraphIo, ValidateSplitRejectsOverlap) {
  Split s;
  s.train = {0, 1};
  s.test = {1, 2};
  EXPECT_THROW(validate_split(s, 3), ConfigError);
}

TEST_F(TempDir, RoundTripCsv) {
  const GraphDataset ds = test::twelve_node_fixture();
  save_dataset(ds, dir, FeatureFormat::kCsv);
  const GraphDataset back = load_dataset(dir);
  EXPECT_EQ(back.node_count, ds.node_count);
  EXPECT_EQ(back.adjacency, ds.adjacency);
  EXPECT_EQ(back.labels, ds.labels);
  EXPECT_EQ(back.features, ds.features);
  EXPECT_EQ(back.num_classes, 3);
}

TEST_F(TempDir, RoundTripF32RoundsFeatures) {
  const GraphDataset ds = test::twelve_node_fixture();
  save_dataset(ds, dir, FeatureFormat::kF32);
  const GraphDataset back = load_dataset(dir);
  for (std::size_t k = 0; k < ds.features.size(); ++k) {
    EXPECT_EQ(back.features.data()[k], static_cast<double>(static_cast<float>(ds.features.data()[k])));
  }
}

TEST_F(TempDir, MissingDirectoryIsDatasetError) {
  EXPECT_THROW(load_dataset(dir / "absent"), DatasetError);
}

TEST_F(TempDir, CrlfCommentsAndBlankLinesAccepted) {
  write("edges.tsv", "# edges\r\n0\t1\r\n\r\n1 2\r\n");
  write("labels.tsv", "0\t0\r\n1\t1\r\n2\t0\r\n");
  write("features.csv", "1,0\r\n0,1\r\n1,1\r\n");
  const GraphDataset ds = load_dataset(dir);
  EXPECT_EQ(ds.node_count, 3u);
  EXPECT_EQ(ds.adjacency.nnz(), 4u);
  EXPECT_EQ(ds.num_classes, 2);
}

TEST_F(TempDir, MalformedEdgeLineIsDatasetError) {
  write("edges.tsv", "0\tx\n");
  write("labels.tsv", "0\t0\n1\t0\n");
  write("features.csv", "1\n2\n");
  EXPECT_THROW(load_dataset(dir), DatasetError);
}

TEST_F(TempDir, MetaMismatchIsDatasetError) {
  const GraphDataset ds = test::twelve_node_fixture();
  save_dataset(ds, dir);
  write("meta.json", R"({"nodes": 13, "edges": 32, "features": 6, "classes": 3})");
  EXPECT_THROW(load_dataset(dir), DatasetError);
}

TEST_F(TempDir, SplitListsLoaded) {
  GraphDataset ds = test::twelve_node_fixture();
  ds.has_split_lists = true;
  ds.split.train = {0, 4, 8, 1};
  ds.split.val = {2, 5};
  ds.split.test = {3, 6, 7};
  save_dataset(ds, dir);
  const GraphDataset back = load_dataset(dir);
  ASSERT_TRUE(back.has_split_lists);
  EXPECT_EQ(back.split.test, ds.split.test);
  Rng rng(0, 1);
  const Split s = sample_labels(back, 1, rng);
  EXPECT_EQ(s.test, ds.split.test);
  EXPECT_EQ(s.val, ds.split.val);
  for (auto i : s.train) {
    EXPECT_NE(std::find(ds.split.train.begin(), ds.split.train.end(), i), ds.split.train.end());
  }
}

TEST_F(TempDir, F32HeaderRoundTrip) {
  const DenseMatrix m = DenseMatrix::from_rows({{1.5, -2.0, 0.25}, {3.0, 4.0, 5.0}});
  write_f32_matrix(dir / "m.f32", m);
  EXPECT_EQ(read_f32_matrix(dir / "m.f32"), m);
  EXPECT_EQ(fs::file_size(dir / "m.f32"), 8u + 6u * 4u);
}

}  // namespace
}  // namespace muse
