#include <gtest/gtest.h>

#include <map>
#include <set>

#include "gstam/errors.hpp"
#include "gstam/graph_data.hpp"
#include "support.hpp"

using namespace gstam;
using gstam::testing::TempDir;

namespace {

// Triangle (nodes 1-3) and a single edge (nodes 4-5), TU 1-indexed.
void write_fixture(const TempDir& dir) {
  dir.write("FX_A.txt", "1, 2\n2, 1\n1, 3\n3, 1\n2, 3\n3, 2\n4, 5\n5, 4\n");
  dir.write("FX_graph_indicator.txt", "1\n1\n1\n2\n2\n");
  dir.write("FX_graph_labels.txt", "1\n-1\n");
  dir.write("FX_node_labels.txt", "0\n1\n0\n2\n2\n");
}

std::string expect_throw_message(const std::function<void()>& f) {
  try {
    f();
  } catch (const Error& e) {
    return e.what();
  }
  ADD_FAILURE() << "expected an exception";
  return {};
}

GraphDataset sized_dataset(std::size_t n) {
  GraphDataset ds;
  ds.num_classes = 1;
  ds.feature_dim = 1;
  for (std::size_t i = 0; i < n; ++i) ds.graphs.push_back(make_graph(2, {{0, 1}}, Tensor(2, 1, 1.0), 0));
  return ds;
}

}  // namespace

TEST(TuLoader, TriangleAndEdgeFixture) {
  TempDir dir;
  write_fixture(dir);
  const GraphDataset ds = load_tu_dataset(dir.path(), "FX");
  ASSERT_EQ(ds.graphs.size(), 2u);
  EXPECT_EQ(ds.graphs[0].adjacency, Tensor::from_rows({{0, 1, 1}, {1, 0, 1}, {1, 1, 0}}));
  EXPECT_EQ(ds.graphs[1].adjacency, Tensor::from_rows({{0, 1}, {1, 0}}));
  EXPECT_EQ(ds.num_classes, 2);
  EXPECT_EQ(ds.feature_dim, 3u);
  EXPECT_EQ(ds.graphs[0].features, Tensor::from_rows({{1, 0, 0}, {0, 1, 0}, {1, 0, 0}}));
  // Raw labels 1 and -1 map to 1 and 0 in ascending order.
  EXPECT_EQ(ds.graphs[0].label, 1);
  EXPECT_EQ(ds.graphs[1].label, 0);
}

TEST(TuLoader, NodeAttributesFollowOneHotBlock) {
  TempDir dir;
  write_fixture(dir);
  dir.write("FX_node_attributes.txt", "0.5\n1.5\n2.5\n3.5\n4.5\n");
  const GraphDataset ds = load_tu_dataset(dir.path(), "FX");
  EXPECT_EQ(ds.feature_dim, 4u);
  EXPECT_EQ(ds.graphs[1].features, Tensor::from_rows({{0, 0, 1, 3.5}, {0, 0, 1, 4.5}}));
}

TEST(TuLoader, NoNodeLabelsGivesConstantFeature) {
  TempDir dir;
  write_fixture(dir);
  std::filesystem::remove(dir.path() / "FX_node_labels.txt");
  const GraphDataset ds = load_tu_dataset(dir.path(), "FX");
  EXPECT_EQ(ds.feature_dim, 1u);
  EXPECT_EQ(ds.graphs[0].features, Tensor(3, 1, 1.0));
}

TEST(TuLoader, MissingFileNamesIt) {
  TempDir dir;
  write_fixture(dir);
  std::filesystem::remove(dir.path() / "FX_graph_labels.txt");
  const std::string msg = expect_throw_message([&] { load_tu_dataset(dir.path(), "FX"); });
  EXPECT_NE(msg.find("FX_graph_labels.txt"), std::string::npos) << msg;
  EXPECT_THROW(load_tu_dataset(dir.path(), "FX"), IngestionError);
}

TEST(TuLoader, MissingDirectory) {
  EXPECT_THROW(load_tu_dataset("/nonexistent/gstam", "X"), IngestionError);
}

TEST(TuLoader, DanglingEdgeReportsLine) {
  TempDir dir;
  write_fixture(dir);
  dir.write("FX_A.txt", "1, 2\n2, 1\n4, 9\n");
  EXPECT_THROW(load_tu_dataset(dir.path(), "FX"), FormatError);
  const std::string msg = expect_throw_message([&] { load_tu_dataset(dir.path(), "FX"); });
  EXPECT_NE(msg.find("FX_A.txt:3"), std::string::npos) << msg;
}

TEST(TuLoader, Mutag) {
  const GraphDataset ds = load_tu_dataset(std::string(GSTAM_DATA_DIR) + "/MUTAG", "MUTAG");
  // The distributed files hold 188 graphs; the commonly quoted figure is 187.
  EXPECT_EQ(ds.graphs.size(), 188u);
  EXPECT_EQ(ds.num_classes, 2);
  EXPECT_EQ(ds.feature_dim, 7u);
  double nodes = 0;
  for (const Graph& g : ds.graphs) nodes += static_cast<double>(g.node_count());
  // 3371 nodes; the quoted mean of 18.03 is 3371 / 187. Over all 188 graphs it
  // is 17.93, which still rounds to 18 synthetic nodes.
  EXPECT_EQ(nodes, 3371.0);
  EXPECT_NEAR(nodes / 187.0, 18.03, 0.005);
  const GraphDataset split = random_split(ds, 0);
  EXPECT_EQ(mean_node_count(split), 18u);
  EXPECT_EQ(split.split.train.size(), 152u);
  EXPECT_EQ(split.split.val.size(), 18u);
  EXPECT_EQ(split.split.test.size(), 18u);
}

TEST(JsonLoader, SingleEdgeGraph) {
  TempDir dir;
  const auto file = dir.write("g.json", R"({"num_classes": 1, "graphs": [
    {"label": 0, "features": [[1.0], [2.0]], "edges": [[0, 1]]}]})");
  const GraphDataset ds = load_json_graphs(file);
  ASSERT_EQ(ds.graphs.size(), 1u);
  EXPECT_EQ(ds.graphs[0].adjacency, Tensor::from_rows({{0, 1}, {1, 0}}));
}

TEST(JsonLoader, InconsistentWidthNamesGraph) {
  TempDir dir;
  const auto file = dir.write("g.json", R"({"num_classes": 1, "graphs": [
    {"label": 0, "features": [[1.0], [2.0]], "edges": [[0, 1]]},
    {"label": 0, "features": [[1.0, 0.0], [2.0, 1.0]], "edges": []}]})");
  EXPECT_THROW(load_json_graphs(file), IngestionError);
  const std::string msg = expect_throw_message([&] { load_json_graphs(file); });
  EXPECT_NE(msg.find("/graphs/1"), std::string::npos) << msg;
}

TEST(JsonLoader, SchemaErrorNamesPointer) {
  TempDir dir;
  const auto file = dir.write("g.json", R"({"num_classes": 2, "graphs": [
    {"label": 0, "features": [[1.0]], "edges": [[0, "x"]]}]})");
  const std::string msg = expect_throw_message([&] { load_json_graphs(file); });
  EXPECT_NE(msg.find("/graphs/0/edges/0"), std::string::npos) << msg;
}

TEST(JsonLoader, RoundTripIsExact) {
  const GraphDataset ds = gstam::testing::toy_dataset(6, 9);
  GraphDataset scaled = ds;
  for (Graph& g : scaled.graphs) {
    for (double& v : g.features.values()) v = v * 0.1 + 1.0 / 3.0;
  }
  TempDir dir;
  std::vector<std::size_t> sources(scaled.graphs.size());
  for (std::size_t i = 0; i < sources.size(); ++i) sources[i] = 100 + i;
  save_json_dataset(scaled, dir.path() / "d.json", &sources);
  std::vector<std::size_t> back_sources;
  const GraphDataset back = load_json_graphs(dir.path() / "d.json", &back_sources);
  ASSERT_EQ(back.graphs.size(), scaled.graphs.size());
  for (std::size_t i = 0; i < back.graphs.size(); ++i) {
    EXPECT_EQ(back.graphs[i].adjacency, scaled.graphs[i].adjacency);
    EXPECT_EQ(back.graphs[i].features, scaled.graphs[i].features);
    EXPECT_EQ(back.graphs[i].label, scaled.graphs[i].label);
  }
  EXPECT_EQ(back_sources, sources);
  const GraphDataset with_split = load_json_dataset(dir.path() / "d.json");
  EXPECT_EQ(with_split.split.train, scaled.split.train);
  EXPECT_EQ(with_split.split.test, scaled.split.test);
}

TEST(Split, CountingOracle) {
  const GraphDataset a = random_split(sized_dataset(187), 0);
  EXPECT_EQ(a.split.train.size(), 151u);
  EXPECT_EQ(a.split.val.size(), 18u);
  EXPECT_EQ(a.split.test.size(), 18u);
  const GraphDataset b = random_split(sized_dataset(10), 0);
  EXPECT_EQ(b.split.train.size(), 8u);
  EXPECT_EQ(b.split.val.size(), 1u);
  EXPECT_EQ(b.split.test.size(), 1u);
}

TEST(Split, PartitionAndDeterminism) {
  const GraphDataset a = random_split(sized_dataset(50), 7);
  const GraphDataset b = random_split(sized_dataset(50), 7);
  EXPECT_EQ(a.split.train, b.split.train);
  EXPECT_EQ(a.split.test, b.split.test);
  std::set<std::size_t> all;
  for (auto* part : {&a.split.train, &a.split.val, &a.split.test}) all.insert(part->begin(), part->end());
  EXPECT_EQ(all.size(), 50u);
  const GraphDataset c = random_split(sized_dataset(50), 8);
  EXPECT_NE(a.split.test, c.split.test);
}

TEST(Split, BadFractions) {
  EXPECT_THROW(random_split(sized_dataset(10), {0.9, 0.1, 0.0}, 0), ConfigError);
  EXPECT_THROW(random_split(sized_dataset(10), {0.5, 0.1, 0.1}, 0), ConfigError);
}

TEST(ClassBatch, ClampsToClassSize) {
  GraphDataset ds = sized_dataset(3);
  ds.split.train = {0, 1, 2};
  Rng rng(0);
  EXPECT_EQ(sample_class_batch(ds, 0, 10, rng).graph_indices.size(), 3u);
}

TEST(ClassBatch, SingleDrawHasClassLabel) {
  const GraphDataset ds = gstam::testing::toy_dataset(10, 3);
  Rng rng(1);
  for (int c = 0; c < 2; ++c) {
    const ClassBatch b = sample_class_batch(ds, c, 1, rng);
    ASSERT_EQ(b.graph_indices.size(), 1u);
    EXPECT_EQ(ds.graphs[b.graph_indices[0]].label, c);
  }
}

TEST(ClassBatch, UnknownClassThrows) {
  const GraphDataset ds = gstam::testing::toy_dataset(4, 3);
  Rng rng(1);
  EXPECT_THROW(sample_class_batch(ds, 2, 1, rng), ContractError);
  EXPECT_THROW(sample_class_batch(ds, -1, 1, rng), ContractError);
}

TEST(ClassBatch, UniformFrequency) {
  GraphDataset ds = sized_dataset(4);
  ds.split.train = {0, 1, 2, 3};
  Rng rng(42);
  std::map<std::size_t, int> counts;
  const int draws = 10000;
  for (int i = 0; i < draws; ++i) ++counts[sample_class_batch(ds, 0, 1, rng).graph_indices[0]];
  ASSERT_EQ(counts.size(), 4u);
  for (const auto& [idx, n] : counts) EXPECT_NEAR(n / static_cast<double>(draws), 0.25, 0.02);
}

TEST(MeanNodeCount, Rounding) {
  GraphDataset ds;
  ds.num_classes = 1;
  ds.feature_dim = 1;
  ds.graphs.push_back(make_graph(2, {}, Tensor(2, 1), 0));
  ds.graphs.push_back(make_graph(4, {}, Tensor(4, 1), 0));
  ds.split.train = {0, 1};
  EXPECT_EQ(mean_node_count(ds), 3u);
  ds.graphs = {make_graph(1, {}, Tensor(1, 1), 0)};
  ds.split.train = {0};
  EXPECT_EQ(mean_node_count(ds), 2u);
  ds.split.train.clear();
  EXPECT_THROW(mean_node_count(ds), ContractError);
}

TEST(Validate, RejectsAsymmetry) {
  GraphDataset ds = sized_dataset(1);
  ds.graphs[0].adjacency(0, 1) = 0.0;
  EXPECT_THROW(validate(ds), FormatError);
}

TEST(Fingerprint, SensitiveToFeatures) {
  GraphDataset a = sized_dataset(3);
  const std::uint64_t before = dataset_fingerprint(a);
  EXPECT_EQ(before, dataset_fingerprint(sized_dataset(3)));
  a.graphs[2].features(1, 0) = 2.0;
  EXPECT_NE(before, dataset_fingerprint(a));
}

TEST(Seeding, LabelsSeparateStreams) {
  EXPECT_EQ(derive_seed(1, "theta", 3), derive_seed(1, "theta", 3));
  EXPECT_NE(derive_seed(1, "theta", 3), derive_seed(1, "theta", 4));
  EXPECT_NE(derive_seed(1, "theta", 3), derive_seed(1, "batch", 3));
  EXPECT_NE(derive_seed(1, "theta", 3), derive_seed(2, "theta", 3));
}
