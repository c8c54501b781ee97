#include <catch_amalgamated.hpp>

#include <filesystem>
#include <fstream>
#include <random>
#include <set>

#include "geattack/graph/graph.hpp"
#include "geattack/graph/io.hpp"
#include "support.hpp"

using namespace geattack::graph;
namespace fs = std::filesystem;

namespace {

Graph from_edges(std::size_t n, std::initializer_list<std::pair<std::size_t, std::size_t>> edges,
                 std::size_t d = 2) {
  Graph g;
  g.adjacency = DenseMatrix(n, n);
  for (auto [u, v] : edges) g.adjacency(u, v) = g.adjacency(v, u) = 1.0;
  auto f = std::make_shared<DenseMatrix>(n, d);
  for (std::size_t i = 0; i < n; ++i) (*f)(i, i % d) = static_cast<double>(i + 1);
  g.features = f;
  g.labels.resize(n);
  for (std::size_t i = 0; i < n; ++i) g.labels[i] = static_cast<int>(i % 3);
  g.num_classes = 3;
  return g;
}

fs::path scratch_dir(const std::string& name) {
  auto dir = fs::temp_directory_path() / ("geattack_graph_test_" + name);
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

void write_file(const fs::path& p, const std::string& body) { std::ofstream(p) << body; }

}  // namespace

TEST_CASE("load_graph symmetrizes and deduplicates", "[graph]") {
  auto dir = scratch_dir("dedupe");
  write_file(dir / "edges.tsv", "0 1\n1 0\n2\t2\n");
  write_file(dir / "features.csv", "1,0\n0,1\n0.5,0.5\n");
  write_file(dir / "labels.tsv", "0\n1\n1\n");
  Graph g = load_graph(dir);
  CHECK(g.n() == 3);
  CHECK(g.num_classes == 2);
  std::size_t nonzero = 0;
  for (double x : g.adjacency.values()) nonzero += x != 0.0;
  CHECK(nonzero == 2);
  CHECK(g.adjacency(0, 1) == 1.0);
  CHECK(g.adjacency(1, 0) == 1.0);
  CHECK(g.adjacency(2, 2) == 0.0);
  CHECK_FALSE(g.has_splits());
}

TEST_CASE("load_graph reports malformed input", "[graph]") {
  auto dir = scratch_dir("errors");
  write_file(dir / "features.csv", "1,0\n0,1\n");
  write_file(dir / "labels.tsv", "0\n1\n");

  SECTION("missing file") { CHECK_THROWS_WITH(load_graph(dir), Catch::Matchers::ContainsSubstring("edges.tsv")); }
  SECTION("non-integer id") {
    write_file(dir / "edges.tsv", "0 x\n");
    CHECK_THROWS_WITH(load_graph(dir), Catch::Matchers::ContainsSubstring("not an integer"));
  }
  SECTION("id out of range") {
    write_file(dir / "edges.tsv", "0 2\n");
    CHECK_THROWS_WITH(load_graph(dir), Catch::Matchers::ContainsSubstring("out of range"));
  }
  SECTION("row count mismatch") {
    write_file(dir / "edges.tsv", "0 1\n");
    write_file(dir / "labels.tsv", "0\n1\n0\n");
    CHECK_THROWS_WITH(load_graph(dir), Catch::Matchers::ContainsSubstring("rows"));
  }
  SECTION("split overlap") {
    write_file(dir / "edges.tsv", "0 1\n");
    write_file(dir / "splits.json", R"({"train":[0],"val":[0],"test":[1]})");
    CHECK_THROWS_AS(load_graph(dir), GraphError);
  }
}

TEST_CASE("largest_connected_component examples", "[graph]") {
  SECTION("two triangles and an isolated node: tie goes to smallest id") {
    Graph g = from_edges(7, {{0, 1}, {1, 2}, {0, 2}, {3, 4}, {4, 5}, {3, 5}});
    // isolated node 6
    auto c = largest_connected_component(g);
    CHECK(c.graph.n() == 3);
    CHECK(c.new_to_old == std::vector<std::size_t>{0, 1, 2});
    CHECK(c.old_to_new[3] == -1);
    CHECK(c.graph.num_edges() == 3);
  }
  SECTION("connected graph is a fixpoint") {
    Graph g = from_edges(4, {{0, 1}, {1, 2}, {2, 3}});
    auto c = largest_connected_component(g);
    CHECK(c.graph.adjacency == g.adjacency);
    CHECK(*c.graph.features == *g.features);
    CHECK(c.graph.labels == g.labels);
    CHECK(c.new_to_old == std::vector<std::size_t>{0, 1, 2, 3});
  }
  SECTION("path(5) plus a separate edge") {
    Graph g = from_edges(7, {{0, 1}, {5, 6}, {1, 2}, {2, 3}, {3, 4}});
    g.labels[2] = 2;
    auto c = largest_connected_component(g);
    CHECK(c.graph.n() == 5);
    CHECK(c.graph.num_edges() == 4);
    CHECK(c.graph.labels[2] == 2);
  }
  SECTION("larger component later in id order wins") {
    Graph g = from_edges(6, {{0, 1}, {2, 3}, {3, 4}, {4, 5}});
    auto c = largest_connected_component(g);
    CHECK(c.new_to_old == std::vector<std::size_t>{2, 3, 4, 5});
    CHECK((*c.graph.features)(0, 0) == (*g.features)(2, 0));
  }
  SECTION("empty graph") {
    Graph g = from_edges(0, {});
    CHECK_THROWS_AS(largest_connected_component(g), GraphError);
  }
}

TEST_CASE("LCC output is connected", "[graph][property]") {
  std::mt19937_64 rng(5);
  for (int trial = 0; trial < 30; ++trial) {
    Graph g = from_edges(15, {});
    g.adjacency = geattack::testing::random_adjacency(rng, 15, 0.08);
    auto c = largest_connected_component(g);
    CHECK(k_hop_nodes(c.graph.adjacency, 0, static_cast<int>(c.graph.n())).size() == c.graph.n());
    validate(c.graph);
  }
}

TEST_CASE("make_splits examples", "[graph]") {
  Graph g = from_edges(100, {});
  Graph s = make_splits(g, {});
  CHECK(s.nodes_in(Split::Train).size() == 10);
  CHECK(s.nodes_in(Split::Val).size() == 10);
  CHECK(s.nodes_in(Split::Test).size() == 80);

  CHECK(make_splits(g, {.seed = 3}).split == make_splits(g, {.seed = 3}).split);
  CHECK(make_splits(g, {.seed = 3}).split != make_splits(g, {.seed = 4}).split);

  CHECK_THROWS_AS(make_splits(from_edges(4, {}), {}), GraphError);
  CHECK_THROWS_AS(make_splits(g, {.train = 0.6, .val = 0.4}), GraphError);
  CHECK_THROWS_AS(make_splits(g, {.train = 0.0}), GraphError);
}

TEST_CASE("split tags partition the node set", "[graph][property]") {
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    Graph s = make_splits(from_edges(57, {}), {.train = 0.2, .val = 0.15, .seed = seed});
    std::set<std::size_t> all;
    std::size_t total = 0;
    for (Split t : {Split::Train, Split::Val, Split::Test}) {
      auto ids = s.nodes_in(t);
      total += ids.size();
      all.insert(ids.begin(), ids.end());
    }
    CHECK(total == 57);
    CHECK(all.size() == 57);
  }
}

TEST_CASE("node_degree examples", "[graph]") {
  Graph g = from_edges(6, {{0, 1}, {0, 2}, {0, 3}, {0, 4}});
  CHECK(node_degree(g, 5) == 0);
  CHECK(node_degree(g, 0) == 4);
  Graph tri = from_edges(3, {{0, 1}, {1, 2}, {0, 2}});
  CHECK(node_degree(tri, 1) == 2);
  CHECK_THROWS_AS(node_degree(tri, 3), GraphError);
}

TEST_CASE("adjacency sum is twice the edge count", "[graph][property]") {
  std::mt19937_64 rng(9);
  for (int trial = 0; trial < 20; ++trial) {
    Graph g = from_edges(12, {});
    g.adjacency = geattack::testing::random_adjacency(rng, 12, 0.3);
    double total = 0;
    for (double x : g.adjacency.values()) total += x;
    CHECK(total == 2.0 * static_cast<double>(g.num_edges()));
    CHECK(g.edges().size() == g.num_edges());
  }
}

TEST_CASE("computation subgraph is the 2-hop closed edge set", "[graph]") {
  // path 0-1-2-3-4 with chord 2-4
  Graph g = from_edges(5, {{0, 1}, {1, 2}, {2, 3}, {3, 4}, {2, 4}});
  CHECK(k_hop_nodes(g.adjacency, 0, 2) == std::vector<std::size_t>{0, 1, 2});
  CHECK(computation_edges(g.adjacency, 0) == std::vector<Edge>{{0, 1}, {1, 2}});
  CHECK(computation_edges(g.adjacency, 3) == std::vector<Edge>{{1, 2}, {2, 3}, {2, 4}, {3, 4}});
}

TEST_CASE("load -> LCC -> splits -> save -> load reproduces the graph", "[graph][property]") {
  std::mt19937_64 rng(21);
  Graph g = from_edges(30, {});
  g.adjacency = geattack::testing::random_adjacency(rng, 30, 0.1);
  auto feats = std::make_shared<DenseMatrix>(geattack::testing::random_matrix(rng, 30, 4));
  (*feats)(0, 0) = 0.1;  // not exactly representable in decimal
  g.features = feats;
  Graph lcc = make_splits(largest_connected_component(g).graph, {.seed = 2});
  // keep C stable through the reload, which infers it from the labels
  lcc.labels[0] = lcc.num_classes - 1;

  auto dir = scratch_dir("roundtrip");
  save_graph(lcc, dir);
  Graph back = load_graph(dir);
  CHECK(back.adjacency == lcc.adjacency);
  CHECK(*back.features == *lcc.features);
  CHECK(back.labels == lcc.labels);
  CHECK(back.num_classes == lcc.num_classes);
  CHECK(back.split == lcc.split);

  auto again = largest_connected_component(back);
  CHECK(again.graph.adjacency == back.adjacency);

  auto dir2 = scratch_dir("roundtrip2");
  save_graph(back, dir2);
  for (const char* f : {"edges.tsv", "features.csv", "labels.tsv", "splits.json"}) {
    std::ifstream a(dir / f), b(dir2 / f);
    std::string sa((std::istreambuf_iterator<char>(a)), {}), sb((std::istreambuf_iterator<char>(b)), {});
    CHECK(sa == sb);
  }
}

TEST_CASE("row normalization option", "[graph]") {
  auto dir = scratch_dir("rownorm");
  write_file(dir / "edges.tsv", "0 1\n");
  write_file(dir / "features.csv", "1,3\n0,0\n");
  write_file(dir / "labels.tsv", "0\n1\n");
  Graph raw = load_graph(dir);
  CHECK((*raw.features)(0, 1) == 3.0);
  Graph norm = load_graph(dir, {.row_normalize = true});
  CHECK((*norm.features)(0, 0) == 0.25);
  CHECK((*norm.features)(0, 1) == 0.75);
  CHECK((*norm.features)(1, 0) == 0.0);
}
