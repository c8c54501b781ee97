#include <catch_amalgamated.hpp>

#include <cmath>
#include <filesystem>
#include <random>

#include "geattack/autodiff/finite_difference.hpp"
#include "geattack/autodiff/ops.hpp"
#include "geattack/eval/synth.hpp"
#include "geattack/gcn/gcn.hpp"
#include "support.hpp"

using namespace geattack;
using namespace geattack::gcn;
using Catch::Approx;
using geattack::testing::approx_equal;
using geattack::testing::random_adjacency;
using geattack::testing::random_matrix;

namespace {

GcnModel random_model(std::size_t d, std::size_t h, std::size_t c, std::uint64_t seed) {
  TrainConfig cfg;
  cfg.hidden = h;
  cfg.seed = seed;
  return init_model(d, c, cfg);
}

graph::Graph tiny_graph(const DenseMatrix& a, const DenseMatrix& x, int classes) {
  graph::Graph g;
  g.adjacency = a;
  g.features = std::make_shared<DenseMatrix>(x);
  g.labels.assign(a.rows(), 0);
  g.num_classes = classes;
  return g;
}

}  // namespace

TEST_CASE("normalize_adjacency examples", "[gcn]") {
  CHECK(approx_equal(normalize_adjacency(DenseMatrix{{0, 1}, {1, 0}}), DenseMatrix{{0.5, 0.5}, {0.5, 0.5}}));
  CHECK(normalize_adjacency(DenseMatrix{{0}}) == DenseMatrix{{1.0}});
  auto path = normalize_adjacency(DenseMatrix{{0, 1, 0}, {1, 0, 1}, {0, 1, 0}});
  CHECK(path(0, 1) == Approx(1.0 / std::sqrt(6.0)).epsilon(1e-14));
  CHECK(path(0, 1) == Approx(0.40825).margin(1e-5));
  CHECK(path(1, 1) == Approx(1.0 / 3.0).epsilon(1e-14));
  CHECK(path(0, 2) == 0.0);

  // recorded and plain versions agree
  std::mt19937_64 rng(2);
  auto a = random_adjacency(rng, 7);
  ad::Tape t;
  CHECK(normalize_adjacency(t.constant(a)).value() == normalize_adjacency(a));
}

TEST_CASE("gcn_forward examples", "[gcn]") {
  std::mt19937_64 rng(4);
  SECTION("zero W2 gives uniform rows") {
    GcnModel m = random_model(3, 4, 5, 1);
    m.w2 = DenseMatrix(4, 5);
    ad::Tape t;
    auto out = gcn_forward(m, t.constant(random_adjacency(rng, 6)), t.constant(random_matrix(rng, 6, 3)));
    for (double p : out.value().values()) CHECK(p == Approx(0.2).epsilon(1e-14));
  }
  SECTION("two nodes, one class") {
    GcnModel m;
    m.w1 = DenseMatrix{{1}};
    m.w2 = DenseMatrix{{1}};
    ad::Tape t;
    auto a = t.constant(DenseMatrix{{0, 1}, {1, 0}});
    auto x = t.constant(DenseMatrix{{1}, {1}});
    // logits: Ã relu(Ã X) = [[1],[1]]
    auto logits = ad::matmul(normalize_adjacency(a), ad::relu(ad::matmul(normalize_adjacency(a), x)));
    CHECK(approx_equal(logits.value(), DenseMatrix{{1}, {1}}));
    CHECK(gcn_forward(m, a, x).value() == DenseMatrix{{1}, {1}});
  }
  SECTION("node permutation permutes output rows") {
    GcnModel m = random_model(3, 5, 4, 7);
    const std::size_t n = 7;
    auto a = random_adjacency(rng, n);
    auto x = random_matrix(rng, n, 3);
    std::vector<std::size_t> perm{3, 0, 6, 1, 5, 2, 4};
    DenseMatrix pa(n, n), px(n, 3);
    for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t j = 0; j < n; ++j) pa(perm[i], perm[j]) = a(i, j);
      for (std::size_t d = 0; d < 3; ++d) px(perm[i], d) = x(i, d);
    }
    auto out = forward_values(m, a, x);
    auto pout = forward_values(m, pa, px);
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t c = 0; c < 4; ++c) CHECK(pout(perm[i], c) == Approx(out(i, c)).epsilon(1e-12));
  }
}

TEST_CASE("forward rows sum to one", "[gcn][property]") {
  std::mt19937_64 rng(8);
  for (int trial = 0; trial < 30; ++trial) {
    GcnModel m = random_model(4, 6, 3, trial);
    m.w1 = random_matrix(rng, 4, 6, -5, 5);
    auto out = forward_values(m, random_adjacency(rng, 8), random_matrix(rng, 8, 4));
    for (std::size_t i = 0; i < out.rows(); ++i) {
      double s = 0;
      for (double p : out.row(i)) {
        CHECK(p >= 0.0);
        CHECK(p <= 1.0);
        s += p;
      }
      CHECK(std::abs(s - 1.0) <= 1e-9);
    }
  }
}

TEST_CASE("nll_loss examples", "[gcn]") {
  ad::Tape t;
  auto probs = t.constant(DenseMatrix{{1.0, 0.0}, {0.5, 0.5}, {0.25, 0.75}});
  CHECK(nll_loss(probs, 0, 0).value().item() == 0.0);
  CHECK(nll_loss(probs, 1, 1).value().item() == Approx(0.6931).margin(1e-4));
  CHECK(nll_loss(probs, 2, 0).value().item() == Approx(1.3863).margin(1e-4));
  CHECK(nll_loss(probs, 0, 1).value().item() == Approx(-std::log(1e-12)));
  CHECK_THROWS_AS(nll_loss(probs, 0, 2), std::invalid_argument);
}

TEST_CASE("nll gradient w.r.t. the relaxed adjacency matches finite differences", "[gcn][oracle]") {
  double worst = 0.0;
  for (int instance = 0; instance < 60; ++instance) {
    std::mt19937_64 rng(300 + instance);
    const std::size_t n = 3 + instance % 6;  // 3..8 nodes
    const DenseMatrix a0 = instance % 2 ? random_adjacency(rng, n, 0.5) : random_matrix(rng, n, n, 0.0, 1.0);
    const GcnModel m = random_model(3, 4, 3, instance);
    const DenseMatrix x = random_matrix(rng, n, 3);
    const std::size_t v = instance % n;
    const int label = instance % 3;
    ad::ScalarFunction f = [&](ad::Tape& t, const DiffValue& a) {
      return nll_loss(gcn_forward(m, a, t.constant(x)), v, label);
    };
    worst = std::max(worst, ad::finite_difference_check(f, a0, 1e-5));

    // node_probs is the same function restricted to row v
    ad::ScalarFunction g = [&](ad::Tape& t, const DiffValue& a) {
      return nll_loss(node_probs(m, a, t.constant(input_projection(m, x)), v), 0, label);
    };
    worst = std::max(worst, ad::finite_difference_check(g, a0, 1e-5));
  }
  INFO("worst relative error " << worst);
  CHECK(worst <= 1e-5);
}

TEST_CASE("node_probs equals the matching forward row", "[gcn]") {
  std::mt19937_64 rng(12);
  GcnModel m = random_model(3, 4, 3, 5);
  auto a = random_adjacency(rng, 8);
  auto x = random_matrix(rng, 8, 3);
  auto full = forward_values(m, a, x);
  auto xw1 = input_projection(m, x);
  for (std::size_t v = 0; v < 8; ++v) {
    auto row = node_probs_values(m, a, xw1, v);
    for (std::size_t c = 0; c < 3; ++c) CHECK(row(0, c) == Approx(full(v, c)).epsilon(1e-13));
  }
}

TEST_CASE("train_gcn examples", "[gcn]") {
  auto sg = eval::clique_blocks({}, 0);
  const graph::Graph& g = sg.graph;

  SECTION("zero epochs returns the seeded initial weights") {
    TrainConfig cfg;
    cfg.epochs = 0;
    cfg.seed = 9;
    GcnModel m = train_gcn(g, cfg);
    GcnModel init = init_model(g.features->cols(), 2, cfg);
    CHECK(m.w1 == init.w1);
    CHECK(m.w2 == init.w2);
  }
  SECTION("two cliques with one bridge are learned") {
    for (std::uint64_t seed = 0; seed < 5; ++seed) {
      auto blocks = eval::clique_blocks({}, seed);
      TrainConfig cfg;
      cfg.seed = seed;
      GcnModel m = train_gcn(blocks.graph, cfg);
      CHECK(m.record.train_accuracy >= 0.95);
      CHECK(m.record.loss_history.back() <= m.record.loss_history.front());
      // a block-0 node
      auto p = predict(m, blocks.graph, 3);
      CHECK(p.label == 0);
      CHECK(p.probs[0] > 0.9);
    }
  }
  SECTION("plain gradient descent still lowers the loss") {
    TrainConfig cfg;
    cfg.optimizer = Optimizer::GradientDescent;
    GcnModel m = train_gcn(g, cfg);
    CHECK(m.record.loss_history.size() == 201);
    CHECK(m.record.loss_history.back() < m.record.loss_history.front());
  }
  SECTION("identical seeds give bitwise-identical weights") {
    TrainConfig cfg;
    cfg.seed = 4;
    cfg.dropout = true;
    GcnModel a = train_gcn(g, cfg), b = train_gcn(g, cfg);
    CHECK(a.w1 == b.w1);
    CHECK(a.w2 == b.w2);
    cfg.seed = 5;
    CHECK(train_gcn(g, cfg).w1 != a.w1);
  }
  SECTION("no train nodes") {
    graph::Graph bad = g;
    bad.split.assign(g.n(), graph::Split::Test);
    CHECK_THROWS_AS(train_gcn(bad, {}), std::invalid_argument);
  }
}

TEST_CASE("predict examples", "[gcn]") {
  std::mt19937_64 rng(1);
  auto g = tiny_graph(random_adjacency(rng, 5), random_matrix(rng, 5, 3), 4);
  GcnModel m = random_model(3, 4, 4, 2);
  m.w2 = DenseMatrix(4, 4);
  auto p = predict(m, g, 2);
  CHECK(p.label == 0);
  for (double q : p.probs) CHECK(q == Approx(0.25));
  CHECK(p.margin() == Approx(0.0).margin(1e-15));
  CHECK_THROWS_AS(predict(m, g, 5), std::out_of_range);

  auto sg = eval::clique_blocks({}, 3);
  GcnModel trained = train_gcn(sg.graph, {});
  auto labels = predict_labels(trained, sg.graph.adjacency, *sg.graph.features);
  for (std::size_t v = 0; v < sg.graph.n(); ++v) CHECK(predict(trained, sg.graph, v).label == labels[v]);
  CHECK(accuracy(labels, sg.graph.labels, sg.graph.nodes_in(graph::Split::Train)) ==
        trained.record.train_accuracy);
}

TEST_CASE("model save and load round trip", "[gcn]") {
  auto sg = eval::clique_blocks({.k = 3, .m = 6}, 2);
  TrainConfig cfg;
  cfg.epochs = 20;
  cfg.seed = 11;
  GcnModel m = train_gcn(sg.graph, cfg);
  auto dir = std::filesystem::temp_directory_path() / "geattack_gcn_model";
  std::filesystem::remove_all(dir);
  save_model(m, dir);
  GcnModel back = load_model(dir);
  CHECK(back.w1 == m.w1);
  CHECK(back.w2 == m.w2);
  CHECK(back.config.seed == 11);
  CHECK(back.config.epochs == 20);
  CHECK(back.config.optimizer == m.config.optimizer);
  CHECK(back.record.best_epoch == m.record.best_epoch);
}
