#include "geattack/eval/synth.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <stdexcept>

namespace geattack::eval {

namespace {

using graph::DenseMatrix;
using graph::Graph;
using graph::Split;

void link(DenseMatrix& a, std::size_t i, std::size_t j) { a(i, j) = a(j, i) = 1.0; }

std::size_t pick_index(std::mt19937_64& rng, std::size_t n) {
  return std::uniform_int_distribution<std::size_t>(0, n - 1)(rng);
}

/// Per-group shuffle; at least one train and one val node per group of >= 3.
std::vector<Split> stratified_split(const std::vector<int>& group, double train, double val,
                                    std::mt19937_64& rng, std::optional<std::size_t> force_test) {
  if (!(train > 0.0) || !(val > 0.0) || !(train + val < 1.0))
    throw std::invalid_argument("split fractions must be positive with train + val < 1");
  std::vector<Split> out(group.size(), Split::Test);
  const int groups = group.empty() ? 0 : *std::max_element(group.begin(), group.end()) + 1;
  for (int c = 0; c < groups; ++c) {
    std::vector<std::size_t> members;
    for (std::size_t i = 0; i < group.size(); ++i)
      if (group[i] == c && i != force_test) members.push_back(i);
    std::shuffle(members.begin(), members.end(), rng);
    const double sz = static_cast<double>(members.size());
    auto n_train = static_cast<std::size_t>(std::llround(train * sz));
    auto n_val = static_cast<std::size_t>(std::llround(val * sz));
    if (members.size() >= 3) {
      n_train = std::max<std::size_t>(n_train, 1);
      n_val = std::max<std::size_t>(n_val, 1);
    }
    n_train = std::min(n_train, members.size());
    n_val = std::min(n_val, members.size() - n_train);
    for (std::size_t k = 0; k < n_train; ++k) out[members[k]] = Split::Train;
    for (std::size_t k = n_train; k < n_train + n_val; ++k) out[members[k]] = Split::Val;
  }
  return out;
}

}  // namespace

SynthGraph clique_blocks(const CliqueBlocksParams& p, std::uint64_t seed) {
  if (p.k < 2 || p.m < 2) throw std::invalid_argument("clique_blocks: need k >= 2 and m >= 2");
  if (p.intra_p < 0.0 || p.intra_p > 1.0 || p.feature_noise < 0.0 || p.feature_noise > 1.0)
    throw std::invalid_argument("clique_blocks: probabilities must lie in [0, 1]");
  if (p.bridges > p.m * p.m) throw std::invalid_argument("clique_blocks: too many bridges");
  std::mt19937_64 rng(seed);
  const std::size_t core = p.k * p.m;
  const std::size_t n = core + p.k * p.pendants;

  Graph g;
  g.adjacency = DenseMatrix(n, n);
  g.labels.resize(n);
  g.num_classes = static_cast<int>(p.k);
  for (std::size_t b = 0; b < p.k; ++b) {
    std::bernoulli_distribution edge(p.intra_p);
    for (std::size_t i = 0; i < p.m; ++i) {
      g.labels[b * p.m + i] = static_cast<int>(b);
      for (std::size_t j = i + 1; j < p.m; ++j)
        if (edge(rng)) link(g.adjacency, b * p.m + i, b * p.m + j);
    }
  }
  // blocks b and b+1 (and k-1 back to 0 when k > 2)
  const std::size_t pairs = p.k == 2 ? 1 : p.k;
  for (std::size_t b = 0; b < pairs; ++b) {
    const std::size_t c = (b + 1) % p.k;
    for (std::size_t e = 0; e < p.bridges;) {
      const std::size_t i = b * p.m + pick_index(rng, p.m), j = c * p.m + pick_index(rng, p.m);
      if (g.adjacency(i, j) != 0.0) continue;
      link(g.adjacency, i, j);
      ++e;
    }
  }
  for (std::size_t b = 0; b < p.k; ++b) {
    for (std::size_t q = 0; q < p.pendants; ++q) {
      const std::size_t node = core + b * p.pendants + q;
      g.labels[node] = static_cast<int>(b);
      link(g.adjacency, node, b * p.m + pick_index(rng, p.m));
    }
  }

  auto feats = std::make_shared<DenseMatrix>(n, p.k);
  std::bernoulli_distribution flip(p.feature_noise);
  for (std::size_t i = 0; i < n; ++i) {
    const std::size_t hot = flip(rng) ? pick_index(rng, p.k) : static_cast<std::size_t>(g.labels[i]);
    (*feats)(i, hot) = 1.0;
  }
  g.features = std::move(feats);
  g.split = stratified_split(g.labels, p.train, p.val, rng, std::nullopt);
  graph::validate(g);
  return {std::move(g), std::nullopt, std::nullopt};
}

SynthGraph planted_motif(const PlantedMotifParams& p, std::uint64_t seed) {
  if (p.anchors < 1 || p.spokes < 1 || p.background < p.target_noise + 2)
    throw std::invalid_argument("planted_motif: degenerate sizes");
  std::mt19937_64 rng(seed);

  // Unshuffled layout: [anchors][spokes][background]. Every spoke touches one
  // anchor plus target_noise background nodes; the target is one spoke.
  const std::size_t first_spoke = p.anchors;
  const std::size_t first_bg = first_spoke + p.anchors * p.spokes;
  const std::size_t n = first_bg + p.background;
  DenseMatrix a(n, n);
  std::vector<int> labels(n, 0);
  std::vector<std::size_t> bg(p.background);
  std::iota(bg.begin(), bg.end(), first_bg);
  for (std::size_t q = 0; q < p.anchors; ++q) {
    labels[q] = 1;
    for (std::size_t s = 0; s < p.spokes; ++s) {
      const std::size_t spoke = first_spoke + q * p.spokes + s;
      labels[spoke] = 1;
      link(a, q, spoke);
      std::shuffle(bg.begin(), bg.end(), rng);
      for (std::size_t t = 0; t < p.target_noise; ++t) link(a, spoke, bg[t]);
    }
  }
  const std::size_t target = first_spoke + pick_index(rng, p.anchors * p.spokes);
  const std::size_t u_star = (target - first_spoke) / p.spokes;

  std::bernoulli_distribution edge(p.background_p);
  for (std::size_t i = first_bg; i < n; ++i)
    for (std::size_t j = i + 1; j < n; ++j)
      if (edge(rng)) link(a, i, j);
  for (std::size_t i = first_bg; i < n; ++i) {
    bool any = false;
    for (double x : a.row(i)) any = any || x != 0.0;
    if (!any) {
      std::size_t j = i;
      while (j == i) j = first_bg + pick_index(rng, p.background);
      link(a, i, j);
    }
  }

  DenseMatrix x(n, 2 + p.noise_dims);
  std::bernoulli_distribution bit(0.5);
  for (std::size_t i = 0; i < n; ++i) {
    x(i, 0) = 1.0;
    x(i, 1) = i < p.anchors ? p.anchor_value : 0.0;
    for (std::size_t d = 0; d < p.noise_dims; ++d) x(i, 2 + d) = bit(rng) ? 1.0 : 0.0;
  }

  // shuffle ids so the planted pair has no positional advantage
  std::vector<std::size_t> perm(n);  // perm[old] = new
  std::iota(perm.begin(), perm.end(), 0);
  std::shuffle(perm.begin(), perm.end(), rng);
  Graph g;
  g.adjacency = DenseMatrix(n, n);
  auto feats = std::make_shared<DenseMatrix>(n, x.cols());
  g.labels.resize(n);
  g.num_classes = 2;
  for (std::size_t i = 0; i < n; ++i) {
    g.labels[perm[i]] = labels[i];
    for (std::size_t d = 0; d < x.cols(); ++d) (*feats)(perm[i], d) = x(i, d);
    for (std::size_t j = 0; j < n; ++j) g.adjacency(perm[i], perm[j]) = a(i, j);
  }
  g.features = std::move(feats);
  g.split = stratified_split(g.labels, p.train, p.val, rng, perm[target]);
  graph::validate(g);
  return {std::move(g), perm[target], perm[u_star]};
}

namespace {

std::vector<std::pair<std::string, std::string>> parse_params(const std::string& body) {
  std::vector<std::pair<std::string, std::string>> out;
  std::size_t pos = 0;
  while (pos < body.size()) {
    std::size_t comma = body.find(',', pos);
    if (comma == std::string::npos) comma = body.size();
    const std::string item = body.substr(pos, comma - pos);
    const auto eq = item.find('=');
    if (eq == std::string::npos) throw std::invalid_argument("synth parameter '" + item + "' lacks '='");
    out.emplace_back(item.substr(0, eq), item.substr(eq + 1));
    pos = comma + 1;
  }
  return out;
}

}  // namespace

SynthGraph synth_from_spec(const std::string& spec, std::uint64_t seed) {
  const auto colon = spec.find(':');
  const std::string kind = spec.substr(0, colon);
  const auto params = parse_params(colon == std::string::npos ? "" : spec.substr(colon + 1));
  auto count = [](const std::string& v) { return static_cast<std::size_t>(std::stoull(v)); };
  if (kind == "clique_blocks") {
    CliqueBlocksParams p;
    for (const auto& [key, v] : params) {
      if (key == "k") p.k = count(v);
      else if (key == "m") p.m = count(v);
      else if (key == "intra_p") p.intra_p = std::stod(v);
      else if (key == "bridges") p.bridges = count(v);
      else if (key == "pendants") p.pendants = count(v);
      else if (key == "feature_noise") p.feature_noise = std::stod(v);
      else if (key == "train") p.train = std::stod(v);
      else if (key == "val") p.val = std::stod(v);
      else throw std::invalid_argument("unknown clique_blocks parameter '" + key + "'");
    }
    return clique_blocks(p, seed);
  }
  if (kind == "planted_motif") {
    PlantedMotifParams p;
    for (const auto& [key, v] : params) {
      if (key == "background") p.background = count(v);
      else if (key == "anchors") p.anchors = count(v);
      else if (key == "spokes") p.spokes = count(v);
      else if (key == "background_p") p.background_p = std::stod(v);
      else if (key == "target_noise") p.target_noise = count(v);
      else if (key == "noise_dims") p.noise_dims = count(v);
      else if (key == "anchor_value") p.anchor_value = std::stod(v);
      else if (key == "train") p.train = std::stod(v);
      else if (key == "val") p.val = std::stod(v);
      else throw std::invalid_argument("unknown planted_motif parameter '" + key + "'");
    }
    return planted_motif(p, seed);
  }
  throw std::invalid_argument("unknown synthetic graph kind '" + kind + "'");
}

}  // namespace geattack::eval
