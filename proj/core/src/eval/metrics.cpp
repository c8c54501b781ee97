#include "geattack/eval/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

namespace geattack::eval {

namespace {

void require_k(std::size_t k, const char* what) {
  if (k == 0) throw std::invalid_argument(std::string(what) + ": K must be at least 1");
}

std::size_t hits_at(const std::vector<int>& relevance, std::size_t k) {
  std::size_t hits = 0;
  for (std::size_t i = 0; i < std::min(k, relevance.size()); ++i) hits += relevance[i] != 0;
  return hits;
}

double dcg(const std::vector<int>& relevance, std::size_t k) {
  double s = 0.0;
  for (std::size_t i = 0; i < std::min(k, relevance.size()); ++i)
    if (relevance[i] != 0) s += 1.0 / std::log2(static_cast<double>(i) + 2.0);
  return s;
}

void require_cohort(const std::vector<attack::AttackOutcome>& outcomes, const char* what) {
  if (outcomes.empty()) throw EmptyCohort(std::string(what) + ": no targets in the cohort");
}

}  // namespace

DetectionScores precision_recall_f1_at_k(const std::vector<int>& relevance, std::size_t total_adv,
                                         std::size_t k) {
  require_k(k, "precision_recall_f1_at_k");
  const double hits = static_cast<double>(hits_at(relevance, k));
  DetectionScores s;
  s.precision = hits / static_cast<double>(k);
  s.recall = total_adv == 0 ? 0.0 : hits / static_cast<double>(total_adv);
  const double pr = s.precision + s.recall;
  s.f1 = pr > 0.0 ? 2.0 * s.precision * s.recall / pr : 0.0;
  return s;
}

double ndcg_at_k(const std::vector<int>& relevance, std::size_t total_adv, std::size_t k) {
  require_k(k, "ndcg_at_k");
  const std::vector<int> ideal(std::min(total_adv, k), 1);
  const double idcg = dcg(ideal, k);
  if (idcg == 0.0) return 0.0;
  return std::min(1.0, dcg(relevance, k) / idcg);
}

double asr(const std::vector<attack::AttackOutcome>& outcomes) {
  require_cohort(outcomes, "asr");
  const auto n = std::count_if(outcomes.begin(), outcomes.end(), [](const auto& o) { return o.success; });
  return 100.0 * static_cast<double>(n) / static_cast<double>(outcomes.size());
}

std::optional<double> asr_t(const std::vector<attack::AttackOutcome>& outcomes) {
  require_cohort(outcomes, "asr_t");
  if (std::any_of(outcomes.begin(), outcomes.end(), [](const auto& o) { return !o.target_label; }))
    return std::nullopt;
  const auto n = std::count_if(outcomes.begin(), outcomes.end(), [](const auto& o) { return o.success_t; });
  return 100.0 * static_cast<double>(n) / static_cast<double>(outcomes.size());
}

MeanStd mean_std(const std::vector<double>& values) {
  if (values.empty()) throw std::invalid_argument("mean_std: no values");
  MeanStd out;
  out.mean = std::accumulate(values.begin(), values.end(), 0.0) / static_cast<double>(values.size());
  double ss = 0.0;
  for (double v : values) ss += (v - out.mean) * (v - out.mean);
  out.std = std::sqrt(ss / static_cast<double>(values.size()));
  return out;
}

double random_ndcg_baseline(std::size_t universe, std::size_t total_adv, std::size_t k,
                            std::size_t permutations, std::uint64_t seed) {
  require_k(k, "random_ndcg_baseline");
  if (total_adv > universe) throw std::invalid_argument("random_ndcg_baseline: more relevant items than ranked");
  if (permutations == 0) throw std::invalid_argument("random_ndcg_baseline: need at least one permutation");
  if (total_adv == 0) return 0.0;
  std::vector<int> rel(universe, 0);
  std::fill(rel.begin(), rel.begin() + static_cast<std::ptrdiff_t>(total_adv), 1);
  std::mt19937_64 rng(seed);
  double sum = 0.0;
  for (std::size_t p = 0; p < permutations; ++p) {
    std::shuffle(rel.begin(), rel.end(), rng);
    sum += ndcg_at_k(rel, total_adv, k);
  }
  return sum / static_cast<double>(permutations);
}

}  // namespace geattack::eval
