#pragma once

#include <cstdint>
#include <optional>
#include <stdexcept>
#include <vector>

#include "geattack/attack/attack.hpp"

namespace geattack::eval {

/// Success rates over an empty set of targets are undefined.
class EmptyCohort : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

struct DetectionScores {
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
};

/// Relevance is read over the first k slots; a shorter list is padded with zeros.
DetectionScores precision_recall_f1_at_k(const std::vector<int>& relevance, std::size_t total_adv,
                                         std::size_t k);

/// DCG over the first k slots divided by the DCG of min(total_adv, k) leading ones.
double ndcg_at_k(const std::vector<int>& relevance, std::size_t total_adv, std::size_t k);

/// Percent of outcomes whose prediction changed.
double asr(const std::vector<attack::AttackOutcome>& outcomes);

/// Percent of outcomes that reached their target label; nullopt when any
/// outcome has none (plain FGA).
std::optional<double> asr_t(const std::vector<attack::AttackOutcome>& outcomes);

struct MeanStd {
  double mean = 0.0;
  double std = 0.0;  // population
};
MeanStd mean_std(const std::vector<double>& values);

/// Expected NDCG@k when `total_adv` relevant items sit at uniformly random
/// positions among `universe` ranked items, estimated from `permutations` seeded shuffles.
double random_ndcg_baseline(std::size_t universe, std::size_t total_adv, std::size_t k,
                            std::size_t permutations, std::uint64_t seed);

}  // namespace geattack::eval
