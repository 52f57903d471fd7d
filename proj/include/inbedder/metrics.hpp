#pragma once

#include <span>
#include <vector>

namespace inbedder {

struct TripletJudgment {
  double sim_pos = 0.0;
  double sim_neg = 0.0;
  // A tie is a failure.
  bool success() const { return sim_pos > sim_neg; }
};

/// Average ranks (1-based); tied values share the mean of their rank span.
std::vector<double> average_ranks(std::span<const double> values);

double pearson(std::span<const double> x, std::span<const double> y);

/// Pearson correlation of average ranks. Throws LengthMismatch, or
/// DegenerateInput when either side is constant or shorter than 2.
double spearman(std::span<const double> x, std::span<const double> y);

/// Fraction of successful judgments. Throws EmptyList.
double triplet_success_rate(std::span<const TripletJudgment> judgments);

struct RankingQuery {
  std::vector<double> scores;
  std::vector<bool> relevant;
};

/// Average precision of one query: candidates sorted by descending score,
/// ties kept in input order. Throws NoRelevant / LengthMismatch.
double average_precision(const RankingQuery& query);

/// Mean of per-query average precision. Throws EmptyQueries.
double mean_average_precision(std::span<const RankingQuery> queries);

}  // namespace inbedder
