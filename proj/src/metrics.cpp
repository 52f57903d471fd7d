#include "inbedder/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "inbedder/error.hpp"

namespace inbedder {

std::vector<double> average_ranks(std::span<const double> values) {
  std::vector<std::size_t> order(values.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return values[a] < values[b]; });
  std::vector<double> ranks(values.size());
  std::size_t i = 0;
  while (i < order.size()) {
    std::size_t j = i;
    while (j + 1 < order.size() && values[order[j + 1]] == values[order[i]]) ++j;
    const double rank = (static_cast<double>(i) + static_cast<double>(j)) / 2.0 + 1.0;
    for (std::size_t t = i; t <= j; ++t) ranks[order[t]] = rank;
    i = j + 1;
  }
  return ranks;
}

double pearson(std::span<const double> x, std::span<const double> y) {
  if (x.size() != y.size()) throw Error(ErrorCode::LengthMismatch, "pearson inputs differ in length");
  if (x.size() < 2) throw Error(ErrorCode::DegenerateInput, "need at least two observations");
  const double n = static_cast<double>(x.size());
  const double mx = std::accumulate(x.begin(), x.end(), 0.0) / n;
  const double my = std::accumulate(y.begin(), y.end(), 0.0) / n;
  double sxy = 0.0, sxx = 0.0, syy = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double dx = x[i] - mx;
    const double dy = y[i] - my;
    sxy += dx * dy;
    sxx += dx * dx;
    syy += dy * dy;
  }
  if (sxx == 0.0 || syy == 0.0) throw Error(ErrorCode::DegenerateInput, "constant input vector");
  return std::clamp(sxy / std::sqrt(sxx * syy), -1.0, 1.0);
}

double spearman(std::span<const double> x, std::span<const double> y) {
  if (x.size() != y.size()) throw Error(ErrorCode::LengthMismatch, "spearman inputs differ in length");
  if (x.size() < 2) throw Error(ErrorCode::DegenerateInput, "need at least two observations");
  const auto rx = average_ranks(x);
  const auto ry = average_ranks(y);
  return pearson(rx, ry);
}

double triplet_success_rate(std::span<const TripletJudgment> judgments) {
  if (judgments.empty()) throw Error(ErrorCode::EmptyList, "no triplet judgments");
  const auto ok = std::count_if(judgments.begin(), judgments.end(),
                                [](const TripletJudgment& j) { return j.success(); });
  return static_cast<double>(ok) / static_cast<double>(judgments.size());
}

double average_precision(const RankingQuery& query) {
  if (query.scores.size() != query.relevant.size()) {
    throw Error(ErrorCode::LengthMismatch, "scores and relevance labels differ in length");
  }
  std::vector<std::size_t> order(query.scores.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return query.scores[a] > query.scores[b];
  });
  double sum = 0.0;
  std::size_t hits = 0;
  for (std::size_t rank = 0; rank < order.size(); ++rank) {
    if (query.relevant[order[rank]]) {
      ++hits;
      sum += static_cast<double>(hits) / static_cast<double>(rank + 1);
    }
  }
  if (hits == 0) throw Error(ErrorCode::NoRelevant, "query has no relevant candidate");
  return sum / static_cast<double>(hits);
}

double mean_average_precision(std::span<const RankingQuery> queries) {
  if (queries.empty()) throw Error(ErrorCode::EmptyQueries, "no queries");
  double sum = 0.0;
  for (const auto& q : queries) sum += average_precision(q);
  return sum / static_cast<double>(queries.size());
}

}  // namespace inbedder
