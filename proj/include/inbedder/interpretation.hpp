#pragma once

#include <map>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "inbedder/clustering.hpp"

namespace inbedder {

struct ClusterSummary {
  int id = 0;
  std::size_t size = 0;
  std::vector<std::pair<std::string, double>> top_words;  // score descending
  std::optional<std::map<std::string, std::size_t>> histogram;
  std::optional<double> entropy;  // nats
};

struct ClusterReport {
  std::vector<ClusterSummary> clusters;

  nlohmann::json to_json() const;
  static ClusterReport from_json(const nlohmann::json& j);
  /// Fixed-width table for terminals.
  std::string render_text() const;
};

/// Keywords per cluster: member generations are concatenated into one
/// document per cluster and scored by tf-idf, with tf the raw count and
/// idf = ln((1 + K) / (1 + df)) + 1. Tokens are lowercase alphanumeric runs
/// of two or more characters. Ties are broken lexicographically.
/// Throws LengthMismatch or EmptyCluster.
ClusterReport explain_clusters(std::span<const std::string> generations,
                               const ClusterAssignment& assignment, std::size_t top_k = 8);

struct EntropyOrdering {
  std::vector<int> order;  // cluster ids, increasing entropy then id
  std::vector<std::map<std::string, std::size_t>> histograms;  // by cluster id
  std::vector<double> entropies;                               // by cluster id
};

/// Throws LengthMismatch or EmptyCluster.
EntropyOrdering order_clusters_by_entropy(const ClusterAssignment& assignment,
                                          std::span<const std::string> gold_labels);

/// Attaches histograms/entropies and sorts the report's clusters by entropy.
void apply_entropy_ordering(ClusterReport& report, const EntropyOrdering& ordering);

}  // namespace inbedder
