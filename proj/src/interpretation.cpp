#include "inbedder/interpretation.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <sstream>
#include <unordered_map>

#include "inbedder/error.hpp"
#include "inbedder/text.hpp"

namespace inbedder {

namespace {

void check_assignment(std::size_t n, const ClusterAssignment& a) {
  if (a.labels.size() != n) {
    throw Error(ErrorCode::LengthMismatch, std::to_string(n) + " documents but " +
                                               std::to_string(a.labels.size()) + " labels");
  }
  if (a.k < 1) throw Error(ErrorCode::InvalidK, "assignment has k < 1");
  for (int l : a.labels) {
    if (l < 0 || l >= a.k) throw Error(ErrorCode::InvalidArgument, "cluster id out of range");
  }
}

std::vector<std::size_t> cluster_sizes(const ClusterAssignment& a) {
  std::vector<std::size_t> sizes(static_cast<std::size_t>(a.k), 0);
  for (int l : a.labels) ++sizes[static_cast<std::size_t>(l)];
  for (std::size_t c = 0; c < sizes.size(); ++c) {
    if (sizes[c] == 0) throw Error(ErrorCode::EmptyCluster, "cluster " + std::to_string(c) + " is empty");
  }
  return sizes;
}

}  // namespace

ClusterReport explain_clusters(std::span<const std::string> generations,
                               const ClusterAssignment& assignment, std::size_t top_k) {
  check_assignment(generations.size(), assignment);
  const auto sizes = cluster_sizes(assignment);
  const auto k = static_cast<std::size_t>(assignment.k);

  std::vector<std::unordered_map<std::string, std::size_t>> tf(k);
  for (std::size_t i = 0; i < generations.size(); ++i) {
    auto& counts = tf[static_cast<std::size_t>(assignment.labels[i])];
    for (auto& w : text::word_tokens(generations[i], 2)) ++counts[std::move(w)];
  }
  std::unordered_map<std::string, std::size_t> df;
  for (const auto& counts : tf) {
    for (const auto& [w, _] : counts) ++df[w];
  }

  ClusterReport report;
  const double kk = static_cast<double>(k);
  for (std::size_t c = 0; c < k; ++c) {
    std::vector<std::pair<std::string, double>> scored;
    scored.reserve(tf[c].size());
    for (const auto& [w, count] : tf[c]) {
      const double idf = std::log((1.0 + kk) / (1.0 + static_cast<double>(df[w]))) + 1.0;
      scored.emplace_back(w, static_cast<double>(count) * idf);
    }
    std::sort(scored.begin(), scored.end(), [](const auto& a, const auto& b) {
      return a.second != b.second ? a.second > b.second : a.first < b.first;
    });
    if (scored.size() > top_k) scored.resize(top_k);
    report.clusters.push_back({static_cast<int>(c), sizes[c], std::move(scored), {}, {}});
  }
  return report;
}

EntropyOrdering order_clusters_by_entropy(const ClusterAssignment& assignment,
                                          std::span<const std::string> gold_labels) {
  check_assignment(gold_labels.size(), assignment);
  cluster_sizes(assignment);
  EntropyOrdering out;
  const auto k = static_cast<std::size_t>(assignment.k);
  out.histograms.resize(k);
  for (std::size_t i = 0; i < gold_labels.size(); ++i) {
    ++out.histograms[static_cast<std::size_t>(assignment.labels[i])][gold_labels[i]];
  }
  for (const auto& h : out.histograms) {
    std::vector<std::size_t> counts;
    for (const auto& [_, n] : h) counts.push_back(n);
    // Sorted counts: the entropy then does not depend on label names.
    std::sort(counts.begin(), counts.end());
    out.entropies.push_back(cluster_entropy(counts));
  }
  out.order.resize(k);
  for (std::size_t c = 0; c < k; ++c) out.order[c] = static_cast<int>(c);
  std::stable_sort(out.order.begin(), out.order.end(), [&](int a, int b) {
    return out.entropies[static_cast<std::size_t>(a)] < out.entropies[static_cast<std::size_t>(b)];
  });
  return out;
}

void apply_entropy_ordering(ClusterReport& report, const EntropyOrdering& ordering) {
  std::vector<ClusterSummary> sorted;
  for (int id : ordering.order) {
    auto it = std::find_if(report.clusters.begin(), report.clusters.end(),
                           [id](const ClusterSummary& s) { return s.id == id; });
    if (it == report.clusters.end()) continue;
    it->histogram = ordering.histograms[static_cast<std::size_t>(id)];
    it->entropy = ordering.entropies[static_cast<std::size_t>(id)];
    sorted.push_back(std::move(*it));
  }
  report.clusters = std::move(sorted);
}

nlohmann::json ClusterReport::to_json() const {
  nlohmann::json clusters_json = nlohmann::json::array();
  for (const auto& c : clusters) {
    nlohmann::json words = nlohmann::json::array();
    for (const auto& [w, s] : c.top_words) words.push_back(nlohmann::json::array({w, s}));
    nlohmann::json jc{{"id", c.id}, {"size", c.size}, {"top_words", std::move(words)}};
    jc["histogram"] = c.histogram ? nlohmann::json(*c.histogram) : nlohmann::json(nullptr);
    jc["entropy"] = c.entropy ? nlohmann::json(*c.entropy) : nlohmann::json(nullptr);
    clusters_json.push_back(std::move(jc));
  }
  return {{"clusters", std::move(clusters_json)}};
}

ClusterReport ClusterReport::from_json(const nlohmann::json& j) {
  ClusterReport r;
  try {
    for (const auto& jc : j.at("clusters")) {
      ClusterSummary s;
      s.id = jc.at("id").get<int>();
      s.size = jc.at("size").get<std::size_t>();
      for (const auto& w : jc.at("top_words")) {
        s.top_words.emplace_back(w.at(0).get<std::string>(), w.at(1).get<double>());
      }
      if (jc.contains("histogram") && !jc["histogram"].is_null()) {
        s.histogram = jc["histogram"].get<std::map<std::string, std::size_t>>();
      }
      if (jc.contains("entropy") && !jc["entropy"].is_null()) s.entropy = jc["entropy"].get<double>();
      r.clusters.push_back(std::move(s));
    }
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::ParseError, std::string("cluster report: ") + e.what());
  }
  return r;
}

std::string ClusterReport::render_text() const {
  std::ostringstream out;
  for (const auto& c : clusters) {
    out << "cluster " << c.id << "  size " << c.size;
    if (c.entropy) out << "  entropy " << std::fixed << std::setprecision(4) << *c.entropy << " nats";
    out << '\n';
    out.unsetf(std::ios::floatfield);
    for (const auto& [w, s] : c.top_words) {
      out << "    " << std::left << std::setw(24) << w << std::right << std::fixed
          << std::setprecision(3) << s << '\n';
      out.unsetf(std::ios::floatfield);
    }
    if (c.histogram) {
      out << "    labels:";
      std::vector<std::pair<std::string, std::size_t>> h(c.histogram->begin(), c.histogram->end());
      std::stable_sort(h.begin(), h.end(), [](const auto& a, const auto& b) { return a.second > b.second; });
      for (const auto& [label, n] : h) out << ' ' << label << ':' << n;
      out << '\n';
    }
  }
  return out.str();
}

}  // namespace inbedder
