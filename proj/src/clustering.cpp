#include "inbedder/clustering.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <random>
#include <unordered_map>

#include "inbedder/error.hpp"
#include "inbedder/kernels.hpp"

namespace inbedder {

namespace {

struct PointMatrix {
  std::vector<double> data;
  std::size_t rows = 0;
  std::size_t cols = 0;

  kernels::MatrixView<double> view() const { return {data, rows, cols}; }
};

PointMatrix flatten(std::span<const Embedding> points) {
  PointMatrix m;
  m.rows = points.size();
  m.cols = points.empty() ? 0 : points.front().dim();
  m.data.reserve(m.rows * m.cols);
  for (const auto& p : points) {
    if (p.dim() != m.cols) {
      throw Error(ErrorCode::DimensionMismatch, "points have different dimensions");
    }
    m.data.insert(m.data.end(), p.values().begin(), p.values().end());
  }
  return m;
}

// Uniform double in [0, 1) from the engine's raw bits; std distributions are
// not reproducible across standard libraries.
double uniform01(std::mt19937_64& rng) { return static_cast<double>(rng() >> 11) * 0x1.0p-53; }

std::uint64_t sub_seed(std::uint64_t seed, int restart) {
  std::uint64_t z = seed + 0x9e3779b97f4a7c15ULL * static_cast<std::uint64_t>(restart + 1);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

std::vector<double> seed_centroids(const PointMatrix& pts, int k, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  const std::size_t d = pts.cols;
  std::vector<double> centroids;
  centroids.reserve(static_cast<std::size_t>(k) * d);

  auto take = [&](std::size_t i) {
    const auto row = pts.view().row(i);
    centroids.insert(centroids.end(), row.begin(), row.end());
  };
  take(static_cast<std::size_t>(uniform01(rng) * static_cast<double>(pts.rows)));

  for (int c = 1; c < k; ++c) {
    const kernels::MatrixView<double> current{centroids, static_cast<std::size_t>(c), d};
    const auto d2 = kernels::serial::min_sq_distance(pts.view(), current);
    double total = 0.0;
    for (double v : d2) total += v;
    std::size_t pick = 0;
    if (total <= 0.0) {
      pick = static_cast<std::size_t>(uniform01(rng) * static_cast<double>(pts.rows));
    } else {
      const double target = uniform01(rng) * total;
      double acc = 0.0;
      pick = pts.rows - 1;
      for (std::size_t i = 0; i < pts.rows; ++i) {
        acc += d2[i];
        if (acc > target && d2[i] > 0.0) {
          pick = i;
          break;
        }
      }
    }
    take(pick);
  }
  return centroids;
}

LloydResult run_lloyd(const PointMatrix& pts, std::vector<double> centroids, const KMeansOptions& o) {
  const std::size_t d = pts.cols;
  const std::size_t k = centroids.size() / d;
  LloydResult r;

  auto assign = [&] {
    auto a = kernels::serial::assign_nearest(pts.view(), {centroids, k, d});
    double inertia = 0.0;
    for (double v : a.sq_distances) inertia += v;
    return std::pair{std::move(a), inertia};
  };

  for (int it = 0; it < o.max_iterations; ++it) {
    auto [a, inertia] = assign();
    r.inertia_trace.push_back(inertia);
    r.iterations = it + 1;

    std::vector<double> next(k * d, 0.0);
    std::vector<std::size_t> counts(k, 0);
    for (std::size_t i = 0; i < pts.rows; ++i) {
      const auto c = static_cast<std::size_t>(a.labels[i]);
      ++counts[c];
      const double inv = 1.0 / static_cast<double>(counts[c]);
      const auto row = pts.view().row(i);
      for (std::size_t j = 0; j < d; ++j) next[c * d + j] += (row[j] - next[c * d + j]) * inv;
    }
    // An empty cluster takes over the point farthest from its centroid.
    std::vector<bool> used(pts.rows, false);
    for (std::size_t c = 0; c < k; ++c) {
      if (counts[c] != 0) continue;
      std::size_t far = 0;
      double far_d = -1.0;
      for (std::size_t i = 0; i < pts.rows; ++i) {
        if (!used[i] && a.sq_distances[i] > far_d) {
          far_d = a.sq_distances[i];
          far = i;
        }
      }
      used[far] = true;
      const auto row = pts.view().row(far);
      std::copy(row.begin(), row.end(), next.begin() + static_cast<long>(c * d));
    }

    double shift = 0.0;
    for (std::size_t c = 0; c < k; ++c) {
      shift = std::max(shift, std::sqrt(kernels::squared_distance(
                                  std::span<const double>(centroids).subspan(c * d, d),
                                  std::span<const double>(next).subspan(c * d, d))));
    }
    centroids = std::move(next);
    if (shift < o.tolerance) break;
  }

  auto [a, inertia] = assign();
  r.labels = std::move(a.labels);
  r.inertia = inertia;
  r.centroids = std::move(centroids);
  return r;
}

void check_k(std::size_t n, int k) {
  if (k < 1) throw Error(ErrorCode::InvalidK, "k must be >= 1");
  if (static_cast<std::size_t>(k) > n) {
    throw Error(ErrorCode::KTooLarge,
                "k = " + std::to_string(k) + " exceeds " + std::to_string(n) + " points");
  }
}

double entropy_of(const std::vector<std::size_t>& counts, double total) {
  double h = 0.0;
  for (auto c : counts) {
    if (c == 0) continue;
    const double p = static_cast<double>(c) / total;
    h -= p * std::log(p);
  }
  return h;
}

// H(A | B) from a contingency table keyed by (a, b).
double conditional_entropy(const std::map<std::pair<int, int>, std::size_t>& joint,
                           const std::map<int, std::size_t>& b_counts, double total) {
  double h = 0.0;
  for (const auto& [key, n_ab] : joint) {
    const double n_b = static_cast<double>(b_counts.at(key.second));
    h -= static_cast<double>(n_ab) / total * std::log(static_cast<double>(n_ab) / n_b);
  }
  return h;
}

}  // namespace

LloydResult lloyd(std::span<const Embedding> points, std::vector<double> centroids,
                  const KMeansOptions& options) {
  const auto pts = flatten(points);
  if (pts.cols == 0 || centroids.empty() || centroids.size() % pts.cols != 0) {
    throw Error(ErrorCode::DimensionMismatch, "centroid matrix does not match point dimension");
  }
  check_k(pts.rows, static_cast<int>(centroids.size() / pts.cols));
  return run_lloyd(pts, std::move(centroids), options);
}

std::vector<double> kmeans_plus_plus(std::span<const Embedding> points, int k, std::uint64_t seed) {
  const auto pts = flatten(points);
  check_k(pts.rows, k);
  return seed_centroids(pts, k, seed);
}

ClusterAssignment kmeans(std::span<const Embedding> points, int k, std::uint64_t seed,
                         const KMeansOptions& options) {
  if (points.empty()) throw Error(ErrorCode::EmptyList, "no points to cluster");
  check_k(points.size(), k);
  const auto pts = flatten(points);
  const int restarts = std::max(1, options.restarts);

  std::vector<LloydResult> runs(static_cast<std::size_t>(restarts));
#pragma omp parallel for schedule(dynamic, 1) if (pts.rows * pts.cols > 20000)
  for (int r = 0; r < restarts; ++r) {
    runs[static_cast<std::size_t>(r)] =
        run_lloyd(pts, seed_centroids(pts, k, sub_seed(seed, r)), options);
  }

  std::size_t best = 0;
  for (std::size_t r = 1; r < runs.size(); ++r) {
    if (runs[r].inertia < runs[best].inertia) best = r;
  }
  return {std::move(runs[best].labels), k, runs[best].inertia, seed};
}

std::vector<Embedding> l2_normalized_all(std::span<const Embedding> points) {
  std::vector<Embedding> out;
  out.reserve(points.size());
  for (const auto& p : points) out.push_back(l2_normalized(p));
  return out;
}

VMeasureParts v_measure_parts(std::span<const int> true_labels, std::span<const int> pred_labels,
                              double beta) {
  if (true_labels.size() != pred_labels.size()) {
    throw Error(ErrorCode::LengthMismatch, "label lists differ in length");
  }
  if (true_labels.empty()) throw Error(ErrorCode::EmptyList, "no labels");
  if (!(beta > 0.0)) throw Error(ErrorCode::InvalidArgument, "beta must be positive");

  std::map<std::pair<int, int>, std::size_t> ck;  // (class, cluster)
  std::map<std::pair<int, int>, std::size_t> kc;  // (cluster, class)
  std::map<int, std::size_t> classes, clusters;
  for (std::size_t i = 0; i < true_labels.size(); ++i) {
    ++ck[{true_labels[i], pred_labels[i]}];
    ++kc[{pred_labels[i], true_labels[i]}];
    ++classes[true_labels[i]];
    ++clusters[pred_labels[i]];
  }
  const double n = static_cast<double>(true_labels.size());
  auto values = [](const std::map<int, std::size_t>& m) {
    std::vector<std::size_t> v;
    for (const auto& [_, c] : m) v.push_back(c);
    return v;
  };
  const double h_c = entropy_of(values(classes), n);
  const double h_k = entropy_of(values(clusters), n);
  const double h_c_given_k = conditional_entropy(ck, clusters, n);
  const double h_k_given_c = conditional_entropy(kc, classes, n);

  VMeasureParts p;
  p.homogeneity = h_c == 0.0 ? 1.0 : std::clamp(1.0 - h_c_given_k / h_c, 0.0, 1.0);
  p.completeness = h_k == 0.0 ? 1.0 : std::clamp(1.0 - h_k_given_c / h_k, 0.0, 1.0);
  const double hc = p.homogeneity * p.completeness;
  p.v_measure = hc == 0.0 ? 0.0 : (1.0 + beta) * hc / (beta * p.homogeneity + p.completeness);
  return p;
}

double v_measure(std::span<const int> true_labels, std::span<const int> pred_labels, double beta) {
  return v_measure_parts(true_labels, pred_labels, beta).v_measure;
}

double cluster_entropy(std::span<const std::size_t> counts) {
  if (counts.empty()) throw Error(ErrorCode::EmptyHistogram, "empty histogram");
  std::size_t total = 0;
  for (auto c : counts) total += c;
  if (total == 0) throw Error(ErrorCode::EmptyHistogram, "histogram has zero mass");
  return entropy_of(std::vector<std::size_t>(counts.begin(), counts.end()), static_cast<double>(total));
}

std::vector<int> encode_labels(std::span<const std::string> labels) {
  std::unordered_map<std::string, int> ids;
  std::vector<int> out;
  out.reserve(labels.size());
  for (const auto& l : labels) {
    const auto [it, _] = ids.emplace(l, static_cast<int>(ids.size()));
    out.push_back(it->second);
  }
  return out;
}

}  // namespace inbedder
