#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "inbedder/core_math.hpp"

namespace inbedder {

struct ClusterAssignment {
  std::vector<int> labels;
  int k = 0;
  double inertia = 0.0;
  std::uint64_t seed = 0;
};

struct KMeansOptions {
  int restarts = 10;
  int max_iterations = 300;
  double tolerance = 1e-4;  // max centroid shift that counts as converged
};

struct LloydResult {
  std::vector<int> labels;
  std::vector<double> centroids;  // k x dim, row-major
  double inertia = 0.0;
  std::vector<double> inertia_trace;  // after each assignment step
  int iterations = 0;
};

/// Lloyd iterations from the given initial centroids (k x dim, row-major).
LloydResult lloyd(std::span<const Embedding> points, std::vector<double> centroids,
                  const KMeansOptions& options = {});

/// k-means++ seeding followed by Lloyd iterations; best of `restarts` runs by
/// inertia. Restarts run in parallel, each from its own sub-seed, so the
/// result depends only on `seed`. Points should be L2-normalized by the
/// caller so Euclidean distance tracks cosine.
/// Throws InvalidK, KTooLarge or DimensionMismatch.
ClusterAssignment kmeans(std::span<const Embedding> points, int k, std::uint64_t seed,
                         const KMeansOptions& options = {});

/// k-means++ initial centroids for one restart.
std::vector<double> kmeans_plus_plus(std::span<const Embedding> points, int k, std::uint64_t seed);

std::vector<Embedding> l2_normalized_all(std::span<const Embedding> points);

/// Homogeneity/completeness-based V-measure with natural-log entropies.
/// Throws LengthMismatch or EmptyList.
double v_measure(std::span<const int> true_labels, std::span<const int> pred_labels, double beta = 1.0);

struct VMeasureParts {
  double homogeneity = 0.0;
  double completeness = 0.0;
  double v_measure = 0.0;
};
VMeasureParts v_measure_parts(std::span<const int> true_labels, std::span<const int> pred_labels,
                              double beta = 1.0);

/// Shannon entropy (nats) of a label histogram. Throws EmptyHistogram.
double cluster_entropy(std::span<const std::size_t> counts);

/// Dense ids in order of first appearance.
std::vector<int> encode_labels(std::span<const std::string> labels);

}  // namespace inbedder
