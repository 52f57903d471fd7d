#pragma once

// Data-parallel inner loops shared by the aggregation and clustering code.
//
// Each kernel has a serial reference in `kernels::serial` and an OpenMP
// version in `kernels::parallel`. Both produce bit-identical results: the
// parallel versions split work over independent outputs (columns or points)
// and never reduce across threads. Tests compare the two directly and the
// benchmark target times them against each other.

#include <cstddef>
#include <span>
#include <vector>

namespace inbedder::kernels {

template <typename T>
struct MatrixView {
  std::span<const T> data;  // row-major
  std::size_t rows = 0;
  std::size_t cols = 0;

  std::span<const T> row(std::size_t r) const {
    return data.subspan(r * cols, cols);
  }
};

/// Result of assigning each point to its nearest centroid.
struct Assignment {
  std::vector<int> labels;
  std::vector<double> sq_distances;  // per point, to its assigned centroid
};

namespace serial {

/// Column-wise running mean over the listed rows, accumulated in 64-bit.
template <typename T>
std::vector<double> row_mean(const MatrixView<T>& m, std::span<const std::size_t> rows);

/// Nearest centroid by squared Euclidean distance; ties go to the lower index.
Assignment assign_nearest(const MatrixView<double>& points,
                          const MatrixView<double>& centroids);

/// Per-point squared distance to the closest centroid.
std::vector<double> min_sq_distance(const MatrixView<double>& points,
                                    const MatrixView<double>& centroids);

}  // namespace serial

namespace parallel {

template <typename T>
std::vector<double> row_mean(const MatrixView<T>& m, std::span<const std::size_t> rows);

Assignment assign_nearest(const MatrixView<double>& points,
                          const MatrixView<double>& centroids);

std::vector<double> min_sq_distance(const MatrixView<double>& points,
                                    const MatrixView<double>& centroids);

}  // namespace parallel

/// Number of threads the parallel kernels will use (1 without OpenMP).
int max_threads();

double squared_distance(std::span<const double> a, std::span<const double> b);

}  // namespace inbedder::kernels
