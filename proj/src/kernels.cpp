#include "inbedder/kernels.hpp"

#include <limits>

#ifdef _OPENMP
#include <omp.h>
#endif

namespace inbedder::kernels {

int max_threads() {
#ifdef _OPENMP
  return omp_get_max_threads();
#else
  return 1;
#endif
}

double squared_distance(std::span<const double> a, std::span<const double> b) {
  double acc = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double d = a[i] - b[i];
    acc += d * d;
  }
  return acc;
}

namespace {

template <typename T>
double column_mean(const MatrixView<T>& m, std::span<const std::size_t> rows,
                   std::size_t col) {
  double mean = 0.0;
  std::size_t count = 0;
  for (std::size_t r : rows) {
    ++count;
    mean += (static_cast<double>(m.data[r * m.cols + col]) - mean) /
            static_cast<double>(count);
  }
  return mean;
}

int nearest(std::span<const double> point, const MatrixView<double>& centroids,
            double* best_out) {
  int best = 0;
  double best_d = std::numeric_limits<double>::infinity();
  for (std::size_t c = 0; c < centroids.rows; ++c) {
    const double d = squared_distance(point, centroids.row(c));
    if (d < best_d) {
      best_d = d;
      best = static_cast<int>(c);
    }
  }
  *best_out = best_d;
  return best;
}

}  // namespace

namespace serial {

template <typename T>
std::vector<double> row_mean(const MatrixView<T>& m, std::span<const std::size_t> rows) {
  std::vector<double> out(m.cols, 0.0);
  for (std::size_t c = 0; c < m.cols; ++c) out[c] = column_mean(m, rows, c);
  return out;
}

Assignment assign_nearest(const MatrixView<double>& points,
                          const MatrixView<double>& centroids) {
  Assignment a{std::vector<int>(points.rows), std::vector<double>(points.rows)};
  for (std::size_t i = 0; i < points.rows; ++i) {
    a.labels[i] = nearest(points.row(i), centroids, &a.sq_distances[i]);
  }
  return a;
}

std::vector<double> min_sq_distance(const MatrixView<double>& points,
                                    const MatrixView<double>& centroids) {
  std::vector<double> out(points.rows);
  for (std::size_t i = 0; i < points.rows; ++i) {
    nearest(points.row(i), centroids, &out[i]);
  }
  return out;
}

template std::vector<double> row_mean<float>(const MatrixView<float>&,
                                             std::span<const std::size_t>);
template std::vector<double> row_mean<double>(const MatrixView<double>&,
                                              std::span<const std::size_t>);

}  // namespace serial

namespace parallel {

template <typename T>
std::vector<double> row_mean(const MatrixView<T>& m, std::span<const std::size_t> rows) {
  std::vector<double> out(m.cols, 0.0);
  const auto cols = static_cast<long long>(m.cols);
#pragma omp parallel for schedule(static) if (m.cols * rows.size() > 4096)
  for (long long c = 0; c < cols; ++c) {
    out[static_cast<std::size_t>(c)] = column_mean(m, rows, static_cast<std::size_t>(c));
  }
  return out;
}

Assignment assign_nearest(const MatrixView<double>& points,
                          const MatrixView<double>& centroids) {
  Assignment a{std::vector<int>(points.rows), std::vector<double>(points.rows)};
  const auto n = static_cast<long long>(points.rows);
#pragma omp parallel for schedule(static) if (points.rows * centroids.rows > 1024)
  for (long long i = 0; i < n; ++i) {
    const auto idx = static_cast<std::size_t>(i);
    a.labels[idx] = nearest(points.row(idx), centroids, &a.sq_distances[idx]);
  }
  return a;
}

std::vector<double> min_sq_distance(const MatrixView<double>& points,
                                    const MatrixView<double>& centroids) {
  std::vector<double> out(points.rows);
  const auto n = static_cast<long long>(points.rows);
#pragma omp parallel for schedule(static) if (points.rows * centroids.rows > 1024)
  for (long long i = 0; i < n; ++i) {
    const auto idx = static_cast<std::size_t>(i);
    nearest(points.row(idx), centroids, &out[idx]);
  }
  return out;
}

template std::vector<double> row_mean<float>(const MatrixView<float>&,
                                             std::span<const std::size_t>);
template std::vector<double> row_mean<double>(const MatrixView<double>&,
                                              std::span<const std::size_t>);

}  // namespace parallel

}  // namespace inbedder::kernels
