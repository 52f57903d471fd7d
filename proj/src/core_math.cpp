#include "inbedder/core_math.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "inbedder/error.hpp"

namespace inbedder {

namespace {

void check_finite(std::span<const double> values) {
  for (std::size_t i = 0; i < values.size(); ++i) {
    if (!std::isfinite(values[i])) {
      throw Error(ErrorCode::NonFinite,
                  "embedding component " + std::to_string(i) + " is not finite");
    }
  }
}

void check_same_dim(std::size_t a, std::size_t b) {
  if (a != b) {
    throw Error(ErrorCode::DimensionMismatch,
                "dimensions " + std::to_string(a) + " and " + std::to_string(b));
  }
}

}  // namespace

Embedding::Embedding(std::vector<double> values) : values_(std::move(values)) {
  if (values_.empty()) {
    throw Error(ErrorCode::InvalidArgument, "embedding must have dim >= 1");
  }
  check_finite(values_);
}

Embedding::Embedding(std::span<const float> values)
    : Embedding(std::vector<double>(values.begin(), values.end())) {}

double dot(std::span<const double> a, std::span<const double> b) {
  check_same_dim(a.size(), b.size());
  double acc = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) acc += a[i] * b[i];
  return acc;
}

double l2_norm(std::span<const double> a) {
  double acc = 0.0;
  for (double v : a) acc += v * v;
  return std::sqrt(acc);
}

double cosine_similarity(const Embedding& a, const Embedding& b) {
  check_same_dim(a.dim(), b.dim());
  const double na = l2_norm(a.values());
  const double nb = l2_norm(b.values());
  if (na == 0.0 || nb == 0.0) {
    throw Error(ErrorCode::ZeroVector, "cosine similarity of a zero vector");
  }
  // Product of norms (not sqrt of product) keeps cos(a, b) == cos(b, a)
  // bit-for-bit since both dot and multiplication commute.
  const double c = dot(a.values(), b.values()) / (na * nb);
  return std::clamp(c, -1.0, 1.0);
}

double harmonic_mean(double a, double b) {
  if (a < 0.0 || b < 0.0) {
    throw Error(ErrorCode::NegativeInput, "harmonic mean of a negative value");
  }
  if (a + b == 0.0) return 0.0;
  return 2.0 * a * b / (a + b);
}

Embedding mean_of(std::span<const Embedding> items) {
  if (items.empty()) throw Error(ErrorCode::EmptyList, "mean of no embeddings");
  const std::size_t d = items.front().dim();
  std::vector<double> mean(d, 0.0);
  // Running mean: exact when every item is identical.
  std::size_t count = 0;
  for (const auto& e : items) {
    check_same_dim(d, e.dim());
    ++count;
    const double inv = 1.0 / static_cast<double>(count);
    for (std::size_t i = 0; i < d; ++i) mean[i] += (e[i] - mean[i]) * inv;
  }
  return Embedding(std::move(mean));
}

Embedding l2_normalized(const Embedding& e) {
  const double n = l2_norm(e.values());
  if (n == 0.0) throw Error(ErrorCode::ZeroVector, "cannot normalize a zero vector");
  std::vector<double> out(e.values().begin(), e.values().end());
  for (auto& v : out) v /= n;
  return Embedding(std::move(out));
}

}  // namespace inbedder
