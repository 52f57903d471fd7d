#pragma once

#include <cstddef>
#include <span>
#include <vector>

namespace inbedder {

// A fixed-dimension real vector. Values are kept in 64-bit so long averages
// over 32-bit hidden states do not lose precision; serialization narrows to
// 32-bit little-endian.
class Embedding {
 public:
  Embedding() = default;
  explicit Embedding(std::vector<double> values);
  explicit Embedding(std::span<const float> values);

  std::size_t dim() const noexcept { return values_.size(); }
  std::span<const double> values() const noexcept { return values_; }
  double operator[](std::size_t i) const { return values_[i]; }

  friend bool operator==(const Embedding&, const Embedding&) = default;

 private:
  std::vector<double> values_;
};

double dot(std::span<const double> a, std::span<const double> b);
double l2_norm(std::span<const double> a);

/// Cosine of the angle between a and b, clamped to [-1, 1].
/// Throws DimensionMismatch, or ZeroVector when either side has zero norm.
double cosine_similarity(const Embedding& a, const Embedding& b);

/// 2ab/(a+b), with 0 when a + b == 0. Throws NegativeInput.
double harmonic_mean(double a, double b);

/// Element-wise mean; throws EmptyList / DimensionMismatch.
Embedding mean_of(std::span<const Embedding> items);

/// Scales to unit L2 norm; throws ZeroVector.
Embedding l2_normalized(const Embedding& e);

}  // namespace inbedder
