#include <gtest/gtest.h>

#include <cmath>
#include <map>
#include <random>
#include <set>

#include "inbedder/clustering.hpp"
#include "inbedder/error.hpp"

using namespace inbedder;

namespace {

// Conditional entropies straight from the contingency table.
double oracle_v(const std::vector<int>& c, const std::vector<int>& k) {
  const double n = static_cast<double>(c.size());
  std::map<int, double> nc, nk;
  std::map<std::pair<int, int>, double> nck;
  for (std::size_t i = 0; i < c.size(); ++i) {
    nc[c[i]] += 1;
    nk[k[i]] += 1;
    nck[{c[i], k[i]}] += 1;
  }
  auto entropy = [&](const std::map<int, double>& m) {
    double h = 0;
    for (const auto& [_, x] : m) h -= x / n * std::log(x / n);
    return h;
  };
  double h_c_given_k = 0, h_k_given_c = 0;
  for (const auto& [key, x] : nck) {
    h_c_given_k -= x / n * std::log(x / nk[key.second]);
    h_k_given_c -= x / n * std::log(x / nc[key.first]);
  }
  const double hc = entropy(nc), hk = entropy(nk);
  const double h = hc == 0 ? 1.0 : 1.0 - h_c_given_k / hc;
  const double comp = hk == 0 ? 1.0 : 1.0 - h_k_given_c / hk;
  return h * comp == 0 ? 0.0 : 2 * h * comp / (h + comp);
}

std::vector<Embedding> two_blobs(std::mt19937_64& rng, std::size_t per_blob) {
  std::normal_distribution<double> g(0.0, 0.01);
  std::vector<Embedding> pts;
  for (int b = 0; b < 2; ++b) {
    for (std::size_t i = 0; i < per_blob; ++i) {
      pts.emplace_back(std::vector<double>{b * 10.0 + g(rng), -b * 10.0 + g(rng), g(rng)});
    }
  }
  return pts;
}

}  // namespace

TEST(VMeasure, Examples) {
  const std::vector<int> a{0, 0, 1, 1}, b{0, 0, 1, 2};
  EXPECT_NEAR(v_measure(a, b), 0.8, 1e-9);
  const auto parts = v_measure_parts(a, b);
  EXPECT_NEAR(parts.homogeneity, 1.0, 1e-12);
  EXPECT_NEAR(parts.completeness, 2.0 / 3.0, 1e-12);
  EXPECT_DOUBLE_EQ(v_measure(a, a), 1.0);
  EXPECT_DOUBLE_EQ(v_measure(std::vector<int>{0, 1}, std::vector<int>{0, 0}), 0.0);
  EXPECT_THROW(v_measure(a, std::vector<int>{0, 1}), Error);
  EXPECT_THROW(v_measure(std::vector<int>{}, std::vector<int>{}), Error);
}

TEST(VMeasure, MatchesOracleSymmetricAndRelabelInvariant) {
  std::mt19937_64 rng(31);
  for (int t = 0; t < 100; ++t) {
    const std::size_t n = 2 + t % 60;
    std::uniform_int_distribution<int> ca(0, 1 + t % 5), cb(0, 1 + t % 4);
    std::vector<int> x(n), y(n);
    for (auto& v : x) v = ca(rng);
    for (auto& v : y) v = cb(rng);
    const double v = v_measure(x, y);
    EXPECT_NEAR(v, oracle_v(x, y), 1e-9);
    EXPECT_NEAR(v, v_measure(y, x), 1e-12);
    std::vector<int> relabeled(y.size());
    for (std::size_t i = 0; i < y.size(); ++i) relabeled[i] = 17 - 3 * y[i];
    EXPECT_NEAR(v, v_measure(x, relabeled), 1e-12);
    EXPECT_GE(v, 0.0);
    EXPECT_LE(v, 1.0 + 1e-12);
  }
}

TEST(Entropy, Examples) {
  EXPECT_DOUBLE_EQ(cluster_entropy(std::vector<std::size_t>{10}), 0.0);
  EXPECT_NEAR(cluster_entropy(std::vector<std::size_t>{5, 5}), std::log(2.0), 1e-9);
  EXPECT_NEAR(cluster_entropy(std::vector<std::size_t>{3, 1}), 0.562335, 1e-6);
  EXPECT_THROW(cluster_entropy(std::vector<std::size_t>{}), Error);
}

TEST(KMeans, SingletonClusters) {
  std::mt19937_64 rng(1);
  std::normal_distribution<double> g;
  std::vector<Embedding> pts;
  for (int i = 0; i < 12; ++i) pts.emplace_back(std::vector<double>{g(rng), g(rng)});
  const auto a = kmeans(pts, 12, 3);
  EXPECT_NEAR(a.inertia, 0.0, 1e-12);
  std::set<int> used(a.labels.begin(), a.labels.end());
  EXPECT_EQ(used.size(), 12u);
}

TEST(KMeans, TwoBlobsRecovered) {
  std::mt19937_64 rng(2);
  const auto pts = two_blobs(rng, 50);
  const auto a = kmeans(pts, 2, 42);
  ASSERT_EQ(a.labels.size(), 100u);
  for (std::size_t i = 0; i < 50; ++i) EXPECT_EQ(a.labels[i], a.labels[0]);
  for (std::size_t i = 50; i < 100; ++i) EXPECT_EQ(a.labels[i], a.labels[50]);
  EXPECT_NE(a.labels[0], a.labels[50]);
}

TEST(KMeans, SameSeedSameResult) {
  std::mt19937_64 rng(3);
  std::normal_distribution<double> g;
  std::vector<Embedding> pts;
  for (int i = 0; i < 200; ++i) pts.emplace_back(std::vector<double>{g(rng), g(rng), g(rng)});
  const auto a = kmeans(pts, 5, 7);
  const auto b = kmeans(pts, 5, 7);
  EXPECT_EQ(a.labels, b.labels);
  EXPECT_EQ(a.inertia, b.inertia);
}

TEST(KMeans, LabelsValid) {
  std::mt19937_64 rng(4);
  std::normal_distribution<double> g;
  std::vector<Embedding> pts;
  for (int i = 0; i < 64; ++i) pts.emplace_back(std::vector<double>{g(rng), g(rng)});
  for (int k = 1; k <= 8; ++k) {
    const auto a = kmeans(pts, k, static_cast<std::uint64_t>(k));
    EXPECT_EQ(a.k, k);
    EXPECT_EQ(a.labels.size(), pts.size());
    for (int l : a.labels) {
      EXPECT_GE(l, 0);
      EXPECT_LT(l, k);
    }
  }
}

TEST(KMeans, Errors) {
  std::vector<Embedding> pts{Embedding({1.0, 0.0}), Embedding({0.0, 1.0})};
  try {
    kmeans(pts, 0, 1);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::InvalidK);
  }
  try {
    kmeans(pts, 3, 1);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::KTooLarge);
  }
  std::vector<Embedding> mixed{Embedding({1.0, 0.0}), Embedding({1.0})};
  EXPECT_THROW(kmeans(mixed, 1, 1), Error);
}

TEST(Lloyd, InertiaNonIncreasing) {
  std::mt19937_64 rng(5);
  std::normal_distribution<double> g;
  for (int t = 0; t < 20; ++t) {
    std::vector<Embedding> pts;
    for (int i = 0; i < 150; ++i) pts.emplace_back(std::vector<double>{g(rng), g(rng), g(rng), g(rng)});
    const int k = 2 + t % 6;
    const auto res = lloyd(pts, kmeans_plus_plus(pts, k, static_cast<std::uint64_t>(t)));
    ASSERT_FALSE(res.inertia_trace.empty());
    for (std::size_t i = 1; i < res.inertia_trace.size(); ++i) {
      EXPECT_LE(res.inertia_trace[i], res.inertia_trace[i - 1] + 1e-9);
    }
    EXPECT_NEAR(res.inertia, res.inertia_trace.back(), 1e-9);
  }
}

TEST(EncodeLabels, FirstAppearance) {
  const std::vector<std::string> l{"b", "a", "b", "c"};
  EXPECT_EQ(encode_labels(l), (std::vector<int>{0, 1, 0, 2}));
}

TEST(Normalize, AllUnit) {
  std::vector<Embedding> pts{Embedding({3.0, 4.0}), Embedding({0.0, 2.0})};
  const auto n = l2_normalized_all(pts);
  EXPECT_NEAR(n[0][0], 0.6, 1e-15);
  EXPECT_NEAR(n[0][1], 0.8, 1e-15);
  EXPECT_EQ(n[1], Embedding({0.0, 1.0}));
}
