// Times the serial reference kernels against the OpenMP versions.
//   kernel_bench [repeats]
#include <chrono>
#include <cstdio>
#include <algorithm>
#include <cstdlib>
#include <numeric>
#include <random>
#include <vector>

#include "inbedder/kernels.hpp"

using namespace inbedder::kernels;

namespace {

template <typename Fn>
double best_ms(int repeats, Fn&& fn) {
  double best = 1e300;
  for (int i = 0; i < repeats; ++i) {
    const auto t0 = std::chrono::steady_clock::now();
    fn();
    best = std::min(best, std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count());
  }
  return best;
}

void report(const char* name, double serial_ms, double parallel_ms, bool same) {
  std::printf("%-16s serial %9.3f ms  parallel %9.3f ms  speedup %5.2fx  %s\n", name, serial_ms, parallel_ms,
              serial_ms / parallel_ms, same ? "identical" : "MISMATCH");
}

}  // namespace

int main(int argc, char** argv) {
  const int repeats = argc > 1 ? std::atoi(argv[1]) : 5;
  std::mt19937_64 rng(1);
  std::uniform_real_distribution<double> u(-1, 1);
  std::printf("threads: %d\n", max_threads());

  const std::size_t rows = 4096, dim = 4096;
  std::vector<float> hidden(rows * dim);
  for (auto& v : hidden) v = static_cast<float>(u(rng));
  const MatrixView<float> hm{hidden, rows, dim};
  std::vector<std::size_t> picked(rows / 2);
  std::iota(picked.begin(), picked.end(), rows / 4);
  std::vector<double> ms, mp;
  const double rs = best_ms(repeats, [&] { ms = serial::row_mean(hm, std::span<const std::size_t>(picked)); });
  const double rp = best_ms(repeats, [&] { mp = parallel::row_mean(hm, std::span<const std::size_t>(picked)); });
  report("row_mean", rs, rp, ms == mp);

  const std::size_t n = 20000, d = 64, k = 32;
  std::vector<double> points(n * d), cents(k * d);
  for (auto& v : points) v = u(rng);
  for (auto& v : cents) v = u(rng);
  const MatrixView<double> pv{points, n, d}, cv{cents, k, d};
  Assignment as, ap;
  const double as_ms = best_ms(repeats, [&] { as = serial::assign_nearest(pv, cv); });
  const double ap_ms = best_ms(repeats, [&] { ap = parallel::assign_nearest(pv, cv); });
  report("assign_nearest", as_ms, ap_ms, as.labels == ap.labels && as.sq_distances == ap.sq_distances);

  std::vector<double> ds, dp;
  const double ds_ms = best_ms(repeats, [&] { ds = serial::min_sq_distance(pv, cv); });
  const double dp_ms = best_ms(repeats, [&] { dp = parallel::min_sq_distance(pv, cv); });
  report("min_sq_distance", ds_ms, dp_ms, ds == dp);
  return ms == mp && as.labels == ap.labels && ds == dp ? 0 : 1;
}
