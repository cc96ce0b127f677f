// Times the OpenMP kernels against the serial reference implementations.

#include <chrono>
#include <cstdio>
#include <functional>

#ifdef _OPENMP
#include <omp.h>
#endif

#include "unirel/linalg.hpp"
#include "unirel/reference.hpp"
#include "unirel/rng.hpp"

using namespace unirel;

namespace {

Matrix random_matrix(std::size_t r, std::size_t c, Rng& rng) {
  Matrix m(r, c);
  for (double& v : m.data) v = rng.uniform(-1.0, 1.0);
  return m;
}

double time_ms(const std::function<void()>& fn, int reps) {
  const auto start = std::chrono::steady_clock::now();
  for (int i = 0; i < reps; ++i) fn();
  const auto stop = std::chrono::steady_clock::now();
  return std::chrono::duration<double, std::milli>(stop - start).count() / reps;
}

void report(const char* name, double reference_ms, double kernel_ms) {
  std::printf("%-24s reference %9.3f ms   kernel %9.3f ms   speedup %5.2fx\n", name,
              reference_ms, kernel_ms, reference_ms / kernel_ms);
}

}  // namespace

int main() {
#ifdef _OPENMP
  std::printf("openmp threads: %d\n", omp_get_max_threads());
#else
  std::printf("openmp not enabled; both columns run the same code path\n");
#endif

  Rng rng(7);
  {
    const Matrix a = random_matrix(384, 384, rng);
    const Matrix b = random_matrix(384, 384, rng);
    volatile double sink = 0.0;
    const double s = time_ms([&] { sink = ref::matmul(a, b).at(0, 0); }, 5);
    const double p = time_ms([&] { sink = matmul(a, b).at(0, 0); }, 5);
    (void)sink;
    report("matmul 384x384", s, p);
  }
  {
    const Matrix m = random_matrix(4096, 512, rng);
    volatile double sink = 0.0;
    const double s = time_ms([&] { sink = ref::softmax_rows(m).at(0, 0); }, 5);
    const double p = time_ms([&] { sink = softmax_rows(m).at(0, 0); }, 5);
    (void)sink;
    report("softmax 4096x512", s, p);
  }
  {
    // nearest-row scan, the inner loop of exact multi-vector retrieval
    const Matrix pool = random_matrix(200000, 32, rng);
    const Matrix probe_m = random_matrix(1, 32, rng);
    std::vector<double> probe = probe_m.data;
    std::vector<double> dots(pool.rows);
    volatile double sink = 0.0;
    const double s = time_ms([&] { sink = static_cast<double>(ref::nearest_rows(pool, probe, 10)[0]); }, 5);
    const double p = time_ms(
        [&] {
          const std::int64_t n = static_cast<std::int64_t>(pool.rows);
#pragma omp parallel for schedule(static)
          for (std::int64_t i = 0; i < n; ++i) {
            const double* row = pool.data.data() + static_cast<std::size_t>(i) * pool.cols;
            double acc = 0.0;
            for (std::size_t r = 0; r < pool.cols; ++r) acc += row[r] * probe[r];
            dots[static_cast<std::size_t>(i)] = acc;
          }
          sink = dots[0];
        },
        5);
    (void)sink;
    report("pool scan 200k x 32", s, p);
  }
  return 0;
}
