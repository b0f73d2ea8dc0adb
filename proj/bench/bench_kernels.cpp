// Serial vs OpenMP timings of the hot kernels.
//   oodret_bench [repeats]

#include <omp.h>

#include <chrono>
#include <cstdio>
#include <cmath>
#include <cstdlib>
#include <algorithm>
#include <functional>
#include <random>
#include <vector>

#include "oodret/kernels.hpp"

using namespace oodret;

namespace {

double best_ms(int repeats, const std::function<void()>& fn) {
  double best = 1e300;
  for (int i = 0; i < repeats; ++i) {
    const auto t0 = std::chrono::steady_clock::now();
    fn();
    const auto t1 = std::chrono::steady_clock::now();
    best = std::min(best, std::chrono::duration<double, std::milli>(t1 - t0).count());
  }
  return best;
}

void report(const char* name, double serial_ms, double parallel_ms, double max_abs_diff) {
  std::printf("%-12s serial %9.3f ms  parallel %9.3f ms  speedup %5.2fx  max|diff| %.3g\n", name, serial_ms,
              parallel_ms, serial_ms / parallel_ms, max_abs_diff);
}

template <class A, class B>
double max_diff(const A& a, const B& b) {
  double m = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, std::abs(static_cast<double>(a[i]) - b[i]));
  return m;
}

}  // namespace

int main(int argc, char** argv) {
  const int repeats = argc > 1 ? std::atoi(argv[1]) : 5;
  std::mt19937_64 rng(7);
  std::uniform_real_distribution<float> u(0.0f, 1.0f);
  std::printf("threads %d, repeats %d\n", omp_get_max_threads(), repeats);

  // Mask fusion, 512 x 1024 frame, 100 mask pairs, 19 classes.
  {
    const int h = 512, w = 1024, n = 100, k = 19;
    MaskPredictionSet p;
    p.height = h;
    p.width = w;
    p.num_classes = k;
    for (int i = 0; i < n; ++i) {
      Grid<float> m(h, w, 0.0f);
      for (auto& v : m.values()) v = u(rng);
      p.masks.push_back(std::move(m));
      std::vector<float> probs(k + 1);
      float s = 0.0f;
      for (auto& v : probs) s += v = u(rng);
      for (auto& v : probs) v /= s;
      p.class_probs.push_back(std::move(probs));
    }
    std::vector<float> a(static_cast<std::size_t>(h) * w * k), b(a.size());
    const double ts = best_ms(repeats, [&] { kernels::serial::fuse_masks(p, a); });
    const double tp = best_ms(repeats, [&] { kernels::parallel::fuse_masks(p, b); });
    report("fuse_masks", ts, tp, max_diff(a, b));

    std::vector<float> ra(static_cast<std::size_t>(h) * w), rb(ra.size());
    const double rs = best_ms(repeats, [&] { kernels::serial::rba(a, k, ra); });
    const double rp = best_ms(repeats, [&] { kernels::parallel::rba(a, k, rb); });
    report("rba", rs, rp, max_diff(ra, rb));
  }

  // Cosine scan, 200k vectors of dimension 512.
  {
    const std::size_t n = 200000, d = 512;
    std::normal_distribution<float> g(0.0f, 1.0f);
    std::vector<float> block(n * d);
    for (auto& v : block) v = g(rng);
    std::vector<double> norms(n);
    for (std::size_t i = 0; i < n; ++i) {
      double s = 0.0;
      for (std::size_t j = 0; j < d; ++j) s += static_cast<double>(block[i * d + j]) * block[i * d + j];
      norms[i] = std::sqrt(s);
    }
    std::vector<float> q(d);
    double qn = 0.0;
    for (auto& v : q) {
      v = g(rng);
      qn += static_cast<double>(v) * v;
    }
    qn = std::sqrt(qn);
    std::vector<double> a(n), b(n);
    const double ts = best_ms(repeats, [&] { kernels::serial::cosine_scan(block, norms, d, q, qn, a); });
    const double tp = best_ms(repeats, [&] { kernels::parallel::cosine_scan(block, norms, d, q, qn, b); });
    report("cosine_scan", ts, tp, max_diff(a, b));
  }
  return 0;
}
