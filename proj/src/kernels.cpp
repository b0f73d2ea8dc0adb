#include "oodret/kernels.hpp"

#include <algorithm>
#include <cmath>
#include <vector>

namespace oodret::kernels {

namespace {

inline double clamp_cosine(double value) { return std::clamp(value, -1.0, 1.0); }

}  // namespace

namespace serial {

void fuse_masks(const MaskPredictionSet& preds, std::span<float> out) {
  const std::size_t pixels = static_cast<std::size_t>(preds.height) * preds.width;
  const auto k_count = static_cast<std::size_t>(preds.num_classes);
  std::vector<double> acc(pixels * k_count, 0.0);
  for (std::size_t i = 0; i < preds.num_pairs(); ++i) {
    const auto mask = preds.masks[i].values();
    const auto& probs = preds.class_probs[i];
    for (std::size_t p = 0; p < pixels; ++p) {
      for (std::size_t k = 0; k < k_count; ++k) {
        acc[p * k_count + k] += static_cast<double>(probs[k]) * mask[p];
      }
    }
  }
  for (std::size_t j = 0; j < acc.size(); ++j) out[j] = static_cast<float>(acc[j]);
}

void rba(std::span<const float> scores, int num_classes, std::span<float> out) {
  const auto k_count = static_cast<std::size_t>(num_classes);
  for (std::size_t p = 0; p < out.size(); ++p) {
    double sum = 0.0;
    for (std::size_t k = 0; k < k_count; ++k) sum += std::tanh(static_cast<double>(scores[p * k_count + k]));
    out[p] = static_cast<float>(-sum);
  }
}

void cosine_scan(std::span<const float> block, std::span<const double> norms, std::size_t dim,
                 std::span<const float> query, double query_norm, std::span<double> out) {
  for (std::size_t v = 0; v < norms.size(); ++v) {
    const float* row = block.data() + v * dim;
    double dot = 0.0;
    for (std::size_t j = 0; j < dim; ++j) dot += static_cast<double>(row[j]) * query[j];
    out[v] = clamp_cosine(dot / (norms[v] * query_norm));
  }
}

}  // namespace serial

namespace parallel {

void fuse_masks(const MaskPredictionSet& preds, std::span<float> out) {
  const auto pixels = static_cast<long long>(preds.height) * preds.width;
  const auto k_count = static_cast<std::size_t>(preds.num_classes);
  const std::size_t pairs = preds.num_pairs();
#pragma omp parallel
  {
    std::vector<double> acc(k_count);
#pragma omp for schedule(static)
    for (long long p = 0; p < pixels; ++p) {
      std::fill(acc.begin(), acc.end(), 0.0);
      for (std::size_t i = 0; i < pairs; ++i) {
        const double m = preds.masks[i].values()[static_cast<std::size_t>(p)];
        const auto& probs = preds.class_probs[i];
        for (std::size_t k = 0; k < k_count; ++k) acc[k] += static_cast<double>(probs[k]) * m;
      }
      for (std::size_t k = 0; k < k_count; ++k) {
        out[static_cast<std::size_t>(p) * k_count + k] = static_cast<float>(acc[k]);
      }
    }
  }
}

void rba(std::span<const float> scores, int num_classes, std::span<float> out) {
  const auto k_count = static_cast<std::size_t>(num_classes);
  const auto pixels = static_cast<long long>(out.size());
#pragma omp parallel for schedule(static)
  for (long long p = 0; p < pixels; ++p) {
    const float* q = scores.data() + static_cast<std::size_t>(p) * k_count;
    double sum = 0.0;
    for (std::size_t k = 0; k < k_count; ++k) sum += std::tanh(static_cast<double>(q[k]));
    out[static_cast<std::size_t>(p)] = static_cast<float>(-sum);
  }
}

void cosine_scan(std::span<const float> block, std::span<const double> norms, std::size_t dim,
                 std::span<const float> query, double query_norm, std::span<double> out) {
  // Four stored vectors per step share each query load; the per-vector
  // summation order is the serial one, so results are bit-identical.
  constexpr long long kBlock = 4;
  const auto count = static_cast<long long>(norms.size());
  const long long blocks = (count + kBlock - 1) / kBlock;
#pragma omp parallel for schedule(static)
  for (long long b = 0; b < blocks; ++b) {
    const long long first = b * kBlock;
    const long long last = std::min(first + kBlock, count);
    double dot[kBlock] = {0.0, 0.0, 0.0, 0.0};
    const long long width = last - first;
    for (std::size_t j = 0; j < dim; ++j) {
      const double qj = query[j];
      for (long long v = 0; v < width; ++v) {
        dot[v] += static_cast<double>(block[static_cast<std::size_t>(first + v) * dim + j]) * qj;
      }
    }
    for (long long v = 0; v < width; ++v) {
      const auto idx = static_cast<std::size_t>(first + v);
      out[idx] = clamp_cosine(dot[v] / (norms[idx] * query_norm));
    }
  }
}

}  // namespace parallel

}  // namespace oodret::kernels
