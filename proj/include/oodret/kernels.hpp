#pragma once

#include <cstddef>
#include <span>

#include "oodret/grid.hpp"

// Data-parallel inner loops. `parallel` is what the library calls; `serial`
// is the plain reference kept for equivalence tests and the benchmark.
namespace oodret::kernels {

namespace serial {

void fuse_masks(const MaskPredictionSet& preds, std::span<float> out);
void rba(std::span<const float> scores, int num_classes, std::span<float> out);
void cosine_scan(std::span<const float> block, std::span<const double> norms, std::size_t dim,
                 std::span<const float> query, double query_norm, std::span<double> out);

}  // namespace serial

namespace parallel {

void fuse_masks(const MaskPredictionSet& preds, std::span<float> out);
void rba(std::span<const float> scores, int num_classes, std::span<float> out);
void cosine_scan(std::span<const float> block, std::span<const double> norms, std::size_t dim,
                 std::span<const float> query, double query_norm, std::span<double> out);

}  // namespace parallel

}  // namespace oodret::kernels
