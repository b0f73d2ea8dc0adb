#pragma once

#include <compare>
#include <cstddef>
#include <vector>

#include "oodret/grid.hpp"

namespace oodret {

struct Pixel {
  int row = 0;
  int col = 0;
  friend auto operator<=>(const Pixel&, const Pixel&) = default;
};

/// Inclusive pixel bounds.
struct BBox {
  int top = 0;
  int left = 0;
  int bottom = -1;
  int right = -1;

  int height() const noexcept { return bottom - top + 1; }
  int width() const noexcept { return right - left + 1; }
  long long area() const noexcept {
    return empty() ? 0 : static_cast<long long>(height()) * width();
  }
  bool empty() const noexcept { return bottom < top || right < left; }
  bool contains(int row, int col) const noexcept {
    return row >= top && row <= bottom && col >= left && col <= right;
  }
  friend bool operator==(const BBox&, const BBox&) = default;
};

/// One connected OoD component of a frame.
struct SegmentInstance {
  int frame_index = 0;
  std::vector<Pixel> pixels;  // raster order
  BBox bbox;
  double centroid_row = 0.0;
  double centroid_col = 0.0;
  std::size_t area = 0;
  double mean_score = 0.0;
  double max_score = 0.0;
  double min_score = 0.0;
  double std_score = 0.0;
};

enum class Connectivity { four = 4, eight = 8 };

/// q[h,w,k] = sum_i p_i(k) m_i[h,w] over the K known classes; the void
/// column is dropped. Accumulates in double, stores float.
FrameScoreTensor fuse_masks(const MaskPredictionSet& preds);

/// RbA[h,w] = -sum_k tanh(q[h,w,k]), in [-K tanh(N), 0].
AnomalyMap rba_score(const FrameScoreTensor& scores);

/// 1 where value >= threshold.
BinaryMask threshold_anomaly(const AnomalyMap& map, double threshold);

/// Fallback binarization threshold when none was calibrated.
inline double default_anomaly_threshold(int num_classes) noexcept {
  return -0.5 * num_classes;
}

/// Maximal connected components of `mask`, ordered by (bbox.top, bbox.left),
/// then area descending, then first raster pixel. Statistics are taken from
/// `map`, which must share the mask's shape.
std::vector<SegmentInstance> extract_components(const BinaryMask& mask, const AnomalyMap& map,
                                                int frame_index = 0,
                                                Connectivity connectivity = Connectivity::eight);

/// Recomputes bbox, centroid, area and anomaly statistics from `seg.pixels`.
void refresh_geometry(SegmentInstance& seg, const AnomalyMap& map);

/// Rasterizes segments into a mask of the given shape.
BinaryMask segments_to_mask(const std::vector<SegmentInstance>& segs, int height, int width);

}  // namespace oodret
