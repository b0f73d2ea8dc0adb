#include "oodret/scoring.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include "oodret/kernels.hpp"

namespace oodret {

FrameScoreTensor::FrameScoreTensor(int height, int width, int num_classes, std::vector<float> values)
    : height_(height), width_(width), classes_(num_classes), values_(std::move(values)) {
  if (height < 0 || width < 0 || num_classes <= 0) {
    throw Error(Errc::invalid_argument, "score tensor needs H,W >= 0 and K >= 1");
  }
  if (values_.size() != static_cast<std::size_t>(height) * width * num_classes) {
    throw Error(Errc::shape_mismatch, "score tensor payload does not match H x W x K");
  }
}

void FrameScoreTensor::validate() const {
  for (float v : values_) {
    if (!std::isfinite(v) || v < 0.0f) {
      throw Error(Errc::invalid_argument, "class scores must be finite and nonnegative");
    }
  }
}

void MaskPredictionSet::validate() const {
  if (num_classes <= 0) throw Error(Errc::invalid_argument, "mask predictions need K >= 1");
  if (masks.size() != class_probs.size()) {
    throw Error(Errc::shape_mismatch, "mask count differs from probability-vector count");
  }
  for (std::size_t i = 0; i < masks.size(); ++i) {
    const auto& m = masks[i];
    if (m.height() != height || m.width() != width) {
      throw Error(Errc::shape_mismatch, "mask " + std::to_string(i) + " is " +
                                            std::to_string(m.height()) + "x" + std::to_string(m.width()) +
                                            ", expected " + std::to_string(height) + "x" +
                                            std::to_string(width));
    }
    for (float v : m.values()) {
      if (!(v >= 0.0f && v <= 1.0f)) {
        throw Error(Errc::invalid_argument, "mask " + std::to_string(i) + " has entries outside [0,1]");
      }
    }
    const auto& p = class_probs[i];
    if (p.size() != static_cast<std::size_t>(num_classes) + 1) {
      throw Error(Errc::shape_mismatch, "probability vector " + std::to_string(i) + " has length " +
                                            std::to_string(p.size()) + ", expected K+1 = " +
                                            std::to_string(num_classes + 1));
    }
    double sum = 0.0;
    for (float v : p) {
      if (!(v >= 0.0f)) {
        throw Error(Errc::not_on_simplex, "probability vector " + std::to_string(i) + " has a negative entry");
      }
      sum += v;
    }
    if (std::abs(sum - 1.0) > 1e-5) {
      throw Error(Errc::not_on_simplex, "probability vector " + std::to_string(i) + " sums to " +
                                            std::to_string(sum));
    }
  }
}

FrameScoreTensor fuse_masks(const MaskPredictionSet& preds) {
  preds.validate();
  FrameScoreTensor out(preds.height, preds.width, preds.num_classes);
  kernels::parallel::fuse_masks(preds, out.values());
  return out;
}

AnomalyMap rba_score(const FrameScoreTensor& scores) {
  scores.validate();
  AnomalyMap out(scores.height(), scores.width());
  kernels::parallel::rba(scores.values(), scores.num_classes(), out.values());
  return out;
}

BinaryMask threshold_anomaly(const AnomalyMap& map, double threshold) {
  BinaryMask out(map.height(), map.width());
  auto src = map.values();
  auto dst = out.values();
  for (std::size_t i = 0; i < src.size(); ++i) dst[i] = static_cast<double>(src[i]) >= threshold ? 1 : 0;
  return out;
}

void refresh_geometry(SegmentInstance& seg, const AnomalyMap& map) {
  if (seg.pixels.empty()) throw Error(Errc::invalid_argument, "segment has no pixels");
  std::sort(seg.pixels.begin(), seg.pixels.end());
  BBox box{std::numeric_limits<int>::max(), std::numeric_limits<int>::max(), -1, -1};
  double sum_r = 0.0, sum_c = 0.0, sum = 0.0, sum_sq = 0.0;
  double lo = std::numeric_limits<double>::infinity();
  double hi = -std::numeric_limits<double>::infinity();
  for (const auto& px : seg.pixels) {
    if (!map.contains(px.row, px.col)) {
      throw Error(Errc::out_of_bounds, "segment pixel (" + std::to_string(px.row) + "," +
                                           std::to_string(px.col) + ") outside the anomaly map");
    }
    box.top = std::min(box.top, px.row);
    box.bottom = std::max(box.bottom, px.row);
    box.left = std::min(box.left, px.col);
    box.right = std::max(box.right, px.col);
    sum_r += px.row;
    sum_c += px.col;
    const double v = map(px.row, px.col);
    sum += v;
    sum_sq += v * v;
    lo = std::min(lo, v);
    hi = std::max(hi, v);
  }
  const auto n = static_cast<double>(seg.pixels.size());
  seg.bbox = box;
  seg.area = seg.pixels.size();
  seg.centroid_row = sum_r / n;
  seg.centroid_col = sum_c / n;
  seg.mean_score = sum / n;
  seg.min_score = lo;
  seg.max_score = hi;
  seg.std_score = std::sqrt(std::max(0.0, sum_sq / n - seg.mean_score * seg.mean_score));
}

std::vector<SegmentInstance> extract_components(const BinaryMask& mask, const AnomalyMap& map,
                                                int frame_index, Connectivity connectivity) {
  if (!mask.same_shape(map)) throw Error(Errc::shape_mismatch, "mask and anomaly map differ in shape");
  const int h = mask.height();
  const int w = mask.width();
  Grid<int> label(h, w, -1);
  std::vector<SegmentInstance> out;
  std::vector<Pixel> stack;
  const bool eight = connectivity == Connectivity::eight;

  for (int r = 0; r < h; ++r) {
    for (int c = 0; c < w; ++c) {
      if (!mask(r, c) || label(r, c) >= 0) continue;
      const int id = static_cast<int>(out.size());
      SegmentInstance seg;
      seg.frame_index = frame_index;
      label(r, c) = id;
      stack.push_back({r, c});
      while (!stack.empty()) {
        const Pixel px = stack.back();
        stack.pop_back();
        seg.pixels.push_back(px);
        for (int dr = -1; dr <= 1; ++dr) {
          for (int dc = -1; dc <= 1; ++dc) {
            if (dr == 0 && dc == 0) continue;
            if (!eight && dr != 0 && dc != 0) continue;
            const int nr = px.row + dr;
            const int nc = px.col + dc;
            if (nr < 0 || nc < 0 || nr >= h || nc >= w) continue;
            if (!mask(nr, nc) || label(nr, nc) >= 0) continue;
            label(nr, nc) = id;
            stack.push_back({nr, nc});
          }
        }
      }
      refresh_geometry(seg, map);
      out.push_back(std::move(seg));
    }
  }

  std::stable_sort(out.begin(), out.end(), [](const SegmentInstance& a, const SegmentInstance& b) {
    if (a.bbox.top != b.bbox.top) return a.bbox.top < b.bbox.top;
    if (a.bbox.left != b.bbox.left) return a.bbox.left < b.bbox.left;
    if (a.area != b.area) return a.area > b.area;
    return a.pixels.front() < b.pixels.front();
  });
  return out;
}

BinaryMask segments_to_mask(const std::vector<SegmentInstance>& segs, int height, int width) {
  BinaryMask out(height, width);
  for (const auto& seg : segs) {
    for (const auto& px : seg.pixels) {
      if (out.contains(px.row, px.col)) out(px.row, px.col) = 1;
    }
  }
  return out;
}

}  // namespace oodret
