#include "oodret/roi.hpp"

#include <algorithm>
#include <cmath>
#include <string>
#include <vector>

namespace oodret {

namespace {

// Counts of ones in a sliding 1-D window via prefix sums; `line` is read with
// stride so one routine serves rows and columns.
template <typename Pred>
void window_pass(const std::uint8_t* in, std::uint8_t* out, int length, std::ptrdiff_t stride,
                 int radius, std::vector<int>& prefix, Pred keep) {
  prefix.assign(static_cast<std::size_t>(length) + 1, 0);
  for (int i = 0; i < length; ++i) prefix[i + 1] = prefix[i] + (in[i * stride] ? 1 : 0);
  for (int i = 0; i < length; ++i) {
    const int lo = std::max(0, i - radius);
    const int hi = std::min(length - 1, i + radius);
    const int ones = prefix[hi + 1] - prefix[lo];
    out[i * stride] = keep(ones, hi - lo + 1) ? 1 : 0;
  }
}

template <typename Pred>
BinaryMask separable(const BinaryMask& mask, int radius, Pred keep) {
  if (radius < 0) throw Error(Errc::invalid_argument, "morphology radius must be >= 0");
  if (radius == 0 || mask.empty()) return mask;
  const int h = mask.height();
  const int w = mask.width();
  BinaryMask tmp(h, w);
  BinaryMask out(h, w);
  std::vector<int> prefix;
  for (int r = 0; r < h; ++r) {
    window_pass(&mask.values()[static_cast<std::size_t>(r) * w], &tmp.values()[static_cast<std::size_t>(r) * w],
                w, 1, radius, prefix, keep);
  }
  for (int c = 0; c < w; ++c) {
    window_pass(&tmp.values()[c], &out.values()[c], h, w, radius, prefix, keep);
  }
  return out;
}

}  // namespace

BinaryMask road_mask_from_scores(const FrameScoreTensor& scores, int road_class_index) {
  if (road_class_index < 0 || road_class_index >= scores.num_classes()) {
    throw Error(Errc::out_of_bounds, "road class index " + std::to_string(road_class_index) +
                                         " outside [0, " + std::to_string(scores.num_classes()) + ")");
  }
  BinaryMask out(scores.height(), scores.width());
  for (int r = 0; r < scores.height(); ++r) {
    for (int c = 0; c < scores.width(); ++c) {
      const auto q = scores.pixel(r, c);
      const auto best = std::max_element(q.begin(), q.end());  // first maximum
      out(r, c) = (best - q.begin()) == road_class_index ? 1 : 0;
    }
  }
  return out;
}

BinaryMask dilate(const BinaryMask& mask, int radius) {
  return separable(mask, radius, [](int ones, int) { return ones > 0; });
}

BinaryMask erode(const BinaryMask& mask, int radius) {
  return separable(mask, radius, [](int ones, int span) { return ones == span; });
}

BinaryMask morphological_close(const BinaryMask& mask, int radius) {
  return erode(dilate(mask, radius), radius);
}

BinaryMask apply_roi(const BinaryMask& ood, const BinaryMask& roi) {
  if (!ood.same_shape(roi)) throw Error(Errc::shape_mismatch, "OoD mask and ROI differ in shape");
  BinaryMask out(ood.height(), ood.width());
  auto a = ood.values();
  auto b = roi.values();
  auto o = out.values();
  for (std::size_t i = 0; i < o.size(); ++i) o[i] = (a[i] && b[i]) ? 1 : 0;
  return out;
}

int default_roi_radius(int frame_width) noexcept {
  return std::max(1, static_cast<int>(std::lround(15.0 * frame_width / 1024.0)));
}

}  // namespace oodret
