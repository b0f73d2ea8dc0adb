#pragma once

#include "oodret/grid.hpp"

namespace oodret {

/// Road iff the per-pixel argmax over the K classes is `road_class_index`;
/// ties go to the lowest class index.
BinaryMask road_mask_from_scores(const FrameScoreTensor& scores, int road_class_index);

/// Square dilation of side 2r+1 followed by the matching erosion. Dilation
/// treats out-of-bounds pixels as background; erosion only inspects in-bounds
/// pixels, which keeps the pair adjoint on the finite grid so the result is
/// extensive, increasing and idempotent.
BinaryMask morphological_close(const BinaryMask& mask, int radius);

BinaryMask dilate(const BinaryMask& mask, int radius);
BinaryMask erode(const BinaryMask& mask, int radius);

/// Pixelwise AND.
BinaryMask apply_roi(const BinaryMask& ood, const BinaryMask& roi);

/// Default closing radius: 15 px at a 1024-wide frame, scaled with width.
int default_roi_radius(int frame_width) noexcept;

}  // namespace oodret
