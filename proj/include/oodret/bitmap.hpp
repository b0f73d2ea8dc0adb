#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "oodret/scoring.hpp"

namespace oodret {

/// Interleaved 8-bit RGB image.
struct RgbImage {
  int height = 0;
  int width = 0;
  std::vector<std::uint8_t> pixels;  // H x W x 3

  RgbImage() = default;
  RgbImage(int h, int w) : height(h), width(w), pixels(static_cast<std::size_t>(h) * w * 3, 0) {}

  std::uint8_t* at(int row, int col) { return pixels.data() + (static_cast<std::size_t>(row) * width + col) * 3; }
  const std::uint8_t* at(int row, int col) const {
    return pixels.data() + (static_cast<std::size_t>(row) * width + col) * 3;
  }
};

/// Copy of the inclusive box; the box must lie inside the image.
RgbImage crop_image(const RgbImage& image, const BBox& box);

/// Uncompressed 24-bit BMP bytes (bottom-up rows, 4-byte row padding).
std::string encode_bmp(const RgbImage& image);
RgbImage decode_bmp(const std::string& bytes);

}  // namespace oodret
