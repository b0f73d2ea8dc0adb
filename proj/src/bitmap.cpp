#include "oodret/bitmap.hpp"

#include <cstring>
#include <sstream>

#include "le_io.hpp"

namespace oodret {

RgbImage crop_image(const RgbImage& image, const BBox& box) {
  if (box.empty() || box.top < 0 || box.left < 0 || box.bottom >= image.height || box.right >= image.width) {
    throw Error(Errc::out_of_bounds, "crop box outside the image");
  }
  RgbImage out(box.height(), box.width());
  for (int r = 0; r < out.height; ++r) {
    std::memcpy(out.at(r, 0), image.at(box.top + r, box.left), static_cast<std::size_t>(out.width) * 3);
  }
  return out;
}

std::string encode_bmp(const RgbImage& image) {
  const std::uint32_t stride = (static_cast<std::uint32_t>(image.width) * 3 + 3) & ~3u;
  const std::uint32_t data_size = stride * static_cast<std::uint32_t>(image.height);
  std::ostringstream out(std::ios::binary);
  out.write("BM", 2);
  le::put<std::uint32_t>(out, 54 + data_size);
  le::put<std::uint32_t>(out, 0);
  le::put<std::uint32_t>(out, 54);
  le::put<std::uint32_t>(out, 40);
  le::put<std::int32_t>(out, image.width);
  le::put<std::int32_t>(out, image.height);
  le::put<std::uint16_t>(out, 1);
  le::put<std::uint16_t>(out, 24);
  le::put<std::uint32_t>(out, 0);
  le::put<std::uint32_t>(out, data_size);
  le::put<std::int32_t>(out, 2835);
  le::put<std::int32_t>(out, 2835);
  le::put<std::uint32_t>(out, 0);
  le::put<std::uint32_t>(out, 0);
  std::string row(stride, '\0');
  for (int r = image.height - 1; r >= 0; --r) {
    for (int c = 0; c < image.width; ++c) {
      const std::uint8_t* px = image.at(r, c);
      row[static_cast<std::size_t>(c) * 3 + 0] = static_cast<char>(px[2]);
      row[static_cast<std::size_t>(c) * 3 + 1] = static_cast<char>(px[1]);
      row[static_cast<std::size_t>(c) * 3 + 2] = static_cast<char>(px[0]);
    }
    out.write(row.data(), stride);
  }
  return out.str();
}

RgbImage decode_bmp(const std::string& bytes) {
  std::istringstream in(bytes, std::ios::binary);
  char magic[2];
  in.read(magic, 2);
  if (in.gcount() != 2 || magic[0] != 'B' || magic[1] != 'M') throw Error(Errc::bad_magic, "not a BMP");
  le::get<std::uint32_t>(in, "bmp size");
  le::get<std::uint32_t>(in, "bmp reserved");
  const auto offset = le::get<std::uint32_t>(in, "bmp offset");
  le::get<std::uint32_t>(in, "bmp header size");
  const auto width = le::get<std::int32_t>(in, "bmp width");
  const auto height = le::get<std::int32_t>(in, "bmp height");
  le::get<std::uint16_t>(in, "bmp planes");
  if (le::get<std::uint16_t>(in, "bmp depth") != 24 || width < 0 || height < 0) {
    throw Error(Errc::bad_dtype, "only bottom-up 24-bit BMPs are supported");
  }
  RgbImage img(height, width);
  const std::uint32_t stride = (static_cast<std::uint32_t>(width) * 3 + 3) & ~3u;
  in.seekg(offset);
  std::string row(stride, '\0');
  for (int r = height - 1; r >= 0; --r) {
    in.read(row.data(), stride);
    if (in.gcount() != static_cast<std::streamsize>(stride)) throw Error(Errc::truncated, "BMP pixel data truncated");
    for (int c = 0; c < width; ++c) {
      std::uint8_t* px = img.at(r, c);
      px[0] = static_cast<std::uint8_t>(row[static_cast<std::size_t>(c) * 3 + 2]);
      px[1] = static_cast<std::uint8_t>(row[static_cast<std::size_t>(c) * 3 + 1]);
      px[2] = static_cast<std::uint8_t>(row[static_cast<std::size_t>(c) * 3 + 0]);
    }
  }
  return img;
}

}  // namespace oodret
