#include "oodret/artifacts.hpp"

#include <cstdio>
#include <fstream>

#include "oodret/error.hpp"
#include "oodret/rle.hpp"
#include "oodret/tensor_io.hpp"

namespace oodret {

using nlohmann::json;

void check_config(const json& expected, const json& found, const std::string& what, bool force) {
  if (force || expected == found) return;
  throw Error(Errc::config_mismatch, what + " was produced with a different config (use --force to compare anyway)");
}

void write_segments(const fs::path& path, const VideoSegments& segments, const PipelineConfig& config) {
  json frames = json::array();
  for (const auto& f : segments.frames) {
    json segs = json::array();
    for (const auto& s : f.segments) segs.push_back(to_json(s));
    frames.push_back({{"frame", f.frame_index},
                      {"raw_count", f.raw_count},
                      {"meta_removed", f.meta_removed},
                      {"segments", std::move(segs)}});
  }
  write_json_file(path, {{"config", config.to_json()},
                         {"video", segments.video},
                         {"height", segments.height},
                         {"width", segments.width},
                         {"frames", std::move(frames)}});
}

VideoSegments read_segments(const fs::path& path, json* config) {
  const json doc = read_json_file(path);
  VideoSegments out;
  try {
    out.video = doc.at("video").get<std::string>();
    out.height = doc.at("height").get<int>();
    out.width = doc.at("width").get<int>();
    for (const auto& f : doc.at("frames")) {
      FrameSegments fs;
      fs.frame_index = f.at("frame").get<int>();
      fs.raw_count = f.value("raw_count", std::size_t{0});
      fs.meta_removed = f.value("meta_removed", std::size_t{0});
      for (const auto& s : f.at("segments")) fs.segments.push_back(segment_from_json(s));
      out.frames.push_back(std::move(fs));
    }
    if (config) *config = doc.at("config");
  } catch (const json::exception& e) {
    throw Error(Errc::parse_error, path.string() + ": " + e.what());
  }
  return out;
}

void write_sequences(const fs::path& path, const std::string& video, const std::vector<SequenceRecord>& sequences,
                     const PipelineConfig& config) {
  json seqs = json::array();
  for (const auto& s : sequences) seqs.push_back(to_json(s, true));
  write_json_file(path, {{"config", config.to_json()}, {"video", video}, {"sequences", std::move(seqs)}});
}

std::vector<SequenceRecord> read_sequences(const fs::path& path, json* config) {
  const json doc = read_json_file(path);
  std::vector<SequenceRecord> out;
  try {
    for (const auto& s : doc.at("sequences")) out.push_back(sequence_from_json(s));
    if (config) *config = doc.at("config");
  } catch (const json::exception& e) {
    throw Error(Errc::parse_error, path.string() + ": " + e.what());
  }
  return out;
}

RgbImage load_image(const fs::path& path) {
  const Tensor t = read_tensor(path);
  if (t.dtype != DType::u8 || t.dims.size() != 3 || t.dims[2] != 3) {
    throw Error(Errc::shape_mismatch, path.string() + ": expected a u8 H x W x 3 image");
  }
  RgbImage img(static_cast<int>(t.dims[0]), static_cast<int>(t.dims[1]));
  img.pixels = t.u8;
  return img;
}

void write_crop_images(const VideoEntry& video, std::vector<SequenceRecord>& sequences, const fs::path& sequence_root) {
  std::map<int, const FrameEntry*> frames;
  for (const auto& f : video.frames) frames[f.index] = &f;
  std::map<int, RgbImage> cache;
  for (auto& seq : sequences) {
    const fs::path dir = sequence_root / seq.sequence_id;
    fs::create_directories(dir);
    for (std::size_t i = 0; i < seq.crops.size(); ++i) {
      auto& crop = seq.crops[i];
      const auto it = frames.find(crop.frame_index);
      if (it == frames.end() || it->second->image.empty()) continue;
      auto img = cache.find(crop.frame_index);
      if (img == cache.end()) img = cache.emplace(crop.frame_index, load_image(it->second->image)).first;
      char name[32];
      std::snprintf(name, sizeof name, "crop_%03zu.bmp", i);
      const std::string bytes = encode_bmp(crop_image(img->second, crop.bbox));
      std::ofstream out(dir / name, std::ios::binary | std::ios::trunc);
      out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
      if (!out) throw Error(Errc::io_error, "cannot write " + (dir / name).string());
      crop.image = name;
    }
  }
}

}  // namespace oodret
