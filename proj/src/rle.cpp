#include "oodret/rle.hpp"

#include <algorithm>

namespace oodret {

using nlohmann::json;

std::vector<Run> encode_runs(std::vector<Pixel> pixels) {
  std::sort(pixels.begin(), pixels.end());
  pixels.erase(std::unique(pixels.begin(), pixels.end()), pixels.end());
  std::vector<Run> runs;
  for (const auto& px : pixels) {
    if (!runs.empty() && runs.back().row == px.row && runs.back().col + runs.back().length == px.col) {
      ++runs.back().length;
    } else {
      runs.push_back({px.row, px.col, 1});
    }
  }
  return runs;
}

std::vector<Pixel> decode_runs(const std::vector<Run>& runs) {
  std::vector<Pixel> pixels;
  for (const auto& run : runs) {
    for (int i = 0; i < run.length; ++i) pixels.push_back({run.row, run.col + i});
  }
  std::sort(pixels.begin(), pixels.end());
  return pixels;
}

std::vector<Run> encode_mask(const BinaryMask& mask) {
  std::vector<Run> runs;
  for (int r = 0; r < mask.height(); ++r) {
    int c = 0;
    while (c < mask.width()) {
      if (!mask(r, c)) {
        ++c;
        continue;
      }
      const int start = c;
      while (c < mask.width() && mask(r, c)) ++c;
      runs.push_back({r, start, c - start});
    }
  }
  return runs;
}

BinaryMask decode_mask(const std::vector<Run>& runs, int height, int width) {
  BinaryMask mask(height, width);
  for (const auto& run : runs) {
    if (run.length < 0 || !mask.contains(run.row, run.col) ||
        (run.length > 0 && !mask.contains(run.row, run.col + run.length - 1))) {
      throw Error(Errc::out_of_bounds, "run outside the mask");
    }
    for (int i = 0; i < run.length; ++i) mask(run.row, run.col + i) = 1;
  }
  return mask;
}

json runs_to_json(const std::vector<Run>& runs) {
  json out = json::array();
  for (const auto& run : runs) {
    out.push_back(run.row);
    out.push_back(run.col);
    out.push_back(run.length);
  }
  return out;
}

std::vector<Run> runs_from_json(const json& doc) {
  const auto flat = doc.get<std::vector<int>>();
  if (flat.size() % 3 != 0) throw Error(Errc::parse_error, "run list length is not a multiple of 3");
  std::vector<Run> runs;
  for (std::size_t i = 0; i < flat.size(); i += 3) runs.push_back({flat[i], flat[i + 1], flat[i + 2]});
  return runs;
}

json to_json(const BBox& box) { return json::array({box.top, box.left, box.bottom, box.right}); }

BBox bbox_from_json(const json& doc) {
  const auto v = doc.get<std::vector<int>>();
  if (v.size() != 4) throw Error(Errc::parse_error, "bbox must be [top, left, bottom, right]");
  return {v[0], v[1], v[2], v[3]};
}

json to_json(const SegmentInstance& seg) {
  return {{"frame", seg.frame_index},
          {"bbox", to_json(seg.bbox)},
          {"centroid", {seg.centroid_row, seg.centroid_col}},
          {"area", seg.area},
          {"mean_score", seg.mean_score},
          {"max_score", seg.max_score},
          {"min_score", seg.min_score},
          {"std_score", seg.std_score},
          {"runs", runs_to_json(encode_runs(seg.pixels))}};
}

SegmentInstance segment_from_json(const json& doc) {
  try {
    SegmentInstance seg;
    seg.frame_index = doc.at("frame").get<int>();
    seg.bbox = bbox_from_json(doc.at("bbox"));
    seg.centroid_row = doc.at("centroid").at(0).get<double>();
    seg.centroid_col = doc.at("centroid").at(1).get<double>();
    seg.area = doc.at("area").get<std::size_t>();
    seg.mean_score = doc.at("mean_score").get<double>();
    seg.max_score = doc.at("max_score").get<double>();
    seg.min_score = doc.at("min_score").get<double>();
    seg.std_score = doc.at("std_score").get<double>();
    seg.pixels = decode_runs(runs_from_json(doc.at("runs")));
    if (seg.pixels.size() != seg.area) throw Error(Errc::parse_error, "segment area disagrees with its runs");
    return seg;
  } catch (const json::exception& e) {
    throw Error(Errc::parse_error, std::string("segment JSON: ") + e.what());
  }
}

json to_json(const CropRef& crop) {
  json out = {{"frame", crop.frame_index},
              {"bbox", to_json(crop.bbox)},
              {"segment_bbox", to_json(crop.segment_bbox)},
              {"centroid", {crop.centroid_row, crop.centroid_col}}};
  if (!crop.image.empty()) out["image"] = crop.image;
  return out;
}

CropRef crop_from_json(const json& doc) {
  CropRef crop;
  crop.frame_index = doc.at("frame").get<int>();
  crop.bbox = bbox_from_json(doc.at("bbox"));
  crop.segment_bbox = bbox_from_json(doc.at("segment_bbox"));
  crop.centroid_row = doc.at("centroid").at(0).get<double>();
  crop.centroid_col = doc.at("centroid").at(1).get<double>();
  crop.image = doc.value("image", std::string{});
  return crop;
}

json to_json(const SequenceRecord& rec, bool with_embeddings) {
  json crops = json::array();
  for (const auto& c : rec.crops) crops.push_back(to_json(c));
  json out = {{"sequence_id", rec.sequence_id},
              {"source_video", rec.source_video},
              {"track_id", rec.track_id},
              {"length", rec.length()},
              {"crops", std::move(crops)}};
  if (with_embeddings && !rec.embeddings.empty()) out["embeddings"] = rec.embeddings;
  return out;
}

SequenceRecord sequence_from_json(const json& doc) {
  try {
    SequenceRecord rec;
    rec.sequence_id = doc.at("sequence_id").get<std::string>();
    rec.source_video = doc.at("source_video").get<std::string>();
    rec.track_id = doc.value("track_id", 0);
    for (const auto& c : doc.at("crops")) rec.crops.push_back(crop_from_json(c));
    if (doc.contains("embeddings")) rec.embeddings = doc.at("embeddings").get<std::vector<std::vector<float>>>();
    return rec;
  } catch (const json::exception& e) {
    throw Error(Errc::parse_error, std::string("sequence JSON: ") + e.what());
  }
}

}  // namespace oodret
