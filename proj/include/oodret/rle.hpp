#pragma once

#include <vector>

#include <json.hpp>

#include "oodret/scoring.hpp"
#include "oodret/tracker.hpp"

namespace oodret {

/// Horizontal run of set pixels.
struct Run {
  int row = 0;
  int col = 0;
  int length = 0;
  friend bool operator==(const Run&, const Run&) = default;
};

std::vector<Run> encode_runs(std::vector<Pixel> pixels);
std::vector<Pixel> decode_runs(const std::vector<Run>& runs);
std::vector<Run> encode_mask(const BinaryMask& mask);
BinaryMask decode_mask(const std::vector<Run>& runs, int height, int width);

// Runs serialize as a flat [row, col, length, ...] array.
nlohmann::json runs_to_json(const std::vector<Run>& runs);
std::vector<Run> runs_from_json(const nlohmann::json& doc);

nlohmann::json to_json(const BBox& box);
BBox bbox_from_json(const nlohmann::json& doc);

/// Pixels are stored run-length encoded; statistics as given.
nlohmann::json to_json(const SegmentInstance& seg);
SegmentInstance segment_from_json(const nlohmann::json& doc);

nlohmann::json to_json(const CropRef& crop);
CropRef crop_from_json(const nlohmann::json& doc);

/// Embeddings are included only when `with_embeddings` is set.
nlohmann::json to_json(const SequenceRecord& rec, bool with_embeddings);
SequenceRecord sequence_from_json(const nlohmann::json& doc);

}  // namespace oodret
