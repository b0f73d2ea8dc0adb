#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include <json.hpp>

#include "oodret/bitmap.hpp"
#include "oodret/manifest.hpp"
#include "oodret/pipeline.hpp"

namespace oodret {

/// Layout of a work directory:
///   segments/<video>.json, sequences/<video>.json,
///   sequences/<sequence id>/crop_NNN.bmp, crops.json, index.oodi,
///   eval.json, curves.csv
struct WorkDir {
  fs::path root;

  fs::path segments(const std::string& video) const { return root / "segments" / (video + ".json"); }
  fs::path sequences(const std::string& video) const { return root / "sequences" / (video + ".json"); }
  fs::path sequence_root() const { return root / "sequences"; }
  fs::path crops_sidecar() const { return root / "crops.json"; }
  fs::path index() const { return root / "index.oodi"; }
  fs::path eval() const { return root / "eval.json"; }
  fs::path curves() const { return root / "curves.csv"; }
};

/// Throws config_mismatch when `found` differs from `expected`, unless forced.
void check_config(const nlohmann::json& expected, const nlohmann::json& found, const std::string& what, bool force);

void write_segments(const fs::path& path, const VideoSegments& segments, const PipelineConfig& config);
/// Returns the segments; the embedded config goes to `config` when given.
VideoSegments read_segments(const fs::path& path, nlohmann::json* config = nullptr);

void write_sequences(const fs::path& path, const std::string& video, const std::vector<SequenceRecord>& sequences,
                     const PipelineConfig& config);
std::vector<SequenceRecord> read_sequences(const fs::path& path, nlohmann::json* config = nullptr);

/// u8 H x W x 3 image tensor.
RgbImage load_image(const fs::path& path);

/// Writes crop_NNN.bmp for every crop whose frame has an image and records
/// the file name in the crop.
void write_crop_images(const VideoEntry& video, std::vector<SequenceRecord>& sequences, const fs::path& sequence_root);

}  // namespace oodret
