#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include <json.hpp>

namespace oodret {

namespace fs = std::filesystem;

/// Files of one frame. Paths are absolute once loaded. Either `scores`
/// (H x W x K) or the `masks` + `probs` pair must be present.
struct FrameEntry {
  int index = 0;
  fs::path scores;
  fs::path masks;
  fs::path probs;
  fs::path road_gt;    // u8 H x W, optional
  fs::path ood_gt;     // u8 H x W: 0, 1, or 255 = ignore; optional
  fs::path instances;  // u8 H x W: 0 = none, object id + 1; optional
  fs::path content;    // u8 H x W content-slot map (synthetic encoder); optional
  fs::path image;      // u8 H x W x 3; optional
};

/// Precomputed crop embeddings: an N x d tensor plus a JSON sidecar listing
/// the (frame, bbox) of each row.
struct EmbeddingSource {
  fs::path tensor;
  fs::path crops;
  bool empty() const { return tensor.empty(); }
};

struct VideoEntry {
  std::string id;
  int height = 0;
  int width = 0;
  std::vector<FrameEntry> frames;  // contiguous indices
  fs::path content_table;          // f32 F x C x d; optional
  EmbeddingSource embeddings;
};

struct CorpusManifest {
  std::string dataset;
  double frame_rate = 0.0;
  std::vector<std::string> class_names;  // the K known classes
  int road_index = 0;
  std::vector<std::string> ood_classes;  // query terms evaluated by `eval`
  fs::path vocabulary;
  fs::path gt_tracks;
  fs::path config;  // recommended pipeline config; optional
  std::vector<VideoEntry> videos;
  fs::path root;  // directory holding the manifest

  int num_classes() const noexcept { return static_cast<int>(class_names.size()); }
  const VideoEntry& video(const std::string& id) const;

  /// Paths are written relative to `root`.
  nlohmann::json to_json() const;
};

/// Parses and fully validates a manifest: every referenced file exists and
/// has a well-formed header of the right shape, frame indices are contiguous
/// per video, and score tensors agree with the declared class count.
CorpusManifest load_manifest(const fs::path& path);

/// Same checks on an in-memory document whose relative paths resolve
/// against `root`.
CorpusManifest manifest_from_json(const nlohmann::json& doc, const fs::path& root);

void save_manifest(const CorpusManifest& manifest, const fs::path& path);

nlohmann::json read_json_file(const fs::path& path);
void write_json_file(const fs::path& path, const nlohmann::json& doc, int indent = 1);

}  // namespace oodret
