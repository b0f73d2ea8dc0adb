#pragma once

#include <filesystem>
#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "oodret/evaluation.hpp"
#include "oodret/manifest.hpp"
#include "oodret/meta_classifier.hpp"
#include "oodret/retrieval_index.hpp"
#include "oodret/scoring.hpp"
#include "oodret/tracker.hpp"

namespace oodret {

enum class RoiSource { predicted, ground_truth, none };

struct PipelineConfig {
  double anomaly_threshold = -1.5;
  Connectivity connectivity = Connectivity::eight;

  std::string meta_model;  // empty: no meta-classification
  double meta_cutoff = 0.5;

  RoiSource roi_source = RoiSource::predicted;
  int roi_radius = -1;  // negative: scaled from the frame width

  TrackerConfig tracker;
  double tau = 0.25;

  double match_radius = -1.0;  // negative: 5% of the frame diagonal
  std::vector<double> f1_thresholds = default_f1_thresholds();
  RoiSource f1_roi = RoiSource::predicted;

  int roi_radius_for(int width) const;
  double match_radius_for(int height, int width) const;
  void validate() const;

  nlohmann::json to_json() const;
  /// Missing keys keep their defaults.
  static PipelineConfig from_json(const nlohmann::json& doc);
};

/// Reads a config file; a relative meta_model path resolves against the
/// file's directory.
PipelineConfig load_config(const std::filesystem::path& path);

/// The config given explicitly, else the manifest's recommended one, else
/// defaults.
PipelineConfig resolve_config(const std::optional<std::filesystem::path>& explicit_path,
                              const CorpusManifest* manifest);

// ---- per-frame inputs ------------------------------------------------------

/// Class scores of a frame: the stored tensor, or the fused mask pairs.
FrameScoreTensor load_frame_scores(const FrameEntry& frame);
BinaryMask load_plane(const std::filesystem::path& path);

/// Road argmax mask closed with a square of the given radius.
BinaryMask predicted_roi(const FrameScoreTensor& scores, int road_index, int radius);

// ---- segmentation ----------------------------------------------------------

struct FrameSegments {
  int frame_index = 0;
  std::size_t raw_count = 0;     // components before meta-classification
  std::size_t meta_removed = 0;  // removed by the meta classifier
  std::vector<SegmentInstance> segments;
};

struct VideoSegments {
  std::string video;
  int height = 0;
  int width = 0;
  std::vector<FrameSegments> frames;
};

/// threshold -> components -> meta filter -> ROI -> components.
FrameSegments segment_frame(const FrameScoreTensor& scores, const AnomalyMap& map, const BinaryMask& roi,
                            const PipelineConfig& config, const MetaModel* meta, int frame_index);

/// ROI mask for a frame according to `source`.
BinaryMask frame_roi(RoiSource source, const FrameScoreTensor& scores, const FrameEntry& frame,
                     const CorpusManifest& manifest, const PipelineConfig& config);

VideoSegments segment_video(const CorpusManifest& manifest, const VideoEntry& video, const PipelineConfig& config,
                            const MetaModel* meta);

// ---- meta-classifier training ----------------------------------------------

struct MetaExamples {
  std::vector<SegmentFeatures> features;
  std::vector<SegmentLabel> labels;
  std::size_t skipped_off_road = 0;
};

/// Raw components of every frame labelled against the OoD ground truth.
/// Components lying mostly on ignore pixels are left out.
MetaExamples collect_meta_examples(const CorpusManifest& manifest, const PipelineConfig& config);
MetaModel train_meta_on_corpus(const CorpusManifest& manifest, const PipelineConfig& config);

// ---- tracking and embedding ------------------------------------------------

std::vector<SequenceRecord> track_video(const VideoSegments& segments, const PipelineConfig& config);

/// Source of crop embeddings.
class CropEncoder {
 public:
  virtual ~CropEncoder() = default;
  virtual std::vector<float> encode(const std::string& video, int frame_index, const BBox& box) = 0;
};

/// Uses the synthetic content maps referenced by the manifest.
std::unique_ptr<CropEncoder> make_content_encoder(const CorpusManifest& manifest);

/// Precomputed rows looked up by (video, frame, bbox). The sidecar lists one
/// {"video", "frame", "bbox"} object per tensor row under "crops".
std::unique_ptr<CropEncoder> make_table_encoder(const std::filesystem::path& tensor,
                                                const std::filesystem::path& sidecar);
/// Table encoder over the per-video embedding entries of the manifest.
std::unique_ptr<CropEncoder> make_manifest_table_encoder(const CorpusManifest& manifest);

void embed_sequences(std::vector<SequenceRecord>& sequences, CropEncoder& encoder);

/// {"crops": [{"video", "frame", "bbox"}...]} for every crop, in order.
nlohmann::json crop_sidecar(const std::vector<SequenceRecord>& sequences);

// ---- evaluation ------------------------------------------------------------

struct GroundTruthObject {
  int object_id = 0;
  int class_index = 0;
  std::string class_name;
  std::map<int, CenterPoint> centers;  // frame -> centroid
};

struct GroundTruth {
  std::vector<std::string> classes;
  std::map<std::string, std::vector<GroundTruthObject>> videos;

  static GroundTruth load(const std::filesystem::path& path);
  /// Observation count of class `c` over the corpus.
  std::size_t observations(int class_index) const;
};

/// Class whose pixels make up more than half of `box`, with the dominant
/// object of that class; class -1 when none does.
struct CropLabel {
  int class_index = -1;
  int object_id = -1;
};
CropLabel label_box(const Grid<std::uint8_t>& instances, const BBox& box,
                    const std::vector<GroundTruthObject>& objects);

struct RetrievalVariants {
  RetrievalEval tracked;     // crop score = its sequence's score
  RetrievalEval per_crop;    // crop score = its own similarity
  RetrievalEval full_frame;  // frames embedded whole; empty without an encoder
  bool has_full_frame = false;
};

struct EvalInputs {
  const CorpusManifest* manifest = nullptr;
  const PipelineConfig* config = nullptr;
  const std::vector<VideoSegments>* segments = nullptr;
  const RetrievalIndex* index = nullptr;
  const Vocabulary* vocabulary = nullptr;
  /// Optional whole-frame encoder for the image-level baseline.
  std::function<std::vector<float>(const std::string& video, int frame)> frame_encoder;
};

EvalReport evaluate(const EvalInputs& inputs, RetrievalVariants* variants = nullptr);

// ---- whole runs ------------------------------------------------------------

struct CorpusRun {
  std::vector<VideoSegments> segments;
  std::vector<SequenceRecord> sequences;  // with embeddings
  RetrievalIndex index;
};

/// segment -> track -> embed -> ingest over every video, in memory.
CorpusRun run_corpus(const CorpusManifest& manifest, const PipelineConfig& config, const MetaModel* meta,
                     CropEncoder& encoder);

/// Candidate threshold with the best component F1 (first on ties).
double select_threshold(const CorpusManifest& manifest, const PipelineConfig& config, const MetaModel* meta,
                        const std::vector<double>& candidates);

}  // namespace oodret
